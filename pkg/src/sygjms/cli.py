"""Command line front end: ``sygjms <subcommand> ...``.

Every run writes its artifacts (JSON reports, CSV tables) into one output
directory together with ``manifest.json``, which lists each file with its
SHA-256.  The directory is ``--out``, else $SYGJMS_OUT, else ./sygjms_out.

Exit codes: 0 all selected checks pass, 1 a check (or computation) failed,
2 usage error (bad arguments, unreadable geometry, malformed config).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import constants, model, normalform, scattering, verify, yamabe

log = logging.getLogger("sygjms")

OUT_ENV = "SYGJMS_OUT"
ALL_CHECKS = ("B", "C", "D", "E", "F", "COV", "LEMMA")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    geom: str | None = None
    out: str | None = None
    # tolerance tiers: exact <= bvp <= scattering <= fitting
    tol_exact: float = 0.0
    tol_bvp: float = 1e-9
    tol_scattering: float = 1e-8
    tol_fitting: float = 1e-4
    s_grid: str | None = None
    modes: list = field(default_factory=list)
    seed: int = 0
    checks: list = field(default_factory=lambda: ["B", "C"])
    variant: str = "stated"
    budget_scale: float = 1.0
    omega: float = 0.1
    jobs: int = 1

    def validate(self):
        tiers = [self.tol_exact, self.tol_bvp, self.tol_scattering, self.tol_fitting]
        if any(t < 0 for t in tiers) or tiers != sorted(tiers):
            raise UsageError("tolerance tiers must satisfy exact <= bvp <= scattering <= fitting")
        bad = [c for c in self.checks if c not in ALL_CHECKS]
        if bad:
            raise UsageError(f"unknown checks {bad}; choose from {','.join(ALL_CHECKS)}")
        if self.variant not in ("stated", "corrected", "both"):
            raise UsageError("variant must be stated, corrected or both")
        if self.budget_scale <= 0:
            raise UsageError("budget scale must be positive")
        if self.jobs < 1:
            raise UsageError("jobs must be >= 1")
        return self

    @classmethod
    def from_json(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {path}: {e}") from e
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)


# persistence

def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, model.Mode):
        return x.label()
    if hasattr(x, "as_dict"):
        return x.as_dict()
    if hasattr(x, "__dataclass_fields__"):
        return asdict(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)


def _clean(x):
    """Replace non-finite floats by strings so the output is strict JSON."""
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


class ArtifactWriter:
    """Single writer for one output directory; tracks hashes for the manifest."""

    def __init__(self, out):
        self.dir = Path(out)
        self.files = {}

    def _put(self, name, text):
        self.dir.mkdir(parents=True, exist_ok=True)
        data = text.encode()
        (self.dir / name).write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()
        return self.dir / name

    def json(self, name, obj):
        obj = _clean(json.loads(json.dumps(obj, default=_jsonable)))
        return self._put(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
        return self._put(name, buf.getvalue())

    def manifest(self, command, config):
        entries = [{"file": k, "sha256": v} for k, v in sorted(self.files.items())]
        text = json.dumps({"command": command, "config": _clean(config), "artifacts": entries},
                          indent=2, sort_keys=True, default=_jsonable) + "\n"
        (self.dir / "manifest.json").write_text(text)


def out_dir(arg):
    return arg or os.environ.get(OUT_ENV) or "sygjms_out"


# argument helpers

def load_geometry(path):
    if path is None:
        raise UsageError("--geom is required")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"geometry file not found: {path}")
    try:
        return model.make_geometry(str(p))
    except (json.JSONDecodeError, model.GeometryError, KeyError, TypeError, ValueError) as e:
        raise UsageError(f"malformed geometry {path}: {e}") from e


def parse_modes(text, g):
    """';'-separated modes: slab '1,0' or '1,0:odd', ball '2' (degree l)."""
    if not text:
        return [model.Mode()]
    modes = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        body, _, parity = item.partition(":")
        try:
            nums = tuple(int(x) for x in body.split(","))
        except ValueError as e:
            raise UsageError(f"bad mode {item!r}") from e
        if g.kind == "TorusSlab":
            if len(nums) != g.n:
                raise UsageError(f"slab mode {item!r} needs {g.n} integers")
            modes.append(model.Mode(k=nums, parity=parity or "even"))
        else:
            if len(nums) != 1 or nums[0] < 0:
                raise UsageError(f"ball mode {item!r} must be a degree l >= 0")
            modes.append(model.Mode(l=nums[0]))
    return modes


def parse_grid(text):
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except (AttributeError, ValueError) as e:
        raise UsageError("--s-grid must be a:b:step") from e
    if step <= 0 or b < a:
        raise UsageError("--s-grid needs a <= b and step > 0")
    m = int(math.floor((b - a) / step + 1e-9))
    return [round(a + i * step, 12) for i in range(m + 1)]


def parse_checks(text):
    return [c.strip().upper() for c in text.split(",") if c.strip()]


# subcommands

def _solve(g, tol):
    return yamabe.sy_global_solve(g, tol=max(tol, 1e-12))


def cmd_constants(args, w):
    if args.n < 1 or args.qmax < 1:
        raise UsageError("--n and --qmax must be positive")
    spots = [Fraction(x) for x in args.spots.split(",")] if args.spots else []
    w.json("constants.json", constants.coeff_table(args.n, args.qmax, spots))
    return 0


def cmd_yamabe(args, w):
    g = load_geometry(args.geom)
    sol = _solve(g, args.tol)
    led = yamabe.volume_expansion(sol)
    w.json("yamabe.json", {"solution": sol.summary(), "volume": led.as_dict(),
                           "defect_norm": yamabe.defect_norm(sol)})
    r = np.linspace(0.0, g.r_max, 201)[1:]
    w.csv("yamabe_grid.csv", ["r", "ut", "ut_r", "ut_rr"],
          zip(r, sol.ut(r), sol.ut(r, 1), sol.ut(r, 2)))
    return 0


def cmd_gauge(args, w):
    g = load_geometry(args.geom)
    gauge = normalform.geodesic_gauge(_solve(g, args.tol))
    rep = normalform.normal_form_check(gauge)
    w.json("gauge.json", {"gauge": gauge.summary(), "check": rep})
    return 0


def _sweep(fn, items, jobs):
    if jobs == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(jobs) as ex:
        return list(ex.map(fn, items))


def cmd_scatter(args, w):
    g = load_geometry(args.geom)
    sol = _solve(g, args.tol)
    modes = parse_modes(args.modes, g)
    grid = parse_grid(args.s_grid)
    pts = [(m, s) for m in modes for s in grid]

    def one(p):
        m, s = p
        try:
            d = scattering.scatter_solve(sol, s, m)
            return [m.label(), s, d.S_value, d.match_conditioning, ""]
        except scattering.ScatteringError as e:
            return [m.label(), s, float("nan"), float("nan"), str(e)]

    rows = _sweep(one, pts, args.jobs)
    w.csv(args.csv_name or "scatter.csv", ["mode", "s", "S", "conditioning", "error"], rows)
    return 1 if any(r[4] for r in rows) else 0


def cmd_residues(args, w):
    g = load_geometry(args.geom)
    sol = _solve(g, args.tol)
    modes = parse_modes(args.modes, g)
    if not 1 <= args.q <= g.n:
        raise UsageError(f"--q must lie in 1..{g.n}")
    rows, out = [], []
    for m in modes:
        r = scattering.residue_extract(sol, args.q, m)
        formula = None
        if args.q <= 3 and r.value is not None:
            try:
                formula = verify.p_formula(g, args.q, m)
            except verify.VerifyError:
                pass
        out.append({"mode": m.label(), "P_q": r.value, "formula": formula, "fit_residual": r.fit_residual,
                    "halving_change": r.halving_change, "delta": r.delta, **r.extra})
        rows.append([m.label(), args.q, r.value if r.value is not None else "", r.extra["residue"],
                     formula if formula is not None else "", r.fit_residual])
    w.json("residues.json", out)
    w.csv("residues.csv", ["mode", "q", "P_q", "residue", "formula", "fit_residual"], rows)
    return 0


def cmd_qcurv(args, w):
    g = load_geometry(args.geom)
    sol = _solve(g, args.tol)
    q = scattering.q_curvature(sol)
    d = scattering.s_derivative(sol)
    forms = {}
    for v in ("stated", "corrected"):
        try:
            forms[v] = verify.q_formula(g, v)
        except verify.VerifyError:
            pass
    w.json("qcurv.json", {"Q": q.value, "fit_residual": q.fit_residual, "halving_change": q.halving_change,
                          "S_n": q.extra["S_n"], "c_n": q.extra["c_n"], "Q_formula": forms,
                          "S_deriv": d.value, "S_deriv_change": d.halving_change})
    return 0


def cmd_frac(args, w):
    g = load_geometry(args.geom)
    sol = _solve(g, args.tol)
    modes = parse_modes(args.modes, g)
    rows = []
    for m in modes:
        d = scattering.fractional_op(sol, args.gamma, m)
        rows.append([m.label(), args.gamma, d.S_value, d.match_conditioning])
    w.csv("frac.csv", ["mode", "gamma", "P_2gamma", "conditioning"], rows)
    return 0


def run_checks(g, sol, cfg: RunConfig):
    """Selected checks as a list of report dicts (shared by verify and run)."""
    variants = ["stated", "corrected"] if cfg.variant == "both" else [cfg.variant]
    n = g.n
    cache = {}

    def get(key, fn):
        if key not in cache:
            cache[key] = fn()
        return cache[key]

    led = lambda: get("led", lambda: yamabe.volume_expansion(sol))
    qv = lambda: get("q", lambda: scattering.q_curvature(sol))
    sd = lambda: get("sd", lambda: scattering.s_derivative(sol))
    reports = []

    def add(name, fn):
        try:
            out = fn()
        except (verify.VerifyError, scattering.ScatteringError, yamabe.YamabeError,
                model.GeometryError) as e:
            reports.append({"name": name, "verdict": "fail", "error": str(e)})
            return
        for r in out if isinstance(out, list) else [out]:
            d = r.as_dict()
            d["tolerances"] = {"budget_scale": cfg.budget_scale, "budget": r.budget}
            reports.append(d)

    def skip(name, why):
        reports.append({"name": name, "verdict": "skip", "notes": [why]})

    for c in cfg.checks:
        for v in variants:
            if c == "B":
                add("B", lambda: verify.check_thmB(sol, led(), qv(), v, budget_scale=cfg.budget_scale))
            elif c == "C":
                add("C", lambda: verify.check_thmC(sol, led(), sd(), v, budget_scale=cfg.budget_scale))
            elif c == "E":
                if n != 3:
                    skip("E", "Gauss-Bonnet check needs n = 3")
                else:
                    add("E", lambda: verify.check_thmE(sol, sd(), v, budget_scale=cfg.budget_scale))
            elif c == "F":
                if n != 3 or g.kind != "WarpedBall":
                    skip("F", "umbilic check runs on n = 3 balls")
                else:
                    add("F", lambda: verify.check_corF(sol, cfg.omega, v, budget_scale=cfg.budget_scale))
        if c == "D":
            add("D", lambda: verify.check_thmD(sol, cfg.omega, qval=qv(), budget_scale=cfg.budget_scale))
        elif c == "COV":
            add("COV", lambda: verify.covariance_suite(sol))
        elif c == "LEMMA":
            add("LEMMA", lambda: verify.lemma_suite(sol))
    return reports


def _summary_table(reports):
    lines = [f"{'check':<28} {'variant':<10} {'verdict':<8} {'residual':>12} {'budget':>12}"]
    for r in reports:
        res = r.get("residual")
        bud = r.get("budget")
        res = "-" if res is None else format(res, ".3e")
        bud = "-" if bud is None else format(bud, ".3e")
        lines.append(f"{r['name']:<28} {r.get('variant') or '':<10} {r['verdict']:<8} {res:>12} {bud:>12}")
    return "\n".join(lines)


def _finish_checks(reports, w, fname):
    path = w.json(fname, reports)
    print(_summary_table(reports))
    failed = [i for i, r in enumerate(reports) if r["verdict"] == "fail"]
    for i in failed:
        print(f"FAIL {reports[i]['name']} -> {path}#{i}", file=sys.stderr)
    return 1 if failed else 0


def _config_from_args(args):
    cfg = RunConfig.from_json(args.config) if getattr(args, "config", None) else RunConfig()
    for key in ("geom", "out", "variant", "budget_scale", "omega", "jobs", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "checks", None):
        cfg.checks = parse_checks(args.checks)
    if getattr(args, "tol", None) is not None:
        cfg.tol_bvp = args.tol
    return cfg.validate()


def cmd_verify(args, w, cfg):
    g = load_geometry(cfg.geom)
    sol = _solve(g, cfg.tol_bvp)
    return _finish_checks(run_checks(g, sol, cfg), w, "verify.json")


def cmd_run(args, w, cfg):
    """Whole pipeline: Yamabe ledger, gauge, Q, S derivative and the selected checks."""
    g = load_geometry(cfg.geom)
    sol = _solve(g, cfg.tol_bvp)
    led = yamabe.volume_expansion(sol)
    w.json("yamabe.json", {"solution": sol.summary(), "volume": led.as_dict()})
    gauge = normalform.geodesic_gauge(sol)
    w.json("gauge.json", {"gauge": gauge.summary(), "check": normalform.normal_form_check(gauge)})
    q = scattering.q_curvature(sol)
    d = scattering.s_derivative(sol)
    w.json("qcurv.json", {"Q": q.value, "halving_change": q.halving_change, "S_deriv": d.value,
                          "S_deriv_change": d.halving_change})
    if cfg.s_grid:
        modes = parse_modes(";".join(cfg.modes), g) if cfg.modes else [model.Mode()]
        rows = []
        for m in modes:
            for s in parse_grid(cfg.s_grid):
                dd = scattering.scatter_solve(sol, s, m)
                rows.append([m.label(), s, dd.S_value, dd.match_conditioning])
        w.csv("scatter.csv", ["mode", "s", "S", "conditioning"], rows)
    return _finish_checks(run_checks(g, sol, cfg), w, "checks.json")


def build_parser():
    p = argparse.ArgumentParser(prog="sygjms", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, geom=True):
        if geom:
            sp.add_argument("--geom", help="geometry spec (JSON)")
            sp.add_argument("--tol", type=float, default=1e-9, help="Yamabe solve tolerance")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./sygjms_out)")

    sp = sub.add_parser("constants", help="table of c_q residues and c_{q,s} spot values")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--qmax", type=int, required=True)
    sp.add_argument("--spots", help="comma-separated rational s values")
    common(sp, geom=False)

    common(sub.add_parser("yamabe", help="singular Yamabe solve and volume ledger"))
    common(sub.add_parser("gauge", help="geodesic normal form and its identities"))

    sp = sub.add_parser("scatter", help="S(s) per mode over an s grid")
    common(sp)
    sp.add_argument("--s-grid", required=True, help="a:b:step")
    sp.add_argument("--modes", help="';'-separated, e.g. '1,0;1,1:odd' or '0;2'")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--csv-name", help="file name of the CSV table")

    sp = sub.add_parser("residues", help="P_q eigenvalues from residues of S")
    common(sp)
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--modes")

    common(sub.add_parser("qcurv", help="Q curvature and dS/ds at s = n"))

    sp = sub.add_parser("frac", help="fractional operators P_2gamma per mode")
    common(sp)
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("--modes")

    for name, hlp in (("verify", "run global identity checks"),
                      ("run", "full pipeline plus checks, from flags or --config")):
        sp = sub.add_parser(name, help=hlp)
        common(sp)
        sp.set_defaults(tol=None)  # config file value unless given
        sp.add_argument("--config", help="RunConfig JSON")
        sp.add_argument("--checks", help=f"comma-separated subset of {','.join(ALL_CHECKS)}")
        sp.add_argument("--variant", choices=["stated", "corrected", "both"])
        sp.add_argument("--budget-scale", type=float, dest="budget_scale")
        sp.add_argument("--omega", type=float, help="constant conformal factor for D and F")
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--seed", type=int)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = None
        if args.command in ("verify", "run"):
            cfg = _config_from_args(args)
            load_geometry(cfg.geom)
            w = ArtifactWriter(out_dir(cfg.out))
            code = (cmd_verify if args.command == "verify" else cmd_run)(args, w, cfg)
            config = asdict(cfg)
        else:
            if getattr(args, "geom", None) is not None or args.command != "constants":
                load_geometry(args.geom)
            w = ArtifactWriter(out_dir(args.out))
            code = globals()[f"cmd_{args.command}"](args, w)
            config = {k: v for k, v in vars(args).items() if k != "verbose"}
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except (scattering.ScatteringError, yamabe.YamabeError, verify.VerifyError,
            normalform.GaugeError, model.GeometryError) as e:
        print(f"computation failed: {e}", file=sys.stderr)
        return 1
    w.manifest(args.command, config)
    return code


if __name__ == "__main__":
    sys.exit(main())
