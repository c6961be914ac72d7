"""Truncated polyhomogeneous series  r^alpha * sum a[k, j] r^k (log r)^j.

A series knows the highest power ``order`` up to which it is valid; terms with
k > order are unknown rather than zero.  Coefficients are either exact
(``Fraction`` or sympy expressions) or floats, selected by the ``exact`` flag.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

import sympy as sp

J_MAX = 2
INF = math.inf


class SeriesError(ValueError):
    pass


def _is_exact_scalar(c):
    return isinstance(c, (int, Fraction, Rational, sp.Basic)) and not isinstance(c, bool)


def _is_zero(c):
    if isinstance(c, sp.Basic):
        return c.is_zero is True or c == 0
    return c == 0


def _to_float(c):
    if isinstance(c, sp.Basic):
        return float(sp.N(c, 20))
    return float(c)


class PolyLogSeries:
    __slots__ = ("terms", "base", "order", "exact", "jmax")

    def __init__(self, terms=None, base=0, order=INF, exact=True, jmax=J_MAX):
        clean = {}
        order_ = order
        for (k, j), c in (terms or {}).items():
            k, j = int(k), int(j)
            if j < 0:
                raise SeriesError("negative log power")
            if k > order_:
                continue
            if exact and isinstance(c, float):
                raise SeriesError("mode mismatch")
            if not exact:
                c = _to_float(c)
            if _is_zero(c):
                continue
            if j > jmax:
                # log cap binds here: everything from this k on is unknown
                order_ = min(order_, k - 1)
                continue
            clean[(k, j)] = c
        self.terms = {kj: c for kj, c in clean.items() if kj[0] <= order_}
        self.base = base
        self.order = order_
        self.exact = exact
        self.jmax = jmax

    # construction helpers
    @classmethod
    def from_coeffs(cls, coeffs, base=0, order=None, exact=True):
        """Series sum coeffs[k] r^k; order defaults to exact polynomial."""
        terms = {(k, 0): c for k, c in enumerate(coeffs)}
        return cls(terms, base, INF if order is None else order, exact)

    @classmethod
    def constant(cls, c, order=INF, exact=True):
        return cls({(0, 0): c}, 0, order, exact)

    @classmethod
    def monomial(cls, k=0, j=0, c=1, base=0, order=INF, exact=True):
        return cls({(k, j): c}, base, order, exact)

    def _like(self, terms, base=None, order=None):
        return PolyLogSeries(terms, self.base if base is None else base,
                             self.order if order is None else order,
                             self.exact, self.jmax)

    # access
    def coeff(self, k, j=0):
        if k > self.order:
            raise SeriesError(f"coefficient r^{k} beyond truncation order {self.order}")
        return self.terms.get((k, j), Fraction(0) if self.exact else 0.0)

    __getitem__ = lambda self, kj: self.coeff(*kj) if isinstance(kj, tuple) else self.coeff(kj)

    def valuation(self):
        ks = [k for (k, _j) in self.terms]
        return min(ks) if ks else self.order

    def max_log(self):
        return max((j for (_k, j) in self.terms), default=0)

    def truncate(self, order):
        return self._like(self.terms, order=min(order, self.order))

    def to_float(self):
        return PolyLogSeries(self.terms, float(self.base) if not isinstance(self.base, sp.Basic)
                             else _to_float(self.base), self.order, False, self.jmax)

    def subs(self, *args):
        """Substitute into sympy coefficients (exact mode)."""
        terms = {kj: (c.subs(*args) if isinstance(c, sp.Basic) else c)
                 for kj, c in self.terms.items()}
        base = self.base.subs(*args) if isinstance(self.base, sp.Basic) else self.base
        return self._like(terms, base=base)

    def map(self, fn):
        return self._like({kj: fn(c) for kj, c in self.terms.items()})

    # arithmetic
    def _check_mode(self, other):
        if self.exact != other.exact:
            raise SeriesError("mode mismatch")

    def _scalar(self, c):
        if self.exact and isinstance(c, float):
            raise SeriesError("mode mismatch")
        return c

    def _align(self, other):
        """Return (shift_self, shift_other, base) bringing both to a common base."""
        d = self.base - other.base
        if d == 0:
            return 0, 0, self.base
        if isinstance(d, sp.Basic):
            d = sp.nsimplify(d) if not self.exact else sp.simplify(d)
            if not d.is_integer:
                raise SeriesError("base exponents differ by a non-integer")
            d = int(d)
        elif float(d) != int(round(float(d))) or abs(float(d) - round(float(d))) > 1e-12:
            raise SeriesError("base exponents differ by a non-integer")
        d = int(round(float(d)))
        if d > 0:
            return d, 0, other.base
        return 0, -d, self.base

    def __add__(self, other):
        if not isinstance(other, PolyLogSeries):
            other = PolyLogSeries.constant(self._scalar(other), exact=self.exact)
        self._check_mode(other)
        sa, sb, base = self._align(other)
        terms = {}
        for (k, j), c in self.terms.items():
            terms[(k + sa, j)] = terms.get((k + sa, j), 0) + c
        for (k, j), c in other.terms.items():
            terms[(k + sb, j)] = terms.get((k + sb, j), 0) + c
        order = min(self.order + sa, other.order + sb)
        return PolyLogSeries(terms, base, order, self.exact, min(self.jmax, other.jmax))

    __radd__ = __add__

    def __neg__(self):
        return self._like({kj: -c for kj, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, PolyLogSeries):
            c = self._scalar(other)
            if _is_zero(c):
                return self._like({})
            return self._like({kj: v * c for kj, v in self.terms.items()})
        self._check_mode(other)
        va, vb = self.valuation(), other.valuation()
        order = min(self.order + vb, other.order + va)
        jmax = min(self.jmax, other.jmax)
        terms = {}
        for (ka, ja), ca in self.terms.items():
            for (kb, jb), cb in other.terms.items():
                k = ka + kb
                if k > order:
                    continue
                key = (k, ja + jb)
                terms[key] = terms.get(key, 0) + ca * cb
        return PolyLogSeries(terms, self.base + other.base, order, self.exact, jmax)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, PolyLogSeries):
            return self * other.reciprocal()
        c = self._scalar(other)
        if self.exact and isinstance(c, int):
            c = Fraction(c)
        return self._like({kj: v / c for kj, v in self.terms.items()})

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        return self.power(p)

    def shift(self, m):
        """Multiply by r^m for integer m."""
        return PolyLogSeries({(k + m, j): c for (k, j), c in self.terms.items()},
                             self.base, self.order + m, self.exact, self.jmax)

    def _split_leading(self):
        """Write self = c r^(base+v) (1 + x) with x of positive valuation."""
        v = self.valuation()
        if v == self.order or not self.terms:
            raise SeriesError("series vanishes to its truncation order")
        if any(j > 0 for (k, j) in self.terms if k == v):
            raise SeriesError("log-leading term")
        c = self.terms[(v, 0)]
        rest = {(k - v, j): t / c for (k, j), t in self.terms.items() if (k, j) != (v, 0)}
        x = PolyLogSeries(rest, 0, self.order - v, self.exact, self.jmax)
        return c, v, x

    def _need_order(self, order):
        if order is None:
            order = self.order
        if order == INF:
            raise SeriesError("infinite truncation order: pass an explicit order")
        return order

    def power(self, p, order=None):
        """self**p via the binomial series.

        ``order`` is the relative truncation (powers of r past the leading one)
        and is only needed when self is an exact polynomial and p is not a
        nonnegative integer.
        """
        if isinstance(p, int) and p >= 0:
            out = PolyLogSeries.constant(1 if self.exact else 1.0, exact=self.exact)
            for _ in range(p):
                out = out * self
            return out
        c, v, x = self._split_leading()
        rel = x.order if order is None else min(order, x.order)
        rel = self._need_order(rel)
        one = 1 if self.exact else 1.0
        xt = x.truncate(rel)
        acc = PolyLogSeries.constant(one, order=rel, exact=self.exact)
        total = acc
        coef = one
        xv = xt.valuation()
        m = 0
        while xv > 0 and (m + 1) * xv <= rel:
            m += 1
            coef = coef * (p - (m - 1)) / (Fraction(m) if self.exact else m)
            acc = acc * xt
            total = total + acc * coef
        if self.exact:
            if c == 1:
                cp = 1
            elif isinstance(p, int):
                cp = (Fraction(c) if not isinstance(c, sp.Basic) else c) ** p
            else:
                cp = sp.Pow(sp.nsimplify(c), sp.nsimplify(p))
                if cp.is_Rational:
                    cp = Fraction(int(cp.p), int(cp.q))
        else:
            cp = float(c) ** float(p)
        out = total * cp
        return PolyLogSeries(out.terms, (self.base + v) * p, out.order, self.exact, self.jmax)

    def reciprocal(self, order=None):
        return self.power(-1, order)

    def derivative(self):
        terms = {}
        a = self.base
        for (k, j), c in self.terms.items():
            e = a + k
            if not _is_zero(e):
                terms[(k - 1, j)] = terms.get((k - 1, j), 0) + e * c
            if j > 0:
                terms[(k - 1, j - 1)] = terms.get((k - 1, j - 1), 0) + j * c
        return PolyLogSeries(terms, a, self.order - 1, self.exact, self.jmax)

    def integrate(self):
        """Antiderivative with no constant term; needs base + k != -1."""
        a = self.base
        terms = {}
        for (k, j), c in sorted(self.terms.items(), key=lambda t: -t[0][1]):
            m1 = a + k + 1
            if _is_zero(m1):
                raise SeriesError("r^-1 term cannot be integrated in this class")
            if self.exact and isinstance(m1, int):
                m1 = Fraction(m1)
            # int r^m log^j = r^(m+1) sum_i (-1)^i j!/(j-i)! log^(j-i) / (m+1)^(i+1)
            fac = 1
            for i in range(j + 1):
                key = (k + 1, j - i)
                terms[key] = terms.get(key, 0) + c * fac * (-1) ** i / m1 ** (i + 1)
                fac *= (j - i)
        return PolyLogSeries(terms, a, self.order + 1, self.exact, self.jmax)

    def exp(self, order=None):
        if self.base != 0 or any(k < 0 for (k, j) in self.terms):
            raise SeriesError("exp needs base exponent 0 and no negative powers")
        if any(k == 0 and j > 0 for (k, j) in self.terms):
            raise SeriesError("pure log-leading term")
        order = self._need_order(order)
        a0 = self.terms.get((0, 0), 0)
        x = PolyLogSeries({kj: c for kj, c in self.terms.items() if kj != (0, 0)},
                          0, min(self.order, order), self.exact, self.jmax)
        one = 1 if self.exact else 1.0
        total = PolyLogSeries.constant(one, order=x.order, exact=self.exact)
        acc = total
        xv = x.valuation()
        m = 0
        while xv > 0 and (m + 1) * xv <= x.order:
            m += 1
            acc = acc * x / m
            total = total + acc
        if not _is_zero(a0):
            if self.exact:
                raise SeriesError("exp of a nonzero exact constant is not rational")
            total = total * math.exp(a0)
        return total

    def log(self, order=None):
        if self.base != 0 or any(k < 0 for (k, j) in self.terms):
            raise SeriesError("non-unit leading term")
        if self.terms.get((0, 0), 0) != 1 or any(k == 0 and j > 0 for (k, j) in self.terms):
            raise SeriesError("non-unit leading term")
        order = self._need_order(order)
        x = PolyLogSeries({kj: c for kj, c in self.terms.items() if kj != (0, 0)},
                          0, min(self.order, order), self.exact, self.jmax)
        total = PolyLogSeries({}, 0, x.order, self.exact, self.jmax)
        acc = PolyLogSeries.constant(1 if self.exact else 1.0, order=x.order, exact=self.exact)
        xv = x.valuation()
        m = 0
        while xv > 0 and (m + 1) * xv <= x.order:
            m += 1
            acc = acc * x
            total = total + acc * (Fraction((-1) ** (m + 1), m) if self.exact else (-1) ** (m + 1) / m)
        return total

    def compose(self, inner):
        """self(inner(r)) for log-free, base-0 self and inner with inner(0) = 0."""
        if self.base != 0 or self.max_log() or inner.base != 0 or inner.max_log():
            raise SeriesError("compose needs log-free base-0 series")
        iv = inner.valuation()
        if iv < 1:
            raise SeriesError("inner series must vanish at 0")
        self._check_mode(inner)
        order = min(inner.order, self.order * iv if self.order != INF else inner.order)
        order = self._need_order(order)
        zero = 0 if self.exact else 0.0
        total = PolyLogSeries.constant(self.terms.get((0, 0), zero), order=order, exact=self.exact)
        acc = PolyLogSeries.constant(1 if self.exact else 1.0, order=order, exact=self.exact)
        inner = inner.truncate(order)
        for k in range(1, int(order // iv) + 1):
            acc = acc * inner
            ck = self.terms.get((k, 0))
            if ck is not None:
                total = total + acc * ck
        return total.truncate(order)

    def revert(self):
        """Compositional inverse of r -> self(r) with self = a1 r + ..., a1 != 0."""
        if self.valuation() != 1 or self.base != 0 or self.max_log():
            raise SeriesError("revert needs a1 r + ... with a1 != 0")
        order = self._need_order(None)
        a1 = self.terms[(1, 0)]
        one = 1 if self.exact else 1.0
        # Newton-free fixed point: y = (r - (self(y) - a1 y)) / a1
        y = PolyLogSeries.monomial(1, 0, one / a1 if not self.exact else Fraction(1) / a1,
                                   order=order, exact=self.exact)
        rest = self - PolyLogSeries.monomial(1, 0, a1, exact=self.exact)
        ident = PolyLogSeries.monomial(1, 0, one, order=order, exact=self.exact)
        for _ in range(int(order)):
            y = (ident - rest.compose(y)) / a1
        return y.truncate(order)

    # evaluation and io
    def __call__(self, r):
        lr = math.log(r) if r > 0 else -INF
        total = 0.0
        for (k, j), c in self.terms.items():
            term = _to_float(c) * r ** (_to_float(self.base) + k)
            if j:
                term *= lr ** j
            total += term
        return total

    def to_json(self):
        out = []
        for (k, j), c in sorted(self.terms.items()):
            if isinstance(c, Fraction) or isinstance(c, int):
                c = Fraction(c)
                out.append({"k": k, "j": j, "num": c.numerator, "den": c.denominator})
            elif isinstance(c, sp.Basic) and c.is_Rational:
                out.append({"k": k, "j": j, "num": int(c.p), "den": int(c.q)})
            else:
                out.append({"k": k, "j": j, "float": _to_float(c)})
        base = self.base
        if isinstance(base, (Fraction, int)) or (isinstance(base, sp.Basic) and base.is_Rational):
            base = str(base)
        else:
            base = _to_float(base)
        return {"base_exponent": base, "order": None if self.order == INF else self.order,
                "exact": self.exact, "terms": out}

    @classmethod
    def from_json(cls, data):
        exact = data.get("exact", True)
        terms = {}
        for t in data["terms"]:
            if "float" in t:
                terms[(t["k"], t["j"])] = t["float"]
                exact = False
            else:
                terms[(t["k"], t["j"])] = Fraction(t["num"], t["den"])
        base = data["base_exponent"]
        base = Fraction(base) if isinstance(base, str) else base
        order = INF if data.get("order") is None else data["order"]
        return cls(terms, base, order, exact)

    def equals(self, other, tol=0.0):
        """Coefficientwise comparison up to the smaller truncation order."""
        order = min(self.order, other.order)
        if self.base != other.base:
            return False
        keys = {kj for kj in self.terms if kj[0] <= order} | {kj for kj in other.terms if kj[0] <= order}
        for kj in keys:
            d = self.terms.get(kj, 0) - other.terms.get(kj, 0)
            if tol == 0.0:
                if isinstance(d, sp.Basic):
                    d = sp.simplify(d)
                if not _is_zero(d):
                    return False
            elif abs(_to_float(d)) > tol * max(1.0, abs(_to_float(self.terms.get(kj, 0)))):
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, PolyLogSeries):
            return NotImplemented
        return self.order == other.order and self.equals(other)

    __hash__ = None

    def __repr__(self):
        parts = []
        for (k, j), c in sorted(self.terms.items()):
            mono = f"r^{k}" + (f" log^{j}" if j else "")
            parts.append(f"{c}*{mono}")
        b = f"r^{self.base} * " if self.base != 0 else ""
        return f"{b}({' + '.join(parts) or '0'} + O(r^{self.order + 1}))"


def series_mul(a, b):
    return a * b


def series_exp_log(a, which, order=None):
    if which == "exp":
        return a.exp(order)
    if which == "log":
        return a.log(order)
    raise SeriesError(f"unknown function {which!r}")


def series_rpow(w, alpha, order=None):
    """(r e^w)^alpha = r^alpha exp(alpha w), for w(0) = 0."""
    if w.base != 0 or not _is_zero(w.terms.get((0, 0), 0)):
        raise SeriesError("w must have base exponent 0 and vanish at r = 0")
    if w.exact and isinstance(alpha, float):
        raise SeriesError("mode mismatch")
    e = (w * alpha).exp(order)
    e.base = alpha
    return e


def series_derivative(a):
    return a.derivative()
