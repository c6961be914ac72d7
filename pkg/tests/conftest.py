import functools
import re

import pytest

from sygjms.model import make_geometry
from sygjms.yamabe import sy_global_solve

MODELS = {
    "ball2": {"kind": "WarpedBall", "n": 2, "profiles": [[0, 1]]},
    "slab2": {"kind": "TorusSlab", "n": 2, "profiles": [[1, 1], [1, -1]]},
    "ball3": {"kind": "WarpedBall", "n": 3, "profiles": [[0, 1]]},
    "slab3": {"kind": "TorusSlab", "n": 3, "profiles": [[1, 1, -1], [1, -1, 1], [1, 0, "1/2", -1]]},
}


@functools.lru_cache(maxsize=None)
def geometry(name):
    return make_geometry(MODELS[name])


@functools.lru_cache(maxsize=None)
def solution(name):
    return sy_global_solve(geometry(name))


@pytest.fixture(scope="session")
def sol():
    return solution


@pytest.fixture(scope="session")
def geom():
    return geometry


@functools.lru_cache(maxsize=None)
def prepared(name):
    """Volume ledger, Q and dS/ds at s = n for a model (shared across test modules)."""
    from sygjms import scattering, yamabe
    s = solution(name)
    return yamabe.volume_expansion(s), scattering.q_curvature(s), scattering.s_derivative(s)


@pytest.fixture(scope="session")
def prep():
    return prepared


# acceptance summary: one line per criterion at the end of the run

@pytest.fixture
def criterion(request):
    """Record the outcome of an acceptance criterion and print its line."""
    store = request.config.__dict__.setdefault("_acceptance", {})

    def record(key, ok, detail):
        line = f"{key}: {'PASS' if ok else 'FAIL'}  {detail}"
        store[key] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    store = getattr(config, "_acceptance", {})
    if store:
        terminalreporter.section("acceptance criteria")
        order = lambda k: (int(re.match(r"AC(\d+)", k).group(1)), k)
        for key in sorted(store, key=order):
            terminalreporter.write_line(store[key])
