import math

import numpy as np
import pytest

from foursplit.splitting import OperatorBundle, SolverConfig, zero_operator

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def scalar_root(f, lo, hi, iters=200):
    """Plain bisection, kept separate from the package's own bisection."""
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cubic_bundle(with_b3=True, with_b1=True):
    """1-D inclusion on [0, 1]: A = N_[0,1], B1 = x - 0.5, B3 = x^3."""
    def clip(gamma, z):
        return np.clip(z, 0.0, 1.0)

    return OperatorBundle(
        resolvent=clip,
        b1=(lambda z: z - 0.5) if with_b1 else zero_operator,
        b2=zero_operator,
        b3=(lambda z: z**3) if with_b3 else zero_operator,
        project_X=lambda z: np.clip(z, 0.0, 1.0),
        beta=1.0 if with_b1 else math.inf,
        lip=0.0,
    )


def cubic_config(**kw):
    kw.setdefault("gamma_cap", 10.0)
    return SolverConfig(eps=0.5, sigma=0.5, theta=0.5, beta=1.0, lip=0.0, **kw)


CUBIC_ROOT = scalar_root(lambda x: x**3 + x - 0.5, 0.0, 1.0)
