import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from epdlab.exponents import ModelParams, p_strauss
from epdlab.solver import GridSpec, InitialProfile, solve
from epdlab.testfun import BqCache, TestFunctionParams


def critical_params(epsilon: float = 1.0) -> ModelParams:
    """Canonical run point: n = 3, mu = 1, alpha = 0, critical power."""
    return ModelParams(n=3, mu=1.0, alpha=0.0,
                       p=p_strauss(3, 1.0, 0.0), epsilon=epsilon)


@pytest.fixture(scope="session")
def critical_trace():
    """One full-budget run at the canonical point, with dense snapshots for
    the windowed functionals. Shared across test modules; treat as
    read-only."""
    params = critical_params()
    grid = GridSpec(r_max=52.0, dr=0.01, cfl=0.5, t_budget=50.0)
    profile = InitialProfile(amplitude=params.epsilon)
    return solve(profile, params, grid, snapshot_dt=0.25)


@pytest.fixture(scope="session")
def bq_cache():
    """Weight cache covering the full time budget and radial extent of the
    canonical run."""
    params = critical_params()
    tf = TestFunctionParams(n=params.n, mu=params.mu, alpha=params.alpha,
                            p=params.p)
    t_grid, r_grid = BqCache.build_grids(0.4, 50.5, 51.5)
    return BqCache(tf, t_grid, r_grid)
