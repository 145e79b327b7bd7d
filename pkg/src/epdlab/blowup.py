"""Blow-up functionals, the extremal lifespan ODE, and lifespan sweeps.

Z(t) is the b_q-weighted nonlinear mass over the window [t/2, t] with the
smooth cutoff raised to the power 2p' (p' the Holder conjugate of p), and
Y(M) integrates Z(t)/t from 1 to M on a log grid. The extremal ODE
dY/ds = max(c0 eps^p, c1 s^{1-p} Y^p) in s = ln t realizes the equality case
of the logarithmic lower bound; its blow-up time reproduces the scaling
ln T ~ eps^{-p(p-1)}.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .exponents import ModelParams
from .solver import GridSpec, InitialProfile, SolutionTrace, solve
from .testfun import BqCache, eta, sphere_area

__all__ = [
    "FunctionalConfig",
    "SweepRecord",
    "FitResult",
    "SweepResult",
    "ExtremalLifespan",
    "CoverageError",
    "SweepFitError",
    "functional_Z",
    "functional_Y",
    "y_log_fit",
    "nonlinear_mass",
    "mass_target_exponent",
    "mass_scaling_fit",
    "bernoulli_blowup_s",
    "extremal_ode_lifespan",
    "lifespan_sweep",
]

class CoverageError(RuntimeError):
    """Snapshots or the b_q cache do not cover the requested window."""


class SweepFitError(RuntimeError):
    """Too few completed runs to fit the lifespan scaling."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class FunctionalConfig:
    params: ModelParams
    bq_cache: BqCache | None = None
    M_grid: np.ndarray | None = None

    def __post_init__(self):
        pc = self.p_conj
        if not math.isclose(pc * (self.params.p - 1.0), self.params.p,
                            rel_tol=1e-14):
            raise ValueError("Holder conjugate inconsistent with p")

    @property
    def p_conj(self) -> float:
        return self.params.p / (self.params.p - 1.0)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    n_points: int


@dataclass(frozen=True)
class SweepRecord:
    params: ModelParams
    T_num: float
    refine_gap: float
    x_fit: float
    y_fit: float


@dataclass
class SweepResult:
    records: list = field(default_factory=list)
    budget_outs: list = field(default_factory=list)
    fit: FitResult | None = None
    monotone: bool = True


@dataclass(frozen=True)
class ExtremalLifespan:
    s_numeric: float
    s_closed: float
    blew_up: bool

    @property
    def rel_gap(self) -> float:
        if not (math.isfinite(self.s_numeric) and math.isfinite(self.s_closed)):
            return math.nan
        return abs(self.s_numeric - self.s_closed) / self.s_closed


def _linear_fit(x: np.ndarray, y: np.ndarray) -> FitResult:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(slope), float(intercept), r2, int(x.size))


def _window_snapshots(trace: SolutionTrace, t: float):
    """Snapshot times and fields bracketing [t/2, t], with linearly
    interpolated endpoint slices so the window is integrated exactly."""
    times = np.asarray(trace.snapshot_times, dtype=float)
    if times.size < 2 or times[0] > 0.5 * t or times[-1] < t:
        raise CoverageError(
            f"snapshots cover [{times[0] if times.size else math.nan:.3g}, "
            f"{times[-1] if times.size else math.nan:.3g}], "
            f"need [{0.5 * t:.3g}, {t:.3g}]"
        )

    def slice_at(tau):
        j = int(np.clip(np.searchsorted(times, tau) - 1, 0, times.size - 2))
        f = (tau - times[j]) / (times[j + 1] - times[j])
        return (1.0 - f) * trace.snapshots[j] + f * trace.snapshots[j + 1]

    inside = np.nonzero((times > 0.5 * t) & (times < t))[0]
    taus = [0.5 * t] + [times[j] for j in inside] + [t]
    fields = [slice_at(0.5 * t)] + [trace.snapshots[j] for j in inside] \
        + [slice_at(t)]
    return np.array(taus), fields


def _windowed_mass(trace: SolutionTrace, t: float, config: FunctionalConfig,
                   weighted: bool) -> float:
    """Common core of Z(t) (weighted=True, with the b_q factor) and the plain
    nonlinear mass (weighted=False)."""
    params = config.params
    n, alpha, p = params.n, params.alpha, params.p
    r = trace.r
    dr = r[1] - r[0]
    area = sphere_area(n)
    taus, fields = _window_snapshots(trace, t)
    if weighted:
        if config.bq_cache is None:
            raise CoverageError("no b_q cache attached to the config")
        cache = config.bq_cache
        if taus[0] < cache.t_grid[0] or taus[-1] > cache.t_grid[-1]:
            raise CoverageError("b_q cache does not cover the time window")

    inner = np.empty(taus.size)
    for k, (tau, u) in enumerate(zip(taus, fields)):
        cutoff = eta(tau / t) ** (2.0 * config.p_conj)
        if cutoff == 0.0:
            inner[k] = 0.0
            continue
        # the solution lives inside the light cone; clipping the radial range
        # there keeps every b_q query inside the cache
        m = int(np.searchsorted(r, tau + 1.0 + 4.0 * dr))
        m = min(m, r.size)
        rs = r[:m]
        dens = np.abs(u[:m]) ** p * rs ** (n - 1.0)
        if weighted:
            dens = dens * config.bq_cache.eval(tau, rs)
        weight = tau ** alpha if alpha > 0.0 else 1.0
        inner[k] = area * weight * cutoff * float(np.trapezoid(dens, dx=dr))
    return float(np.trapezoid(inner, x=taus))


def functional_Z(trace: SolutionTrace, t: float, config: FunctionalConfig) -> float:
    """Z(t): b_q-weighted, cutoff-localized nonlinear mass over [t/2, t]."""
    if t <= 0.0:
        raise ValueError("functional_Z requires t > 0")
    return _windowed_mass(trace, t, config, weighted=True)


def functional_Y(trace: SolutionTrace, M: float, config: FunctionalConfig,
                 n_nodes: int = 33) -> float:
    """Y(M) = integral of Z(t)/t from 1 to M, log-spaced trapezoid."""
    if M < 1.0:
        raise ValueError("functional_Y requires M >= 1")
    if M == 1.0:
        return 0.0
    ts = np.geomspace(1.0, M, n_nodes)
    zs = np.array([functional_Z(trace, t, config) for t in ts])
    return float(np.trapezoid(zs, x=np.log(ts)))


def y_log_fit(trace: SolutionTrace, config: FunctionalConfig) -> FitResult:
    """Least-squares fit of Y(M) against ln M over config.M_grid."""
    if config.M_grid is None:
        raise ValueError("config.M_grid required for the Y fit")
    ms = np.asarray(config.M_grid, dtype=float)
    ys = np.array([functional_Y(trace, m, config) for m in ms])
    return _linear_fit(np.log(ms), ys)


def nonlinear_mass(trace: SolutionTrace, t: float, config: FunctionalConfig) -> float:
    """Cutoff-localized spacetime integral of |u|^p s^alpha over [t/2, t]."""
    if t <= 0.0:
        raise ValueError("nonlinear_mass requires t > 0")
    return _windowed_mass(trace, t, config, weighted=False)


def mass_target_exponent(params: ModelParams) -> float:
    return params.n + params.alpha \
        - 0.5 * (params.n - 1.0 + params.mu) * params.p


def mass_scaling_fit(trace: SolutionTrace, config: FunctionalConfig,
                     t_grid) -> FitResult:
    """Log-log slope of the nonlinear mass against t, to be compared with
    mass_target_exponent."""
    ts = np.asarray(t_grid, dtype=float)
    masses = np.array([nonlinear_mass(trace, t, config) for t in ts])
    if np.any(masses <= 0.0):
        raise CoverageError("nonlinear mass vanished on the fit window")
    return _linear_fit(np.log(ts), np.log(masses))


def bernoulli_blowup_s(p: float, c1: float, s0: float, y0: float) -> float:
    """Blow-up point of the pure phase dY/ds = c1 s^{1-p} Y^p from (s0, y0);
    inf when the forcing decays too fast for the given start (p > 2 only)."""
    if p == 2.0:
        return s0 * math.exp(1.0 / (c1 * y0))
    base = s0 ** (2.0 - p) + (2.0 - p) * y0 ** (1.0 - p) / (c1 * (p - 1.0))
    if base <= 0.0:
        return math.inf
    return base ** (1.0 / (2.0 - p))


def extremal_ode_lifespan(p: float, eps: float, c0: float = 1.0,
                          c1: float = 1.0, s_start: float = 2.0,
                          s_budget: float = 1e8) -> ExtremalLifespan:
    """Blow-up point of dY/ds = max(c0 eps^p, c1 s^{1-p} Y^p),
    Y(s_start) = c0 eps^p s_start, numerically and in closed form.

    The numeric branch integrates adaptively in the Bernoullized variable
    w = Y^{1-p} and reports the event root of w = 0 (the blow-up point); the
    closed-form branch concatenates the linear floor phase up to the switch
    point s0 = (c0 eps^p)^{1-p}/c1 with the pure-Bernoulli formula.
    """
    if p <= 1.0:
        raise ValueError("extremal ODE requires p > 1")
    if eps <= 0.0 or c0 <= 0.0 or c1 <= 0.0 or s_start <= 0.0:
        raise ValueError("eps, c0, c1, s_start must be positive")
    floor = c0 * eps ** p

    # closed form
    s_switch = max(floor ** (1.0 - p) / c1, s_start)
    y_switch = floor * s_switch
    s_closed = bernoulli_blowup_s(p, c1, s_switch, y_switch)

    # numeric branch in the Bernoullized variable w = Y^{1-p}: the pure phase
    # is exactly linear in s there, and blow-up (Y -> inf) is the smooth zero
    # crossing of w, which the event root-finder locates to machine precision;
    # in Y itself the cap 1e12 sits within one ulp of the blow-up point for
    # p = 3 and cannot be reached by any adaptive step
    q_pow = p / (p - 1.0)

    def rhs(s, w):
        y_inv_p = max(w[0], 0.0) ** q_pow
        return [(1.0 - p) * max(floor * y_inv_p, c1 * s ** (1.0 - p))]

    def blow_up(s, w):
        return w[0]

    blow_up.terminal = True
    blow_up.direction = -1.0
    w0 = (floor * s_start) ** (1.0 - p)
    sol = solve_ivp(rhs, (s_start, s_budget), [w0], events=blow_up,
                    rtol=1e-12, atol=1e-14)
    if sol.t_events[0].size == 0:
        return ExtremalLifespan(math.inf, s_closed, False)
    s_numeric = float(sol.t_events[0][0])
    return ExtremalLifespan(s_numeric, s_closed, True)


def lifespan_sweep(base_params: ModelParams, eps_list, grid: GridSpec,
                   max_workers: int = 4) -> SweepResult:
    """Concurrent solver runs over eps with the ln T vs eps^{-p(p-1)} fit.

    Runs that survive the budget (or go unstable) are reported in
    budget_outs and excluded from the fit; fewer than 3 completed blow-up
    runs refuse the fit.
    """
    eps_arr = sorted(float(e) for e in eps_list)
    if any(e <= 0.0 for e in eps_arr):
        raise ValueError("eps values must be positive")
    p = base_params.p
    pw = p * (p - 1.0)

    def run(eps):
        params = ModelParams(n=base_params.n, mu=base_params.mu,
                             alpha=base_params.alpha, p=base_params.p,
                             epsilon=eps)
        return eps, solve(InitialProfile(amplitude=eps), params, grid)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        outcomes = list(pool.map(run, eps_arr))

    result = SweepResult()
    for eps, trace in outcomes:
        params = ModelParams(n=base_params.n, mu=base_params.mu,
                             alpha=base_params.alpha, p=base_params.p,
                             epsilon=eps)
        if trace.blew_up():
            result.records.append(SweepRecord(
                params=params, T_num=trace.T_num, refine_gap=trace.refine_gap,
                x_fit=eps ** (-pw), y_fit=math.log(trace.T_num)))
        else:
            result.budget_outs.append((eps, trace.verdict))

    t_by_eps = [rec.T_num for rec in result.records]  # records sorted by eps
    result.monotone = all(t_by_eps[i] >= t_by_eps[i + 1]
                          for i in range(len(t_by_eps) - 1))
    if len(result.records) < 3:
        raise SweepFitError(
            f"only {len(result.records)} completed runs, need >= 3 for the fit",
            result,
        )
    x = np.array([rec.x_fit for rec in result.records])
    y = np.array([rec.y_fit for rec in result.records])
    result.fit = _linear_fit(x, y)
    return result
