"""Gamma, modified Bessel K_nu, and the damped-wave auxiliary function h.

h(t) = t^((mu+1)/2) * K_((mu-1)/2)(t) solves h'' - (mu*h/t)' - h = 0, and its
derivative has the closed recurrence form
    h'(t) = mu * t^((mu-1)/2) K_((mu-1)/2)(t) - t^((mu+1)/2) K_((mu+1)/2)(t),
so no finite differencing is ever needed for h'.

K_nu is evaluated in three regimes:
  * z < 2: power series (reflection formula for generic nu, the integer-order
    limit formula with digamma terms for near-integer nu),
  * large z at/above ``asymptotic_switch_z``: the e^{-z} asymptotic expansion,
    accepted only when its truncation bound meets rel_tol,
  * everything else: Steed's continued fraction (CF2, Thompson-Barnett),
    which is machine accurate for z >= 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "SpecFunConfig",
    "HEvaluation",
    "SpecFunOverflowError",
    "gamma_fn",
    "bessel_k",
    "h_eval",
    "h_limit_constant",
]

_EULER_GAMMA = 0.5772156649015328606
_SERIES_Z_MAX = 2.0
_NEAR_INTEGER_TOL = 1e-6
_LOG_OVERFLOW = 700.0


class SpecFunOverflowError(OverflowError):
    """K_nu(z) would exceed the representable range ((z/2)^-nu overflow)."""


@dataclass(frozen=True)
class SpecFunConfig:
    rel_tol: float = 1e-10
    series_terms_max: int = 400
    asymptotic_switch_z: float = 10.0

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-6):
            raise ValueError("rel_tol must lie in (0, 1e-6]")
        if self.asymptotic_switch_z <= 0.0:
            raise ValueError("asymptotic_switch_z must be positive")
        if self.series_terms_max < 10:
            raise ValueError("series_terms_max too small")


DEFAULT_CONFIG = SpecFunConfig()


@dataclass(frozen=True)
class HEvaluation:
    t: float
    mu: float
    value: float
    derivative: float


def gamma_fn(x: float) -> float:
    """Gamma function on the positive reals."""
    if x <= 0.0:
        raise ValueError(f"gamma_fn requires x > 0, got {x}")
    return math.gamma(x)


def _digamma_int(m: int) -> float:
    # psi(m) for integer m >= 1
    return -_EULER_GAMMA + sum(1.0 / j for j in range(1, m))


def _bessel_i_series(nu: float, z: float, terms_max: int, rel_tol: float) -> float:
    # I_nu(z) = (z/2)^nu sum_k (z^2/4)^k / (k! Gamma(nu+k+1)); fine for z < ~10
    zh2 = 0.25 * z * z
    total = 0.0
    term = 1.0 / math.gamma(nu + 1.0)
    k = 0
    while k < terms_max:
        total += term
        k += 1
        term *= zh2 / (k * (nu + k))
        if abs(term) <= rel_tol * 1e-3 * abs(total):
            break
    return math.pow(0.5 * z, nu) * total


def _bessel_k_integer_series(m: int, z: float, terms_max: int, rel_tol: float) -> float:
    # A&S 9.6.11 limit form for integer order
    zh = 0.5 * z
    zh2 = zh * zh
    log_zh = math.log(zh)

    finite = 0.0
    if m > 0:
        acc = 0.0
        term = float(math.factorial(m - 1))  # ((m-k-1)!/k!) (-z^2/4)^k at k=0
        for k in range(m):
            acc += term
            if k < m - 1:
                term *= -zh2 / ((k + 1.0) * (m - k - 1.0))
        finite = 0.5 * math.pow(zh, -m) * acc

    sign = -1.0 if m % 2 == 0 else 1.0  # (-1)^(m+1)
    log_part = sign * log_zh * _bessel_i_series(float(m), z, terms_max, rel_tol)

    tail = 0.0
    coef = 0.5 * math.pow(zh, m) * (1.0 if m % 2 == 0 else -1.0)  # (-1)^m/2 (z/2)^m
    term = 1.0 / math.factorial(m)
    psi_a = _digamma_int(1)
    psi_b = _digamma_int(m + 1)
    k = 0
    while k < terms_max:
        contrib = (psi_a + psi_b) * term
        tail += contrib
        k += 1
        term *= zh2 / (k * (m + k))
        psi_a += 1.0 / k
        psi_b += 1.0 / (m + k)
        if abs(term * (psi_a + psi_b)) <= rel_tol * 1e-3 * max(abs(tail), 1e-300):
            break
    return finite + log_part + coef * tail


def _bessel_k_reflection(nu: float, z: float, terms_max: int, rel_tol: float) -> float:
    # K_nu = pi/2 * (I_{-nu} - I_nu) / sin(nu*pi), generic non-integer nu
    i_minus = _bessel_i_series(-nu, z, terms_max, rel_tol)
    i_plus = _bessel_i_series(nu, z, terms_max, rel_tol)
    return 0.5 * math.pi * (i_minus - i_plus) / math.sin(nu * math.pi)


def _bessel_k_asymptotic(nu: float, z: float, rel_tol: float, scaled: bool):
    # K_nu(z) ~ sqrt(pi/2z) e^{-z} [1 + sum a_k], a_k = a_{k-1}(4nu^2-(2k-1)^2)/(8kz)
    four_nu2 = 4.0 * nu * nu
    total = 1.0
    term = 1.0
    prev = math.inf
    k = 0
    while k < 60:
        k += 1
        term *= (four_nu2 - (2.0 * k - 1.0) ** 2) / (8.0 * k * z)
        if abs(term) >= prev:
            k -= 1
            break
        total += term
        prev = abs(term)
        if abs(term) <= 0.1 * rel_tol * abs(total):
            break
    converged = abs(term) <= rel_tol * abs(total)
    value = math.sqrt(0.5 * math.pi / z) * total
    if not scaled:
        value *= math.exp(-z)
    return value, converged


def _bessel_k_cf2(nu: float, z: float, scaled: bool = False) -> float:
    # Steed's CF2 for K_mu, K_{mu+1} with |mu| <= 1/2, then upward recurrence.
    # Valid for z >= 2 (Thompson & Barnett 1987; cf. Numerical Recipes bessik).
    eps = 1e-16
    nl = int(nu + 0.5)
    xmu = nu - nl
    a1 = 0.25 - xmu * xmu
    b = 2.0 * (1.0 + z)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 10000):
        a -= 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < eps:
            break
    else:
        raise RuntimeError(f"bessel_k CF2 failed to converge for nu={nu}, z={z}")
    h = a1 * h
    rkmu = math.sqrt(0.5 * math.pi / z) / s
    if not scaled:
        rkmu *= math.exp(-z)
    rk1 = rkmu * (xmu + z + 0.5 - h) / z
    for i in range(1, nl + 1):
        rkmu, rk1 = rk1, (xmu + i) * (2.0 / z) * rk1 + rkmu
    return rkmu


def bessel_k(nu: float, z: float, config: SpecFunConfig = DEFAULT_CONFIG,
             scaled: bool = False) -> float:
    """Modified Bessel function of the second kind K_nu(z), z > 0.

    Negative orders are folded by the exact symmetry K_{-nu} = K_nu.
    With scaled=True the exponentially scaled value e^z K_nu(z) is returned,
    which stays representable for arbitrarily large z.
    """
    if z <= 0.0:
        raise ValueError(f"bessel_k requires z > 0, got {z}")
    nu = abs(nu)
    if z < 2.0 and nu * math.log(2.0 / z) > _LOG_OVERFLOW:
        raise SpecFunOverflowError(
            f"K_nu(z) overflows for nu={nu}, z={z}: (z/2)^-nu not representable"
        )
    m = round(nu)
    if z < _SERIES_Z_MAX:
        if abs(nu - m) < _NEAR_INTEGER_TOL:
            value = _bessel_k_integer_series(int(m), z, config.series_terms_max,
                                             config.rel_tol)
        else:
            value = _bessel_k_reflection(nu, z, config.series_terms_max,
                                         config.rel_tol)
        return value * math.exp(z) if scaled else value
    if z >= config.asymptotic_switch_z:
        value, converged = _bessel_k_asymptotic(nu, z, config.rel_tol, scaled)
        if converged:
            return value
    return _bessel_k_cf2(nu, z, scaled)


def h_eval(t: float, mu: float, config: SpecFunConfig = DEFAULT_CONFIG) -> HEvaluation:
    """h(t) = t^((mu+1)/2) K_((mu-1)/2)(t) and its recurrence-form derivative."""
    if t <= 0.0:
        raise ValueError(f"h_eval requires t > 0, got {t}")
    if mu <= 0.0:
        raise ValueError(f"h_eval requires mu > 0, got {mu}")
    k_lo = bessel_k(0.5 * (mu - 1.0), t, config)
    k_hi = bessel_k(0.5 * (mu + 1.0), t, config)
    value = math.pow(t, 0.5 * (mu + 1.0)) * k_lo
    derivative = mu * math.pow(t, 0.5 * (mu - 1.0)) * k_lo \
        - math.pow(t, 0.5 * (mu + 1.0)) * k_hi
    return HEvaluation(t=t, mu=mu, value=value, derivative=derivative)


def h_limit_constant(mu: float) -> float:
    """C0 = lim_{t->0} (-h'(t) + mu h(t)/t) = 2^((mu-1)/2) Gamma((mu+1)/2)."""
    if mu <= 0.0:
        raise ValueError(f"h_limit_constant requires mu > 0, got {mu}")
    return math.pow(2.0, 0.5 * (mu - 1.0)) * gamma_fn(0.5 * (mu + 1.0))
