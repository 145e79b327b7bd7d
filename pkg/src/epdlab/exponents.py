"""Critical-exponent algebra for u_tt - Lap u + (mu/t) u_t = t^alpha |u|^p.

The quadratic gamma(n, mu, alpha, p) = 2 + (n+mu+1+2*alpha)*p - (n+mu-1)*p^2
controls blow-up: its positive root p_strauss is the (shifted) Strauss
exponent, p_fujita = 1 + (2+alpha)/n the competing Fujita-type exponent, and
mu_star(n, alpha) is the damping level at which the two coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "ModelParams",
    "HypothesisCheck",
    "ExponentReport",
    "gamma_quadratic",
    "p_strauss",
    "p_fujita",
    "mu_star",
    "mu_star_alpha0",
    "q_exponent",
    "check_hypotheses",
]


@dataclass(frozen=True)
class ModelParams:
    n: int = 3
    mu: float = 1.0
    alpha: float = 0.0
    p: float = 2.0
    epsilon: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("spatial dimension n must be >= 2")
        if self.mu < 0.0:
            raise ValueError("damping strength mu must be >= 0")
        if self.alpha < 0.0:
            raise ValueError("time weight alpha must be >= 0")
        if self.p <= 1.0:
            raise ValueError("nonlinear power p must exceed 1")
        if self.epsilon <= 0.0:
            raise ValueError("amplitude epsilon must be positive")


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    witness: float


@dataclass(frozen=True)
class ExponentReport:
    p_S: float
    p_F: float
    mu_star: float
    q_left: float
    q_right: float
    gamma_at_p: float
    hypotheses: list[HypothesisCheck] = field(default_factory=list)

    def all_passed(self) -> bool:
        return all(c.passed for c in self.hypotheses)


def gamma_quadratic(n: float, mu: float, alpha: float, p: float) -> float:
    return 2.0 + (n + mu + 1.0 + 2.0 * alpha) * p - (n + mu - 1.0) * p * p


def p_strauss(n: float, mu: float, alpha: float) -> float:
    """Positive root of gamma(n, mu, alpha, p) = 0 in p.

    Written as a*p^2 - b*p - 2 = 0 with a = n+mu-1 > 0, b = n+mu+1+2*alpha > 0;
    the positive root (b + sqrt(b^2 + 8a)) / (2a) has no cancellation.
    """
    a = n + mu - 1.0
    b = n + mu + 1.0 + 2.0 * alpha
    if a <= 0.0:
        raise ValueError("p_strauss requires n + mu - 1 > 0")
    return (b + math.sqrt(b * b + 8.0 * a)) / (2.0 * a)


def p_fujita(n: float, alpha: float) -> float:
    if n < 1:
        raise ValueError("p_fujita requires n >= 1")
    return 1.0 + (2.0 + alpha) / n


def mu_star(n: float, alpha: float) -> float:
    """Damping threshold: p_strauss(n, mu, alpha) >= p_fujita(n, alpha) iff
    mu <= mu_star(n, alpha)."""
    return (2.0 * n * n + (n + 2.0 + alpha) * (n * alpha + 2.0 + alpha)) \
        / ((n + 2.0 + alpha) * (2.0 + alpha))


def mu_star_alpha0(n: float) -> float:
    """Classical alpha = 0 threshold (n^2 + n + 2)/(n + 2)."""
    return (n * n + n + 2.0) / (n + 2.0)


def q_exponent(n: float, mu: float, alpha: float, p: float):
    """Both closed forms of the test-function decay exponent q.

    q_left = (n - mu - 1)/2 - 1/p and q_right = n + alpha - (n + mu - 1)p/2
    agree exactly when p is the Strauss root.
    """
    q_left = 0.5 * (n - mu - 1.0) - 1.0 / p
    q_right = n + alpha - 0.5 * (n + mu - 1.0) * p
    return q_left, q_right


def check_hypotheses(params: ModelParams) -> ExponentReport:
    """Evaluate the blow-up theorem's hypotheses and the local-existence cap."""
    n, mu, alpha, p = params.n, params.mu, params.alpha, params.p
    ps = p_strauss(n, mu, alpha)
    pf = p_fujita(n, alpha)
    ms = mu_star(n, alpha)
    ql, qr = q_exponent(n, mu, alpha, p)

    checks = [
        HypothesisCheck("dimension_alpha", n >= 3 or (n == 2 and alpha > 0.0),
                        float(alpha)),
        HypothesisCheck("mu_in_range", 0.0 < mu <= ms, mu - ms),
        HypothesisCheck("p_critical", abs(p - ps) <= 1e-9, p - ps),
        HypothesisCheck(
            "local_existence_p",
            p <= n / (n - 2.0) if n >= 3 else True,
            p - (n / (n - 2.0) if n >= 3 else math.inf),
        ),
    ]
    return ExponentReport(
        p_S=ps,
        p_F=pf,
        mu_star=ms,
        q_left=ql,
        q_right=qr,
        gamma_at_p=gamma_quadratic(n, mu, alpha, p),
        hypotheses=checks,
    )
