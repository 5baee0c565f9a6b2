"""Closed-form admissible-delay thresholds and the mean-square decay rate.

All thresholds are roots of quadratics with positive coefficients,

    phi(tau)    = 4 alpha^2 tau^2
    psi(tau)    = 12 A^2 tau + 4 (3 A^2 + alpha^2) tau^2
    varphi(tau) = 8 C^2 tau + 4 (2 C^2 + alpha^2) tau^2

set equal to 1/6 (for phi) or (alpha - c)^2 / (6 alpha^2) with c the
relevant monotonicity constant.  The delay must stay below the smaller of
the two roots; within that range the mean-square decay-rate bound

    gamma = min( (1 - 6 phi(tau)) / (2 tau),
                 ((alpha - D)^2 - 6 alpha^2 varphi(tau)) / (alpha - D) )

is strictly positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def phi(tau: float, alpha: float) -> float:
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return 4.0 * alpha**2 * tau**2


def psi(tau: float, alpha: float, A: float) -> float:
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return 12.0 * A**2 * tau + 4.0 * (3.0 * A**2 + alpha**2) * tau**2


def varphi(tau: float, alpha: float, C: float) -> float:
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return 8.0 * C**2 * tau + 4.0 * (2.0 * C**2 + alpha**2) * tau**2


def beta_coefficients(tau: float, alpha: float, A: float, C: float):
    """The four auxiliary polynomials entering the delay-derivative bounds."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    b1 = 6.0 * A**2 * tau + 2.0 * (3.0 * A**2 + 2.0 * alpha**2) * tau**2
    b2 = 6.0 * A**2 * (tau + tau**2)
    b3 = 4.0 * C**2 * tau + 4.0 * (C**2 + alpha**2) * tau**2
    b4 = 4.0 * C**2 * (tau + tau**2)
    return b1, b2, b3, b4


def _positive_quadratic_root(a: float, b: float, c: float) -> float:
    """Unique positive root of a t^2 + b t = c with a, b, c > 0.

    Written as 2c / (b + sqrt(b^2 + 4ac)); no subtraction of like-sized
    quantities, so the tiny roots that arise for large gains do not lose
    precision to cancellation.
    """
    return 2.0 * c / (b + math.sqrt(b * b + 4.0 * a * c))


@dataclass
class BoundednessThresholds:
    tau1: float
    tau2: float
    tau_star: float
    binding: str  # "tau1" or "tau2"


@dataclass
class StabilizationThresholds:
    tau3: float
    tau4: float
    tau_double_star: float
    binding: str  # "tau3" or "tau4"


@dataclass
class RateBound:
    gamma: float
    branch: str  # "delay" or "gain"


def boundedness_thresholds(alpha: float, A: float, B: float) -> BoundednessThresholds:
    if A <= 0 or B <= 0:
        raise ValueError("A and B must be positive")
    if alpha <= B:
        raise ValueError("gain must exceed B")
    tau1 = 1.0 / (2.0 * alpha * math.sqrt(6.0))
    rhs = (alpha - B) ** 2 / (6.0 * alpha**2)
    tau2 = _positive_quadratic_root(4.0 * (3.0 * A**2 + alpha**2), 12.0 * A**2, rhs)
    binding = "tau1" if tau1 <= tau2 else "tau2"
    return BoundednessThresholds(tau1, tau2, min(tau1, tau2), binding)


def stabilization_thresholds(alpha: float, C: float, D: float) -> StabilizationThresholds:
    if C <= 0 or D <= 0:
        raise ValueError("C and D must be positive")
    if alpha <= D:
        raise ValueError("gain must exceed D")
    tau3 = 1.0 / (2.0 * alpha * math.sqrt(6.0))
    rhs = (alpha - D) ** 2 / (6.0 * alpha**2)
    tau4 = _positive_quadratic_root(4.0 * (2.0 * C**2 + alpha**2), 8.0 * C**2, rhs)
    binding = "tau3" if tau3 <= tau4 else "tau4"
    return StabilizationThresholds(tau3, tau4, min(tau3, tau4), binding)


def decay_rate(tau: float, alpha: float, C: float, D: float) -> RateBound:
    thr = stabilization_thresholds(alpha, C, D)
    if not 0.0 < tau < thr.tau_double_star:
        raise ValueError(
            f"tau={tau} outside the admissible range (0, {thr.tau_double_star})"
        )
    delay_branch = (1.0 - 6.0 * phi(tau, alpha)) / (2.0 * tau)
    gain_branch = ((alpha - D) ** 2 - 6.0 * alpha**2 * varphi(tau, alpha, C)) / (
        alpha - D
    )
    if delay_branch <= gain_branch:
        return RateBound(delay_branch, "delay")
    return RateBound(gain_branch, "gain")


def lyapunov_weights(alpha: float, c: float):
    """Weights (zeta, sigma) of the composite Lyapunov functional.

    `c` is the monotonicity constant in play: B for the boundedness
    argument, D for the stabilization one.
    """
    if alpha <= c:
        raise ValueError("gain must exceed the monotonicity constant")
    zeta = 2.0 * (alpha - c)
    sigma = 12.0 * alpha**2 / (alpha - c)
    return zeta, sigma
