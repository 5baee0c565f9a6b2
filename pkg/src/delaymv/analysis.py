"""Trajectory post-processing: the delay functional I2, the delay-gap
inequality, the quadratic-functional generator and its integral identity,
Lyapunov-exponent fitting and a boundedness plateau check.

All estimators work on the same grid as the integrator (left rectangle
rule); matching discretizations keep the inequality checks exact up to
Monte Carlo noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InsufficientDataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# I2 and the delay-gap inequality


def i2_integrand(states, delayed_states, model, control) -> float:
    """Particle average of tau |f - alpha x_delayed|^2 + |g|^2 + |g0|^2."""
    x = np.atleast_2d(states)
    xd = np.atleast_2d(delayed_states)
    m = x.mean(axis=0)
    tau = control.tau
    fa = model.drift(x, m) - control.alpha * xd
    g = model.diffusion(x, m)
    g0 = model.common_diffusion(x, m)
    per_particle = (
        tau * np.sum(fa**2, axis=1) + np.sum(g**2, axis=1) + np.sum(g0**2, axis=1)
    )
    return float(per_particle.mean())


def i2_discrete(states_window, delayed_window, model, control, config) -> float:
    """Left-rectangle discretization of I2(t) over the window [t - tau, t).

    The window arrays hold the k = delay_steps grid points preceding t,
    oldest first, with their matching delayed states.
    """
    k = config.delay_steps
    if k == 0:
        return 0.0
    states_window = np.asarray(states_window, dtype=float)
    delayed_window = np.asarray(delayed_window, dtype=float)
    if len(states_window) < k or len(delayed_window) < k:
        raise ValueError(f"window must cover {k} steps")
    total = 0.0
    for x, xd in zip(states_window[-k:], delayed_window[-k:]):
        total += i2_integrand(x, xd, model, control)
    return config.dt * total


@dataclass
class DelayGapReport:
    times: np.ndarray
    lhs: np.ndarray        # E|X(t) - X(t-tau)|^2 estimate
    rhs: np.ndarray        # 3 E I2(t) estimate
    combined_se: np.ndarray
    worst_margin: float    # max over t of lhs - rhs (negative = comfortable)
    passed: bool


def delay_gap_check(records, config) -> DelayGapReport:
    """Checks E|X(t) - X(t-tau)|^2 <= 3 E I2(t) at every recorded time.

    Both sides are replication averages; the tolerance is three combined
    standard errors, so a flagged failure is statistically significant.
    """
    if len(records) < 2:
        raise ValueError("need at least 2 replications")
    m = len(records)
    gap = np.stack([r.delay_gap_sq for r in records])   # (M, n_rec)
    i2 = np.stack([r.i2_values for r in records])
    lhs = gap.mean(axis=0)
    rhs = 3.0 * i2.mean(axis=0)
    se_lhs = gap.std(axis=0, ddof=1) / math.sqrt(m)
    se_rhs = 3.0 * i2.std(axis=0, ddof=1) / math.sqrt(m)
    combined = np.sqrt(se_lhs**2 + se_rhs**2)
    margins = lhs - rhs
    passed = bool(np.all(lhs <= rhs + 3.0 * combined))
    return DelayGapReport(
        times=records[0].times,
        lhs=lhs,
        rhs=rhs,
        combined_se=combined,
        worst_margin=float(margins.max()),
        passed=passed,
    )


# ---------------------------------------------------------------------------
# Quadratic-functional generator and its integral identity


def generator_lu(x, x_delayed, m, model, control):
    """Per-particle own term 2<x, f(x,m) - alpha x_delayed> + |g|^2 + |g0|^2.

    For the quadratic functional |x|^2 + (conditional second moment), the
    full generator value of a particle is this term plus the particle
    average of the same terms.
    """
    x = np.asarray(x, dtype=float)
    scalar_input = x.ndim == 1
    x2 = np.atleast_2d(x)
    xd = np.atleast_2d(np.asarray(x_delayed, dtype=float))
    fa = model.drift(x2, m) - control.alpha * xd
    g = model.diffusion(x2, m)
    g0 = model.common_diffusion(x2, m)
    own = (
        2.0 * np.sum(x2 * fa, axis=1) + np.sum(g**2, axis=1) + np.sum(g0**2, axis=1)
    )
    return float(own[0]) if scalar_input else own


def generator_lu_full(states, delayed_states, model, control):
    """Full per-particle generator values: own term + ensemble average."""
    m = np.asarray(states).mean(axis=0)
    own = generator_lu(states, delayed_states, m, model, control)
    return own + own.mean()


@dataclass
class DynkinReport:
    lhs: float           # E U(T) - E U(0)
    rhs: float           # integral of the E LU estimate
    discrepancy: float
    std_error: float     # replication-level standard error of the discrepancy
    rel_discrepancy: float
    passed: bool


def dynkin_check(config, model, control, x0, n_workers: int = 1) -> DynkinReport:
    """Simulates and compares E U(T) - E U(0) with the time integral of E LU.

    U is |x|^2 plus the conditional second moment, so its full expectation
    is 2 E|X|^2 and the expected generator is twice the mean own term.
    """
    from .sim import NoisePlan, init_ensemble, step

    plan = NoisePlan(config.seed)
    n_steps = config.n_steps
    x0 = np.asarray(x0, dtype=float).reshape(-1)

    lhs_reps = np.empty(config.n_replications)
    rhs_reps = np.empty(config.n_replications)
    for rep in range(config.n_replications):
        dw = np.column_stack(
            [
                plan.idiosyncratic(rep, p, n_steps, config.dt)
                for p in range(config.n_particles)
            ]
        )
        dw0 = plan.common(rep, n_steps, config.dt)
        ens = init_ensemble(config, model, x0)
        u0 = 2.0 * float(np.mean(np.sum(ens.states**2, axis=1)))
        lu_integral = 0.0
        for n in range(n_steps):
            own = generator_lu(
                ens.states, ens.delayed_states, ens.states.mean(axis=0), model, control
            )
            lu_integral += config.dt * 2.0 * float(own.mean())
            step(ens, model, control, dw[n], dw0[n])
        u_t = 2.0 * float(np.mean(np.sum(ens.states**2, axis=1)))
        lhs_reps[rep] = u_t - u0
        rhs_reps[rep] = lu_integral

    lhs = float(lhs_reps.mean())
    rhs = float(rhs_reps.mean())
    disc = lhs_reps - rhs_reps
    se = float(disc.std(ddof=1) / math.sqrt(len(disc))) if len(disc) > 1 else 0.0
    d = float(disc.mean())
    rel = abs(d) / max(abs(lhs), 1e-300)
    passed = rel <= 0.05 or abs(d) <= 4.0 * se
    return DynkinReport(lhs, rhs, d, se, rel, passed)


# ---------------------------------------------------------------------------
# Lyapunov exponent and boundedness


POSITIVITY_FLOOR_FACTOR = 1e-12


@dataclass
class LyapunovFit:
    slope: float
    intercept: float
    window: tuple
    r_squared: float
    n_points: int


def lyapunov_fit(series, window_fraction: float = 0.5) -> LyapunovFit:
    """OLS fit of log E|X(t)|^2 over the trailing part of the horizon.

    Points below 1e-12 times the initial value are dropped: Monte Carlo
    means that small are dominated by rounding and ruin the fit.
    """
    if not 0 < window_fraction < 1:
        raise ValueError("window_fraction must lie in (0, 1)")
    times = np.asarray(series.times, dtype=float)
    values = np.asarray(series.values, dtype=float)
    t_hi = times[-1]
    t_lo = t_hi - window_fraction * (t_hi - times[0])
    floor = POSITIVITY_FLOOR_FACTOR * values[0]
    mask = (times >= t_lo) & (values > max(floor, 0.0))
    if mask.sum() < 10:
        raise InsufficientDataError(
            f"only {int(mask.sum())} usable points in the fit window"
        )
    t = times[mask]
    y = np.log(values[mask])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return LyapunovFit(
        slope=float(slope),
        intercept=float(intercept),
        window=(float(t_lo), float(t_hi)),
        r_squared=r2,
        n_points=int(mask.sum()),
    )


PLATEAU_RATIO = 1.25


@dataclass
class BoundednessReport:
    max_full: float
    max_post: float
    median_post: float
    ratio: float
    passed: bool


def boundedness_report(series, burn_in_fraction: float = 0.5) -> BoundednessReport:
    """Plateau heuristic for "bounded in mean square on [0, infinity)".

    Passes when the post-burn-in maximum stays within 25% of the
    post-burn-in median.  This is a qualitative desk check, not a bound.
    """
    if not 0 <= burn_in_fraction < 1:
        raise ValueError("burn_in_fraction must lie in [0, 1)")
    times = np.asarray(series.times, dtype=float)
    values = np.asarray(series.values, dtype=float)
    t_cut = times[0] + burn_in_fraction * (times[-1] - times[0])
    post = values[times >= t_cut]
    if len(post) < 20:
        raise InsufficientDataError("need at least 20 post-burn-in points")
    max_post = float(post.max())
    median_post = float(np.median(post))
    ratio = max_post / median_post if median_post > 0 else math.inf
    return BoundednessReport(
        max_full=float(values.max()),
        max_post=max_post,
        median_post=median_post,
        ratio=ratio,
        passed=ratio <= PLATEAU_RATIO,
    )
