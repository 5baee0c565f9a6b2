"""Linear mean-field coefficient family and numerical audits of its constants.

The built-in coefficients are affine in the state x and in the mean m of the
conditional law:

    drift(x, m)            = a1 x + a2 m + f0
    diffusion(x, m)        = b1 x + b2 m + g0v     (idiosyncratic noise, scalar)
    common_diffusion(x, m) = c1 x + c2 m + g00v    (common noise, scalar)

With zero offsets the family is positively homogeneous and vanishes at
(0, delta_0).  The structural constants (Lipschitz L, growth A/B and their
homogeneous counterparts C/D) are supplied by the user and audited by
sampling; a failed audit proves a constant wrong, a passed one does not
prove it right.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measure import EmpiricalMeasure, mean as measure_mean, second_moment, w2_1d


def _as_matrix(value, dim: int, name: str) -> np.ndarray:
    m = np.asarray(value, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim == 1 and m.size == dim * dim:
        m = m.reshape(dim, dim)
    if m.shape != (dim, dim):
        raise ValueError(f"{name} must be {dim}x{dim}, got shape {m.shape}")
    return m


def _as_vector(value, dim: int, name: str) -> np.ndarray:
    v = np.asarray(value, dtype=float).reshape(-1)
    if v.shape != (dim,):
        raise ValueError(f"{name} must have length {dim}, got shape {v.shape}")
    return v


@dataclass
class LinearMeanFieldModel:
    dim: int
    a1: np.ndarray
    a2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    f0: np.ndarray = None
    g0v: np.ndarray = None
    g00v: np.ndarray = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        for name in ("a1", "a2", "b1", "b2", "c1", "c2"):
            setattr(self, name, _as_matrix(getattr(self, name), self.dim, name))
        for name in ("f0", "g0v", "g00v"):
            v = getattr(self, name)
            if v is None:
                v = np.zeros(self.dim)
            setattr(self, name, _as_vector(v, self.dim, name))

    @property
    def has_offsets(self) -> bool:
        return bool(np.any(self.f0) or np.any(self.g0v) or np.any(self.g00v))

    def _affine(self, mat_x, mat_m, off, x, m):
        x = np.asarray(x, dtype=float)
        m = np.asarray(m, dtype=float)
        if x.shape[-1] != self.dim or m.shape != (self.dim,):
            raise ValueError(
                f"state/mean dimension mismatch: expected {self.dim}, "
                f"got x{x.shape} m{m.shape}"
            )
        return x @ mat_x.T + m @ mat_m.T + off

    def drift(self, x, m):
        return self._affine(self.a1, self.a2, self.f0, x, m)

    def diffusion(self, x, m):
        return self._affine(self.b1, self.b2, self.g0v, x, m)

    def common_diffusion(self, x, m):
        return self._affine(self.c1, self.c2, self.g00v, x, m)


def eval_drift(model: LinearMeanFieldModel, x, m) -> np.ndarray:
    return model.drift(x, m)


def eval_diffusion(model: LinearMeanFieldModel, x, m) -> np.ndarray:
    return model.diffusion(x, m)


def eval_common_diffusion(model: LinearMeanFieldModel, x, m) -> np.ndarray:
    return model.common_diffusion(x, m)


@dataclass
class ControlParams:
    """Feedback gain and response lag of the control term -alpha * x(t - tau)."""

    alpha: float
    tau: float = 0.0

    def __post_init__(self):
        # alpha == 0 switches the control off (uncontrolled runs); the
        # threshold formulas themselves require a strictly positive gain.
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")


@dataclass
class ConstantsBundle:
    """User-supplied structural constants; C and D apply to zero-offset models."""

    L: float
    A: float
    B: float
    C: float = None
    D: float = None

    def __post_init__(self):
        for name in ("L", "A", "B"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("C", "D"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be strictly positive")
        # The homogeneous bounds imply the affine ones with the same constant.
        if self.C is not None and self.C > self.A:
            raise ValueError("C must not exceed A")
        if self.D is not None and self.D > self.B:
            raise ValueError("D must not exceed B")


@dataclass
class AuditCheck:
    name: str
    passed: bool
    worst_ratio: float
    n_checked: int


@dataclass
class AuditReport:
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def __getitem__(self, name: str) -> AuditCheck:
        return self.checks[name]


_RATIO_SLACK = 1e-9


def _ball_point(rng, dim, radius):
    v = rng.standard_normal(dim)
    norm = np.linalg.norm(v)
    if norm == 0:
        return np.zeros(dim)
    return v / norm * radius * rng.random() ** (1.0 / dim)


def audit_constants(
    model: LinearMeanFieldModel,
    bundle: ConstantsBundle,
    radius: float,
    samples: int,
    seed: int,
    n_atoms: int = 8,
) -> AuditReport:
    """Sample-based audit of the structural inequalities.

    Points are drawn in the ball of the given radius.  In dimension 1 the
    measure arguments are discrete measures with `n_atoms` atoms and the
    Wasserstein distances are exact (sorted coupling); in higher dimension
    the measures are restricted to Dirac pairs, for which W2 is a plain
    Euclidean distance.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    d = model.dim

    worst = {}
    counts = {}

    def observe(name, lhs, rhs):
        if rhs <= 0:
            if lhs <= 0:
                return
            ratio = np.inf
        else:
            ratio = lhs / rhs
        worst[name] = max(worst.get(name, 0.0), ratio)
        counts[name] = counts.get(name, 0) + 1

    check_homog = bundle.C is not None or bundle.D is not None

    for _ in range(samples):
        x = _ball_point(rng, d, radius)
        y = _ball_point(rng, d, radius)
        if d == 1:
            mu = EmpiricalMeasure(rng.uniform(-radius, radius, n_atoms))
            nu = EmpiricalMeasure(rng.uniform(-radius, radius, n_atoms))
            w_mu_nu = w2_1d(mu, nu)
            w_mu_0 = np.sqrt(second_moment(mu))
        else:
            mu = EmpiricalMeasure(_ball_point(rng, d, radius)[None, :])
            nu = EmpiricalMeasure(_ball_point(rng, d, radius)[None, :])
            w_mu_nu = float(np.linalg.norm(mu.samples[0] - nu.samples[0]))
            w_mu_0 = float(np.linalg.norm(mu.samples[0]))
        m_mu = measure_mean(mu)
        m_nu = measure_mean(nu)

        f_x = model.drift(x, m_mu)
        g_x = model.diffusion(x, m_mu)
        g0_x = model.common_diffusion(x, m_mu)
        f_y = model.drift(y, m_nu)
        g_y = model.diffusion(y, m_nu)
        g0_y = model.common_diffusion(y, m_nu)

        lip_lhs = max(
            np.linalg.norm(f_x - f_y),
            np.linalg.norm(g_x - g_y),
            np.linalg.norm(g0_x - g0_y),
        )
        observe("lipschitz", lip_lhs, bundle.L * (np.linalg.norm(x - y) + w_mu_nu))

        growth_lhs = max(
            np.linalg.norm(f_x), np.linalg.norm(g_x), np.linalg.norm(g0_x)
        )
        xn = np.linalg.norm(x)
        observe("linear_growth", growth_lhs, bundle.A * (1 + xn + w_mu_0))

        mono_lhs = (
            2 * float(x @ f_x) + float(g_x @ g_x) + float(g0_x @ g0_x)
        )
        observe("monotone_growth", mono_lhs, bundle.B * (1 + xn**2 + w_mu_0**2))

        if check_homog:
            if bundle.C is not None:
                observe("homogeneous_growth", growth_lhs, bundle.C * (xn + w_mu_0))
            if bundle.D is not None:
                observe(
                    "homogeneous_monotone", mono_lhs, bundle.D * (xn**2 + w_mu_0**2)
                )

    checks = {
        name: AuditCheck(
            name, bool(worst[name] <= 1.0 + _RATIO_SLACK), float(worst[name]), counts[name]
        )
        for name in worst
    }
    return AuditReport(checks)
