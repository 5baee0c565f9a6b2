"""Interacting-particle Euler-Maruyama integrator with delayed feedback.

N particles share one common Brownian path per replication and carry
independent idiosyncratic paths; the conditional law is replaced by their
empirical measure.  The delay enters through a ring buffer of the last
k = delay_steps states, so tau is always an exact multiple of the step.

Noise is drawn from counter-based Philox streams keyed by
(seed, replication) for the common increments and
(seed, replication, particle) for the idiosyncratic ones, which makes every
output a pure function of the seed and the indices regardless of how
replications are scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .model import ControlParams, LinearMeanFieldModel


class BlowUpError(RuntimeError):
    """A particle state became non-finite."""

    def __init__(self, time: float, replication: int = None):
        self.time = time
        self.replication = replication
        where = "" if replication is None else f" (replication {replication})"
        super().__init__(f"non-finite state at t={time}{where}")


@dataclass
class SimConfig:
    n_particles: int
    n_replications: int
    dt: float
    horizon: float
    delay_steps: int = 0
    seed: int = 0
    record_stride: int = 1
    track_i2: bool = True

    def __post_init__(self):
        if self.n_particles < 1 or self.n_replications < 1:
            raise ValueError("n_particles and n_replications must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.horizon < self.dt:
            raise ValueError("horizon must be at least one step")
        if self.delay_steps < 0:
            raise ValueError("delay_steps must be nonnegative")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def tau(self) -> float:
        return self.delay_steps * self.dt

    @property
    def n_steps(self) -> int:
        return math.ceil(self.horizon / self.dt)


_COMMON_STREAM = 0
_IDIO_STREAM = 1 << 63
_INIT_STREAM = 1 << 62


@dataclass(frozen=True)
class NoisePlan:
    """Reproducible Gaussian increment streams, one per (replication, particle)."""

    seed: int

    def _generator(self, stream_id: int) -> np.random.Generator:
        key = np.array([self.seed, stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def idiosyncratic(self, replication: int, particle: int, n_steps: int, dt: float):
        if not (0 <= replication < 2**31 and 0 <= particle < 2**32):
            raise ValueError("replication/particle index out of range")
        gen = self._generator(_IDIO_STREAM | (replication << 32) | particle)
        return gen.standard_normal(n_steps) * math.sqrt(dt)

    def common(self, replication: int, n_steps: int, dt: float):
        gen = self._generator(_COMMON_STREAM | replication)
        return gen.standard_normal(n_steps) * math.sqrt(dt)

    def init_generator(self, replication: int) -> np.random.Generator:
        """Stream for randomized initial data, disjoint from the increments."""
        return self._generator(_INIT_STREAM | replication)


@dataclass
class ParticleEnsemble:
    states: np.ndarray      # (N, d)
    history: np.ndarray     # (k+1, N, d); slot n % (k+1) holds the state of step n
    step_index: int
    dt: float
    delay_steps: int

    @property
    def time(self) -> float:
        return self.step_index * self.dt

    @property
    def delayed_states(self) -> np.ndarray:
        k = self.delay_steps
        return self.history[(self.step_index - k) % (k + 1)]


@dataclass
class TrajectoryRecord:
    times: np.ndarray             # (n_rec,)
    particle_mean_sq: np.ndarray  # (n_rec,)
    particle_mean: np.ndarray     # (n_rec, d)
    i2_values: np.ndarray         # (n_rec,)
    delay_gap_sq: np.ndarray      # (n_rec,) particle average of |X(t)-X(t-tau)|^2
    sample_paths: np.ndarray = None      # (n_rec, n_paths) for 1-D models
    path_particles: tuple = ()


@dataclass
class MeanSquareSeries:
    """Monte Carlo estimate of t -> E|X(t)|^2 with replication-level errors."""

    times: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray
    n_replications: int
    grand_mean: np.ndarray = None  # (n_rec, d) mean over replications of particle means

    def __post_init__(self):
        if not (len(self.times) == len(self.values) == len(self.std_errors)):
            raise ValueError("times, values and std_errors must share length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


def init_ensemble(
    config: SimConfig,
    model: LinearMeanFieldModel,
    x0,
    initializer=None,
    rng: np.random.Generator = None,
) -> ParticleEnsemble:
    """All particles at x0 (and so is the whole delay history).

    `initializer(rng, n, d)` overrides the deterministic start; the caller
    is responsible for its moment condition.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (model.dim,):
        raise ValueError(f"x0 must have length {model.dim}")
    n, d, k = config.n_particles, model.dim, config.delay_steps
    if initializer is not None:
        states = np.asarray(initializer(rng, n, d), dtype=float).reshape(n, d)
    else:
        states = np.tile(x0, (n, 1))
    history = np.repeat(states[None, :, :], k + 1, axis=0)
    return ParticleEnsemble(states.copy(), history, 0, config.dt, k)


def step(
    ensemble: ParticleEnsemble,
    model: LinearMeanFieldModel,
    control: ControlParams,
    dw: np.ndarray,
    dw0: float,
) -> ParticleEnsemble:
    """One explicit Euler-Maruyama step.

    `dw` holds one scalar idiosyncratic increment per particle and `dw0`
    the single common increment shared by all of them.  The empirical mean
    is frozen at the pre-step states.
    """
    x = ensemble.states
    m = x.mean(axis=0)
    xd = ensemble.delayed_states
    drift = model.drift(x, m) - control.alpha * xd
    new = (
        x
        + drift * ensemble.dt
        + model.diffusion(x, m) * np.asarray(dw)[:, None]
        + model.common_diffusion(x, m) * dw0
    )
    if not np.all(np.isfinite(new)):
        raise BlowUpError(ensemble.time + ensemble.dt)
    ensemble.step_index += 1
    ensemble.history[ensemble.step_index % (ensemble.delay_steps + 1)] = new
    ensemble.states = new
    return ensemble


def _record_steps(config: SimConfig):
    n = config.n_steps
    steps = list(range(0, n + 1, config.record_stride))
    if steps[-1] != n:
        steps.append(n)
    return steps


def run_replication(
    config: SimConfig,
    model: LinearMeanFieldModel,
    control: ControlParams,
    x0,
    replication_index: int,
    noise_plan: NoisePlan = None,
    particle_streams=None,
    record_particles=(),
    initializer=None,
) -> TrajectoryRecord:
    """Drive one replication and record every record_stride-th step.

    `particle_streams` remaps particle i to the noise stream of another
    index (used to exercise exchangeability); `record_particles` selects
    1-D particle paths to keep for plotting.
    """
    if control.tau != config.tau:
        raise ValueError("control.tau must equal delay_steps * dt")
    plan = noise_plan or NoisePlan(config.seed)
    n, d, k = config.n_particles, model.dim, config.delay_steps
    n_steps = config.n_steps
    streams = list(particle_streams) if particle_streams is not None else list(range(n))
    if len(streams) != n:
        raise ValueError("particle_streams must have one entry per particle")

    dw = np.column_stack(
        [plan.idiosyncratic(replication_index, s, n_steps, config.dt) for s in streams]
    )  # (n_steps, N)
    dw0 = plan.common(replication_index, n_steps, config.dt)

    rng = plan.init_generator(replication_index) if initializer is not None else None
    ens = init_ensemble(config, model, x0, initializer=initializer, rng=rng)

    record_particles = tuple(record_particles)
    if record_particles and d != 1:
        raise ValueError("sample path recording is only supported for 1-D models")

    track_i2 = config.track_i2 and k > 0
    if track_i2:
        v0 = analysis.i2_integrand(ens.states, ens.delayed_states, model, control)
        window = [v0] * k  # integrand over [t - tau, t), constant before t=0

    record_at = set(_record_steps(config))
    times, msq, means, i2s, gaps, paths = [], [], [], [], [], []

    def record():
        x = ens.states
        xd = ens.delayed_states
        times.append(ens.time)
        msq.append(float(np.mean(np.sum(x**2, axis=1))))
        means.append(x.mean(axis=0))
        i2s.append(config.dt * sum(window) if track_i2 else 0.0)
        gaps.append(float(np.mean(np.sum((x - xd) ** 2, axis=1))))
        if record_particles:
            paths.append(x[list(record_particles), 0])

    try:
        for step_index in range(n_steps):
            if step_index in record_at:
                record()
            if track_i2:
                window.append(
                    analysis.i2_integrand(ens.states, ens.delayed_states, model, control)
                )
                del window[0]
            step(ens, model, control, dw[step_index], dw0[step_index])
        record()
    except BlowUpError as err:
        raise BlowUpError(err.time, replication_index) from None

    return TrajectoryRecord(
        times=np.array(times),
        particle_mean_sq=np.array(msq),
        particle_mean=np.array(means),
        i2_values=np.array(i2s),
        delay_gap_sq=np.array(gaps),
        sample_paths=np.array(paths) if record_particles else None,
        path_particles=record_particles,
    )


def run_replications(
    config: SimConfig,
    model: LinearMeanFieldModel,
    control: ControlParams,
    x0,
    n_workers: int = 1,
    record_paths=None,
    initializer=None,
):
    """All replications, optionally on a thread pool; output order is by index.

    `record_paths` maps replication index -> particle indices to record.
    """
    record_paths = record_paths or {}
    plan = NoisePlan(config.seed)

    def one(rep):
        return run_replication(
            config,
            model,
            control,
            x0,
            rep,
            noise_plan=plan,
            record_particles=record_paths.get(rep, ()),
            initializer=initializer,
        )

    reps = range(config.n_replications)
    if n_workers <= 1:
        return [one(r) for r in reps]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(one, reps))


def aggregate(records, config: SimConfig) -> MeanSquareSeries:
    """Mean over replications of the per-replication particle averages."""
    values = np.stack([r.particle_mean_sq for r in records])  # (M, n_rec)
    m = len(records)
    mean_vals = values.mean(axis=0)
    if m > 1:
        se = values.std(axis=0, ddof=1) / math.sqrt(m)
    else:
        se = np.zeros_like(mean_vals)
    grand_mean = np.stack([r.particle_mean for r in records]).mean(axis=0)
    return MeanSquareSeries(
        times=records[0].times,
        values=mean_vals,
        std_errors=se,
        n_replications=m,
        grand_mean=grand_mean,
    )


def run_monte_carlo(
    config: SimConfig,
    model: LinearMeanFieldModel,
    control: ControlParams,
    x0,
    n_workers: int = 1,
    initializer=None,
) -> MeanSquareSeries:
    records = run_replications(
        config, model, control, x0, n_workers=n_workers, initializer=initializer
    )
    return aggregate(records, config)
