"""End-to-end acceptance checks; each test prints one pass/fail verdict line."""

import json
import math
import time

import numpy as np
import pytest

from delaymv import analysis, bounds, cli, sim
from delaymv.model import ConstantsBundle, ControlParams, LinearMeanFieldModel, audit_constants

ALPHA, A, B, C, D = 22.0, 3.0, 11.0, 3.0, 11.0


def verdict(label: str, passed: bool, detail: str = ""):
    status = "PASS" if passed else "FAIL"
    print(f"[{status}] {label}{': ' + detail if detail else ''}")
    assert passed, f"{label} failed ({detail})"


def _bisect(fn, lo, hi, tol=1e-14):
    flo = fn(lo)
    assert flo < 0 < fn(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_criterion_01_threshold_reproduction():
    bounds.stabilization_thresholds(ALPHA, C, D)  # warm-up
    t0 = time.perf_counter()
    thr = bounds.stabilization_thresholds(ALPHA, C, D)
    elapsed = time.perf_counter() - t0
    ok = abs(thr.tau_double_star - 5.696e-4) / 5.696e-4 <= 5e-3 and elapsed < 1e-3
    verdict(
        "threshold reproduction",
        ok,
        f"tau** = {thr.tau_double_star:.6e} in {elapsed * 1e6:.0f} us",
    )


def test_criterion_02_rate_reproduction():
    bounds.decay_rate(5e-4, ALPHA, C, D)  # warm-up
    t0 = time.perf_counter()
    rate = bounds.decay_rate(5e-4, ALPHA, C, D)
    elapsed = time.perf_counter() - t0
    ok = abs(rate.gamma - 1.363) / 1.363 <= 1e-2 and elapsed < 1e-3
    verdict("rate reproduction", ok, f"gamma = {rate.gamma:.6f} in {elapsed * 1e6:.0f} us")


def test_criterion_03_root_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_rel, worst_bis = 0.0, 0.0
    for _ in range(100):
        a_, b_, c_, d_ = rng.uniform(0.5, 10.0, 4)
        c_ = min(a_, c_)
        d_ = min(b_, d_)
        alpha = max(b_, d_) * rng.uniform(1.1, 3.0)
        bt = bounds.boundedness_thresholds(alpha, a_, b_)
        st = bounds.stabilization_thresholds(alpha, c_, d_)

        worst_rel = max(
            worst_rel,
            abs(bounds.phi(bt.tau1, alpha) - 1 / 6) * 6,
            abs(bounds.psi(bt.tau2, alpha, a_) / ((alpha - b_) ** 2 / (6 * alpha**2)) - 1),
            abs(bounds.varphi(st.tau4, alpha, c_) / ((alpha - d_) ** 2 / (6 * alpha**2)) - 1),
        )
        worst_bis = max(
            worst_bis,
            abs(bt.tau1 - _bisect(lambda t: bounds.phi(t, alpha) - 1 / 6, 0.0, 1.0)),
            abs(
                bt.tau2
                - _bisect(
                    lambda t: bounds.psi(t, alpha, a_)
                    - (alpha - b_) ** 2 / (6 * alpha**2),
                    0.0,
                    1.0,
                )
            ),
            abs(
                st.tau4
                - _bisect(
                    lambda t: bounds.varphi(t, alpha, c_)
                    - (alpha - d_) ** 2 / (6 * alpha**2),
                    0.0,
                    1.0,
                )
            ),
        )
    elapsed = time.perf_counter() - t0
    ok = worst_rel <= 1e-10 and worst_bis <= 1e-12 and elapsed < 1.0
    verdict(
        "root consistency",
        ok,
        f"worst residual {worst_rel:.2e}, worst vs bisection {worst_bis:.2e}, {elapsed:.2f} s",
    )


def test_criterion_04_controlled_example_stability(controlled_run):
    config, _, records = controlled_run
    t0 = time.perf_counter()
    fit = analysis.lyapunov_fit(sim.aggregate(records, config))
    elapsed = time.perf_counter() - t0
    ok = fit.slope <= -1.363 and fit.r_squared >= 0.9 and elapsed < 60.0
    verdict(
        "controlled-example stability",
        ok,
        f"fitted exponent {fit.slope:.3f}, r^2 = {fit.r_squared:.3f}",
    )


def test_criterion_05_uncontrolled_instability(scalar_example):
    t0 = time.perf_counter()
    config = sim.SimConfig(
        n_particles=50, n_replications=50, dt=0.01, horizon=1.0, seed=20240501
    )
    series = sim.run_monte_carlo(config, scalar_example, ControlParams(0.0), [1.0])
    fit = analysis.lyapunov_fit(series)
    elapsed = time.perf_counter() - t0
    ok = fit.slope > 0 and series.values[-1] > series.values[0] and elapsed < 5.0
    verdict(
        "uncontrolled-example instability",
        ok,
        f"fitted exponent {fit.slope:.3f}, terminal/initial = "
        f"{series.values[-1] / series.values[0]:.1f}, {elapsed:.1f} s",
    )


def test_criterion_06_dynkin_identity():
    t0 = time.perf_counter()
    # deterministic oracle f(x) = -x: both sides computable exactly
    det = LinearMeanFieldModel(dim=1, a1=-1, a2=0, b1=0, b2=0, c1=0, c2=0)
    errs = {}
    for dt in (2e-3, 1e-3, 5e-4):
        cfg = sim.SimConfig(n_particles=1, n_replications=1, dt=dt, horizon=1.0)
        errs[dt] = abs(analysis.dynkin_check(cfg, det, ControlParams(0.0), [1.0]).discrepancy)
    ratios = [errs[2e-3] / errs[1e-3], errs[1e-3] / errs[5e-4]]
    rel_det = analysis.dynkin_check(
        sim.SimConfig(n_particles=1, n_replications=1, dt=1e-3, horizon=1.0),
        det,
        ControlParams(0.0),
        [1.0],
    ).rel_discrepancy

    # geometric common-noise oracle dX = X dW0: the per-replication
    # discrepancy is a mean-zero martingale sum, so the check is statistical
    geo = LinearMeanFieldModel(dim=1, a1=0, a2=0, b1=0, b2=0, c1=1, c2=0)
    cfg = sim.SimConfig(n_particles=2, n_replications=400, dt=1e-3, horizon=0.5, seed=31)
    geo_report = analysis.dynkin_check(cfg, geo, ControlParams(0.0), [1.0])

    elapsed = time.perf_counter() - t0
    ok = (
        rel_det <= 0.05
        and all(1.6 <= r <= 2.4 for r in ratios)
        and geo_report.passed
        and elapsed < 30.0
    )
    verdict(
        "Dynkin identity",
        ok,
        f"det rel err {rel_det:.2e}, refinement ratios "
        f"{ratios[0]:.2f}/{ratios[1]:.2f}, common-noise disc "
        f"{geo_report.discrepancy:+.3f} (se {geo_report.std_error:.3f})",
    )


def test_criterion_07_delay_gap(controlled_run):
    config, _, records = controlled_run
    report = analysis.delay_gap_check(records, config)
    verdict(
        "delay-gap inequality",
        report.passed,
        f"worst margin {report.worst_margin:.3e} over {len(report.times)} times",
    )


def test_criterion_08_closed_form_oracles():
    t0 = time.perf_counter()
    # pure common noise: E|X(1)|^2 = e up to Euler bias + MC error
    geo = LinearMeanFieldModel(dim=1, a1=0, a2=0, b1=0, b2=0, c1=1, c2=0)
    cfg = sim.SimConfig(n_particles=2, n_replications=400, dt=0.01, horizon=1.0, seed=6)
    series = sim.run_monte_carlo(cfg, geo, ControlParams(0.0), [1.0])
    euler_bias = abs(1.01**100 - math.e)
    mc_ok = abs(series.values[-1] - math.e) <= 3 * series.std_errors[-1] + euler_bias

    # deterministic ODE: terminal error within the analytic Euler bound
    a, T, dt = -2.0, 1.0, 0.005
    ode = LinearMeanFieldModel(dim=1, a1=a, a2=0, b1=0, b2=0, c1=0, c2=0)
    cfg = sim.SimConfig(n_particles=1, n_replications=1, dt=dt, horizon=T)
    rec = sim.run_replication(cfg, ode, ControlParams(0.0), [1.0], 0)
    err = abs(math.sqrt(rec.particle_mean_sq[-1]) - math.exp(a * T))
    ode_ok = err <= a**2 * T * dt * math.exp(abs(a) * T)

    # identical particles under common noise only: bit-exact degeneracy
    cfg = sim.SimConfig(n_particles=8, n_replications=1, dt=1e-3, horizon=1.0, seed=3)
    plan = sim.NoisePlan(cfg.seed)
    dw0 = plan.common(0, 1000, cfg.dt)
    ens = sim.init_ensemble(cfg, geo, [1.0])
    degenerate = True
    for n in range(1000):
        sim.step(ens, geo, ControlParams(0.0), np.zeros(8), dw0[n])
        degenerate &= bool(np.all(ens.states == ens.states[0, 0]))

    elapsed = time.perf_counter() - t0
    ok = mc_ok and ode_ok and degenerate and elapsed < 60.0
    verdict(
        "closed-form oracles",
        ok,
        f"E|X(1)|^2 = {series.values[-1]:.3f} vs e, ODE err {err:.2e}, "
        f"degeneracy {'held' if degenerate else 'broken'}",
    )


def test_criterion_09_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = {
        "model": {"dim": 1, "a1": 3.0, "a2": 1.0, "b1": 1.0, "b2": 1.0, "c1": 1.0, "c2": 1.0},
        "constants": {"L": 3.0, "A": 3.0, "B": 11.0, "C": 3.0, "D": 11.0},
        "control": {"alpha": 22.0, "delay_steps": 1},
        "sim": {
            "n_particles": 20,
            "n_replications": 10,
            "dt": 5e-4,
            "horizon": 0.2,
            "seed": 7,
            "x0": 1.0,
            "record_paths": 4,
            "record_stride": 10,
        },
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    outs = {}
    for name, extra in [("a", []), ("b", []), ("t8", ["--threads", "8"])]:
        out = tmp_path / name
        assert cli.main(["--out", str(out), *extra, "simulate", "--config", str(path)]) == 0
        outs[name] = (
            (out / "run_meansq.csv").read_bytes(),
            (out / "run_paths.csv").read_bytes(),
        )
    elapsed = time.perf_counter() - t0
    ok = outs["a"] == outs["b"] == outs["t8"] and elapsed < 60.0
    verdict("determinism", ok, "byte-identical CSVs across reruns and --threads 1 vs 8")


def test_criterion_10_particle_convergence(scalar_example):
    t0 = time.perf_counter()
    dt, n_steps, m_reps = 0.01, 100, 20
    a_sum = 3.0 + 1.0   # drift coefficients of the conditional-mean recursion
    c_sum = 1.0 + 1.0
    ctl = ControlParams(0.0)

    def rms_dev(n_particles: int) -> float:
        cfg = sim.SimConfig(
            n_particles=n_particles,
            n_replications=m_reps,
            dt=dt,
            horizon=1.0,
            seed=42,
            track_i2=False,
        )
        plan = sim.NoisePlan(cfg.seed)
        total = 0.0
        for rep in range(m_reps):
            rec = sim.run_replication(cfg, scalar_example, ctl, [1.0], rep, noise_plan=plan)
            dw0 = plan.common(rep, n_steps, dt)
            ref = np.empty(n_steps + 1)
            ref[0] = 1.0
            for n in range(n_steps):
                ref[n + 1] = ref[n] * (1.0 + a_sum * dt + c_sum * dw0[n])
            total += math.sqrt(np.mean((rec.particle_mean[:, 0] - ref) ** 2))
        return total / m_reps

    dev_small, dev_large = rms_dev(64), rms_dev(1024)
    elapsed = time.perf_counter() - t0
    ok = dev_large < dev_small and elapsed < 120.0
    verdict(
        "particle convergence",
        ok,
        f"RMS deviation {dev_small:.4f} (N=64) -> {dev_large:.4f} (N=1024), {elapsed:.1f} s",
    )


def test_criterion_11_boundedness_surrogate():
    t0 = time.perf_counter()
    # affine scalar model dx = (x + 1) dt + dW
    model = LinearMeanFieldModel(dim=1, a1=1, a2=0, b1=0, b2=0, c1=0, c2=0, f0=1.0, g0v=1.0)
    bundle = ConstantsBundle(L=1.0, A=1.0, B=3.0)
    audit = audit_constants(model, bundle, radius=10.0, samples=2000, seed=5)

    alpha = 4.0
    thr = bounds.boundedness_thresholds(alpha, bundle.A, bundle.B)
    dt = 8e-4
    assert dt < thr.tau_star

    def run(gain: float):
        cfg = sim.SimConfig(
            n_particles=128,
            n_replications=8,
            dt=dt,
            horizon=20.0,
            delay_steps=1,
            seed=12,
            record_stride=25,
            track_i2=False,
        )
        ctl = ControlParams(alpha=gain, tau=cfg.tau if gain > 0 else 0.0)
        if gain == 0.0:
            cfg = sim.SimConfig(
                n_particles=128,
                n_replications=8,
                dt=dt,
                horizon=20.0,
                seed=12,
                record_stride=25,
                track_i2=False,
            )
        series = sim.run_monte_carlo(cfg, model, ctl, [1.0])
        return analysis.boundedness_report(series)

    controlled = run(alpha)
    uncontrolled = run(0.0)
    elapsed = time.perf_counter() - t0
    ok = audit.passed and controlled.passed and not uncontrolled.passed and elapsed < 120.0
    verdict(
        "boundedness surrogate",
        ok,
        f"plateau ratio {controlled.ratio:.3f} with gain, "
        f"{uncontrolled.ratio:.3g} without, {elapsed:.1f} s",
    )
