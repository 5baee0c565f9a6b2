"""Command line front end: config ingestion, CSV emission, worked example.

Exit status contract: 0 success, 1 check failure, 2 configuration error,
3 numerical blow-up.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, bounds, sim
from .model import ConstantsBundle, ControlParams, LinearMeanFieldModel, audit_constants

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3


class ConfigError(ValueError):
    pass


# Worked scalar example: dy = (3y + E1[y]) dt + (y + E1[y]) dW + (y + E1[y]) dW0,
# feedback gain 22 with one-step delay 5e-4; figures use 50 particles,
# 50 replications, y(0) = 1.
EXAMPLE = {
    "model": {"dim": 1, "a1": 3.0, "a2": 1.0, "b1": 1.0, "b2": 1.0, "c1": 1.0, "c2": 1.0},
    "constants": {"L": 3.0, "A": 3.0, "B": 11.0, "C": 3.0, "D": 11.0},
    "alpha": 22.0,
    "x0": 1.0,
    "n_particles": 50,
    "n_replications": 50,
    "uncontrolled": {"dt": 0.01, "horizon": 1.0},
    "controlled": {"dt": 5e-4, "horizon": 0.6, "delay_steps": 1},
    "n_sample_paths": 4,
    "seed": 20240501,
}


# ---------------------------------------------------------------------------
# Config ingestion

_SECTION_KEYS = {
    "model": {"dim", "a1", "a2", "b1", "b2", "c1", "c2", "f0", "g0v", "g00v"},
    "constants": {"L", "A", "B", "C", "D"},
    "control": {"alpha", "delay_steps"},
    "sim": {
        "n_particles",
        "n_replications",
        "dt",
        "horizon",
        "seed",
        "record_stride",
        "x0",
        "record_paths",
        "track_i2",
    },
    "output": {"directory", "prefix"},
    "checks": {
        "suite",
        "audit_radius",
        "audit_samples",
        "burn_in_fraction",
        "window_fraction",
    },
}


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"malformed JSON in {path}: {err}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    for section, body in cfg.items():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section '{section}'")
        if not isinstance(body, dict):
            raise ConfigError(f"section '{section}' must be a JSON object")
        for key in body:
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"unknown key '{key}' in section '{section}'")
    return cfg


def _require(cfg: dict, section: str) -> dict:
    if section not in cfg:
        raise ConfigError(f"missing config section '{section}'")
    return cfg[section]


def model_from_config(cfg: dict) -> LinearMeanFieldModel:
    body = dict(_require(cfg, "model"))
    if "dim" not in body:
        raise ConfigError("model section requires 'dim'")
    try:
        return LinearMeanFieldModel(**body)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid model section: {err}") from None


def constants_from_config(cfg: dict) -> ConstantsBundle:
    body = _require(cfg, "constants")
    try:
        return ConstantsBundle(**body)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"invalid constants section: {err}") from None


def control_from_config(cfg: dict, dt: float) -> ControlParams:
    body = _require(cfg, "control")
    if "alpha" not in body:
        raise ConfigError("control section requires 'alpha'")
    delay_steps = int(body.get("delay_steps", 0))
    try:
        return ControlParams(alpha=float(body["alpha"]), tau=delay_steps * dt)
    except ValueError as err:
        raise ConfigError(f"invalid control section: {err}") from None


def sim_config_from_config(cfg: dict, seed_override=None) -> sim.SimConfig:
    body = _require(cfg, "sim")
    control = _require(cfg, "control")
    for key in ("n_particles", "n_replications", "dt", "horizon", "seed"):
        if key not in body:
            raise ConfigError(f"sim section requires '{key}'")
    try:
        return sim.SimConfig(
            n_particles=int(body["n_particles"]),
            n_replications=int(body["n_replications"]),
            dt=float(body["dt"]),
            horizon=float(body["horizon"]),
            delay_steps=int(control.get("delay_steps", 0)),
            seed=int(seed_override if seed_override is not None else body["seed"]),
            record_stride=int(body.get("record_stride", 1)),
            track_i2=bool(body.get("track_i2", True)),
        )
    except ValueError as err:
        raise ConfigError(f"invalid sim section: {err}") from None


def x0_from_config(cfg: dict, dim: int) -> np.ndarray:
    body = _require(cfg, "sim")
    if "x0" not in body:
        raise ConfigError("sim section requires 'x0'")
    x0 = np.asarray(body["x0"], dtype=float).reshape(-1)
    if x0.shape != (dim,):
        raise ConfigError(f"x0 must have length {dim}")
    return x0


def effective_config(cfg: dict, config: sim.SimConfig) -> dict:
    """The ingested config with every sim default made explicit."""
    out = {k: dict(v) for k, v in cfg.items()}
    out["sim"].update(
        {
            "n_particles": config.n_particles,
            "n_replications": config.n_replications,
            "dt": config.dt,
            "horizon": config.horizon,
            "seed": config.seed,
            "record_stride": config.record_stride,
            "track_i2": config.track_i2,
        }
    )
    out.setdefault("control", {}).setdefault("delay_steps", config.delay_steps)
    return out


# ---------------------------------------------------------------------------
# CSV emission


def _fmt(x) -> str:
    return repr(float(x))


def write_meansq_csv(path, series: sim.MeanSquareSeries, aborted_at=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,mean_sq,std_err,n_reps\n")
        if series is not None:
            for t, v, se in zip(series.times, series.values, series.std_errors):
                fh.write(f"{_fmt(t)},{_fmt(v)},{_fmt(se)},{series.n_replications}\n")
        if aborted_at is not None:
            fh.write(f"# ABORTED t={_fmt(aborted_at)}\n")


def write_paths_csv(path, records, aborted_at=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,rep,particle,value\n")
        for rep, rec in enumerate(records):
            if rec.sample_paths is None:
                continue
            for i, t in enumerate(rec.times):
                for j, particle in enumerate(rec.path_particles):
                    fh.write(f"{_fmt(t)},{rep},{particle},{_fmt(rec.sample_paths[i, j])}\n")
        if aborted_at is not None:
            fh.write(f"# ABORTED t={_fmt(aborted_at)}\n")


def _write_record(path, record: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommands


def _path_assignment(n_paths: int, config: sim.SimConfig) -> dict:
    """First n (rep, particle) pairs, particles first within a replication."""
    assignment = {}
    count = 0
    for rep in range(config.n_replications):
        if count >= n_paths:
            break
        take = min(config.n_particles, n_paths - count)
        assignment[rep] = tuple(range(take))
        count += take
    return assignment


def cmd_bounds(cfg: dict, out_dir: Path, prefix: str) -> int:
    consts = constants_from_config(cfg)
    control_body = _require(cfg, "control")
    if "alpha" not in control_body:
        raise ConfigError("control section requires 'alpha'")
    alpha = float(control_body["alpha"])
    delay_steps = int(control_body.get("delay_steps", 0))
    dt = float(cfg.get("sim", {}).get("dt", 0.0))
    tau = delay_steps * dt

    record = {"alpha": alpha, "tau": tau}
    lines = [f"alpha = {alpha}", f"tau   = {tau}"]

    try:
        bt = bounds.boundedness_thresholds(alpha, consts.A, consts.B)
    except ValueError as err:
        raise ConfigError(
            f"{err}; raise alpha above B={consts.B} to apply the boundedness theorem"
        ) from None
    zeta_b, sigma_b = bounds.lyapunov_weights(alpha, consts.B)
    record.update(
        tau1=bt.tau1,
        tau2=bt.tau2,
        tau_star=bt.tau_star,
        boundedness_binding=bt.binding,
        zeta_boundedness=zeta_b,
        sigma_boundedness=sigma_b,
    )
    lines += [
        f"tau1  = {bt.tau1:.6e}",
        f"tau2  = {bt.tau2:.6e}",
        f"tau*  = {bt.tau_star:.6e}  (binding: {bt.binding})",
        f"zeta  = {zeta_b:.6g}, sigma = {sigma_b:.6g}  (boundedness weights)",
    ]

    if consts.C is not None and consts.D is not None:
        try:
            st = bounds.stabilization_thresholds(alpha, consts.C, consts.D)
        except ValueError as err:
            raise ConfigError(
                f"{err}; raise alpha above D={consts.D} to apply the "
                "stabilization theorem"
            ) from None
        zeta_d, sigma_d = bounds.lyapunov_weights(alpha, consts.D)
        record.update(
            tau3=st.tau3,
            tau4=st.tau4,
            tau_double_star=st.tau_double_star,
            stabilization_binding=st.binding,
            zeta_stabilization=zeta_d,
            sigma_stabilization=sigma_d,
        )
        lines += [
            f"tau3  = {st.tau3:.6e}",
            f"tau4  = {st.tau4:.6e}",
            f"tau** = {st.tau_double_star:.6e}  (binding: {st.binding})",
            f"zeta  = {zeta_d:.6g}, sigma = {sigma_d:.6g}  (stabilization weights)",
        ]
        if 0.0 < tau < st.tau_double_star:
            rate = bounds.decay_rate(tau, alpha, consts.C, consts.D)
            record.update(gamma=rate.gamma, gamma_branch=rate.branch)
            lines.append(f"gamma = {rate.gamma:.6g}  (branch: {rate.branch})")

    print("\n".join(lines))
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_record(out_dir / f"{prefix}_bounds.json", record)
    return EXIT_OK


def cmd_simulate(cfg: dict, out_dir: Path, prefix: str, seed_override, n_workers) -> int:
    model = model_from_config(cfg)
    config = sim_config_from_config(cfg, seed_override)
    control = control_from_config(cfg, config.dt)
    x0 = x0_from_config(cfg, model.dim)
    n_paths = int(cfg.get("sim", {}).get("record_paths", 0))
    record_paths = _path_assignment(n_paths, config) if n_paths else {}

    out_dir.mkdir(parents=True, exist_ok=True)
    meansq_path = out_dir / f"{prefix}_meansq.csv"
    paths_path = out_dir / f"{prefix}_paths.csv"

    plan = sim.NoisePlan(config.seed)
    records = []
    aborted_at = None
    try:
        if n_workers <= 1:
            for rep in range(config.n_replications):
                records.append(
                    sim.run_replication(
                        config,
                        model,
                        control,
                        x0,
                        rep,
                        noise_plan=plan,
                        record_particles=record_paths.get(rep, ()),
                    )
                )
        else:
            records = sim.run_replications(
                config, model, control, x0, n_workers=n_workers, record_paths=record_paths
            )
    except sim.BlowUpError as err:
        aborted_at = err.time
        print(f"blow-up in replication {err.replication} at t={err.time}", file=sys.stderr)

    series = sim.aggregate(records, config) if records else None
    write_meansq_csv(meansq_path, series, aborted_at=aborted_at)
    if n_paths:
        write_paths_csv(paths_path, records, aborted_at=aborted_at)
    _write_record(
        out_dir / f"{prefix}_config.json", effective_config(cfg, config)
    )
    return EXIT_OK if aborted_at is None else EXIT_BLOWUP


def cmd_check(cfg: dict, seed_override, n_workers) -> int:
    model = model_from_config(cfg)
    config = sim_config_from_config(cfg, seed_override)
    control = control_from_config(cfg, config.dt)
    x0 = x0_from_config(cfg, model.dim)
    checks_cfg = cfg.get("checks", {})
    suite = checks_cfg.get("suite", ["audit", "delay_gap", "dynkin"])

    verdicts = []

    def report(name, passed, detail=""):
        verdicts.append(passed)
        status = "PASS" if passed else "FAIL"
        print(f"[{status}] {name}{': ' + detail if detail else ''}")

    records = None
    for name in suite:
        if name == "audit":
            consts = constants_from_config(cfg)
            radius = float(checks_cfg.get("audit_radius", 10.0))
            samples = int(checks_cfg.get("audit_samples", 2000))
            rep = audit_constants(model, consts, radius, samples, config.seed)
            for check in rep.checks.values():
                report(
                    f"audit/{check.name}",
                    check.passed,
                    f"worst ratio {check.worst_ratio:.4g}",
                )
        elif name == "delay_gap":
            if records is None:
                records = sim.run_replications(
                    config, model, control, x0, n_workers=n_workers
                )
            gap = analysis.delay_gap_check(records, config)
            report("delay_gap", gap.passed, f"worst margin {gap.worst_margin:.4g}")
        elif name == "dynkin":
            dyn = analysis.dynkin_check(config, model, control, x0)
            report(
                "dynkin",
                dyn.passed,
                f"relative discrepancy {dyn.rel_discrepancy:.4g}",
            )
        elif name == "boundedness":
            if records is None:
                records = sim.run_replications(
                    config, model, control, x0, n_workers=n_workers
                )
            series = sim.aggregate(records, config)
            burn = float(checks_cfg.get("burn_in_fraction", 0.5))
            rep = analysis.boundedness_report(series, burn)
            report("boundedness", rep.passed, f"plateau ratio {rep.ratio:.4g}")
        else:
            raise ConfigError(f"unknown check '{name}' in checks.suite")

    return EXIT_OK if all(verdicts) else EXIT_CHECK_FAILED


def _example_run(which: str, seed: int, n_workers: int):
    ex = EXAMPLE
    model = LinearMeanFieldModel(**ex["model"])
    section = ex[which]
    delay_steps = section.get("delay_steps", 0)
    config = sim.SimConfig(
        n_particles=ex["n_particles"],
        n_replications=ex["n_replications"],
        dt=section["dt"],
        horizon=section["horizon"],
        delay_steps=delay_steps,
        seed=seed,
        record_stride=1,
    )
    alpha = ex["alpha"] if which == "controlled" else 0.0
    control = ControlParams(alpha=alpha, tau=config.tau)
    record_paths = _path_assignment(ex["n_sample_paths"], config)
    records = sim.run_replications(
        config,
        model,
        control,
        [ex["x0"]],
        n_workers=n_workers,
        record_paths=record_paths,
    )
    return config, records, sim.aggregate(records, config)


def cmd_reproduce_example(out_dir: Path, seed_override, n_workers) -> int:
    seed = int(seed_override) if seed_override is not None else EXAMPLE["seed"]
    out_dir.mkdir(parents=True, exist_ok=True)

    for which in ("uncontrolled", "controlled"):
        config, records, series = _example_run(which, seed, n_workers)
        write_meansq_csv(out_dir / f"{which}_meansq.csv", series)
        write_paths_csv(out_dir / f"{which}_paths.csv", records)
        if which == "controlled":
            fit = analysis.lyapunov_fit(series)

    consts = EXAMPLE["constants"]
    alpha = EXAMPLE["alpha"]
    tau = EXAMPLE["controlled"]["delay_steps"] * EXAMPLE["controlled"]["dt"]
    st = bounds.stabilization_thresholds(alpha, consts["C"], consts["D"])
    rate = bounds.decay_rate(tau, alpha, consts["C"], consts["D"])
    summary = {
        "alpha": alpha,
        "tau": tau,
        "tau_double_star": st.tau_double_star,
        "gamma": rate.gamma,
        "fitted_exponent": fit.slope,
        "fit_r_squared": fit.r_squared,
        "seed": seed,
    }
    _write_record(out_dir / "summary.json", summary)
    print(
        f"tau** = {st.tau_double_star:.4e}, gamma = {rate.gamma:.4f}, "
        f"fitted exponent = {fit.slope:.4f} (r^2 = {fit.r_squared:.4f})"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delaymv",
        description="Delay-feedback control of mean-field SDEs with common noise",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    parser.add_argument(
        "--threads", type=int, default=1, help="worker threads (does not change outputs)"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("bounds", "simulate", "check"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
    sub.add_parser("reproduce-example")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "reproduce-example":
            out_dir = Path(args.out or "reproduce-example")
            return cmd_reproduce_example(out_dir, args.seed, args.threads)

        cfg = load_config(args.config)
        out_body = cfg.get("output", {})
        out_dir = Path(args.out or out_body.get("directory", "."))
        prefix = out_body.get("prefix", "run")
        if args.command == "bounds":
            return cmd_bounds(cfg, out_dir, prefix)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir, prefix, args.seed, args.threads)
        if args.command == "check":
            return cmd_check(cfg, args.seed, args.threads)
        raise AssertionError(args.command)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except sim.BlowUpError as err:
        print(f"numerical blow-up: {err}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
