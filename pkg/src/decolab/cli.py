"""Command-line entry point: experiments in, CSV summaries and figures out.

Exit codes: 0 success, 2 configuration error, 3 runtime abort.  All CSV
numbers are written in scientific notation with 17 significant digits so
identical configurations reproduce byte-identical files.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config_file, load_preset
from .errors import (ConfigurationError, DomainError, RunTooShortError,
                     StateDiagnosticError, TraceDriftError)
from .evolution import (MAX_STEP_PHASE, DecoherenceCoefficient, Evolver,
                        EvolutionConfig)
from .grids import DensityGrid, save_density
from .measurement import (SystemState, evolve_joint, impulsive_coupling,
                          prepared_apparatus)
from .observables import (Trajectory, fit_exponential_rate,
                          measure_timescales, standard_probes)
from .states import cat_state, gaussian_packet, pure_density
from .timescales import (PhysicalParams, classical_limit_sweep,
                         decoherence_time, popular_thermal_wavelength,
                         thermal_de_broglie)

ALLOWED_SWEEP_N = (2, 3, 4, 6, 8)


def _fmt(x) -> str:
    return f"{float(x):.16e}"


def _echo(cfg: RunConfig, command: str) -> str:
    return f"decolab {__version__} | cmd = {command}; {cfg.echo()}"


def _write_csv(path: Path, echo: str, columns, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {echo}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(cell if isinstance(cell, str) else _fmt(cell)
                              for cell in row) + "\n")


def _map_ordered(fn, items, workers: int):
    """Apply fn to items, in parallel if asked; results keep input order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, item) for item in items]
        return [f.result() for f in futures]


# -- timescales --------------------------------------------------------------

def cmd_timescales(cfg: RunConfig, args) -> int:
    params = cfg.physical_params(need_gamma=False)
    delta_x = cfg.require("timescales.delta_x")
    tau = cfg.get("timescales.tau")
    if tau is None:
        if not params.gamma > 0.0:
            raise ConfigurationError(
                "need timescales.tau or a positive physical.gamma")
        tau = 1.0 / (2.0 * params.gamma)
    lam = thermal_de_broglie(params)
    lam_pop = popular_thermal_wavelength(params)
    theta = decoherence_time(tau, delta_x, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "timescales.csv", _echo(cfg, "timescales"),
               ["lambda_db_m", "lambda_popular_m", "theta_s", "tau_s",
                "theta_over_tau"],
               [(lam, lam_pop, theta, tau, theta / tau)])
    print(f"thermal coherence length = {_fmt(lam)} m")
    print(f"popular thermal wavelength = {_fmt(lam_pop)} m")
    print(f"coherence time theta = {_fmt(theta)} s")
    print(f"relaxation time tau = {_fmt(tau)} s")
    print(f"theta / tau = {_fmt(theta / tau)}")
    return 0


# -- evolve ------------------------------------------------------------------

def _probe_names(rho0) -> list[str]:
    names = ["purity", "p_expect", "x_variance"]
    if rho0.cat_info is not None:
        names.insert(0, "coherence")
    return sorted([*names, "trace"])


def cmd_evolve(cfg: RunConfig, args) -> int:
    grid = cfg.spatial_grid()
    params = cfg.physical_params()
    rho0 = cfg.initial_state(grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "trajectory.csv"
    echo = _echo(cfg, "evolve")

    n_steps = cfg.require("evolution.n_steps")
    if n_steps == 0:
        # Degenerate request: emit the schema and do no work.
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(f"# {echo}\n")
            fh.write(",".join(["time_s", *_probe_names(rho0)]) + "\n")
        print(f"wrote {csv_path} (no steps requested)")
        return 0

    config = cfg.evolution_config()
    delta_x = rho0.cat_info.delta_x if rho0.cat_info else None
    probes = standard_probes(params, delta_x=delta_x)
    checkpoint_every = cfg.get("evolution.checkpoint_every", 0)
    evolver = Evolver(grid, params, config)
    h = grid.spacing
    times, cols = [], {p.name: [] for p in probes}
    cols["trace"] = []

    def on_sample(t, values, tr):
        rho = DensityGrid(grid, values, rho0.cat_info)
        times.append(t)
        for p in probes:
            cols[p.name].append(float(p.fn(rho)))
        cols["trace"].append(tr)
        if checkpoint_every > 0 and t > 0.0:
            step = round(t / config.dt)
            if step % checkpoint_every == 0:
                save_density(rho, out / f"state_{step:08d}.bin")

    def traj(truncated=None):
        return Trajectory(times=np.array(times),
                          series={k: np.array(v) for k, v in cols.items()},
                          metadata={})

    try:
        final, _ = evolver.run(
            rho0.values,
            lambda v: float(np.real(np.trace(v)) * h),
            on_sample)
    except TraceDriftError as err:
        traj().to_csv(csv_path, header_comment=echo, truncated=str(err))
        print(f"error: evolution aborted: {err}", file=sys.stderr)
        print(f"partial trajectory retained in {csv_path}", file=sys.stderr)
        return 3
    trajectory = traj()
    trajectory.to_csv(csv_path, header_comment=echo)
    if checkpoint_every > 0:
        save_density(DensityGrid(grid, final, rho0.cat_info),
                     out / "final_state.bin")
    if args.plot:
        from .report import save_trajectory_figure
        save_trajectory_figure(trajectory, out / "trajectory.png")
    print(f"wrote {csv_path} ({len(times)} samples)")
    return 0


# -- sweep-ratio --------------------------------------------------------------

def _spreading_horizon(grid, params: PhysicalParams, delta_x: float,
                       halfwidth: float) -> float:
    """Time at which a freely spreading branch's 5-sigma support reaches the
    boundary; beyond it periodic wrap-around corrupts the run."""
    target = (0.5 * grid.extent - 0.5 * delta_x) / 5.0
    if target <= halfwidth:
        return 0.0
    t_spread = 2.0 * params.mass * halfwidth ** 2 / params.hbar
    return t_spread * math.sqrt((target / halfwidth) ** 2 - 1.0)


def _ratio_plan(cfg: RunConfig, params: PhysicalParams, d_value: float,
                delta_x: float, halfwidth: float) -> tuple[int, int]:
    """Per-point (n_steps, sample_every): aim for ~16 samples across the
    expected fit window and ~2.5 decay times total, capped by the
    spreading horizon of the grid and by sweep.max_steps."""
    dt = cfg.require("evolution.dt")
    max_steps = cfg.get("sweep.max_steps", 5120)
    window_t = 1.6 / (d_value * delta_x ** 2)
    t_target = 2.5 / (d_value * delta_x ** 2)
    if cfg.get("evolution.enable_kinetic", True):
        horizon = _spreading_horizon(cfg.spatial_grid(), params, delta_x,
                                     halfwidth)
        if horizon > 0.0:
            t_target = min(t_target, horizon)
    sample_every = max(1, math.floor(min(window_t, t_target) / (16.0 * dt)))
    spans = math.ceil(t_target / (dt * sample_every))
    if spans * sample_every > max_steps:
        spans = max(1, max_steps // sample_every)
    return spans * sample_every, sample_every


def _ratio_point(payload) -> dict:
    cfg_values, n = payload
    cfg = RunConfig(values=cfg_values)
    grid = cfg.spatial_grid()
    params = cfg.physical_params()
    lam = thermal_de_broglie(params)
    halfwidth = cfg.get("state.halfwidth", lam)
    psi = cat_state(grid, delta_x=n * lam, halfwidth=halfwidth)
    rho0 = pure_density(psi)
    d_value = DecoherenceCoefficient.from_params(
        params, cfg.get("evolution.coefficient_pi_variant", False)).d_value
    steps, cadence = _ratio_plan(cfg, params, d_value, n * lam, halfwidth)
    config = cfg.evolution_config(n_steps=steps)
    config.sample_every = cadence
    measured = measure_timescales(rho0, params, config)
    return {"n": n, "theta_inverse": measured.theta_fit.rate,
            "theta": measured.theta, "ratio": measured.ratio,
            "r_squared": measured.theta_fit.r_squared,
            "low_confidence": measured.theta_fit.low_confidence}


def cmd_sweep_ratio(cfg: RunConfig, args) -> int:
    n_values = list(args.n_values or cfg.get("sweep.n_values") or ())
    if not n_values:
        raise ConfigurationError("missing required config key: sweep.n_values")
    if len(set(n_values)) != len(n_values):
        raise ConfigurationError(f"duplicate N values: {n_values}")
    bad = [n for n in n_values if n not in ALLOWED_SWEEP_N]
    if bad:
        raise ConfigurationError(
            f"N values {bad} not in allowed set {ALLOWED_SWEEP_N}")
    grid = cfg.spatial_grid()
    params = cfg.physical_params()
    lam = thermal_de_broglie(params)
    for n in n_values:
        # resolvability / margin validation before any expensive run
        cat_state(grid, delta_x=n * lam,
                  halfwidth=cfg.get("state.halfwidth", lam))

    payloads = [(cfg.values, n) for n in n_values]
    try:
        rows = _map_ordered(_sweep_point_wrapper, payloads, args.workers)
    except (RunTooShortError, TraceDriftError, StateDiagnosticError) as err:
        print(f"error: sweep point failed: {err}", file=sys.stderr)
        return 3

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "sweep_ratio.csv", _echo(cfg, "sweep-ratio"),
               ["n", "theta_inverse", "theta", "ratio", "r_squared"],
               [(float(r["n"]), r["theta_inverse"], r["theta"], r["ratio"],
                 r["r_squared"]) for r in rows])
    exponent = float("nan")
    if len(rows) >= 2:
        exponent = float(np.polyfit(np.log([r["n"] for r in rows]),
                                    np.log([r["theta_inverse"] for r in rows]),
                                    1)[0])
    for r in rows:
        flag = " (low confidence)" if r["low_confidence"] else ""
        print(f"N = {r['n']}: decay rate = {_fmt(r['theta_inverse'])}, "
              f"tau/theta = {_fmt(r['ratio'])}{flag}")
    print(f"fitted power-law exponent of decay rate vs N: {exponent:.4f}")
    if args.plot:
        from .report import save_ratio_figure
        save_ratio_figure([r["n"] for r in rows],
                          np.array([r["theta_inverse"] for r in rows]),
                          exponent, out / "sweep_ratio.png")
    return 0


def _sweep_point_wrapper(payload):
    try:
        return _ratio_point(payload)
    except Exception as err:
        raise type(err)(f"N = {payload[1]}: {err}") from err


# -- sweep-hbar ---------------------------------------------------------------

def _hbar_point(payload) -> tuple[float, float]:
    cfg_values, hbar = payload
    cfg = RunConfig(values=cfg_values)
    grid = cfg.spatial_grid()
    base = cfg.physical_params()
    params = replace(base, hbar=hbar)
    lam = thermal_de_broglie(params)
    delta_x = cfg.require("timescales.delta_x")
    halfwidth = cfg.get("state.halfwidth", 1.0)
    psi = cat_state(grid, delta_x=delta_x, halfwidth=halfwidth)
    rho0 = pure_density(psi)
    d_value = DecoherenceCoefficient.from_params(params).d_value
    # the localization coefficient scales as 1/hbar^2, so the configured
    # dt can violate the step-phase bound at small hbar; shrink it per
    # point and keep the sampling plan consistent
    dt = cfg.require("evolution.dt")
    probe = cfg.evolution_config(n_steps=1)
    while True:
        probe.dt = dt
        phases = probe.step_phases(grid, params)
        worst = max(phases.values()) if phases else 0.0
        if worst <= 0.99 * MAX_STEP_PHASE or dt < 1e-12:
            break
        dt *= 0.5
    local = cfg.merged_with({"evolution.dt": dt})
    steps, cadence = _ratio_plan(local, params, d_value, delta_x, halfwidth)
    config = local.evolution_config(n_steps=steps)
    config.sample_every = cadence
    measured = measure_timescales(rho0, params, config)
    return hbar, measured.theta


def cmd_sweep_hbar(cfg: RunConfig, args) -> int:
    params = cfg.physical_params()
    hbar_values = list(cfg.get("sweep.hbar_values") or ())
    if not hbar_values:
        raise ConfigurationError(
            "missing required config key: sweep.hbar_values")
    delta_x = cfg.require("timescales.delta_x")
    tau = cfg.get("timescales.tau")
    if tau is None:
        if not params.gamma > 0.0:
            raise ConfigurationError(
                "need timescales.tau or a positive physical.gamma")
        tau = 1.0 / (2.0 * params.gamma)
    rows = classical_limit_sweep(params, hbar_values, delta_x, tau)

    fitted = {}
    if cfg.get("sweep.simulate", False):
        sim_at = [hbar_values[0], hbar_values[-1]]
        payloads = [(cfg.values, h) for h in sim_at]
        try:
            results = _map_ordered(_hbar_point, payloads, args.workers)
        except (RunTooShortError, TraceDriftError) as err:
            print(f"error: hbar simulation failed: {err}", file=sys.stderr)
            return 3
        fitted = dict(results)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_rows = []
    for r in rows:
        sim = fitted.get(r.hbar)
        csv_rows.append((r.hbar, r.lambda_db, r.theta, r.theta_over_tau,
                         sim if sim is not None else "",
                         (sim / r.theta) if sim is not None else ""))
    _write_csv(out / "sweep_hbar.csv", _echo(cfg, "sweep-hbar"),
               ["hbar", "lambda_db", "theta_analytic", "theta_over_tau",
                "theta_fitted", "fit_over_analytic"], csv_rows)
    exponent = float(np.polyfit(np.log([r.hbar for r in rows]),
                                np.log([r.theta for r in rows]), 1)[0])
    print(f"analytic exponent of theta vs hbar: {exponent:.4f}")
    for r in rows:
        extra = ""
        if r.hbar in fitted:
            extra = f", fitted theta = {_fmt(fitted[r.hbar])}"
        print(f"hbar = {_fmt(r.hbar)}: theta/tau = "
              f"{_fmt(r.theta_over_tau)}{extra}")
    if args.plot:
        from .report import save_hbar_figure
        save_hbar_figure(rows, out / "sweep_hbar.png",
                         fitted=sorted(fitted.items(), reverse=True) or None)
    return 0


# -- measure -------------------------------------------------------------------

def cmd_measure(cfg: RunConfig, args) -> int:
    grid = cfg.spatial_grid()
    params = cfg.physical_params()
    delta_x = cfg.require("measure.delta_x")
    sigma = cfg.require("measure.sigma")
    kind = cfg.get("measure.apparatus", "packet")
    if kind == "packet":
        apparatus = pure_density(gaussian_packet(grid, 0.0, sigma))
    elif kind == "mixture":
        apparatus = prepared_apparatus(grid, sigma, params, delta_x=delta_x)
    else:
        raise ConfigurationError(
            f"measure.apparatus must be packet or mixture, got {kind!r}")
    system = SystemState.from_weight(cfg.require("measure.p1_weight"))
    joint = impulsive_coupling(apparatus, system, delta_x)
    config = cfg.evolution_config()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "measure.csv"
    echo = _echo(cfg, "measure")
    try:
        final, traj = evolve_joint(joint, params, config)
    except TraceDriftError as err:
        if err.trajectory is not None:
            err.trajectory.to_csv(csv_path, header_comment=echo,
                                  truncated=str(err))
        print(f"error: evolution aborted: {err}", file=sys.stderr)
        return 3
    traj.to_csv(csv_path, header_comment=echo)

    w0, w1 = final.outcome_weights()
    cross = traj.column("cross01_norm")
    print(f"outcome weights: {_fmt(w0)} / {_fmt(w1)}")
    d_value = DecoherenceCoefficient.from_params(
        params, config.coefficient_pi_variant).d_value
    print(f"localization rate x separation^2 = {_fmt(d_value * delta_x ** 2)}")
    if cross[0] > 0.0:
        rel = cross / cross[0]
        inside = np.nonzero((rel <= 0.9) & (rel >= 0.2))[0]
        if len(inside) >= 8:
            fit = fit_exponential_rate(
                traj, "cross01_norm",
                (float(traj.times[inside[0]]), float(traj.times[inside[-1]])))
            print(f"cross-block decay rate = {_fmt(fit.rate)} "
                  f"(r^2 = {fit.r_squared:.6f})")
        print(f"final/initial cross-block norm = {_fmt(cross[-1] / cross[0])}")
    else:
        print("cross blocks identically zero (eigenstate input)")
    if args.plot:
        from .report import save_measure_figure
        save_measure_figure(traj, out / "measure.png")
    print(f"wrote {csv_path}")
    return 0


# -- wiring --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decolab",
        description="Decoherence vs. relaxation laboratory for a free "
                    "particle monitored by a thermal bath.")
    parser.add_argument("--version", action="version",
                        version=f"decolab {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None,
                        help="path to a key = value configuration file")
    common.add_argument("--preset", type=str, default=None,
                        help="named built-in preset (e.g. desk)")
    common.add_argument("--out", type=str, default=".",
                        help="output directory (default: current directory)")
    common.add_argument("--workers", type=int, default=1,
                        help="parallel workers for sweep points")
    common.add_argument("--plot", action="store_true",
                        help="also render PNG figures next to the CSV output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("timescales", parents=[common],
                       help="closed-form wavelengths and timescales")
    p.set_defaults(handler=cmd_timescales)

    p = sub.add_parser("evolve", parents=[common],
                       help="propagate a configured initial state")
    p.set_defaults(handler=cmd_evolve)

    p = sub.add_parser("sweep-ratio", parents=[common],
                       help="decay-rate scaling vs branch separation")
    p.add_argument("--n-values", type=lambda s: [int(t) for t in s.split(",")],
                   default=None, help="comma-separated separations in "
                   "thermal wavelengths (overrides config)")
    p.set_defaults(handler=cmd_sweep_ratio)

    p = sub.add_parser("sweep-hbar", parents=[common],
                       help="classical-limit sweep of hbar")
    p.set_defaults(handler=cmd_sweep_hbar)

    p = sub.add_parser("measure", parents=[common],
                       help="two-level system measured by the apparatus")
    p.set_defaults(handler=cmd_measure)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.preset:
        cfg = cfg.merged_with(load_preset(args.preset))
    if args.config:
        cfg = cfg.merged_with(load_config_file(args.config))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return args.handler(cfg, args)
    except (ConfigurationError, DomainError) as err:
        print(f"error: config: {err}", file=sys.stderr)
        return 2
    except (TraceDriftError, RunTooShortError, StateDiagnosticError) as err:
        print(f"error: runtime abort: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
