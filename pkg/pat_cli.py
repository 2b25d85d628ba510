#!/usr/bin/env python3
"""
Photoacoustic Toolkit - Command Line

Batch front end for the simulation and reconstruction pipeline. Commands
communicate through files only: PATMESH meshes, PATMEAS1 measurement series,
.npy nodal fields and CSV reports with a reproducibility header.

Usage:
    python pat_cli.py mesh-gen --out disk.mesh
    python pat_cli.py forward --phantom bumps --out data.pat
    python pat_cli.py reconstruct --data data.pat --out recon.npy --report recon.csv
    python pat_cli.py directivity --out directivity.csv
    python pat_cli.py noise --data data.pat --out noisy.pat --psd noise_psd.csv
    python pat_cli.py spectrum --out spectrum.csv
    python pat_cli.py adjoint-test
"""

import sys
from pathlib import Path

# Resolve project root from this file's location
ROOT = Path(__file__).resolve().parent

# Make subsystems importable
for _sub in ("fem", "inversion", "sensor", "noise"):
    sys.path.insert(0, str(ROOT / _sub))

import argparse
import logging
from typing import List, Optional

import numpy as np
import pandas as pd

from adjoint import adjoint_test, random_admissible_field, random_smooth_series
from assembly import DimensionError, SemidiscreteSystem, assemble
from colored_noise import NoiseSpec, add_noise, psd_estimate
from command_registry import build_parser, register
from landweber import (
    CONVERGED_ERROR,
    LandweberConfig,
    landweber,
    mu_sweep,
    noise_study,
    normal_operator_spectrum,
    summarize_noise_study,
)
from mesh import Mesh, generate_disk_mesh, load_mesh, save_mesh
from phantoms import gaussian_bumps_phantom, load_phantom, vessel_phantom
from reports import (
    directivity_figure,
    error_history_figure,
    psd_figure,
    write_csv_report,
    write_figure_html,
)
from run_config import ConfigError, RunConfig, load_config, num_threads
from run_log import configure_logging
from sensor_analysis import alpha_ratio, critical_angle, directivity_sweep
from wavesim import (
    MeasurementSeries,
    NodalField,
    cfl_time_step,
    forward,
    resample_boundary_series,
)

log = logging.getLogger("pat_cli")

DEFAULT_LOG_DIR = ROOT / "logs"


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("-c", "--config", help="key = value experiment file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="Override a config key (repeatable)")
    parser.add_argument("--seed", type=int, help="Random seed (overrides the config)")
    parser.add_argument("--kappa-override", type=float,
                        help="Film coefficient for the measurement model (0 = naive Dirichlet)")
    parser.add_argument("--html", action="store_true", help="Also write an interactive HTML figure")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--no-log-file", action="store_true", help="Do not write logs/run_<time>.log")
    parser.add_argument("--log-dir", default=str(DEFAULT_LOG_DIR), help="Folder for run logs")


def _config(args) -> RunConfig:
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.html:
        overrides.append("html=true")
    return load_config(args.config, overrides)


def _header(config: RunConfig, command: str, args, **extra) -> List[str]:
    lines = [f"command={command}"]
    if args.kappa_override is not None:
        lines.append(f"kappa_override={args.kappa_override!r}")
    lines.extend(f"{key}={value}" for key, value in extra.items())
    return lines + config.echo()


def _mesh(path: str, radius: float, h: float) -> Mesh:
    if path:
        return load_mesh(path)
    return generate_disk_mesh(radius, h)


def _system(config: RunConfig, mesh: Mesh) -> SemidiscreteSystem:
    c = None
    if config.c_file:
        c = NodalField.load(config.c_file).values
    return assemble(mesh, config.material(c))


def _time_step(config: RunConfig, system: SemidiscreteSystem) -> float:
    if config.dt > 0:
        return config.dt
    return cfl_time_step(system.mesh, system.material, config.cfl)


def _data_mesh(config: RunConfig) -> Optional[Mesh]:
    """Finer measurement mesh of the two-mesh protocol, if configured."""
    if config.data_mesh:
        return load_mesh(config.data_mesh)
    if config.data_h > 0:
        return generate_disk_mesh(config.radius, config.data_h)
    return None


def _phantom(name: str, mesh: Mesh, config: RunConfig) -> NodalField:
    if name == "bumps":
        return gaussian_bumps_phantom(mesh, config.radius)
    if name == "vessels":
        return vessel_phantom(mesh, config.seed, config.radius)
    return load_phantom(name, mesh, config.radius)


def _write_csv(df: pd.DataFrame, path, header: List[str]):
    write_csv_report(df, path, header)
    print(f"Saved to {path}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _mesh_gen_arguments(p):
    p.add_argument("--out", required=True, help="Output PATMESH file")


@register("mesh-gen", help="Generate a concentric-ring disk mesh", order=10,
          arguments=_mesh_gen_arguments)
def cmd_mesh_gen(args) -> int:
    config = _config(args)
    mesh = generate_disk_mesh(config.radius, config.h)
    save_mesh(mesh, args.out)
    print(f"Mesh: {mesh.n_nodes} nodes, {mesh.n_triangles} triangles, {mesh.n_boundary} boundary nodes")
    print(f"Saved to {args.out}")
    return 0


def _forward_arguments(p):
    p.add_argument("--phantom", help="PGM raster, .npy nodal field, or 'bumps' / 'vessels'")
    p.add_argument("--out", help="Output PATMEAS1 voltage file")
    p.add_argument("--save-phantom", help="Also write the phantom on the reconstruction mesh (.npy)")
    p.add_argument("--csv", help="Also export the voltage series as CSV")


@register("forward", help="Simulate voltage data from an initial pressure phantom", order=20,
          arguments=_forward_arguments)
def cmd_forward(args) -> int:
    config = _config(args)
    phantom = args.phantom or config.phantom
    out = args.out or config.output
    if not phantom or not out:
        raise ConfigError("forward needs a phantom and an output path")

    mesh = _mesh(config.mesh, config.radius, config.h)
    data_mesh = _data_mesh(config)
    sim_mesh = data_mesh if data_mesh is not None else mesh
    system = _system(config, sim_mesh)
    dt = _time_step(config, system)
    f = _phantom(phantom, sim_mesh, config)
    print(f"Simulating on {sim_mesh.n_nodes} nodes, dt={dt:.4g}, T={config.T:g}")

    V = forward(system, f, config.T, dt, kappa=args.kappa_override)
    if data_mesh is not None:
        V = resample_boundary_series(V, data_mesh, mesh)
    V.save(out)
    print(f"Saved to {out}")

    if args.save_phantom:
        field = f if data_mesh is None else _phantom(phantom, mesh, config)
        field.save(args.save_phantom)
        print(f"Saved to {args.save_phantom}")
    if args.csv:
        _write_csv(V.to_frame(), args.csv, _header(config, "forward", args, dt=repr(dt)))
    return 0


def _reconstruct_arguments(p):
    p.add_argument("--data", help="PATMEAS1 voltage file")
    p.add_argument("--out", help="Output reconstruction (.npy)")
    p.add_argument("--report", help="CSV with iteration, residual, rel_error")
    p.add_argument("--f-true", help="True phantom (.npy on the reconstruction mesh, or 'bumps' / 'vessels')")
    p.add_argument("--mu-sweep", help="Comma-separated momentum values; writes a sweep CSV to --sweep-out")
    p.add_argument("--sweep-out", help="Output CSV for --mu-sweep")
    p.add_argument("--noise-study", metavar="CSV",
                   help="Reconstruct from white, pink and red noisy copies over noise_seeds seeds; "
                        "needs --f-true")


@register("reconstruct", help="Accelerated Landweber reconstruction from voltage data", order=30,
          arguments=_reconstruct_arguments)
def cmd_reconstruct(args) -> int:
    config = _config(args)
    data_path = args.data or config.data
    out = args.out or config.output
    if not data_path or not out:
        raise ConfigError("reconstruct needs a data file and an output path")

    mesh = _mesh(config.mesh, config.radius, config.h)
    system = _system(config, mesh)
    V = MeasurementSeries.load(data_path)
    if V.nb != system.n_boundary:
        data_mesh = _data_mesh(config)
        if data_mesh is None or data_mesh.n_boundary != V.nb:
            raise DimensionError(
                f"data has {V.nb} boundary nodes, reconstruction mesh has {system.n_boundary}; "
                "set data_mesh or data_h to resample"
            )
        V = resample_boundary_series(V, data_mesh, mesh)

    f_true_name = args.f_true or config.f_true
    f_true = _phantom(f_true_name, mesh, config) if f_true_name else None
    lw_config = LandweberConfig(
        gamma=config.gamma,
        mu=config.mu,
        iterations=config.iterations,
        f_true=f_true,
        normalize=config.normalize,
        divergence_factor=config.divergence_factor,
        data_weighting=config.data_weighting,
        enforce_bound=config.step_bound,
        step_safety=config.step_safety,
    )
    kappa = args.kappa_override

    report = landweber(system, V, lw_config, kappa=kappa)
    report.reconstruction.save(out)
    print(f"Saved to {out}")
    if report.note:
        print(f"Note: {report.note}")
    if report.residual_history:
        print(f"Final residual {report.residual_history[-1]:.4e} after {report.iterations_run} iterations")
    if report.rel_error_history:
        reached = report.iterations_to_reach(CONVERGED_ERROR)
        print(f"Final relative error {report.rel_error_history[-1]:.4%}"
              f" (1% reached at iteration {reached if reached else 'never'})")

    header = _header(config, "reconstruct", args, data=data_path, **report.step_echo())
    if args.report:
        _write_csv(report.to_frame(), args.report, header)
        if config.html and report.rel_error_history:
            html = Path(args.report).with_suffix(".html")
            write_figure_html(error_history_figure({f"mu={config.mu:g}": report.to_frame()}), html)
            print(f"Saved to {html}")

    if args.mu_sweep:
        if f_true is None or not args.sweep_out:
            raise ConfigError("--mu-sweep needs --f-true and --sweep-out")
        mus = [float(m) for m in args.mu_sweep.split(",")]
        _write_csv(mu_sweep(system, V, lw_config, mus, kappa=kappa), args.sweep_out, header)

    if args.noise_study:
        if f_true is None:
            raise ConfigError("--noise-study needs --f-true")
        table = noise_study(system, V, lw_config, range(config.noise_seeds), config.noise_level, kappa=kappa)
        for row in summarize_noise_study(table).itertuples():
            print(f"{row.color}: mean error {row.mean_rel_error:.4%} +- {row.std_error:.4%}")
        _write_csv(table, args.noise_study, header)
    return 0


def _directivity_arguments(p):
    p.add_argument("--out", required=True, help="Output CSV (theta_deg, kappa, linear, dB)")


@register("directivity", help="Plane-wave directivity sweep of the film sensor", order=40,
          arguments=_directivity_arguments)
def cmd_directivity(args) -> int:
    config = _config(args)
    alpha = alpha_ratio(config.dir_rho, config.dir_c, config.dir_rho_b, config.dir_c_b)
    kappas = np.linspace(config.kappa_min, config.kappa_max, config.kappa_steps)
    df = directivity_sweep(config.dir_c, config.dir_c_p, alpha, kappas, n_angles=config.n_angles)
    for k in kappas:
        angle = critical_angle(config.dir_c, config.dir_c_p, k)
        print(f"kappa={k:.3f}: critical angle " + ("none" if angle is None else f"{np.degrees(angle):.2f} deg"))
    _write_csv(df, args.out, _header(config, "directivity", args, alpha=repr(alpha)))
    if config.html:
        html = Path(args.out).with_suffix(".html")
        write_figure_html(directivity_figure(df), html)
        print(f"Saved to {html}")
    return 0


def _noise_arguments(p):
    p.add_argument("--data", help="Clean PATMEAS1 voltage file")
    p.add_argument("--out", help="Output noisy PATMEAS1 file")
    p.add_argument("--psd", help="CSV with the PSD of the added noise")


@register("noise", help="Add white, pink or red noise to voltage data", order=50,
          arguments=_noise_arguments)
def cmd_noise(args) -> int:
    config = _config(args)
    data_path = args.data or config.data
    out = args.out or config.output
    if not data_path or not out:
        raise ConfigError("noise needs a data file and an output path")

    clean = MeasurementSeries.load(data_path)
    spec = NoiseSpec(config.noise_color, config.noise_level, config.seed)
    noisy = add_noise(clean, spec)
    noisy.save(out)
    print(f"Saved to {out}")

    if args.psd:
        difference = noisy.with_values(noisy.values - clean.values)
        spectrum = psd_estimate(difference, nperseg=config.nperseg or None)
        _write_csv(spectrum.to_frame(), args.psd,
                   _header(config, "noise", args, data=data_path))
        if config.html:
            html = Path(args.psd).with_suffix(".html")
            write_figure_html(psd_figure({config.noise_color: spectrum.to_frame()}), html)
            print(f"Saved to {html}")
    return 0


def _spectrum_arguments(p):
    p.add_argument("--out", required=True, help="Output CSV (frequency, power)")


@register("spectrum", help="White-noise power response of the normal operator F F*", order=60,
          arguments=_spectrum_arguments)
def cmd_spectrum(args) -> int:
    config = _config(args)
    system = _system(config, _mesh(config.mesh, config.radius, config.h))
    dt = _time_step(config, system)
    response = normal_operator_spectrum(
        system, config.n_probes, config.seed, config.T, dt,
        kappa=args.kappa_override, nperseg=config.nperseg or None, max_workers=num_threads(),
    )
    print(f"Low/high band power ratio: {response.band_ratio():.3g}")
    _write_csv(response.to_frame(), args.out,
               _header(config, "spectrum", args, dt=repr(dt), n_probes=response.n_probes))
    if config.html:
        html = Path(args.out).with_suffix(".html")
        write_figure_html(psd_figure({"F F* white noise": response.to_frame()}), html)
        print(f"Saved to {html}")
    return 0


def _adjoint_test_arguments(p):
    p.add_argument("--out", help="Optional CSV with the mismatch")
    p.add_argument("--tolerance", type=float, default=5e-3, help="Acceptance tolerance (default: 5e-3)")


@register("adjoint-test", help="Check <F f, psi> = <f, F* psi> on random inputs", order=70,
          arguments=_adjoint_test_arguments)
def cmd_adjoint_test(args) -> int:
    config = _config(args)
    system = _system(config, _mesh(config.mesh, config.radius, config.h))
    dt = _time_step(config, system)
    f = random_admissible_field(system, config.seed)
    psi = random_smooth_series(system, config.T, dt, config.seed + 1)
    mismatch = adjoint_test(system, f, psi, kappa=args.kappa_override)
    status = "within" if mismatch <= args.tolerance else "ABOVE"
    print(f"Adjoint mismatch {mismatch:.3e} ({status} tolerance {args.tolerance:g})")
    if args.out:
        df = pd.DataFrame([{
            "mismatch": mismatch, "h_max": system.mesh.h_max, "dt": dt,
            "kappa": system.material.kappa if args.kappa_override is None else args.kappa_override,
        }])
        _write_csv(df, args.out, _header(config, "adjoint-test", args))
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser("Photoacoustic tomography simulation and reconstruction", _common_arguments)
    args = parser.parse_args(argv)
    log_file = configure_logging(None if args.no_log_file else Path(args.log_dir), args.verbose)
    if log_file is not None:
        log.info("Command %s, log %s", args.command, log_file)

    try:
        return args.handler(args)
    except (ValueError, ArithmeticError, MemoryError, RuntimeError, OSError) as e:
        log.debug("%s failed", args.command, exc_info=True)
        print(f"Error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
