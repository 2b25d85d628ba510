#!/usr/bin/env python3
"""
Adjoint Wave Operator
Backward-in-time source and wave problems that apply F* to voltage-shaped
data, the inner products they are adjoint in, and the adjoint consistency test.

The input series defines the time grid: its dt and number of levels fix the
backward sweep. The T and dt arguments accepted below are consistency checks
against that grid and never resample it.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from assembly import SemidiscreteSystem, boundary_laplacian_apply
from wavesim import (
    ExplicitWaveSolver,
    MeasurementSeries,
    NodalField,
    check_series,
    field_values,
    double_time_integral,
    forward,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdjointResult:
    field: NodalField
    eta: MeasurementSeries


# ---------------------------------------------------------------------------
# Inner products
# ---------------------------------------------------------------------------

def trapezoid_weights(nt: int, dt: float) -> np.ndarray:
    w = np.full(nt, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def domain_inner(system: SemidiscreteSystem, u, v) -> float:
    """c^-2 weighted inner product over the domain (lumped mass)."""
    u = field_values(u, system.n_nodes)
    v = field_values(v, system.n_nodes)
    return float(u @ (system.M_lumped * v))


def domain_norm(system: SemidiscreteSystem, u) -> float:
    return float(np.sqrt(max(domain_inner(system, u, u), 0.0)))


def data_inner(system: SemidiscreteSystem, x: MeasurementSeries, y: MeasurementSeries) -> float:
    """Boundary-mass weighted in space, trapezoid weighted in time."""
    check_series(system, x)
    check_series(system, y)
    if x.values.shape != y.values.shape:
        raise ValueError(f"series shapes differ: {x.values.shape} vs {y.values.shape}")
    weights = trapezoid_weights(x.nt, x.dt)
    return float(np.einsum("t,tb,b,tb->", weights, x.values, system.Mb_lumped, y.values))


def data_norm(system: SemidiscreteSystem, x: MeasurementSeries) -> float:
    return float(np.sqrt(max(data_inner(system, x, x), 0.0)))


# ---------------------------------------------------------------------------
# Backward problems
# ---------------------------------------------------------------------------

def backward_double_time_integral(values: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid rule applied twice from t = T, zero at the last level."""
    return double_time_integral(values[::-1], dt)[::-1]


def solve_eta(system: SemidiscreteSystem, psi: MeasurementSeries, kappa: float, c_p: float,
              terminal_correction: bool = True) -> MeasurementSeries:
    """
    Boundary source of the backward wave problem

    eta'' = psi'' - kappa c_p^2 (boundary Laplacian of psi), integrated twice
    backward from T.

    Args:
        system: Assembled system
        psi: Data-shaped series on [0, T]
        kappa: Film coefficient
        c_p: Film wave speed
        terminal_correction: Subtract psi(T) + (t - T) psi'(T) so that
            eta(T) = eta'(T) = 0 for any psi. ``adjoint`` turns this off: the
            affine part is in the range of the kappa term and must reach the
            wave solve for the adjoint identity to hold.

    Returns:
        Adjoint-source series
    """
    check_series(system, psi)
    values = psi.values.copy()
    nt, dt = psi.nt, psi.dt
    if terminal_correction:
        if nt >= 3:
            slope = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * dt)
        else:
            slope = (values[-1] - values[0]) / dt
        offset = psi.times - psi.duration
        values = values - values[-1] - offset[:, None] * slope
    if kappa != 0.0:
        surface = boundary_laplacian_apply(system, psi.values)
        values = values - kappa * c_p ** 2 * backward_double_time_integral(surface, dt)
    return MeasurementSeries(dt, values, "adjoint-source")


def solve_backward_wave(system: SemidiscreteSystem, eta: MeasurementSeries) -> NodalField:
    """
    phi'(0) for the backward wave problem driven by the boundary source eta

    The impedance condition of the backward problem carries the sign-flipped
    damping and the load Mb eta; discretely the load is the lumped boundary
    mass times eta at every level, with a half load on the terminal step.
    """
    if eta.kind != "adjoint-source":
        raise ValueError(f"expected an adjoint-source series, got '{eta.kind}'")
    check_series(system, eta)
    if eta.nt < 2:
        raise ValueError("adjoint source needs at least two time levels")
    load = eta.values * system.Mb_lumped
    return NodalField(ExplicitWaveSolver(system).march_backward(load, eta.dt))


def solve_adjoint(system: SemidiscreteSystem, psi: MeasurementSeries,
                  kappa: Optional[float] = None, terminal_correction: bool = False) -> AdjointResult:
    material = system.material
    kappa = material.kappa if kappa is None else kappa
    eta = solve_eta(system, psi, kappa, material.c_p, terminal_correction=terminal_correction)
    return AdjointResult(solve_backward_wave(system, eta), eta)


def adjoint(system: SemidiscreteSystem, psi: MeasurementSeries, T: Optional[float] = None,
            dt: Optional[float] = None, kappa: Optional[float] = None) -> NodalField:
    """
    The adjoint map F*: data to initial-pressure space

    Args:
        system: Assembled system
        psi: Data-shaped series; its own dt and length define the time grid
        T: Optional check that the series spans [0, T]
        dt: Optional check that the series uses this step
        kappa: Overrides ``system.material.kappa`` when given

    Returns:
        NodalField phi'(0)
    """
    if dt is not None and not np.isclose(dt, psi.dt, rtol=1e-12):
        raise ValueError(f"series dt={psi.dt} differs from requested dt={dt}")
    if T is not None and abs(psi.duration - T) > psi.dt:
        raise ValueError(f"series spans {psi.duration}, requested T={T}")
    return solve_adjoint(system, psi, kappa).field


def adjoint_test(system: SemidiscreteSystem, f, psi: MeasurementSeries,
                 kappa: Optional[float] = None) -> float:
    """
    Relative gap between <F f, psi> and <f, F* psi>

    Returns:
        |<Ff, psi> - <f, F*psi>_M| / (|Ff| |psi| + |f|_M |F*psi|_M), 0 when both
        sides vanish
    """
    f = NodalField(field_values(f, system.n_nodes))
    Ff = forward(system, f, psi.duration, psi.dt, kappa=kappa)
    if Ff.nt != psi.nt:
        raise ValueError(f"forward data has {Ff.nt} levels, psi has {psi.nt}")
    Fstar_psi = adjoint(system, psi, kappa=kappa)

    lhs = data_inner(system, Ff, psi)
    rhs = domain_inner(system, f, Fstar_psi)
    scale = data_norm(system, Ff) * data_norm(system, psi) + \
        domain_norm(system, f) * domain_norm(system, Fstar_psi)
    mismatch = 0.0 if scale == 0.0 else abs(lhs - rhs) / scale
    log.info("Adjoint test: <Ff,psi>=%.6e <f,F*psi>=%.6e mismatch=%.3e", lhs, rhs, mismatch)
    return mismatch


def random_admissible_field(system: SemidiscreteSystem, seed: int, n_bumps: int = 4,
                            support: float = 0.45, width: float = 0.15) -> NodalField:
    """Sum of Gaussian bumps with random centres inside ``support`` x radius."""
    rng = np.random.default_rng(seed)
    nodes = system.mesh.nodes
    radius = float(np.max(np.linalg.norm(system.mesh.boundary_points, axis=1)))
    values = np.zeros(system.n_nodes)
    for _ in range(n_bumps):
        r = support * radius * np.sqrt(rng.uniform())
        angle = rng.uniform(0.0, 2.0 * np.pi)
        centre = r * np.array([np.cos(angle), np.sin(angle)])
        dist2 = np.sum((nodes - centre) ** 2, axis=1)
        values += rng.uniform(-1.0, 1.0) * np.exp(-dist2 / (width * radius) ** 2)
    values[system.boundary_nodes] = 0.0
    return NodalField(values)


def random_smooth_series(system: SemidiscreteSystem, T: float, dt: float, seed: int,
                         n_modes: int = 4) -> MeasurementSeries:
    """Random low-order space-time Fourier modes on the boundary."""
    rng = np.random.default_rng(seed)
    steps = int(round(T / dt))
    t = dt * np.arange(steps + 1)
    theta = system.mesh.boundary_angles()
    values = np.zeros((steps + 1, system.n_boundary))
    for _ in range(n_modes):
        m = rng.integers(0, 4)
        omega = rng.uniform(0.5, 3.0)
        phase_t, phase_s = rng.uniform(0.0, 2.0 * np.pi, size=2)
        values += rng.normal() * np.outer(np.sin(omega * t + phase_t), np.cos(m * theta + phase_s))
    return MeasurementSeries(dt, values, "voltage")
