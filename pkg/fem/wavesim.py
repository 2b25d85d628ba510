#!/usr/bin/env python3
"""
Forward Wave Simulation
Explicit central-difference time stepping of the damped semidiscrete wave
system, boundary trace recording and the piezoelectric voltage model.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid
from scipy.sparse.linalg import factorized

from assembly import DimensionError, Material, SemidiscreteSystem, boundary_laplacian_apply
from mesh import Mesh

log = logging.getLogger(__name__)

SERIES_MAGIC = b"PATMEAS1"
SERIES_KINDS = ("pressure-trace", "voltage", "adjoint-source")
ENERGY_GROWTH_LIMIT = 10.0


class StabilityError(RuntimeError):
    """Energy guard tripped, usually because dt exceeds the CFL bound."""


class AdmissibilityWarning(UserWarning):
    """Initial pressure is nonzero on the boundary."""


@dataclass(frozen=True)
class NodalField:
    """One real value per mesh node."""
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(values)):
            raise ValueError("nodal field contains non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, n_nodes: int) -> "NodalField":
        return cls(np.zeros(n_nodes))

    def __len__(self) -> int:
        return self.values.shape[0]

    def save(self, path) -> Path:
        """Write the values as a ``.npy`` file (atomic replace)."""
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as f:
            np.save(f, self.values)
        tmp.replace(path)
        return path

    @classmethod
    def load(cls, path) -> "NodalField":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Nodal field not found: {path}")
        return cls(np.load(path, allow_pickle=False))


@dataclass(frozen=True)
class MeasurementSeries:
    """Time levels x boundary nodes, levels at t = n dt for n = 0..Nt-1."""
    dt: float
    values: np.ndarray
    kind: str = "voltage"  # "pressure-trace", "voltage" or "adjoint-source"

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionError(f"series values must be 2D (time x node), got shape {values.shape}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.kind not in SERIES_KINDS:
            raise ValueError(f"unknown series kind '{self.kind}'")
        if not np.all(np.isfinite(values)):
            raise ValueError("series contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def nt(self) -> int:
        return self.values.shape[0]

    @property
    def nb(self) -> int:
        return self.values.shape[1]

    @property
    def duration(self) -> float:
        return (self.nt - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.nt)

    def with_values(self, values: np.ndarray, kind: Optional[str] = None) -> "MeasurementSeries":
        return MeasurementSeries(self.dt, values, kind or self.kind)

    def to_bytes(self) -> bytes:
        header = np.array([self.nt, self.nb], dtype="<u8").tobytes() + np.array([self.dt], dtype="<f8").tobytes()
        return SERIES_MAGIC + header + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, kind: str = "voltage") -> "MeasurementSeries":
        if data[:8] != SERIES_MAGIC:
            raise ValueError("not a PATMEAS1 file (bad magic)")
        if len(data) < 32:
            raise ValueError("PATMEAS1 header truncated")
        nt, nb = (int(v) for v in np.frombuffer(data, dtype="<u8", count=2, offset=8))
        dt = float(np.frombuffer(data, dtype="<f8", count=1, offset=24)[0])
        expected = 32 + 8 * nt * nb
        if len(data) != expected:
            raise ValueError(f"PATMEAS1 payload has {len(data)} bytes, expected {expected}")
        values = np.frombuffer(data, dtype="<f8", offset=32).reshape(nt, nb)
        return cls(dt, values.astype(np.float64), kind)

    def save(self, path) -> Path:
        """Write the PATMEAS1 binary format (temp file + rename)."""
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(self.to_bytes())
        tmp.replace(path)
        return path

    @classmethod
    def load(cls, path, kind: str = "voltage") -> "MeasurementSeries":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Measurement file not found: {path}")
        return cls.from_bytes(path.read_bytes(), kind)

    def to_frame(self) -> pd.DataFrame:
        """One row per time level: column ``t`` then ``node_<k>`` per boundary node."""
        df = pd.DataFrame(self.values, columns=[f"node_{k}" for k in range(self.nb)])
        df.insert(0, "t", self.times)
        return df


def field_values(f: Union[NodalField, np.ndarray], n_nodes: int) -> np.ndarray:
    values = f.values if isinstance(f, NodalField) else np.asarray(f, dtype=np.float64)
    if values.shape != (n_nodes,):
        raise DimensionError(f"nodal field has shape {values.shape}, expected ({n_nodes},)")
    return values


def check_series(system: SemidiscreteSystem, series: MeasurementSeries):
    if series.nb != system.n_boundary:
        raise DimensionError(
            f"series has {series.nb} boundary nodes, mesh boundary has {system.n_boundary}"
        )


def cfl_time_step(mesh: Mesh, material: Material, factor: float = 0.5) -> float:
    """dt = factor * h_min / c_max."""
    if not factor > 0:
        raise ValueError(f"CFL factor must be positive, got {factor}")
    return factor * mesh.h_min / material.c_max


def time_levels(T: float, dt: float) -> int:
    """Number of steps so that steps * dt matches T to within one step."""
    if not (T > 0 and dt > 0):
        raise ValueError(f"T and dt must be positive, got T={T}, dt={dt}")
    steps = int(round(T / dt))
    if steps < 1:
        raise ValueError(f"dt={dt} is longer than the final time T={T}")
    return steps


@dataclass
class ForwardSolution:
    trace: MeasurementSeries
    energy: List[float] = field(default_factory=list)  # E at n + 1/2, n = 0..steps-1


class ExplicitWaveSolver:
    """Central-difference marching with lumped mass and lumped damping.

    Scheme per step, with L = m/dt^2 + d/(2dt) and R = m/dt^2 - d/(2dt)::

        L p[n+1] = (2m/dt^2) p[n] - A p[n] - R p[n-1]

    The backward march uses the same coefficients with the roles of n+1
    and n-1 exchanged, so the flipped damping stays dissipative.
    """

    def __init__(self, system: SemidiscreteSystem):
        self.system = system
        self.m = system.M_lumped
        self.d = system.C_lumped
        self.A = system.stiffness
        self.boundary = system.boundary_nodes

    def _coefficients(self, dt: float):
        m_dt2 = self.m / dt ** 2
        d_2dt = self.d / (2.0 * dt)
        return 2.0 * m_dt2, m_dt2 + d_2dt, m_dt2 - d_2dt

    def _energy(self, p_new: np.ndarray, p_old: np.ndarray, A_p_old: np.ndarray, dt: float) -> float:
        v = (p_new - p_old) / dt
        return 0.5 * float(v @ (self.m * v)) + 0.5 * float(p_new @ A_p_old)

    def march_forward(self, f: np.ndarray, steps: int, dt: float) -> ForwardSolution:
        """
        March from p(0) = f, p'(0) = 0

        Args:
            f: Initial pressure at every node
            steps: Number of time steps
            dt: Time step

        Returns:
            ForwardSolution with the boundary trace at steps + 1 levels and
            the staggered discrete energy

        Raises:
            StabilityError: energy grows more than tenfold over its first value
        """
        two_m, L, R = self._coefficients(dt)
        trace = np.empty((steps + 1, len(self.boundary)))
        p_prev = f.copy()
        A_p = self.A @ p_prev
        p = p_prev - 0.5 * dt ** 2 * A_p / self.m
        trace[0] = p_prev[self.boundary]
        trace[1] = p[self.boundary]

        energy = [self._energy(p, p_prev, A_p, dt)]
        reference = abs(energy[0])
        for n in range(1, steps):
            A_p = self.A @ p
            p_next = (two_m * p - A_p - R * p_prev) / L
            e = self._energy(p_next, p, A_p, dt)
            if not math.isfinite(e) or (reference > 0 and abs(e) > ENERGY_GROWTH_LIMIT * reference):
                raise StabilityError(
                    f"energy grew from {reference:.3e} to {e:.3e} at step {n}; "
                    f"dt={dt:.3e} likely violates the CFL bound"
                )
            energy.append(e)
            trace[n + 1] = p_next[self.boundary]
            p_prev, p = p, p_next

        return ForwardSolution(MeasurementSeries(dt, trace, "pressure-trace"), energy)

    def march_backward(self, load: np.ndarray, dt: float) -> np.ndarray:
        """
        March the terminal-value problem phi(T) = phi'(T) = 0 backward in time

        Args:
            load: (steps + 1, B) boundary load per time level, already mass-weighted;
                the semidiscrete equation is m phi'' - d phi' + A phi = -load
            dt: Time step

        Returns:
            Centred estimate of phi'(0)

        Raises:
            StabilityError: the staggered energy turns strongly negative or non-finite
        """
        steps = load.shape[0] - 1
        two_m, L, R = self._coefficients(dt)
        n_nodes = len(self.m)

        def lifted(level: int) -> np.ndarray:
            out = np.zeros(n_nodes)
            out[self.boundary] = load[level]
            return out

        phi_next = np.zeros(n_nodes)                      # level n + 1
        phi = -0.5 * lifted(steps) / L                    # level steps - 1
        peak = 0.0
        for n in range(steps - 1, -1, -1):
            A_phi = self.A @ phi
            phi_prev = (two_m * phi - A_phi - R * phi_next - lifted(n)) / L
            e = self._energy(phi_prev, phi, A_phi, -dt)
            peak = max(peak, e)
            if not math.isfinite(e) or (peak > 0 and e < -0.1 * peak):
                raise StabilityError(
                    f"backward energy became {e:.3e} (peak {peak:.3e}) at level {n}; "
                    f"dt={dt:.3e} likely violates the CFL bound"
                )
            if n == 0:
                return (phi_next - phi_prev) / (2.0 * dt)
            phi_next, phi = phi, phi_prev


def solve_forward(system: SemidiscreteSystem, f, T: float, dt: float) -> MeasurementSeries:
    """
    Pressure trace on the boundary for initial pressure ``f`` at rest

    Args:
        system: Assembled system
        f: NodalField or array of initial pressure
        T: Final time
        dt: Time step (see ``cfl_time_step``)

    Returns:
        Pressure-trace MeasurementSeries with round(T/dt) + 1 levels
    """
    return run_forward(system, f, T, dt).trace


def run_forward(system: SemidiscreteSystem, f, T: float, dt: float) -> ForwardSolution:
    """``solve_forward`` keeping the discrete energy history."""
    values = field_values(f, system.n_nodes).copy()
    boundary = system.boundary_nodes
    if np.any(values[boundary] != 0.0):
        worst = float(np.max(np.abs(values[boundary])))
        warnings.warn(
            f"initial pressure is nonzero on the boundary (max |f| = {worst:.3e}); masking to zero",
            AdmissibilityWarning,
            stacklevel=3,
        )
        values[boundary] = 0.0
    steps = time_levels(T, dt)
    log.debug("Forward march: %d steps of dt=%.4e", steps, dt)
    return ExplicitWaveSolver(system).march_forward(values, steps, dt)


def double_time_integral(values: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid rule applied twice from t = 0, zero at the first level."""
    once = cumulative_trapezoid(values, dx=dt, axis=0, initial=0.0)
    return cumulative_trapezoid(once, dx=dt, axis=0, initial=0.0)


def measure_voltage(system: SemidiscreteSystem, trace: MeasurementSeries,
                    kappa: float, c_p: float) -> MeasurementSeries:
    """
    Piezoelectric voltage V = p - p(0) - kappa c_p^2 (double time integral of the
    boundary Laplacian of p)

    Args:
        system: Assembled system
        trace: Pressure-trace series
        kappa: Film coefficient (0 gives Dirichlet data)
        c_p: Film wave speed

    Returns:
        Voltage series, zero at t = 0
    """
    if trace.kind != "pressure-trace":
        raise ValueError(f"expected a pressure-trace series, got '{trace.kind}'")
    check_series(system, trace)
    p = trace.values
    voltage = p - p[0]
    if kappa != 0.0:
        surface = boundary_laplacian_apply(system, p)
        voltage = voltage - kappa * c_p ** 2 * double_time_integral(surface, trace.dt)
    return MeasurementSeries(trace.dt, voltage, "voltage")


def recover_pressure_trace(system: SemidiscreteSystem, V: MeasurementSeries,
                           kappa: float, c_p: float) -> MeasurementSeries:
    """
    Invert ``measure_voltage`` for a trace that vanishes at t = 0

    Each level solves (diag(mb) + kappa c_p^2 dt^2/4 Kb) p_n = mb * rhs_n, the
    implicit part of the double trapezoid sum, so the recovered trace
    reproduces V exactly under ``measure_voltage`` (apart from V(0), which the
    voltage model pins to zero). The recursion is the average-acceleration
    scheme for the boundary wave p'' - kappa c_p^2 p_ss = V'' and stays bounded
    for any dt.

    Args:
        system: Assembled system
        V: Voltage-shaped series (any kind)
        kappa: Film coefficient (0 returns V with its first level zeroed)
        c_p: Film wave speed

    Returns:
        Pressure-trace series with p(0) = 0
    """
    check_series(system, V)
    if kappa == 0.0:
        p = V.values.copy()
        p[0] = 0.0
        return MeasurementSeries(V.dt, p, "pressure-trace")
    k, dt = kappa * c_p ** 2, V.dt
    mb = system.Mb_lumped
    solve = factorized((sp.diags(mb) + (0.25 * k * dt ** 2) * system.Kb).tocsc())

    p = np.zeros_like(V.values)
    g_prev = np.zeros(system.n_boundary)
    once = np.zeros(system.n_boundary)
    twice = np.zeros(system.n_boundary)
    for n in range(1, V.nt):
        rhs = V.values[n] + k * (twice + dt * once + 0.25 * dt ** 2 * g_prev)
        p[n] = solve(mb * rhs)
        g = boundary_laplacian_apply(system, p[n])
        once_next = once + 0.5 * dt * (g_prev + g)
        twice = twice + 0.5 * dt * (once + once_next)
        once, g_prev = once_next, g
    return MeasurementSeries(dt, p, "pressure-trace")


def forward(system: SemidiscreteSystem, f, T: float, dt: float,
            kappa: Optional[float] = None) -> MeasurementSeries:
    """
    The forward map F: initial pressure to voltage data

    Args:
        system: Assembled system
        f: Initial pressure
        T: Final time
        dt: Time step
        kappa: Overrides ``system.material.kappa`` when given (0 for the naive model)

    Returns:
        Voltage MeasurementSeries
    """
    material = system.material
    kappa = material.kappa if kappa is None else kappa
    return measure_voltage(system, solve_forward(system, f, T, dt), kappa, material.c_p)


def resample_boundary_series(series: MeasurementSeries, source: Mesh, target: Mesh) -> MeasurementSeries:
    """
    Linear interpolation in space from one boundary discretization to another

    Nodes are matched by polar angle about the boundary centroid; time levels
    and dt are kept.
    """
    if series.nb != source.n_boundary:
        raise DimensionError(
            f"series has {series.nb} boundary nodes, source mesh boundary has {source.n_boundary}"
        )
    theta_src = source.boundary_angles()
    order = np.argsort(theta_src)
    theta_src = theta_src[order]
    theta_dst = target.boundary_angles()
    values = np.empty((series.nt, target.n_boundary))
    for level in range(series.nt):
        values[level] = np.interp(theta_dst, theta_src, series.values[level, order], period=2.0 * np.pi)
    log.info("Resampled %d boundary nodes onto %d", source.n_boundary, target.n_boundary)
    return series.with_values(values)
