#!/usr/bin/env python3
"""
Finite-Element Assembly
Sparse P1 matrices for the damped wave system M p'' + C p' + (K + B) p = 0
with the effective impedance boundary condition, plus the arc-length
operators of the boundary curve.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np
import scipy.sparse as sp

from mesh import Mesh

log = logging.getLogger(__name__)

DEGENERATE_AREA_FACTOR = 1e-14


class DimensionError(ValueError):
    """Array shape does not match the mesh or the boundary."""


class AssemblyError(ValueError):
    """Degenerate element found during assembly."""

    def __init__(self, message: str, triangle: int):
        super().__init__(message)
        self.triangle = triangle


@dataclass(frozen=True)
class Material:
    """Acoustic medium, sensing film and backing constants.

    ``c`` is either a constant or one value per node. The defaults are the
    nondimensional values of the reconstruction experiments.
    """
    c: Union[float, np.ndarray] = 1.0
    rho: float = 1.0
    rho_b: float = 2.0
    c_b: float = 1.0
    rho_p: float = 1.5
    c_p: float = 1.0
    kappa: float = 0.9

    def __post_init__(self):
        for name in ("rho", "rho_b", "c_b", "rho_p", "c_p"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be non-negative, got {self.kappa}")
        c = np.asarray(self.c, dtype=np.float64)
        if not np.all(np.isfinite(c)) or np.any(c <= 0):
            raise ValueError("wave speed c must be finite and positive everywhere")

    def speed_at_nodes(self, n_nodes: int) -> np.ndarray:
        c = np.asarray(self.c, dtype=np.float64)
        if c.ndim == 0:
            return np.full(n_nodes, float(c))
        if c.shape != (n_nodes,):
            raise ValueError(f"c has shape {c.shape}, expected ({n_nodes},)")
        return c

    @property
    def c_max(self) -> float:
        return float(np.max(self.c))

    @property
    def damping_coefficient(self) -> float:
        """rho / (rho_b c_b), the factor of the boundary mass in C."""
        return self.rho / (self.rho_b * self.c_b)

    @property
    def curvature_coefficient(self) -> float:
        """rho / rho_b, the factor of the curvature-weighted boundary mass in B."""
        return self.rho / self.rho_b


@dataclass(frozen=True)
class SemidiscreteSystem:
    """Assembled matrices. Node-indexed unless noted.

    ``Mb``, ``Mb_lumped`` and ``Kb`` live on the boundary loop (B x B, in loop
    order); ``C_lumped`` and ``B`` are N x N but supported on boundary rows.
    """
    mesh: Mesh
    material: Material
    M: sp.csr_matrix
    M_lumped: np.ndarray
    K: sp.csr_matrix
    C: sp.csr_matrix
    C_lumped: np.ndarray
    B: sp.csr_matrix
    Mb: sp.csr_matrix
    Mb_lumped: np.ndarray
    Kb: sp.csr_matrix

    @property
    def boundary_nodes(self) -> np.ndarray:
        return self.mesh.boundary_loop

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    @property
    def n_boundary(self) -> int:
        return self.mesh.n_boundary

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """K + B, the operator acting on p in the semidiscrete system."""
        return (self.K + self.B).tocsr()


def _symmetrized(A: sp.spmatrix) -> sp.csr_matrix:
    return ((A + A.T) * 0.5).tocsr()


def _element_blocks(triangles: np.ndarray):
    rows = np.repeat(triangles, 3, axis=1).ravel()
    cols = np.tile(triangles, (1, 3)).ravel()
    return rows, cols


def assemble(mesh: Mesh, material: Material) -> SemidiscreteSystem:
    """
    Assemble the semidiscrete wave system on ``mesh``

    Args:
        mesh: Disk mesh
        material: Medium constants and wave-speed field

    Returns:
        SemidiscreteSystem with symmetric sparse matrices

    Raises:
        AssemblyError: a triangle with area below 1e-14 h^2
    """
    nodes, tris = mesh.nodes, mesh.triangles
    n = mesh.n_nodes
    x = nodes[tris, 0]
    y = nodes[tris, 1]

    # Barycentric gradients: grad(lambda_i) = (b_i, c_i) / (2 area)
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])

    h = mesh.h_max
    bad = np.flatnonzero(area < DEGENERATE_AREA_FACTOR * h * h)
    if bad.size:
        t = int(bad[0])
        raise AssemblyError(f"triangle {t} {tris[t].tolist()} is degenerate (area {area[t]:.3e})", t)

    rows, cols = _element_blocks(tris)
    K_local = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (4.0 * area)[:, None, None]
    K = sp.coo_matrix((K_local.ravel(), (rows, cols)), shape=(n, n))

    slowness2 = material.speed_at_nodes(n) ** -2
    weight = slowness2[tris].mean(axis=1) * area / 12.0
    M_local = weight[:, None, None] * (np.ones((3, 3)) + np.eye(3))
    M = sp.coo_matrix((M_local.ravel(), (rows, cols)), shape=(n, n))

    loop = mesh.boundary_loop
    nb = mesh.n_boundary
    ell = mesh.boundary_edge_lengths
    first = np.arange(nb)
    second = np.roll(first, -1)
    b_rows = np.concatenate([first, first, second, second])
    b_cols = np.concatenate([first, second, first, second])
    Mb_data = np.concatenate([ell / 3.0, ell / 6.0, ell / 6.0, ell / 3.0])
    Kb_data = np.concatenate([1.0 / ell, -1.0 / ell, -1.0 / ell, 1.0 / ell])
    Mb = _symmetrized(sp.coo_matrix((Mb_data, (b_rows, b_cols)), shape=(nb, nb)))
    Kb = _symmetrized(sp.coo_matrix((Kb_data, (b_rows, b_cols)), shape=(nb, nb)))
    Mb_lumped = 0.5 * (ell + np.roll(ell, 1))

    lift = sp.coo_matrix((np.ones(nb), (loop, first)), shape=(n, nb)).tocsr()
    C = _symmetrized(material.damping_coefficient * (lift @ Mb @ lift.T))
    C_lumped = np.zeros(n)
    C_lumped[loop] = material.damping_coefficient * Mb_lumped
    B_diag = np.zeros(n)
    B_diag[loop] = material.curvature_coefficient * mesh.boundary_curvature * Mb_lumped

    K = _symmetrized(K)
    M = _symmetrized(M)
    M_lumped = np.asarray(M.sum(axis=1)).ravel()

    log.debug("Assembled system: %d nodes, %d boundary nodes, nnz(K)=%d", n, nb, K.nnz)
    return SemidiscreteSystem(
        mesh=mesh,
        material=material,
        M=M,
        M_lumped=M_lumped,
        K=K,
        C=C,
        C_lumped=C_lumped,
        B=sp.diags(B_diag, format="csr"),
        Mb=Mb,
        Mb_lumped=Mb_lumped,
        Kb=Kb,
    )


def boundary_laplacian_apply(system: SemidiscreteSystem, g: np.ndarray) -> np.ndarray:
    """
    Discrete periodic second arc-length derivative, -Mb_lumped^-1 Kb g

    Args:
        system: Assembled system
        g: Boundary values, shape (B,) or (Nt, B) in loop order

    Returns:
        Array of the same shape as ``g``
    """
    g = np.asarray(g, dtype=np.float64)
    nb = system.n_boundary
    if g.shape[-1] != nb or g.ndim not in (1, 2):
        raise DimensionError(f"boundary field has shape {g.shape}, expected (..., {nb})")
    if g.ndim == 1:
        return -(system.Kb @ g) / system.Mb_lumped
    return -(system.Kb @ g.T).T / system.Mb_lumped
