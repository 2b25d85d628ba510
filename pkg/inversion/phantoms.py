#!/usr/bin/env python3
"""
Phantom Ingestion
Turns grayscale rasters and synthetic shapes into admissible initial
pressure fields: bilinear sampling at the mesh nodes, [0, 1] rescaling and a
cosine taper that vanishes on the boundary.
"""

import logging
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
from PIL import Image
from scipy import ndimage

from mesh import Mesh
from wavesim import NodalField

log = logging.getLogger(__name__)

MIN_RASTER_SIZE = 8
TAPER_FRACTION = 0.1
DEGENERATE_NORM = 1e-12

# Centres, widths and amplitudes of the reference phantom (unit radius)
REFERENCE_BUMPS = (
    ((0.25, 0.1), 0.12, 1.0),
    ((-0.3, 0.25), 0.09, 0.7),
    ((0.0, -0.35), 0.15, 0.5),
    ((-0.15, -0.1), 0.06, 0.9),
)


class PhantomError(ValueError):
    """Raster unusable or phantom degenerate after the boundary taper."""


def load_pgm_phantom(path) -> np.ndarray:
    """
    Read an 8- or 16-bit grayscale PGM as a float array (row 0 at the top)

    Raises:
        FileNotFoundError: path does not exist
        PhantomError: unreadable image or fewer than 8 x 8 pixels
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Phantom raster not found: {path}")
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "I", "I;16", "I;16B"):
                img = img.convert("L")
            raster = np.asarray(img, dtype=np.float64)
    except OSError as e:
        raise PhantomError(f"could not read raster {path}: {e}") from e
    if raster.ndim != 2 or min(raster.shape) < MIN_RASTER_SIZE:
        raise PhantomError(f"raster {path.name} is {raster.shape}, need at least "
                           f"{MIN_RASTER_SIZE}x{MIN_RASTER_SIZE}")
    log.info("Loaded %dx%d phantom raster from %s", raster.shape[1], raster.shape[0], path)
    return raster


def write_pgm(path, raster: np.ndarray, bits: int = 8) -> Path:
    """Write ``raster`` (values in [0, 1]) as an 8- or 16-bit PGM."""
    if bits not in (8, 16):
        raise ValueError(f"bits must be 8 or 16, got {bits}")
    path = Path(path)
    scaled = np.clip(np.asarray(raster, dtype=np.float64), 0.0, 1.0) * (2 ** bits - 1)
    dtype = np.uint8 if bits == 8 else np.uint16
    Image.fromarray(np.rint(scaled).astype(dtype)).save(path, format="PPM")
    return path


def rescale_unit(raster: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant raster maps to 0 if zero, else 1."""
    raster = np.asarray(raster, dtype=np.float64)
    low, high = float(raster.min()), float(raster.max())
    if high > low:
        return (raster - low) / (high - low)
    return np.full_like(raster, 1.0 if high != 0.0 else 0.0)


def sample_raster(mesh: Mesh, raster: np.ndarray, radius: float) -> np.ndarray:
    """
    Bilinear samples of ``raster`` at the mesh nodes

    The raster covers the square [-radius, radius]^2 with row 0 at y = +radius.
    """
    rows_px, cols_px = raster.shape
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    cols = (x + radius) / (2.0 * radius) * (cols_px - 1)
    rows = (radius - y) / (2.0 * radius) * (rows_px - 1)
    return ndimage.map_coordinates(raster, [rows, cols], order=1, mode="nearest")


def radial_cutoff(mesh: Mesh, radius: float, taper: float = TAPER_FRACTION) -> np.ndarray:
    """
    Cosine taper: 1 inside (1 - taper) radius, 0 on and outside the boundary

    Boundary-loop nodes get exactly 0.
    """
    if not 0 < taper < 1:
        raise ValueError(f"taper must lie in (0, 1), got {taper}")
    r = np.linalg.norm(mesh.nodes, axis=1)
    inner = (1.0 - taper) * radius
    weights = np.ones(mesh.n_nodes)
    ramp = (r > inner) & (r < radius)
    weights[ramp] = 0.5 * (1.0 + np.cos(np.pi * (r[ramp] - inner) / (taper * radius)))
    weights[r >= radius] = 0.0
    weights[mesh.boundary_loop] = 0.0
    return weights


def phantom_from_raster(mesh: Mesh, raster: np.ndarray, radius: float,
                        taper: float = TAPER_FRACTION) -> NodalField:
    """
    Admissible initial pressure from a raster

    Raises:
        PhantomError: the raster has content but nothing survives the taper
    """
    unit = rescale_unit(raster)
    values = sample_raster(mesh, unit, radius) * radial_cutoff(mesh, radius, taper)
    if np.any(unit > 0) and np.linalg.norm(values) < DEGENERATE_NORM:
        raise PhantomError("phantom vanishes after the boundary cutoff; "
                           "its content lies outside the reconstruction disk")
    return NodalField(values)


def load_phantom(path, mesh: Mesh, radius: float) -> NodalField:
    """A ``.npy`` nodal field is used as is (boundary masked); anything else is read as PGM."""
    path = Path(path)
    if path.suffix == ".npy":
        field = NodalField.load(path)
        if len(field) != mesh.n_nodes:
            raise PhantomError(f"nodal field has {len(field)} values, mesh has {mesh.n_nodes} nodes")
        values = field.values.copy()
        values[mesh.boundary_loop] = 0.0
        return NodalField(values)
    return phantom_from_raster(mesh, load_pgm_phantom(path), radius)


# ---------------------------------------------------------------------------
# Synthetic phantoms
# ---------------------------------------------------------------------------

def gaussian_bumps_phantom(
    mesh: Mesh,
    radius: float = 1.0,
    bumps: Optional[Sequence[Tuple[Tuple[float, float], float, float]]] = None,
) -> NodalField:
    """
    Sum of Gaussian bumps, tapered to vanish on the boundary

    Args:
        mesh: Disk mesh
        radius: Disk radius; centres and widths are given relative to it
        bumps: (centre, width, amplitude) triples; defaults to the reference set
    """
    bumps = REFERENCE_BUMPS if bumps is None else bumps
    values = np.zeros(mesh.n_nodes)
    for (cx, cy), width, amplitude in bumps:
        dist2 = np.sum((mesh.nodes / radius - np.array([cx, cy])) ** 2, axis=1)
        values += amplitude * np.exp(-dist2 / width ** 2)
    return NodalField(values * radial_cutoff(mesh, radius))


def vessel_phantom(mesh: Mesh, seed: int, radius: float = 1.0, n_vessels: int = 3,
                   width: float = 0.04) -> NodalField:
    """Vessel-like phantom: smooth random curves of Gaussian cross-section."""
    rng = np.random.default_rng(seed)
    nodes = mesh.nodes / radius
    values = np.zeros(mesh.n_nodes)
    s = np.linspace(0.0, 1.0, 200)[:, None]
    for _ in range(n_vessels):
        # Quadratic Bezier through three random points within 0.7 radius
        r = 0.7 * np.sqrt(rng.uniform(size=3))
        angle = rng.uniform(0.0, 2.0 * np.pi, size=3)
        p0, p1, p2 = np.stack([r * np.cos(angle), r * np.sin(angle)], axis=1)
        curve = (1 - s) ** 2 * p0 + 2 * (1 - s) * s * p1 + s ** 2 * p2
        dist2 = np.min(np.sum((nodes[:, None, :] - curve[None, :, :]) ** 2, axis=2), axis=1)
        values = np.maximum(values, np.exp(-dist2 / width ** 2))
    return NodalField(values * radial_cutoff(mesh, radius))
