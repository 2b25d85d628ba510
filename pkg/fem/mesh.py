#!/usr/bin/env python3
"""
Disk Meshes
Generates, validates, loads and saves 2D triangulations of disk-like domains
with a single counterclockwise boundary loop.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np

log = logging.getLogger(__name__)

MESH_HEADER = "PATMESH 1"
DEFAULT_MAX_NODES = 5_000_000


class MeshResourceError(MemoryError):
    """Requested mesh would exceed the node budget."""


class MeshParseError(ValueError):
    """Malformed mesh file. Carries the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class MeshTopologyError(ValueError):
    """Triangulation is not a disk with one counterclockwise boundary loop."""


def _readonly(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class Mesh:
    """Immutable P1 triangulation.

    Build instances through ``Mesh.from_arrays`` so the derived boundary
    quantities are filled in and the invariants are checked.
    """
    nodes: np.ndarray                  # (N, 2)
    triangles: np.ndarray              # (T, 3), counterclockwise
    boundary_loop: np.ndarray          # (B,), counterclockwise
    boundary_edge_lengths: np.ndarray  # (B,), edge i joins loop[i] -> loop[i+1]
    boundary_curvature: np.ndarray     # (B,)

    @classmethod
    def from_arrays(cls, nodes, triangles, boundary_loop=None, validate: bool = True) -> "Mesh":
        """
        Create a mesh from raw arrays

        Args:
            nodes: (N, 2) coordinates
            triangles: (T, 3) node indices, counterclockwise
            boundary_loop: Ordered boundary node indices; traced from the
                triangles when omitted
            validate: Run the topology checks of ``validate_mesh``

        Returns:
            Mesh with boundary edge lengths and curvature filled in
        """
        nodes = np.array(nodes, dtype=np.float64).reshape(-1, 2)
        triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if boundary_loop is None:
            loops = trace_boundary_loops(triangles)
            if len(loops) != 1:
                raise MeshTopologyError(f"expected one boundary loop, found {len(loops)}")
            boundary_loop = loops[0]
        boundary_loop = np.array(boundary_loop, dtype=np.int64).ravel()

        points = nodes[boundary_loop]
        lengths = np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1)
        mesh = cls(
            nodes=_readonly(nodes),
            triangles=_readonly(triangles),
            boundary_loop=_readonly(boundary_loop),
            boundary_edge_lengths=_readonly(lengths),
            boundary_curvature=_readonly(loop_curvature(points)),
        )
        if validate:
            validate_mesh(mesh)
        return mesh

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_boundary(self) -> int:
        return self.boundary_loop.shape[0]

    @property
    def boundary_points(self) -> np.ndarray:
        return self.nodes[self.boundary_loop]

    @property
    def perimeter(self) -> float:
        return float(self.boundary_edge_lengths.sum())

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted (E, 2) index pairs."""
        return _unique_edges(self.triangles)

    def edge_lengths(self) -> np.ndarray:
        e = self.edges()
        return np.linalg.norm(self.nodes[e[:, 1]] - self.nodes[e[:, 0]], axis=1)

    @property
    def h_min(self) -> float:
        return float(self.edge_lengths().min())

    @property
    def h_max(self) -> float:
        return float(self.edge_lengths().max())

    def boundary_angles(self) -> np.ndarray:
        """Polar angle in [0, 2pi) of each boundary node about the boundary centroid."""
        points = self.boundary_points
        rel = points - points.mean(axis=0)
        return np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2.0 * np.pi)


# ---------------------------------------------------------------------------
# Topology helpers
# ---------------------------------------------------------------------------

def _unique_edges(triangles: np.ndarray) -> np.ndarray:
    pairs = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    return np.unique(np.sort(pairs, axis=1), axis=0)


def signed_areas(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0, p1, p2 = (nodes[triangles[:, k]] for k in range(3))
    d1, d2 = p1 - p0, p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def trace_boundary_loops(triangles: np.ndarray) -> List[np.ndarray]:
    """
    Follow the directed boundary edges of a counterclockwise triangulation

    Edges that occur in exactly one triangle are boundary edges; taken in the
    triangle's own orientation they run counterclockwise around the domain.

    Returns:
        One index array per closed loop, each starting at its smallest node
    """
    directed = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    keys, counts = np.unique(np.sort(directed, axis=1), axis=0, return_counts=True)
    once = {tuple(k) for k in keys[counts == 1]}
    bad = keys[counts > 2]
    if len(bad):
        raise MeshTopologyError(f"edge {tuple(bad[0])} shared by more than two triangles")

    successor = {}
    for a, b in directed:
        if (min(a, b), max(a, b)) in once:
            if a in successor:
                raise MeshTopologyError(f"boundary node {a} is pinched (two outgoing boundary edges)")
            successor[int(a)] = int(b)

    loops = []
    remaining = set(successor)
    while remaining:
        start = min(remaining)
        loop = [start]
        node = successor[start]
        while node != start:
            if node not in remaining:
                raise MeshTopologyError(f"boundary walk from node {start} does not close")
            loop.append(node)
            node = successor[node]
        remaining.difference_update(loop)
        loops.append(np.array(loop, dtype=np.int64))
    return loops


def loop_curvature(points: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """
    Signed curvature at each vertex of a closed polyline

    Uses the circle through each vertex and its two neighbours. Positive for
    a convex counterclockwise loop; exactly collinear triples give 0.

    Args:
        points: (B, 2) vertices in loop order
        tol: Relative threshold under which a triple counts as collinear

    Returns:
        (B,) curvature values (1/length)
    """
    a = np.roll(points, 1, axis=0)
    b = points
    c = np.roll(points, -1, axis=0)
    ab = np.linalg.norm(b - a, axis=1)
    bc = np.linalg.norm(c - b, axis=1)
    ca = np.linalg.norm(a - c, axis=1)
    u, v = b - a, c - a
    cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    scale = ab * bc * ca
    curvature = np.zeros(len(points))
    ok = np.abs(cross) > tol * np.maximum(ab, bc) ** 2
    curvature[ok] = 2.0 * cross[ok] / scale[ok]
    return curvature


def boundary_curvature(mesh: Mesh) -> np.ndarray:
    """Three-point curvature at each boundary node, H = +1/R on a circle."""
    return loop_curvature(mesh.boundary_points)


def validate_mesh(mesh: Mesh):
    """
    Check the disk-mesh invariants

    Raises:
        MeshTopologyError: on inverted triangles, extra loops, a loop that does
            not match the triangles, clockwise orientation or an Euler mismatch
    """
    if mesh.n_triangles == 0:
        raise MeshTopologyError("mesh has no triangles")
    areas = signed_areas(mesh.nodes, mesh.triangles)
    inverted = np.flatnonzero(areas <= 0.0)
    if inverted.size:
        raise MeshTopologyError(f"triangle {inverted[0]} has non-positive signed area")

    loops = trace_boundary_loops(mesh.triangles)
    if len(loops) != 1:
        raise MeshTopologyError(f"expected one boundary loop, found {len(loops)}")
    traced = loops[0]
    loop = mesh.boundary_loop
    if len(traced) != len(loop) or set(traced.tolist()) != set(loop.tolist()):
        raise MeshTopologyError("boundary loop does not match the boundary edges of the triangles")
    shift = int(np.flatnonzero(loop == traced[0])[0])
    if not np.array_equal(np.roll(loop, -shift), traced):
        raise MeshTopologyError("boundary loop is not ordered counterclockwise along the boundary edges")

    pts = mesh.boundary_points
    x, y = pts[:, 0], pts[:, 1]
    polygon_area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if polygon_area <= 0.0:
        raise MeshTopologyError("boundary loop has non-positive signed area")

    used = np.unique(mesh.triangles)
    n_edges = len(_unique_edges(mesh.triangles))
    euler = len(used) - n_edges + mesh.n_triangles
    if len(used) != mesh.n_nodes or euler != 1:
        raise MeshTopologyError(
            f"Euler characteristic {euler} with {mesh.n_nodes - len(used)} unused nodes; "
            "expected a connected disk (N - E + T = 1)"
        )


# ---------------------------------------------------------------------------
# Disk generator
# ---------------------------------------------------------------------------

def _ring_band(inner: np.ndarray, outer: np.ndarray) -> List[Tuple[int, int, int]]:
    """Triangulate between two concentric rings whose nodes start at angle 0."""
    n_in, n_out = len(inner), len(outer)
    if n_in == 1:
        return [(inner[0], outer[j], outer[(j + 1) % n_out]) for j in range(n_out)]

    step_in, step_out = 2.0 * math.pi / n_in, 2.0 * math.pi / n_out
    band = []
    i = j = 0
    while i < n_in or j < n_out:
        next_in = (i + 1) * step_in if i < n_in else math.inf
        next_out = (j + 1) * step_out if j < n_out else math.inf
        # ties advance the inner ring so aligned nodes get a radial edge
        if next_out < next_in - 1e-12:
            band.append((inner[i % n_in], outer[j % n_out], outer[(j + 1) % n_out]))
            j += 1
        else:
            band.append((inner[i % n_in], outer[j % n_out], inner[(i + 1) % n_in]))
            i += 1
    return band


def disk_node_count(radius: float, h: float) -> int:
    rings = math.ceil(radius / h)
    return 1 + 3 * rings * (rings + 1)


def generate_disk_mesh(radius: float, h: float, max_nodes: int = DEFAULT_MAX_NODES) -> Mesh:
    """
    Concentric-ring triangulation of a disk centred at the origin

    Ring k of n = ceil(radius / h) rings holds 6k equally spaced nodes
    starting at angle 0, so the construction is deterministic.

    Args:
        radius: Disk radius
        h: Target edge length
        max_nodes: Node budget

    Returns:
        Validated Mesh

    Raises:
        ValueError: radius or h out of range
        MeshResourceError: node count above ``max_nodes``
    """
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if not 0 < h < radius:
        raise ValueError(f"h must satisfy 0 < h < radius, got h={h}, radius={radius}")
    n_nodes = disk_node_count(radius, h)
    if n_nodes > max_nodes:
        raise MeshResourceError(
            f"h={h} needs {n_nodes} nodes, above the budget of {max_nodes}; increase h"
        )

    rings = math.ceil(radius / h)
    coords = [np.zeros((1, 2))]
    ring_ids = [np.array([0])]
    offset = 1
    for k in range(1, rings + 1):
        count = 6 * k
        r = radius * k / rings
        theta = 2.0 * np.pi * np.arange(count) / count
        coords.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
        ring_ids.append(np.arange(offset, offset + count))
        offset += count

    triangles = []
    for k in range(1, rings + 1):
        triangles.extend(_ring_band(ring_ids[k - 1], ring_ids[k]))
    nodes = np.vstack(coords)
    tris = np.array(triangles, dtype=np.int64)

    flipped = signed_areas(nodes, tris) < 0
    tris[flipped] = tris[flipped][:, [0, 2, 1]]

    log.debug("Disk mesh: %d rings, %d nodes, %d triangles", rings, len(nodes), len(tris))
    return Mesh.from_arrays(nodes, tris, ring_ids[-1])


# ---------------------------------------------------------------------------
# PATMESH text format
# ---------------------------------------------------------------------------

def save_mesh(mesh: Mesh, path) -> Path:
    """Write ``mesh`` in PATMESH text format with round-trip precision."""
    path = Path(path)
    lines = [MESH_HEADER, f"{mesh.n_nodes} {mesh.n_triangles} {mesh.n_boundary}"]
    lines.extend(f"{x:.17g} {y:.17g}" for x, y in mesh.nodes.tolist())
    lines.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist())
    lines.extend(str(i) for i in mesh.boundary_loop.tolist())
    text = "\n".join(lines) + "\n"

    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="ascii")
    tmp.replace(path)
    return path


def _parse_numbers(tokens: List[str], kind, count: int, line_number: int, what: str):
    if len(tokens) != count:
        raise MeshParseError(f"expected {count} values for {what}, got {len(tokens)}", line_number)
    try:
        return [kind(t) for t in tokens]
    except ValueError:
        raise MeshParseError(f"could not parse {what}: {' '.join(tokens)}", line_number) from None


def load_mesh(path) -> Mesh:
    """
    Read a PATMESH file

    Args:
        path: File path

    Returns:
        Validated Mesh

    Raises:
        FileNotFoundError: missing file
        MeshParseError: malformed content, with the offending line number
        MeshTopologyError: content parses but is not a disk mesh
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Mesh file not found: {path}")

    lines = path.read_text(encoding="ascii").splitlines()
    numbered = [(n + 1, line.split()) for n, line in enumerate(lines) if line.strip()]
    if not numbered or " ".join(numbered[0][1]) != MESH_HEADER:
        raise MeshParseError(f"missing '{MESH_HEADER}' header", numbered[0][0] if numbered else 1)
    if len(numbered) < 2:
        raise MeshParseError("missing 'N T B' count line", len(lines) + 1)

    line_number, tokens = numbered[1]
    n, t, b = _parse_numbers(tokens, int, 3, line_number, "N T B")
    if n < 3 or t < 1 or b < 3:
        raise MeshParseError(f"implausible counts N={n} T={t} B={b}", line_number)
    body = numbered[2:]
    if len(body) < n + t + b:
        raise MeshParseError(f"file ends early: expected {n + t + b} data lines, found {len(body)}",
                             body[-1][0] if body else line_number)
    if len(body) > n + t + b:
        raise MeshParseError("unexpected trailing data", body[n + t + b][0])

    nodes = np.empty((n, 2))
    for row, (line_number, tokens) in enumerate(body[:n]):
        nodes[row] = _parse_numbers(tokens, float, 2, line_number, "node coordinates")
    if not np.all(np.isfinite(nodes)):
        raise MeshParseError("non-finite node coordinate", body[0][0])

    triangles = np.empty((t, 3), dtype=np.int64)
    for row, (line_number, tokens) in enumerate(body[n:n + t]):
        tri = _parse_numbers(tokens, int, 3, line_number, "triangle")
        if min(tri) < 0 or max(tri) >= n:
            raise MeshParseError(f"triangle references node outside 0..{n - 1}: {tri}", line_number)
        triangles[row] = tri

    loop = np.empty(b, dtype=np.int64)
    for row, (line_number, tokens) in enumerate(body[n + t:]):
        (index,) = _parse_numbers(tokens, int, 1, line_number, "boundary index")
        if not 0 <= index < n:
            raise MeshParseError(f"boundary index {index} outside 0..{n - 1}", line_number)
        loop[row] = index

    mesh = Mesh.from_arrays(nodes, triangles, loop)
    log.info("Loaded mesh %s: %d nodes, %d triangles", path.name, mesh.n_nodes, mesh.n_triangles)
    return mesh
