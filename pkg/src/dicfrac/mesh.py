"""Bilinear-quad mesh coincident with the DIC grid, with a node-duplication
seam along the crack.

The seam splits the mesh along a chain of lattice edges from the crack mouth
to the tip: every chain node except the tip is duplicated, elements on the
left side of the mouth->tip walk are rebound to the duplicates, and the tip
node stays shared so integration contours can wrap around it.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    CrackTouchesBoundaryTip,
    PolylineNotSnappable,
    TipOutsideGrid,
)
from .field import DisplacementField, MaskRegion

#: Snapped chain nodes farther than this many cell diagonals from the user
#: polyline make the polyline unsnappable.
SNAP_TOLERANCE_CELLS = 1.0


@dataclass(frozen=True)
class CrackDefinition:
    """User crack geometry: polyline from mouth to tip, all in meters.

    ``q_angle`` is the virtual crack extension direction; None means the
    direction of the last polyline segment.
    """

    polyline: tuple
    tip: tuple
    q_angle: float | None = None
    mask: MaskRegion | None = None

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.polyline)
        if len(pts) < 2:
            raise ValueError("crack polyline needs at least 2 points (mouth to tip)")
        tip = (float(self.tip[0]), float(self.tip[1]))
        if pts[-1] != tip:
            raise ValueError("last polyline point must equal the tip")
        for a, b in zip(pts, pts[1:]):
            if a == b:
                raise ValueError("consecutive polyline points must be distinct")
        object.__setattr__(self, "polyline", pts)
        object.__setattr__(self, "tip", tip)

    def extension_angle(self) -> float:
        """Crack extension direction: q_angle, or the last segment's bearing."""
        if self.q_angle is not None:
            return float(self.q_angle)
        (x0, y0), (x1, y1) = self.polyline[-2], self.polyline[-1]
        return math.atan2(y1 - y0, x1 - x0)


def crack_frame(crack: CrackDefinition) -> np.ndarray:
    """2x2 rotation taking global (x, y) to tip-local (x1, x2), x1 along q."""
    a = crack.extension_angle()
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, s], [-s, c]])


@dataclass
class SeamMesh:
    """FE mesh with the crack seam inserted.

    nodes: (N, 2) coordinates; elements: (E, 4) CCW node indices;
    seam_pairs: (S, 2) [original, duplicate]; constrained/bc_values install
    the measured displacements (masked and seam nodes stay free).
    """

    nodes: np.ndarray
    elements: np.ndarray
    seam_pairs: np.ndarray
    tip_node: int | None
    constrained: np.ndarray
    bc_values: np.ndarray
    nx: int
    ny: int
    grid_node_count: int
    chain_indices: tuple = ()  # grid (i, j) of the snapped chain, mouth->tip
    boundary_nodes: np.ndarray = dc_field(default=None)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)


def _grid_elements(nx: int, ny: int) -> np.ndarray:
    """CCW quad connectivity of the full grid, cell (i, j) -> row i + j*(nx-1)."""
    i = np.arange(nx - 1)
    j = np.arange(ny - 1)
    I, J = np.meshgrid(i, j)
    n00 = (I + J * nx).ravel()
    return np.column_stack([n00, n00 + 1, n00 + 1 + nx, n00 + nx])


def _snap_point(field: DisplacementField, p) -> tuple:
    i = int(round((p[0] - field.origin[0]) / field.spacing_x))
    j = int(round((p[1] - field.origin[1]) / field.spacing_y))
    return i, j


def _point_segment_distance(px, py, ax, ay, bx, by):
    vx, vy = bx - ax, by - ay
    L2 = vx * vx + vy * vy
    if L2 == 0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * vx + (py - ay) * vy) / L2))
    return math.hypot(px - (ax + t * vx), py - (ay + t * vy))


def _polyline_distance(p, polyline) -> float:
    return min(_point_segment_distance(p[0], p[1], a[0], a[1], b[0], b[1])
               for a, b in zip(polyline, polyline[1:]))


def _snap_chain(field: DisplacementField, crack: CrackDefinition):
    """Snap the crack polyline to a chain of lattice edges (mouth -> tip).

    Dijkstra over grid edges weighted by edge length times the distance of the
    edge midpoint to the polyline, so the path hugs the user geometry; ties
    fall back to shortest length.
    """
    nx, ny = field.nx, field.ny
    sx, sy = field.spacing_x, field.spacing_y
    x0, y0 = field.origin
    tip_ij = _snap_point(field, crack.tip)
    if not (0 <= tip_ij[0] < nx and 0 <= tip_ij[1] < ny):
        raise TipOutsideGrid(f"crack tip {crack.tip} snaps outside the grid")
    if tip_ij[0] in (0, nx - 1) or tip_ij[1] in (0, ny - 1):
        raise CrackTouchesBoundaryTip(
            "crack tip lies on the grid boundary; no integration domain fits")
    mouth_ij = _snap_point(field, crack.polyline[0])
    mouth_ij = (min(max(mouth_ij[0], 0), nx - 1), min(max(mouth_ij[1], 0), ny - 1))

    eps = 1e-3 * min(sx, sy)

    def neighbors(ij):
        i, j = ij
        if i > 0:
            yield (i - 1, j), sx
        if i < nx - 1:
            yield (i + 1, j), sx
        if j > 0:
            yield (i, j - 1), sy
        if j < ny - 1:
            yield (i, j + 1), sy

    def node_xy(ij):
        return (x0 + ij[0] * sx, y0 + ij[1] * sy)

    start, goal = mouth_ij, tip_ij
    dist = {start: 0.0}
    prev = {}
    heap = [(0.0, start)]
    visited = set()
    while heap:
        d, cur = heapq.heappop(heap)
        if cur in visited:
            continue
        visited.add(cur)
        if cur == goal:
            break
        cx, cy = node_xy(cur)
        for nb, length in neighbors(cur):
            if nb in visited:
                continue
            mx, my = node_xy(nb)
            mid = (0.5 * (cx + mx), 0.5 * (cy + my))
            w = length * (eps + _polyline_distance(mid, crack.polyline)) / min(sx, sy)
            nd = d + w
            if nd < dist.get(nb, math.inf):
                dist[nb] = nd
                prev[nb] = cur
                heapq.heappush(heap, (nd, nb))
    if goal not in visited:
        raise PolylineNotSnappable("no lattice path from mouth to tip")
    chain = [goal]
    while chain[-1] != start:
        chain.append(prev[chain[-1]])
    chain.reverse()

    diag = math.hypot(sx, sy)
    worst = max(_polyline_distance(node_xy(ij), crack.polyline) for ij in chain)
    if worst > SNAP_TOLERANCE_CELLS * diag:
        raise PolylineNotSnappable(
            f"snapped chain strays {worst:.3g} m from the polyline "
            f"(> {SNAP_TOLERANCE_CELLS:g} cell diagonal)")
    return chain


def _incident_cells(ij, nx, ny):
    """Grid cells (ci, cj) touching node (i, j)."""
    i, j = ij
    out = []
    for cj in (j - 1, j):
        for ci in (i - 1, i):
            if 0 <= ci < nx - 1 and 0 <= cj < ny - 1:
                out.append((ci, cj))
    return out


def build_seam_mesh(field: DisplacementField,
                    crack: CrackDefinition | None) -> SeamMesh:
    """Build the grid-coincident quad mesh, optionally split along the crack.

    Measured displacements become bc_values on every node that is neither
    masked nor on the seam (tip included when unmasked); element connectivity
    on the left of the mouth->tip walk is rebound to the duplicate nodes.
    """
    nx, ny = field.nx, field.ny
    xy = field.node_xy()
    elements = _grid_elements(nx, ny)
    uxy = field.u[:, :2]

    if crack is None:
        constrained = ~field.mask
        boundary = _boundary_mask(nx, ny)
        return SeamMesh(nodes=xy, elements=elements,
                        seam_pairs=np.empty((0, 2), dtype=int), tip_node=None,
                        constrained=constrained, bc_values=uxy.copy(),
                        nx=nx, ny=ny, grid_node_count=nx * ny,
                        chain_indices=(), boundary_nodes=boundary)

    chain = _snap_chain(field, crack)
    tip_ij = chain[-1]
    tip_node = tip_ij[0] + tip_ij[1] * nx
    chain_flat = [ij[0] + ij[1] * nx for ij in chain]

    nodes = [xy]
    n_grid = nx * ny
    seam_pairs = []
    elements = elements.copy()

    next_id = n_grid
    new_coords = []
    for k, ij in enumerate(chain[:-1]):  # tip never duplicated
        node = chain_flat[k]
        # seam rays at this node: towards the previous and next chain nodes;
        # the mouth end extends virtually backwards out of the grid
        nxt = chain[k + 1]
        d_out = (nxt[0] - ij[0], nxt[1] - ij[1])
        if k > 0:
            prv = chain[k - 1]
            d_in = (prv[0] - ij[0], prv[1] - ij[1])
        else:
            d_in = (-d_out[0], -d_out[1])
        a_out = math.atan2(d_out[1], d_out[0])
        a_in = math.atan2(d_in[1], d_in[0])

        dup = next_id
        next_id += 1
        seam_pairs.append((node, dup))
        new_coords.append(xy[node])

        for ci, cj in _incident_cells(ij, nx, ny):
            row = ci + cj * (nx - 1)
            beta = math.atan2((cj + 0.5 - ij[1]) * field.spacing_y,
                              (ci + 0.5 - ij[0]) * field.spacing_x)
            # left side of the mouth->tip walk = CCW arc from a_out to a_in
            if _in_ccw_arc(a_out, a_in, beta):
                conn = elements[row]
                elements[row] = np.where(conn == node, dup, conn)

    if new_coords:
        nodes.append(np.asarray(new_coords))
    all_nodes = np.vstack(nodes)
    seam_pairs = np.asarray(seam_pairs, dtype=int).reshape(-1, 2)

    n_total = len(all_nodes)
    constrained = np.zeros(n_total, dtype=bool)
    constrained[:n_grid] = ~field.mask
    # seam nodes (both faces) carry no measured BC; the shared tip keeps its
    # value when unmasked
    for node, dup in seam_pairs:
        constrained[node] = False
        constrained[dup] = False
    bc = np.zeros((n_total, 2))
    bc[:n_grid] = uxy

    boundary = np.zeros(n_total, dtype=bool)
    boundary[:n_grid] = _boundary_mask(nx, ny)
    for node, dup in seam_pairs:
        boundary[dup] = boundary[node]

    return SeamMesh(nodes=all_nodes, elements=elements, seam_pairs=seam_pairs,
                    tip_node=tip_node, constrained=constrained, bc_values=bc,
                    nx=nx, ny=ny, grid_node_count=n_grid,
                    chain_indices=tuple(chain), boundary_nodes=boundary)


def _boundary_mask(nx: int, ny: int) -> np.ndarray:
    m = np.zeros(nx * ny, dtype=bool)
    idx = np.arange(nx * ny)
    i = idx % nx
    j = idx // nx
    m[(i == 0) | (i == nx - 1) | (j == 0) | (j == ny - 1)] = True
    return m


def _in_ccw_arc(a_from: float, a_to: float, beta: float) -> bool:
    """True when angle beta lies strictly inside the CCW arc a_from -> a_to."""
    def wrap(a):
        return a % (2 * math.pi)

    span = wrap(a_to - a_from)
    if span == 0.0:
        span = 2 * math.pi
    return 0.0 < wrap(beta - a_from) < span


def mesh_to_dict(mesh: SeamMesh) -> dict:
    """JSON-ready mesh dump for debugging and visualisation."""
    return {
        "nodes": [[float(x), float(y)] for x, y in mesh.nodes],
        "elements": mesh.elements.tolist(),
        "seam_pairs": mesh.seam_pairs.tolist(),
        "tip_node": None if mesh.tip_node is None else int(mesh.tip_node),
        "constrained": mesh.constrained.astype(int).tolist(),
    }
