"""Ingestion and transformation of DIC displacement grids.

The canonical representation is a regular lattice with row-major node
ordering, index ``i + j*nx`` with ``i`` along +X. All lengths are stored in
meters regardless of the source units.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    CropOutOfBounds,
    CropTooSmall,
    DegenerateGrid,
    DuplicatePoints,
    EmptyFile,
    IrregularGrid,
    MalformedRow,
    MaskCoversAllNodes,
    MixedColumnCounts,
)

UNIT_FACTORS = {"m": 1.0, "mm": 1e-3, "um": 1e-6}

#: Out-of-flatness above this fraction of the field diagonal triggers a warning.
FLATNESS_WARN_FRACTION = 0.02


@dataclass(frozen=True)
class MaskRegion:
    """Region of the field excluded from boundary conditions.

    ``vertices`` are in meters: two opposite corners for ``rect``, the ring of
    a simple polygon for ``polygon`` (closing edge implied).
    """

    kind: str  # "rect" | "polygon"
    vertices: tuple

    def __post_init__(self):
        if self.kind not in ("rect", "polygon"):
            raise ValueError(f"unknown mask kind {self.kind!r}")
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if self.kind == "rect":
            if len(verts) != 2:
                raise ValueError("rect mask needs exactly 2 corner vertices")
            (x0, y0), (x1, y1) = verts
            if x0 == x1 or y0 == y1:
                raise ValueError("rect mask has zero area")
        else:
            if len(verts) < 3:
                raise ValueError("polygon mask needs at least 3 vertices")

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Inclusive point-in-region test, vectorized over node coordinates."""
        if self.kind == "rect":
            (x0, y0), (x1, y1) = self.vertices
            xlo, xhi = min(x0, x1), max(x0, x1)
            ylo, yhi = min(y0, y1), max(y0, y1)
            return (x >= xlo) & (x <= xhi) & (y >= ylo) & (y <= yhi)
        import shapely

        poly = shapely.Polygon(self.vertices)
        if not poly.is_valid:
            raise ValueError("polygon mask is self-intersecting")
        pts = shapely.points(np.column_stack([x, y]))
        return shapely.covers(poly, pts)


@dataclass(frozen=True)
class DisplacementField:
    """Regular grid of displacement measurements in SI units.

    ``u`` has shape (nx*ny, 2) or (nx*ny, 3) in row-major node order;
    ``mask`` is True where a node is excluded from boundary conditions.
    """

    nx: int
    ny: int
    spacing_x: float
    spacing_y: float
    origin: tuple  # (x0, y0) of node (0, 0), meters
    u: np.ndarray
    mask: np.ndarray
    has_out_of_plane: bool
    source_units: str = "m"
    out_of_flatness: float = 0.0  # max |Z - mean Z| of stereo data, meters
    lattice_deviation: float = 0.0  # worst source-point offset, fraction of spacing

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid must be at least 3x3 nodes")
        if self.spacing_x <= 0 or self.spacing_y <= 0:
            raise ValueError("grid spacing must be positive")
        n = self.nx * self.ny
        if self.u.shape[0] != n or self.mask.shape[0] != n:
            raise ValueError("node array length does not match grid dims")
        if not np.all(np.isfinite(self.u)):
            raise ValueError("displacement components must be finite")
        self.u.setflags(write=False)
        self.mask.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    def node_xy(self) -> np.ndarray:
        """(n_nodes, 2) lattice coordinates in meters, row-major order."""
        i = np.arange(self.nx)
        j = np.arange(self.ny)
        xx = self.origin[0] + i * self.spacing_x
        yy = self.origin[1] + j * self.spacing_y
        X, Y = np.meshgrid(xx, yy)  # shape (ny, nx)
        return np.column_stack([X.ravel(), Y.ravel()])

    def magnitude(self) -> np.ndarray:
        """Per-node displacement magnitude sqrt(Ux^2 + Uy^2 [+ Uz^2])."""
        return np.sqrt(np.sum(self.u**2, axis=1))

    def bounds(self):
        x0, y0 = self.origin
        return (x0, y0, x0 + (self.nx - 1) * self.spacing_x,
                y0 + (self.ny - 1) * self.spacing_y)


@dataclass
class GridReport:
    nx: int
    ny: int
    spacing_x: float
    spacing_y: float
    max_deviation: float  # max lattice deviation as fraction of spacing
    n_masked: int = 0
    has_out_of_plane: bool = False


def _split_row(line: str, delimiter: str | None):
    if delimiter is None or delimiter == "whitespace":
        return line.split()
    return [tok.strip() for tok in line.split(delimiter)]


def _detect_delimiter(line: str) -> str | None:
    for cand in (",", "\t"):
        if cand in line:
            return cand
    return None  # whitespace


def _axis_lattice(values: np.ndarray):
    """Fit a uniform 1D lattice to coordinates.

    Returns (n, x0, pitch, index per value, max deviation as pitch fraction).
    Values are first clustered into levels (gaps below half the dominant gap
    count as jitter), then snapped to the uniform lattice spanned by the level
    extremes; missing interior levels are tolerated.
    """
    order = np.argsort(values)
    sv = values[order]
    diffs = np.diff(sv)
    pos = diffs[diffs > 0]
    if len(pos) == 0:
        return 1, float(sv[0]), 0.0, np.zeros(len(values), int), 0.0
    gap = 0.5 * float(np.percentile(pos, 90))
    breaks = np.flatnonzero(diffs > gap)
    level_of_sorted = np.zeros(len(sv), dtype=int)
    level_of_sorted[breaks + 1] = 1
    level_of_sorted = np.cumsum(level_of_sorted)
    n_levels = level_of_sorted[-1] + 1
    levels = np.empty(n_levels)
    for k in range(n_levels):
        vals = sv[level_of_sorted == k]
        levels[k] = vals[0] if np.all(vals == vals[0]) else vals.mean()
    if n_levels < 2:
        return 1, float(levels[0]), 0.0, np.zeros(len(values), int), 0.0
    pitch0 = float(np.median(np.diff(levels)))
    n = int(round((levels[-1] - levels[0]) / pitch0)) + 1
    pitch = float((levels[-1] - levels[0]) / (n - 1))
    idx = np.clip(np.round((values - levels[0]) / pitch).astype(int), 0, n - 1)
    dev = float(np.max(np.abs(values - (levels[0] + idx * pitch))) / pitch)
    return n, float(levels[0]), pitch, idx, dev


def load_field(path, units: str, delimiter: str | None = None) -> DisplacementField:
    """Load a 4-column (X,Y,Ux,Uy) or 6-column (X,Y,Z,Ux,Uy,Uz) CSV file.

    Args:
        path: CSV file (optional single non-numeric header row; comma, tab or
            whitespace separated; decimal point; scientific notation accepted).
        units: one of "m", "mm", "um"; applied to coordinates and displacements.
        delimiter: explicit delimiter, overriding auto-detection.

    Returns:
        DisplacementField in meters, nodes sorted row-major. NaN displacement
        entries are zeroed and auto-masked; missing lattice cells likewise.
    """
    if units not in UNIT_FACTORS:
        raise ValueError(f"unknown units {units!r}; expected one of m, mm, um")
    factor = UNIT_FACTORS[units]
    text = Path(path).read_text(encoding="utf-8-sig")
    return _parse_field(text, factor, units, delimiter)


def load_field_text(text: str, units: str, delimiter: str | None = None) -> DisplacementField:
    """Same as load_field but from an in-memory string (service uploads)."""
    if units not in UNIT_FACTORS:
        raise ValueError(f"unknown units {units!r}; expected one of m, mm, um")
    return _parse_field(text, UNIT_FACTORS[units], units, delimiter)


def _parse_field(text: str, factor: float, units: str, delimiter: str | None) -> DisplacementField:
    rows = []
    ncols = None
    detected = delimiter
    lineno_first = None
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line:
            continue
        if detected is None:
            detected = _detect_delimiter(line) or "whitespace"
        toks = _split_row(line, detected)
        toks = [t for t in toks if t != ""]
        try:
            vals = [float(t) for t in toks]
        except ValueError:
            if not rows and lineno_first is None:
                lineno_first = lineno  # header row, skip once
                continue
            raise MalformedRow(
                f"line {lineno}: non-numeric value", line=lineno)
        if len(vals) not in (4, 6):
            raise MalformedRow(
                f"line {lineno}: expected 4 or 6 columns, got {len(vals)}",
                line=lineno)
        if ncols is None:
            ncols = len(vals)
        elif len(vals) != ncols:
            raise MixedColumnCounts(
                f"line {lineno}: row has {len(vals)} columns, file started with {ncols}",
                line=lineno)
        rows.append(vals)
    if not rows:
        raise EmptyFile("no data rows found")

    data = np.asarray(rows, dtype=float) * factor
    stereo = ncols == 6
    if stereo:
        xy = data[:, :2]
        z = data[:, 2]
        uvw = data[:, 3:6]
    else:
        xy = data[:, :2]
        z = None
        uvw = data[:, 2:4]
    if not np.all(np.isfinite(xy)):
        raise MalformedRow("non-finite coordinates in input")

    nx, x0, spacing_x, ix, dev_x = _axis_lattice(xy[:, 0])
    ny, y0, spacing_y, iy, dev_y = _axis_lattice(xy[:, 1])
    if nx < 3 or ny < 3:
        raise DegenerateGrid(f"grid is {nx}x{ny}; need at least 3x3 nodes")

    flat = ix + iy * nx
    if len(np.unique(flat)) != len(flat):
        raise DuplicatePoints("multiple rows map to the same lattice node")

    ucols = 3 if stereo else 2
    u = np.zeros((nx * ny, ucols))
    mask = np.ones(nx * ny, dtype=bool)  # cells never seen stay masked
    u[flat] = np.where(np.isfinite(uvw), uvw, 0.0)
    mask[flat] = ~np.all(np.isfinite(uvw), axis=1)

    out_of_flatness = 0.0
    if stereo and np.all(np.isfinite(z)):
        out_of_flatness = float(np.max(np.abs(z - z.mean()))) if len(z) else 0.0
        diag = float(np.hypot((nx - 1) * spacing_x, (ny - 1) * spacing_y))
        if diag > 0 and out_of_flatness > FLATNESS_WARN_FRACTION * diag:
            warnings.warn(
                f"stereo surface deviates {out_of_flatness:.3g} m from its mean "
                f"plane (> {FLATNESS_WARN_FRACTION:.0%} of the field diagonal); "
                "the planar model may be a poor fit", stacklevel=2)

    return DisplacementField(
        nx=nx, ny=ny, spacing_x=spacing_x, spacing_y=spacing_y,
        origin=(x0, y0),
        u=u, mask=mask, has_out_of_plane=stereo, source_units=units,
        out_of_flatness=out_of_flatness,
        lattice_deviation=float(max(dev_x, dev_y)))


def write_field(field: DisplacementField, path, units: str = "m") -> None:
    """Write the canonical CSV: `X,Y,Ux,Uy` or `X,Y,Z,Ux,Uy,Uz` rows.

    Stereo fields are written with Z = 0 (the lattice is planar after load).
    Masked nodes are written with their stored displacements.
    """
    factor = UNIT_FACTORS[units]
    xy = field.node_xy() / factor
    u = field.u / factor
    def fmt(v):
        return repr(float(v))

    lines = []
    if field.has_out_of_plane:
        lines.append("X,Y,Z,Ux,Uy,Uz")
        for k in range(field.n_nodes):
            lines.append(f"{fmt(xy[k, 0])},{fmt(xy[k, 1])},0.0,"
                         f"{fmt(u[k, 0])},{fmt(u[k, 1])},{fmt(u[k, 2])}")
    else:
        lines.append("X,Y,Ux,Uy")
        for k in range(field.n_nodes):
            lines.append(f"{fmt(xy[k, 0])},{fmt(xy[k, 1])},{fmt(u[k, 0])},{fmt(u[k, 1])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def validate_grid(field: DisplacementField, tolerance: float = 0.05) -> GridReport:
    """Confirm the loaded field sits on its inferred lattice.

    Raises IrregularGrid when the worst source-point deviation recorded at
    load time exceeds tolerance*spacing.
    """
    if field.nx < 2 or field.ny < 2:
        raise DegenerateGrid("single row or column of points")
    if field.lattice_deviation > tolerance:
        raise IrregularGrid(
            f"max lattice deviation {field.lattice_deviation:.3g} of spacing "
            f"exceeds tolerance {tolerance:g}")
    return GridReport(
        nx=field.nx, ny=field.ny,
        spacing_x=field.spacing_x, spacing_y=field.spacing_y,
        max_deviation=field.lattice_deviation,
        n_masked=int(np.count_nonzero(field.mask)),
        has_out_of_plane=field.has_out_of_plane)


def validate_points(xy: np.ndarray, tolerance: float = 0.05) -> GridReport:
    """Validate raw scattered (x, y) points against an inferred lattice.

    Raises IrregularGrid when any point deviates from its lattice site by more
    than tolerance*spacing, DegenerateGrid for a 1xN line, DuplicatePoints when
    two points share a site.
    """
    nx, x0, sx, ix, dev_x = _axis_lattice(xy[:, 0])
    ny, y0, sy, iy, dev_y = _axis_lattice(xy[:, 1])
    if nx < 2 or ny < 2:
        raise DegenerateGrid(f"points form a {nx}x{ny} line")
    dev = max(dev_x, dev_y)
    if dev > tolerance:
        raise IrregularGrid(
            f"max lattice deviation {dev:.3g} of spacing exceeds tolerance {tolerance:g}")
    flat = ix + iy * nx
    if len(np.unique(flat)) != len(flat):
        raise DuplicatePoints("multiple points map to the same lattice node")
    return GridReport(nx=nx, ny=ny, spacing_x=sx, spacing_y=sy,
                      max_deviation=dev)


def transform_field(field: DisplacementField, rotation: int = 0,
                    crop: tuple | None = None) -> DisplacementField:
    """Rotate by quarter turns (CCW) and/or crop to an index rectangle.

    Rotation remaps grid indices and displacement components consistently
    (one quarter turn sends (Ux, Uy) to (-Uy, Ux)); the origin corner stays
    pinned, so the transform is exactly involutive. ``crop`` is
    (i0, j0, i1, j1), inclusive node indices.
    """
    f = field
    k = rotation % 4
    if k:
        ny, nx = f.ny, f.nx
        comps = [f.u[:, c].reshape(ny, nx) for c in range(f.u.shape[1])]
        m = f.mask.reshape(ny, nx)
        for _ in range(k):
            # CCW quarter turn of data laid out as [j, i]: new[i', j'] with
            # i' = old j, j' = old (nx-1-i) -> transpose then flip rows
            comps = [np.rot90(c, k=-1).copy() for c in comps]
            m = np.rot90(m, k=-1).copy()
            comps[0], comps[1] = -comps[1], comps[0]
            nx, ny = ny, nx
        # np.rot90(k=-1) maps [j,i] -> [i, ny-1-j]: row index becomes old i
        u = np.column_stack([c.ravel() for c in comps])
        f = DisplacementField(
            nx=nx, ny=ny,
            spacing_x=f.spacing_y if k % 2 else f.spacing_x,
            spacing_y=f.spacing_x if k % 2 else f.spacing_y,
            origin=f.origin, u=u, mask=m.ravel(),
            has_out_of_plane=f.has_out_of_plane, source_units=f.source_units,
            out_of_flatness=f.out_of_flatness)
    if crop is not None:
        i0, j0, i1, j1 = crop
        if not (0 <= i0 <= i1 < f.nx and 0 <= j0 <= j1 < f.ny):
            raise CropOutOfBounds(
                f"crop ({i0},{j0})..({i1},{j1}) outside grid {f.nx}x{f.ny}")
        if i1 - i0 + 1 < 3 or j1 - j0 + 1 < 3:
            raise CropTooSmall("crop must keep at least 3x3 nodes")
        sel = (np.arange(j0, j1 + 1)[:, None] * f.nx +
               np.arange(i0, i1 + 1)[None, :]).ravel()
        f = DisplacementField(
            nx=i1 - i0 + 1, ny=j1 - j0 + 1,
            spacing_x=f.spacing_x, spacing_y=f.spacing_y,
            origin=(f.origin[0] + i0 * f.spacing_x,
                    f.origin[1] + j0 * f.spacing_y),
            u=f.u[sel].copy(), mask=f.mask[sel].copy(),
            has_out_of_plane=f.has_out_of_plane, source_units=f.source_units,
            out_of_flatness=f.out_of_flatness)
    if f is field:
        return replace(field, u=field.u.copy(), mask=field.mask.copy())
    return f


def apply_mask(field: DisplacementField, region: MaskRegion) -> DisplacementField:
    """Flag every node inside the region (boundary inclusive) as masked.

    Masked nodes keep their stored displacements; the solver just stops using
    them as boundary conditions.
    """
    xy = field.node_xy()
    inside = np.asarray(region.contains(xy[:, 0], xy[:, 1]), dtype=bool)
    if not inside.any():
        warnings.warn("mask region covers no grid nodes; field unchanged",
                      stacklevel=2)
        return replace(field, u=field.u.copy(), mask=field.mask.copy())
    new_mask = field.mask | inside
    if new_mask.all():
        raise MaskCoversAllNodes("mask leaves no constrained node")
    return replace(field, u=field.u.copy(), mask=new_mask)
