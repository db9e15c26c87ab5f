"""Parameter studies: q-direction sweep, noise sensitivity, and crack-tip
position sensitivity with normalized error maps.

Every study is deterministic given (spec, options, seed); normalized errors
follow the (estimate - truth)/truth convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError
from .field import DisplacementField, MaskRegion, apply_mask
from .fracture import (
    ContourDomains,
    ContourSeries,
    PlateauOptions,
    compute_interaction_k,
    compute_j_edi,
    detect_plateau,
)
from .material import effective_constants, j_from_k
from .mesh import CrackDefinition, build_seam_mesh
from .pipeline import AnalysisOptions, analyze_field
from .solver import solve_elastic
from .synth import SyntheticSpec, add_noise, generate_williams_field


@dataclass
class StudyResult:
    """Axis values with per-point plateau statistics and normalized errors.

    ``axis`` maps axis names to arrays (a single entry for 1D studies, dx/dy
    for the offset grid); ``mean``/``std``/``error`` map quantity names to
    arrays aligned with the axis (2D grids for the offset study).
    """

    kind: str
    axis: dict
    mean: dict
    std: dict
    error: dict = dc_field(default_factory=dict)
    meta: dict = dc_field(default_factory=dict)


@dataclass
class QSuggestion:
    angle: float                 # radians, absolute extension direction
    flag: str = "ok"             # ok | flat | range-exhausted


def q_sweep(field: DisplacementField, crack: CrackDefinition, material,
            angles_rel, n_contours: int | None = None,
            plateau: PlateauOptions | None = None) -> StudyResult:
    """J and K plateau values as the assumed extension direction rotates.

    ``angles_rel`` are offsets (radians) from the crack's own q direction.
    The displacement solution is q-independent, so the solve runs once and
    only the integral frame (and auxiliary fields) rotate per angle.
    """
    angles_rel = np.asarray(list(angles_rel), dtype=float)
    if angles_rel.size == 0:
        raise ConfigError("q sweep needs at least one angle")
    popts = plateau or PlateauOptions()
    if crack.mask is not None:
        field = apply_mask(field, crack.mask)
    mesh = build_seam_mesh(field, crack)
    solution = solve_elastic(mesh, material)
    domains = ContourDomains(mesh)
    eff = effective_constants(material) if material.is_isotropic_like else None
    base = crack.extension_angle()
    tip_xy = mesh.nodes[mesh.tip_node]

    names = ["J", "K_I", "K_II"] if eff is not None else ["J"]
    mean = {n: [] for n in names}
    std = {n: [] for n in names}
    for rel in angles_rel:
        a = base + rel
        c, s = math.cos(a), math.sin(a)
        frame = np.array([[c, s], [-s, c]])
        rings, radii, J, _ = compute_j_edi(solution, mesh, frame, n_contours,
                                           domains=domains)
        series = ContourSeries(ring_index=rings, outer_radius=radii, J=J)
        if eff is not None:
            k1s, k2s, _ = compute_interaction_k(
                solution, mesh, frame, n_contours, eff, material.plane_state,
                tip_xy, domains=domains)
            series.K_I, series.K_II = k1s, k2s
        stats = detect_plateau(series, popts)
        for n in names:
            mean[n].append(stats.mean[n])
            std[n].append(stats.std[n])
    return StudyResult(
        kind="q-sweep",
        axis={"angle": base + angles_rel, "angle_rel": angles_rel},
        mean={n: np.asarray(v) for n, v in mean.items()},
        std={n: np.asarray(v) for n, v in std.items()},
        meta={"crack_angle": base})


def suggest_q_direction(sweep: StudyResult) -> QSuggestion:
    """Angle of maximum energy release rate, parabola-refined.

    Falls back to the crack direction (flagged) when the sweep is flat within
    its plateau scatter, and to the end point (flagged) when J is monotone
    over the sweep range.
    """
    angles = np.asarray(sweep.axis["angle"], dtype=float)
    J = np.asarray(sweep.mean["J"], dtype=float)
    if len(angles) < 3:
        raise ConfigError("q suggestion needs at least 3 sweep angles")
    stds = np.asarray(sweep.std["J"], dtype=float)
    if J.max() - J.min() <= float(np.median(stds)):
        return QSuggestion(angle=float(sweep.meta.get("crack_angle", angles[len(angles) // 2])),
                           flag="flat")
    i = int(np.argmax(J))
    if i == 0 or i == len(J) - 1:
        return QSuggestion(angle=float(angles[i]), flag="range-exhausted")
    x0, x1, x2 = angles[i - 1:i + 2]
    y0, y1, y2 = J[i - 1:i + 2]
    # parabola through the three points (spacing may be non-uniform)
    d0, d2 = x1 - x0, x2 - x1
    a = ((y0 - y1) * d2 + (y2 - y1) * d0) / (d0 * d2 * (d0 + d2))
    b = (y2 - y1) / d2 - a * d2
    vertex = x1 - b / (2 * a) if a != 0 else x1
    lo, hi = min(x0, x2), max(x0, x2)
    return QSuggestion(angle=float(min(max(vertex, lo), hi)))


def _truth_values(spec: SyntheticSpec) -> dict:
    eff = effective_constants(spec.material)
    truth = {
        "K_I": spec.k1,
        "K_II": spec.k2,
        "J": j_from_k(spec.k1, spec.k2, 0.0, eff),
    }
    if spec.k3:
        truth["K_III"] = spec.k3
        truth["J_total"] = j_from_k(spec.k1, spec.k2, spec.k3, eff)
    return truth


def _default_crack(spec: SyntheticSpec, mask_half_cells: float = 2.2,
                   tip_shift=(0.0, 0.0)) -> CrackDefinition:
    """Straight crack from the grid edge to the (possibly shifted) tip."""
    h = spec.spacing
    tip = (spec.tip[0] + tip_shift[0], spec.tip[1] + tip_shift[1])
    a = spec.crack_angle
    # mouth: march back along the crack direction to beyond the grid edge
    reach = (spec.nx + spec.ny) * h
    mouth = (tip[0] - reach * math.cos(a), tip[1] - reach * math.sin(a))
    m = mask_half_cells * h
    mask = MaskRegion("rect", [(tip[0] - m, tip[1] - m), (tip[0] + m, tip[1] + m)])
    return CrackDefinition(polyline=[mouth, tip], tip=tip, mask=mask)


def _plateau_of(field, crack, material, n_contours, popts):
    res = analyze_field(field, crack, material,
                        AnalysisOptions(n_contours=n_contours, plateau=popts))
    return res.plateau


def noise_study(spec: SyntheticSpec, fractions=None, trials: int = 5,
                seed: int = 0, n_contours: int | None = None,
                plateau: PlateauOptions | None = None,
                crack: CrackDefinition | None = None) -> StudyResult:
    """Plateau statistics and normalized errors under injected noise.

    For each fraction, ``trials`` seeded realisations are analysed; reported
    means/stds/errors are averaged over trials. The error convention is
    (estimate - truth)/truth with the generating spec as the truth.
    """
    if fractions is None:
        fractions = np.logspace(-6, -2, 9)
    fractions = np.asarray(list(fractions), dtype=float)
    if np.any(fractions < 0) or trials < 1:
        raise ConfigError("fractions must be nonnegative and trials >= 1")
    popts = plateau or PlateauOptions()
    base_field = generate_williams_field(spec)
    crack = crack or _default_crack(spec)
    truth = _truth_values(spec)

    names = list(truth.keys())
    mean = {n: [] for n in names}
    std = {n: [] for n in names}
    spread = {n: [] for n in names}
    for i, frac in enumerate(fractions):
        per_trial = {n: [] for n in names}
        per_std = {n: [] for n in names}
        for t in range(trials):
            f = add_noise(base_field, float(frac), seed=seed + 1009 * i + t)
            stats = _plateau_of(f, crack, spec.material, n_contours, popts)
            for n in names:
                per_trial[n].append(stats.mean.get(n, math.nan))
                per_std[n].append(stats.std.get(n, math.nan))
        for n in names:
            mean[n].append(float(np.mean(per_trial[n])))
            std[n].append(float(np.mean(per_std[n])))
            spread[n].append(float(np.std(per_trial[n])))
    error = {n: (np.asarray(mean[n]) - truth[n]) / truth[n]
             for n in names if truth[n] != 0}
    return StudyResult(
        kind="noise",
        axis={"fraction": fractions},
        mean={n: np.asarray(v) for n, v in mean.items()},
        std={n: np.asarray(v) for n, v in std.items()},
        error=error,
        meta={"trials": trials, "seed": seed, "truth": truth,
              "trial_spread": {n: np.asarray(v) for n, v in spread.items()}})


def tip_offset_study(spec: SyntheticSpec, offsets_x=None, offsets_y=None,
                     n_contours: int | None = None,
                     plateau: PlateauOptions | None = None,
                     mask_half_cells: float = 2.2) -> StudyResult:
    """Normalized error maps as the assumed tip moves off the true position.

    Offsets are in node units; the crack definition (and its mask) moves with
    the assumed tip while the synthetic field keeps its truth at the spec
    position. The diagonal profile accompanies the 2D maps in ``meta``.
    """
    if offsets_x is None:
        offsets_x = np.arange(-3, 4)
    if offsets_y is None:
        offsets_y = np.arange(-3, 4)
    offsets_x = np.asarray(list(offsets_x), dtype=int)
    offsets_y = np.asarray(list(offsets_y), dtype=int)
    popts = plateau or PlateauOptions()
    field = generate_williams_field(spec)
    truth = _truth_values(spec)
    h = spec.spacing

    names = list(truth.keys())
    grids = {n: np.full((len(offsets_y), len(offsets_x)), np.nan) for n in names}
    stds = {n: np.full((len(offsets_y), len(offsets_x)), np.nan) for n in names}
    for jy, dy in enumerate(offsets_y):
        for ix, dx in enumerate(offsets_x):
            crack = _default_crack(spec, mask_half_cells,
                                   tip_shift=(dx * h, dy * h))
            stats = _plateau_of(field, crack, spec.material, n_contours, popts)
            for n in names:
                grids[n][jy, ix] = stats.mean.get(n, math.nan)
                stds[n][jy, ix] = stats.std.get(n, math.nan)
    error = {n: (grids[n] - truth[n]) / truth[n]
             for n in names if truth[n] != 0}
    # diagonal profile (dx = dy) where the grid is square around zero
    diag = {}
    common = [d for d in offsets_x if d in set(offsets_y)]
    for n, g in error.items():
        vals = [g[np.flatnonzero(offsets_y == d)[0],
                  np.flatnonzero(offsets_x == d)[0]] for d in common]
        diag[n] = np.asarray(vals)
    return StudyResult(
        kind="tip-offset",
        axis={"dx": offsets_x, "dy": offsets_y},
        mean=grids, std=stds, error=error,
        meta={"truth": truth, "diagonal": {"offsets": np.asarray(common),
                                           "error": diag}})
