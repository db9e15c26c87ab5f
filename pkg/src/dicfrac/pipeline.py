"""Full-analysis orchestration shared by the CLI and the HTTP service.

load -> validate -> transform -> mask -> seam mesh -> solve -> integrals ->
plateau, with file emission helpers (CSV, JSON summary, SVG chart).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field as dc_field

from .errors import ConfigError
from .field import DisplacementField, apply_mask
from .fracture import (
    ContourDomains,
    ContourSeries,
    PlateauOptions,
    PlateauStats,
    combine_total_j,
    compute_interaction_k,
    compute_j_edi,
    detect_plateau,
    mode3_pipeline,
)
from .material import Material, effective_constants
from .mesh import CrackDefinition, SeamMesh, build_seam_mesh, crack_frame
from .solver import SolutionState, solve_deformation_plasticity, solve_elastic

ELASTIC = "elastic"
RAMBERG_OSGOOD = "ramberg-osgood"


@dataclass
class AnalysisOptions:
    model: str = ELASTIC
    n_contours: int | None = None      # None = as many as fit
    plateau: PlateauOptions = dc_field(default_factory=PlateauOptions)
    mode3: bool | None = None          # None = automatic (stereo data present)
    tol: float = 1e-8
    max_iter: int = 50


@dataclass
class AnalysisResult:
    """Contour series plus plateau statistics and run provenance."""

    series: ContourSeries
    plateau: PlateauStats
    model: str
    solution: SolutionState
    mesh: SeamMesh
    crack: CrackDefinition
    warnings: list = dc_field(default_factory=list)
    provenance: dict = dc_field(default_factory=dict)


def analyze_field(field: DisplacementField, crack: CrackDefinition,
                  material: Material, options: AnalysisOptions | None = None) -> AnalysisResult:
    """Run the fracture analysis on a loaded field.

    The crack's mask region (if any) is applied to the field before meshing.
    Elastic isotropic/cubic runs decompose K by the interaction integral and,
    for stereo data, run the out-of-plane pipeline; deformation-plasticity
    runs report J only.
    """
    opts = options or AnalysisOptions()
    notes = []
    if opts.model not in (ELASTIC, RAMBERG_OSGOOD):
        raise ConfigError(f"unknown model {opts.model!r}")
    if crack.mask is not None:
        field = apply_mask(field, crack.mask)
    mesh = build_seam_mesh(field, crack)
    frame = crack_frame(crack)

    if opts.model == RAMBERG_OSGOOD:
        if material.ro is None:
            raise ConfigError("model 'ramberg-osgood' needs ramberg_osgood "
                              "parameters in the material file")
        if material.model != "isotropic":
            raise ConfigError("deformation plasticity supports isotropic "
                              "materials only")
        solution = solve_deformation_plasticity(mesh, material, tol=opts.tol,
                                                max_iter=opts.max_iter)
    else:
        solution = solve_elastic(mesh, material)

    domains = ContourDomains(mesh)
    rings, radii, J, truncated = compute_j_edi(solution, mesh, frame,
                                               opts.n_contours, domains=domains)
    if truncated:
        notes.append("contour series truncated at the grid boundary")

    series = ContourSeries(ring_index=rings, outer_radius=radii, J=J,
                           truncated=truncated)
    decompose = opts.model == ELASTIC and material.is_isotropic_like
    if opts.model == ELASTIC and not material.is_isotropic_like:
        notes.append("general-anisotropic material: only J is reported")
    if decompose:
        eff = effective_constants(material)
        k1s, k2s, _ = compute_interaction_k(
            solution, mesh, frame, opts.n_contours, eff, material.plane_state,
            mesh.nodes[mesh.tip_node], domains=domains)
        n = min(len(J), len(k1s))
        series.K_I, series.K_II = k1s[:n], k2s[:n]

        want_mode3 = field.has_out_of_plane if opts.mode3 is None else opts.mode3
        if want_mode3 and not field.has_out_of_plane:
            notes.append("mode-III outputs requested but the field has no Uz; "
                         "skipped")
            want_mode3 = False
        if want_mode3:
            k2ps, k3s, j3s, _ = mode3_pipeline(field, material, mesh, frame,
                                               opts.n_contours, eff,
                                               domains=domains)
            series.K_II_pseudo = k2ps[:n]
            series.K_III = k3s[:n]
            series.J_III = j3s[:n]
            series.J_total = combine_total_j(series.J, series.J_III)
    elif opts.mode3:
        notes.append("mode-III pipeline needs an elastic isotropic or cubic "
                     "run; skipped")

    plateau = detect_plateau(series, opts.plateau)
    return AnalysisResult(series=series, plateau=plateau, model=opts.model,
                          solution=solution, mesh=mesh, crack=crack,
                          warnings=notes)


# --- emission ----------------------------------------------------------------

RESULT_COLUMNS = ["contour", "radius_m", "J", "K_I", "K_II", "K_II_pseudo",
                  "K_III", "J_III", "J_total"]


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def results_csv_text(series: ContourSeries) -> str:
    cols = {name: getattr(series, name, None) for name in
            ("K_I", "K_II", "K_II_pseudo", "K_III", "J_III", "J_total")}
    lines = [",".join(RESULT_COLUMNS)]
    for i, ring in enumerate(series.ring_index):
        row = [str(int(ring)), _fmt(series.outer_radius[i]), _fmt(series.J[i])]
        for name in RESULT_COLUMNS[3:]:
            v = cols[name]
            row.append(_fmt(v[i]) if v is not None else "")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def summary_dict(result: AnalysisResult, provenance: dict | None = None) -> dict:
    pl = result.plateau
    return {
        "model": result.model,
        "n_contours": int(len(result.series)),
        "truncated": bool(result.series.truncated),
        "plateau": {
            "start_contour": int(pl.start_contour),
            "end_contour": int(pl.end_contour),
            "no_plateau": bool(pl.no_plateau),
            "flags": list(pl.flags),
            "mean": {k: float(v) for k, v in sorted(pl.mean.items())},
            "std": {k: float(v) for k, v in sorted(pl.std.items())},
        },
        "solver": {
            "iterations": int(result.solution.iterations),
            "residual": float(result.solution.residual),
        },
        "warnings": list(result.warnings),
        "provenance": provenance or result.provenance or {},
    }


def atomic_write_text(path, text: str) -> None:
    """Write-then-rename so interrupted runs never leave partial files."""
    path = str(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def emit_report(result: AnalysisResult, outdir, provenance: dict | None = None,
                basename: str = "results") -> dict:
    """Write the results CSV, summary JSON and convergence SVG to outdir.

    Returns a dict of written paths.
    """
    from .plots import convergence_svg

    os.makedirs(outdir, exist_ok=True)
    paths = {}
    csv_path = os.path.join(outdir, f"{basename}.csv")
    atomic_write_text(csv_path, results_csv_text(result.series))
    paths["csv"] = csv_path
    summary_path = os.path.join(outdir, f"{basename}_summary.json")
    atomic_write_text(summary_path, dump_json(summary_dict(result, provenance)))
    paths["summary"] = summary_path
    svg_path = os.path.join(outdir, f"{basename}.svg")
    svg = convergence_svg(result.series, result.plateau)
    atomic_write_text(svg_path, svg)
    paths["svg"] = svg_path
    return paths
