"""Command-line interface.

Lengths given on the command line are in the declared input units; files
written by the engine are SI. Exit codes: 0 ok, 1 analysis error, 2 config
error, 3 I/O error.
"""

from __future__ import annotations

import json
import logging
import math
import os

import click
import numpy as np

from . import __version__
from .errors import ConfigError, DicfracError, IoError
from .field import (
    UNIT_FACTORS,
    MaskRegion,
    load_field,
    transform_field,
    validate_grid,
    write_field,
)
from .fracture import ContourSeries, PlateauOptions, PlateauStats
from .material import Material, load_material
from .mesh import CrackDefinition
from .pipeline import (
    AnalysisOptions,
    analyze_field,
    atomic_write_text,
    dump_json,
    emit_report,
    file_sha256,
    summary_dict,
)
from .synth import SyntheticSpec, add_noise, generate_williams_field

log = logging.getLogger("dicfrac")


def _setup_logging():
    level = os.environ.get("DICFRAC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(exc: Exception) -> int:
    if isinstance(exc, ConfigError):
        code = 2
    elif isinstance(exc, (IoError, OSError)):
        code = 3
    else:
        code = 1
    if isinstance(exc, DicfracError):
        payload = exc.payload()
    else:
        payload = {"kind": type(exc).__name__, "message": str(exc)}
    payload["exit_code"] = code
    click.echo(json.dumps(payload, sort_keys=True), err=True)
    return code


def run_guarded(fn) -> int:
    try:
        fn()
        return 0
    except DicfracError as exc:
        return _fail(exc)
    except OSError as exc:
        return _fail(exc)


@click.group()
@click.version_option(__version__)
def main():
    """Fracture analysis of DIC displacement fields."""
    _setup_logging()


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file: {exc}")


def _merged(config: dict, **flags):
    """Flags override config-file entries; None flags fall back."""
    out = dict(config)
    for k, v in flags.items():
        if v is not None and v != ():
            out[k] = v
    return out


def _parse_crack(cfg: dict, factor: float) -> CrackDefinition:
    tip = cfg.get("tip")
    if tip is None:
        raise ConfigError("crack tip is required (--tip X Y)")
    tip = (float(tip[0]) * factor, float(tip[1]) * factor)
    if cfg.get("polyline"):
        pts = [(float(x) * factor, float(y) * factor)
               for x, y in cfg["polyline"]]
        if pts[-1] != tip:
            pts.append(tip)
    elif cfg.get("mouth") is not None:
        m = cfg["mouth"]
        pts = [(float(m[0]) * factor, float(m[1]) * factor), tip]
    else:
        raise ConfigError("crack mouth or polyline is required")
    q_angle = cfg.get("q_angle_deg")
    mask = None
    if cfg.get("mask") is not None:
        x0, y0, x1, y1 = (float(v) * factor for v in cfg["mask"])
        mask = MaskRegion("rect", [(x0, y0), (x1, y1)])
    try:
        return CrackDefinition(
            polyline=pts, tip=tip,
            q_angle=math.radians(float(q_angle)) if q_angle is not None else None,
            mask=mask)
    except ValueError as exc:
        raise ConfigError(f"invalid crack definition: {exc}")


def _plateau_opts(cfg: dict) -> PlateauOptions:
    return PlateauOptions(
        window_min=int(cfg.get("plateau_window_min", 5)),
        rel_tol=float(cfg.get("plateau_rel_tol", 0.05)),
        skip=int(cfg.get("plateau_skip", 2)),
        window=tuple(cfg["plateau_window"]) if cfg.get("plateau_window") else None)


def _prepare_field(cfg: dict):
    units = cfg.get("units", "m")
    if units not in UNIT_FACTORS:
        raise ConfigError(f"unknown units {units!r}")
    path = cfg.get("input")
    if path is None:
        raise ConfigError("input file is required")
    if not os.path.exists(path):
        raise ConfigError(f"input file not found: {path}")
    field = load_field(path, units=units, delimiter=cfg.get("delimiter"))
    validate_grid(field, tolerance=float(cfg.get("grid_tolerance", 0.05)))
    rotation = int(cfg.get("rotate", 0))
    crop = tuple(cfg["crop"]) if cfg.get("crop") else None
    if rotation or crop:
        field = transform_field(field, rotation=rotation, crop=crop)
    return field, UNIT_FACTORS[units]


def _material_of(cfg: dict) -> Material:
    path = cfg.get("material")
    if path is None:
        raise ConfigError("material file is required")
    if not os.path.exists(path):
        raise ConfigError(f"material file not found: {path}")
    mat = load_material(path)
    if cfg.get("plane_state"):
        from dataclasses import replace
        state = {"stress": "plane stress", "strain": "plane strain"}.get(
            cfg["plane_state"], cfg["plane_state"])
        mat = replace(mat, plane_state=state)
    return mat


_shared_analysis_flags = [
    click.option("--config", type=click.Path(), default=None,
                 help="JSON config file; flags override its entries."),
    click.option("--input", "input_", type=click.Path(), default=None),
    click.option("--units", type=click.Choice(["m", "mm", "um"]), default=None),
    click.option("--delimiter", default=None),
    click.option("--material", type=click.Path(), default=None),
    click.option("--plane-state", type=click.Choice(["stress", "strain"]),
                 default=None),
    click.option("--tip", nargs=2, type=float, default=None),
    click.option("--mouth", nargs=2, type=float, default=None),
    click.option("--polyline", default=None,
                 help="space-separated x,y pairs from mouth to tip"),
    click.option("--q-angle", "q_angle_deg", type=float, default=None,
                 help="virtual crack extension direction, degrees"),
    click.option("--mask", nargs=4, type=float, default=None,
                 help="rectangle X0 Y0 X1 Y1 in input units"),
    click.option("--rotate", type=int, default=None,
                 help="quarter turns counterclockwise"),
    click.option("--crop", nargs=4, type=int, default=None,
                 help="inclusive node indices I0 J0 I1 J1"),
    click.option("--model", type=click.Choice(["elastic", "ramberg-osgood"]),
                 default=None),
    click.option("--contours", type=int, default=None),
    click.option("--plateau-window-min", type=int, default=None),
    click.option("--plateau-rel-tol", type=float, default=None),
    click.option("--plateau-skip", type=int, default=None),
    click.option("--plateau-window", nargs=2, type=int, default=None),
    click.option("--dump-mesh", is_flag=True, default=None,
                 help="also write the seam mesh as mesh.json"),
    click.option("--dump-gp", is_flag=True, default=None,
                 help="also write quadrature-point stresses as gp.csv"),
    click.option("--outdir", type=click.Path(), default=None),
]


def _with_flags(fn):
    for deco in reversed(_shared_analysis_flags):
        fn = deco(fn)
    return fn


def _collect(config, **flags):
    cfg = _merged(_load_config(config), **flags)
    if flags.get("input_") is not None:
        cfg["input"] = flags["input_"]
    cfg.pop("input_", None)
    if cfg.get("polyline") and isinstance(cfg["polyline"], str):
        pts = []
        for tok in cfg["polyline"].split():
            x, y = tok.split(",")
            pts.append((float(x), float(y)))
        cfg["polyline"] = pts
    return cfg


def _run_analysis_from_cfg(cfg: dict):
    field, factor = _prepare_field(cfg)
    material = _material_of(cfg)
    crack = _parse_crack(cfg, factor)
    opts = AnalysisOptions(
        model=cfg.get("model", "elastic"),
        n_contours=cfg.get("contours"),
        plateau=_plateau_opts(cfg))
    result = analyze_field(field, crack, material, opts)
    provenance = {
        "engine_version": __version__,
        "input_sha256": file_sha256(cfg["input"]),
        "options": {k: cfg[k] for k in sorted(cfg)
                    if k not in ("outdir",) and cfg[k] is not None},
    }
    return result, provenance


@main.command()
@_with_flags
def analyze(config, **flags):
    """Full fracture analysis of a displacement CSV."""
    def body():
        cfg = _collect(config, **flags)
        outdir = cfg.get("outdir", "out")
        result, provenance = _run_analysis_from_cfg(cfg)
        paths = emit_report(result, outdir, provenance)
        if cfg.get("dump_mesh"):
            from .mesh import mesh_to_dict
            p = os.path.join(outdir, "mesh.json")
            atomic_write_text(p, dump_json(mesh_to_dict(result.mesh)))
            paths["mesh"] = p
        if cfg.get("dump_gp"):
            from .solver import quadrature_dump_rows
            p = os.path.join(outdir, "gp.csv")
            lines = ["elem,gp,x,y,sxx,syy,sxy,W"]
            for row in quadrature_dump_rows(result.solution):
                lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                                      for v in row))
            atomic_write_text(p, "\n".join(lines) + "\n")
            paths["gp"] = p
        for w in result.warnings:
            log.warning("%s", w)
        click.echo(json.dumps({"status": "ok", "outputs": paths,
                               "plateau": summary_dict(result, provenance)["plateau"]},
                              sort_keys=True))
    raise SystemExit(run_guarded(body))


@main.command()
@click.option("--k1", type=float, required=True, help="mode I SIF, Pa*sqrt(m)")
@click.option("--k2", type=float, default=0.0)
@click.option("--k3", type=float, default=0.0)
@click.option("--e", "e_mod", type=float, required=True, help="Young's modulus, Pa")
@click.option("--nu", type=float, required=True)
@click.option("--plane-state", type=click.Choice(["stress", "strain"]),
              default="strain")
@click.option("--nx", type=int, default=51)
@click.option("--ny", type=int, default=51)
@click.option("--spacing", type=float, required=True, help="grid pitch in --units")
@click.option("--tip", nargs=2, type=float, default=(0.0, 0.0))
@click.option("--angle", type=float, default=0.0, help="crack direction, degrees")
@click.option("--units", type=click.Choice(["m", "mm", "um"]), default="m")
@click.option("--noise", type=float, default=0.0,
              help="noise std as a fraction of the mean magnitude")
@click.option("--seed", type=int, default=0)
@click.option("--paper-mu", is_flag=True,
              help="use the alternative shear-modulus convention in the generator")
@click.option("--out", type=click.Path(), required=True)
def synth(k1, k2, k3, e_mod, nu, plane_state, nx, ny, spacing, tip, angle,
          units, noise, seed, paper_mu, out):
    """Generate an analytical crack displacement field CSV (+ JSON sidecar)."""
    def body():
        factor = UNIT_FACTORS[units]
        material = Material(model="isotropic", E=e_mod, nu=nu,
                            plane_state=f"plane {plane_state}")
        spec = SyntheticSpec(k1=k1, k2=k2, k3=k3, material=material,
                             nx=nx, ny=ny, spacing=spacing * factor,
                             tip=(tip[0] * factor, tip[1] * factor),
                             crack_angle=math.radians(angle))
        field = generate_williams_field(spec, paper_mu=paper_mu)
        if noise:
            field = add_noise(field, noise, seed=seed)
        write_field(field, out, units=units)
        sidecar = {
            "kind": "synthetic-field",
            "k1": k1, "k2": k2, "k3": k3,
            "E": e_mod, "nu": nu, "plane_state": f"plane {plane_state}",
            "nx": nx, "ny": ny, "spacing_m": spacing * factor,
            "tip_m": [tip[0] * factor, tip[1] * factor],
            "crack_angle_rad": math.radians(angle),
            "units": units, "noise_fraction": noise, "seed": seed,
            "paper_mu": bool(paper_mu),
        }
        atomic_write_text(os.path.splitext(out)[0] + "_spec.json",
                          dump_json(sidecar))
        click.echo(json.dumps({"status": "ok", "out": out}, sort_keys=True))
    raise SystemExit(run_guarded(body))


def _load_sidecar(path) -> SyntheticSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read sidecar: {exc}")
    material = Material(model="isotropic", E=doc["E"], nu=doc["nu"],
                        plane_state=doc.get("plane_state", "plane strain"))
    return SyntheticSpec(k1=doc["k1"], k2=doc["k2"], k3=doc["k3"],
                         material=material, nx=doc["nx"], ny=doc["ny"],
                         spacing=doc["spacing_m"], tip=tuple(doc["tip_m"]),
                         crack_angle=doc.get("crack_angle_rad", 0.0))


def _study_csv(study, axis_names) -> str:
    lines = [",".join(list(axis_names) + ["quantity", "mean", "std", "error"])]
    axes = [np.asarray(study.axis[a]) for a in axis_names]
    names = sorted(study.mean)
    if study.kind == "tip-offset":
        dx, dy = study.axis["dx"], study.axis["dy"]
        for n in names:
            for jy in range(len(dy)):
                for ix in range(len(dx)):
                    err = study.error.get(n)
                    lines.append(",".join([
                        repr(float(dx[ix])), repr(float(dy[jy])), n,
                        repr(float(study.mean[n][jy, ix])),
                        repr(float(study.std[n][jy, ix])),
                        repr(float(err[jy, ix])) if err is not None else ""]))
    else:
        npts = len(axes[0])
        for n in names:
            for i in range(npts):
                err = study.error.get(n)
                lines.append(",".join(
                    [repr(float(a[i])) for a in axes]
                    + [n, repr(float(study.mean[n][i])),
                       repr(float(study.std[n][i])),
                       repr(float(err[i])) if err is not None else ""]))
    return "\n".join(lines) + "\n"


@main.command()
@_with_flags
@click.option("--angles", default="-60:60:10",
              help="sweep offsets in degrees, start:stop:step or comma list")
def qsweep(config, angles, **flags):
    """Sweep the virtual crack extension direction (relative to the crack)."""
    def body():
        from .plots import line_study_svg
        from .studies import q_sweep, suggest_q_direction

        cfg = _collect(config, **flags)
        outdir = cfg.get("outdir", "out")
        field, factor = _prepare_field(cfg)
        material = _material_of(cfg)
        crack = _parse_crack(cfg, factor)
        if ":" in angles:
            a0, a1, step = (float(v) for v in angles.split(":"))
            degs = np.arange(a0, a1 + 0.5 * step, step)
        else:
            degs = np.asarray([float(v) for v in angles.split(",")])
        study = q_sweep(field, crack, material, np.radians(degs),
                        n_contours=cfg.get("contours"),
                        plateau=_plateau_opts(cfg))
        suggestion = suggest_q_direction(study)
        os.makedirs(outdir, exist_ok=True)
        atomic_write_text(os.path.join(outdir, "qsweep.csv"),
                          _study_csv(study, ["angle"]))
        curves = {n: study.mean[n] for n in sorted(study.mean)}
        svg = line_study_svg(np.degrees(study.axis["angle"]),
                             {"J": curves["J"]}, "q angle (deg)", "J (J/m^2)",
                             marker_x=math.degrees(suggestion.angle))
        atomic_write_text(os.path.join(outdir, "qsweep.svg"), svg)
        atomic_write_text(os.path.join(outdir, "qsweep_summary.json"), dump_json({
            "suggested_angle_rad": suggestion.angle,
            "suggested_angle_deg": math.degrees(suggestion.angle),
            "flag": suggestion.flag,
        }))
        click.echo(json.dumps({"status": "ok",
                               "suggested_angle_deg": math.degrees(suggestion.angle),
                               "flag": suggestion.flag}, sort_keys=True))
    raise SystemExit(run_guarded(body))


@main.command("noise-study")
@click.option("--sidecar", type=click.Path(), required=True,
              help="JSON sidecar written by `synth` (ground truth)")
@click.option("--fractions", default="1e-6:1e-2:9",
              help="log-spaced lo:hi:count or comma list")
@click.option("--trials", type=int, default=5)
@click.option("--seed", type=int, default=0)
@click.option("--contours", type=int, default=None)
@click.option("--outdir", type=click.Path(), default="out")
def noise_study_cmd(sidecar, fractions, trials, seed, contours, outdir):
    """Noise sensitivity study on a synthetic field."""
    def body():
        from .plots import line_study_svg
        from .studies import noise_study

        spec = _load_sidecar(sidecar)
        if ":" in fractions:
            lo, hi, cnt = fractions.split(":")
            fr = np.logspace(math.log10(float(lo)), math.log10(float(hi)),
                             int(cnt))
        else:
            fr = np.asarray([float(v) for v in fractions.split(",")])
        study = noise_study(spec, fractions=fr, trials=trials, seed=seed,
                            n_contours=contours)
        os.makedirs(outdir, exist_ok=True)
        atomic_write_text(os.path.join(outdir, "noise_study.csv"),
                          _study_csv(study, ["fraction"]))
        svg = line_study_svg(study.axis["fraction"],
                             {n: np.abs(v) for n, v in sorted(study.error.items())},
                             "noise fraction", "|normalized error|", logx=True)
        atomic_write_text(os.path.join(outdir, "noise_study.svg"), svg)
        click.echo(json.dumps({"status": "ok", "outdir": outdir}, sort_keys=True))
    raise SystemExit(run_guarded(body))


@main.command("tip-study")
@click.option("--sidecar", type=click.Path(), required=True)
@click.option("--offsets", default="-3:3",
              help="node-unit offset range lo:hi applied to both axes")
@click.option("--contours", type=int, default=None)
@click.option("--outdir", type=click.Path(), default="out")
def tip_study_cmd(sidecar, offsets, contours, outdir):
    """Crack-tip position sensitivity study on a synthetic field."""
    def body():
        from .plots import heatmap_svg, line_study_svg
        from .studies import tip_offset_study

        spec = _load_sidecar(sidecar)
        lo, hi = (int(v) for v in offsets.split(":"))
        rng = np.arange(lo, hi + 1)
        study = tip_offset_study(spec, offsets_x=rng, offsets_y=rng,
                                 n_contours=contours)
        os.makedirs(outdir, exist_ok=True)
        atomic_write_text(os.path.join(outdir, "tip_study.csv"),
                          _study_csv(study, ["dx", "dy"]))
        for n, grid in sorted(study.error.items()):
            svg = heatmap_svg(study.axis["dx"], study.axis["dy"], grid,
                              f"{n} normalized error vs tip offset")
            atomic_write_text(os.path.join(outdir, f"tip_study_{n}.svg"), svg)
        diag = study.meta["diagonal"]
        svg = line_study_svg(diag["offsets"],
                             {n: v for n, v in sorted(diag["error"].items())},
                             "diagonal offset (nodes)", "normalized error")
        atomic_write_text(os.path.join(outdir, "tip_study_diagonal.svg"), svg)
        click.echo(json.dumps({"status": "ok", "outdir": outdir}, sort_keys=True))
    raise SystemExit(run_guarded(body))


@main.command()
@click.option("--results", type=click.Path(), required=True,
              help="results CSV emitted by `analyze`")
@click.option("--summary", type=click.Path(), required=True,
              help="summary JSON emitted by `analyze`")
@click.option("--outdir", type=click.Path(), default="out")
def report(results, summary, outdir):
    """Re-render the convergence chart from emitted results."""
    def body():
        from .plots import convergence_svg

        try:
            rows = [ln.split(",") for ln in
                    open(results, encoding="utf-8").read().strip().splitlines()]
            with open(summary, encoding="utf-8") as fh:
                sm = json.load(fh)
        except OSError as exc:
            raise IoError(f"cannot read inputs: {exc}")
        header, data = rows[0], rows[1:]
        col = {name: i for i, name in enumerate(header)}

        def column(name):
            vals = [r[col[name]] for r in data]
            if any(v == "" for v in vals):
                return None
            return np.asarray([float(v) for v in vals])

        series = ContourSeries(
            ring_index=np.asarray([int(r[col["contour"]]) for r in data]),
            outer_radius=column("radius_m"), J=column("J"),
            K_I=column("K_I"), K_II=column("K_II"),
            K_II_pseudo=column("K_II_pseudo"), K_III=column("K_III"),
            J_III=column("J_III"), J_total=column("J_total"))
        pl = sm["plateau"]
        plateau = PlateauStats(start_contour=pl["start_contour"],
                               end_contour=pl["end_contour"],
                               mean=pl["mean"], std=pl["std"],
                               no_plateau=pl["no_plateau"], flags=pl["flags"])
        os.makedirs(outdir, exist_ok=True)
        atomic_write_text(os.path.join(outdir, "report.svg"),
                          convergence_svg(series, plateau))
        click.echo(json.dumps({"status": "ok", "outdir": outdir}, sort_keys=True))
    raise SystemExit(run_guarded(body))


@main.command()
@click.option("--host", default="127.0.0.1",
              help="loopback by default; bind elsewhere at your own risk")
@click.option("--port", type=int, default=8777)
@click.option("--static", "static_dir", type=click.Path(), default=None,
              help="directory with the companion UI build")
def serve(host, port, static_dir):
    """Run the local HTTP service for the companion UI."""
    import uvicorn

    from .service import create_app

    app = create_app(static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
