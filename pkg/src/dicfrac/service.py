"""Local HTTP facade over the engine for the companion UI.

In-memory sessions: an uploaded field is immutable; each field holds one
current crack definition and at most one queued-or-running job. Jobs execute
on a single worker thread (bounded queue) and are polled by id. All payload
numbers are SI.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import queue
import threading
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Query, Request, UploadFile
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .errors import DicfracError
from .field import DisplacementField, MaskRegion, load_field_text
from .fracture import PlateauOptions
from .material import material_from_dict
from .mesh import CrackDefinition, build_seam_mesh
from .pipeline import AnalysisOptions, analyze_field, summary_dict
from .studies import q_sweep, suggest_q_direction

MAX_PREVIEW = 512
JOB_QUEUE_LIMIT = 4


@dataclass
class Job:
    id: str
    field_id: str
    kind: str
    options: dict
    status: str = "queued"  # queued | running | done | failed
    result: dict | None = None
    error: dict | None = None


@dataclass
class Session:
    id: str
    field: DisplacementField
    report: dict
    crack: CrackDefinition | None = None
    crack_echo: dict | None = None
    active_job: str | None = None
    magnitude_cache: dict | None = None


class Engine:
    """Session and job bookkeeping behind the HTTP routes."""

    def __init__(self):
        self.sessions: dict[str, Session] = {}
        self.jobs: dict[str, Job] = {}
        self._lock = threading.Lock()
        self._queue: queue.Queue = queue.Queue(maxsize=JOB_QUEUE_LIMIT)
        self._counter = itertools.count(1)
        self._worker = threading.Thread(target=self._run_jobs, daemon=True)
        self._worker.start()

    # -- fields ---------------------------------------------------------

    def create_field(self, text: str, units: str) -> Session:
        field = load_field_text(text, units=units)
        digest = hashlib.sha256(text.encode()).hexdigest()[:12]
        with self._lock:
            sid = f"f{next(self._counter)}-{digest}"
            report = {
                "nx": field.nx, "ny": field.ny,
                "spacing_x": field.spacing_x, "spacing_y": field.spacing_y,
                "origin": [field.origin[0], field.origin[1]],
                "has_out_of_plane": field.has_out_of_plane,
                "n_masked": int(np.count_nonzero(field.mask)),
                "max_deviation": field.lattice_deviation,
            }
            session = Session(id=sid, field=field, report=report)
            self.sessions[sid] = session
        return session

    def magnitude(self, session: Session) -> dict:
        if session.magnitude_cache is None:
            f = session.field
            mag = f.magnitude().reshape(f.ny, f.nx)
            step = max(1, math.ceil(max(f.nx, f.ny) / MAX_PREVIEW))
            sub = mag[::step, ::step]
            session.magnitude_cache = {
                "nx": sub.shape[1], "ny": sub.shape[0],
                "spacing_x": f.spacing_x * step, "spacing_y": f.spacing_y * step,
                "origin": [f.origin[0], f.origin[1]],
                "values": [float(v) for v in sub.ravel()],
                "min": float(sub.min()), "max": float(sub.max()),
                "stride": step,
            }
        return session.magnitude_cache

    # -- crack ----------------------------------------------------------

    def set_crack(self, session: Session, doc: dict) -> dict:
        mask = None
        if doc.get("mask") is not None:
            m = doc["mask"]
            mask = MaskRegion(m.get("kind", "rect"),
                              [tuple(v) for v in m["vertices"]])
        tip = tuple(doc["tip"])
        polyline = [tuple(p) for p in doc.get("polyline") or []]
        if not polyline:
            if doc.get("mouth") is None:
                raise ValueError("crack needs a mouth or polyline")
            polyline = [tuple(doc["mouth"]), tip]
        elif tuple(polyline[-1]) != tip:
            polyline = polyline + [tip]
        crack = CrackDefinition(polyline=polyline, tip=tip,
                                q_angle=doc.get("q_angle"), mask=mask)
        # dry-run the mesh so the UI sees exactly what will be analysed
        field = session.field
        if mask is not None:
            from .field import apply_mask
            field = apply_mask(field, mask)
        mesh = build_seam_mesh(field, crack)
        chain = [[field.origin[0] + i * field.spacing_x,
                  field.origin[1] + j * field.spacing_y]
                 for i, j in mesh.chain_indices]
        echo = {
            "tip": list(crack.tip),
            "polyline": [list(p) for p in crack.polyline],
            "q_angle": crack.extension_angle(),
            "mask": doc.get("mask"),
            "snapped_chain": chain,
            "n_seam_nodes": int(len(mesh.seam_pairs)),
        }
        session.crack = crack
        session.crack_echo = echo
        return echo

    # -- jobs -----------------------------------------------------------

    def submit_job(self, session: Session, kind: str, options: dict) -> Job:
        with self._lock:
            if session.active_job is not None:
                job = self.jobs[session.active_job]
                if job.status in ("queued", "running"):
                    raise JobConflict(f"job {job.id} is {job.status}")
            jid = f"j{next(self._counter)}"
            job = Job(id=jid, field_id=session.id, kind=kind, options=options)
            self.jobs[jid] = job
            session.active_job = jid
        try:
            self._queue.put_nowait(job)
        except queue.Full:
            with self._lock:
                job.status = "failed"
                job.error = {"kind": "QueueFull",
                             "message": "job queue limit reached"}
            raise JobConflict("job queue limit reached")
        return job

    def _run_jobs(self):
        while True:
            job = self._queue.get()
            with self._lock:
                job.status = "running"
                session = self.sessions.get(job.field_id)
            try:
                result = self._execute(session, job)
                with self._lock:
                    job.result = result
                    job.status = "done"
            except DicfracError as exc:
                with self._lock:
                    job.error = exc.payload()
                    job.status = "failed"
            except Exception as exc:  # engine bugs surface as failed jobs
                with self._lock:
                    job.error = {"kind": type(exc).__name__, "message": str(exc)}
                    job.status = "failed"

    def _execute(self, session: Session, job: Job) -> dict:
        if session is None or session.crack is None:
            raise DicfracError("crack not set for this field")
        opts = job.options
        material = material_from_dict(opts["material"])
        plateau = PlateauOptions(**opts.get("plateau", {}))
        if job.kind == "analysis":
            aopts = AnalysisOptions(model=opts.get("model", "elastic"),
                                    n_contours=opts.get("n_contours"),
                                    plateau=plateau)
            res = analyze_field(session.field, session.crack, material, aopts)
            return {
                "kind": "analysis",
                "series": _series_payload(res.series),
                "plateau": summary_dict(res)["plateau"],
                "warnings": res.warnings,
            }
        if job.kind == "qsweep":
            degs = opts.get("angles_deg") or list(range(-60, 61, 10))
            study = q_sweep(session.field, session.crack, material,
                            np.radians(np.asarray(degs, dtype=float)),
                            n_contours=opts.get("n_contours"), plateau=plateau)
            suggestion = suggest_q_direction(study)
            return {
                "kind": "qsweep",
                "study": {
                    "angle_rad": [float(v) for v in study.axis["angle"]],
                    "angle_rel_deg": [float(v) for v in degs],
                    "mean": {k: [float(x) for x in v]
                             for k, v in study.mean.items()},
                    "std": {k: [float(x) for x in v]
                            for k, v in study.std.items()},
                },
                "suggestion": {"angle_rad": suggestion.angle,
                               "angle_deg": math.degrees(suggestion.angle),
                               "flag": suggestion.flag},
            }
        raise DicfracError(f"unknown job kind {job.kind!r}")


class JobConflict(Exception):
    pass


def _series_payload(series) -> dict:
    out = {"contour": [int(v) for v in series.ring_index],
           "radius_m": [float(v) for v in series.outer_radius]}
    for name, vals in series.quantities().items():
        out[name] = [float(v) for v in vals]
    return out


def create_app(static_dir=None) -> FastAPI:
    app = FastAPI(title="dicfrac service", docs_url=None, redoc_url=None)
    engine = Engine()
    app.state.engine = engine

    @app.exception_handler(DicfracError)
    async def engine_error(request: Request, exc: DicfracError):
        status = 422 if exc.kind in (
            "TipOutsideGrid", "PolylineNotSnappable", "CrackTouchesBoundaryTip",
            "MaskCoversAllNodes", "CropTooSmall", "CropOutOfBounds") else 400
        return JSONResponse(status_code=status, content={"error": exc.payload()})

    @app.post("/api/fields", status_code=201)
    async def create_field(file: UploadFile, units: str = Query("m")):
        body = (await file.read()).decode("utf-8-sig")
        if not body.strip():
            return JSONResponse(status_code=400, content={
                "error": {"kind": "EmptyFile", "message": "empty upload"}})
        session = engine.create_field(body, units)
        return {"id": session.id, "report": session.report}

    @app.get("/api/fields/{fid}")
    async def field_meta(fid: str):
        s = engine.sessions.get(fid)
        if s is None:
            return _not_found(fid)
        return {"id": s.id, "report": s.report,
                "crack": s.crack_echo,
                "active_job": s.active_job}

    @app.get("/api/fields/{fid}/magnitude")
    async def field_magnitude(fid: str):
        s = engine.sessions.get(fid)
        if s is None:
            return _not_found(fid)
        return engine.magnitude(s)

    @app.put("/api/fields/{fid}/crack")
    async def put_crack(fid: str, doc: dict):
        s = engine.sessions.get(fid)
        if s is None:
            return _not_found(fid)
        try:
            echo = engine.set_crack(s, doc)
        except (ValueError, KeyError) as exc:
            return JSONResponse(status_code=422, content={
                "error": {"kind": "InvalidCrack", "message": str(exc)}})
        return {"crack": echo}

    @app.post("/api/fields/{fid}/jobs", status_code=202)
    async def post_job(fid: str, doc: dict):
        s = engine.sessions.get(fid)
        if s is None:
            return _not_found(fid)
        kind = doc.get("kind", "analysis")
        if kind not in ("analysis", "qsweep"):
            return JSONResponse(status_code=400, content={
                "error": {"kind": "ConfigError",
                          "message": f"unknown job kind {kind!r}"}})
        if s.crack is None:
            return JSONResponse(status_code=409, content={
                "error": {"kind": "NoCrack", "message": "set the crack first"}})
        try:
            job = engine.submit_job(s, kind, doc.get("options", {}))
        except JobConflict as exc:
            return JSONResponse(status_code=409, content={
                "error": {"kind": "JobConflict", "message": str(exc)}})
        return {"job_id": job.id, "status": job.status}

    @app.get("/api/jobs/{jid}")
    async def get_job(jid: str):
        job = engine.jobs.get(jid)
        if job is None:
            return JSONResponse(status_code=404, content={
                "error": {"kind": "NotFound", "message": f"no job {jid}"}})
        return {"id": job.id, "field_id": job.field_id, "kind": job.kind,
                "status": job.status, "result": job.result, "error": job.error}

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")
    return app


def _not_found(fid):
    return JSONResponse(status_code=404, content={
        "error": {"kind": "NotFound", "message": f"no field {fid}"}})
