import json
import time
from pathlib import Path

import jsonschema
import pytest
from fastapi.testclient import TestClient

from dicfrac.field import write_field
from dicfrac.material import Material
from dicfrac.service import create_app
from dicfrac.synth import SyntheticSpec, generate_williams_field
from conftest import PITCH

SCHEMA_DIR = Path(__file__).resolve().parents[1] / "src/dicfrac/schemas"
STEEL = Material(model="isotropic", E=210e9, nu=0.3, plane_state="plane strain")

MATERIAL_DOC = {"model": "isotropic", "E": 210e9, "nu": 0.3,
                "plane_state": "plane strain"}
CRACK_DOC = {
    "tip": [0.0, 0.0],
    "mouth": [-1.1e-6, 0.0],
    "mask": {"kind": "rect",
             "vertices": [[-2.2 * PITCH, -2.2 * PITCH],
                          [2.2 * PITCH, 2.2 * PITCH]]},
}


def schema(name):
    return json.loads((SCHEMA_DIR / name).read_text())


@pytest.fixture(scope="module")
def demo_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("svc")
    spec = SyntheticSpec(k1=3e6, k2=1e6, k3=5e6, material=STEEL,
                         nx=51, ny=51, spacing=PITCH, tip=(0.0, 0.0))
    p = d / "demo.csv"
    write_field(generate_williams_field(spec), p, units="m")
    return p


@pytest.fixture()
def client():
    return TestClient(create_app())


def upload(client, path, units="m"):
    with open(path, "rb") as fh:
        return client.post(f"/api/fields?units={units}",
                           files={"file": ("demo.csv", fh, "text/csv")})


def wait_done(client, jid, timeout=60.0):
    t0 = time.time()
    while time.time() - t0 < timeout:
        r = client.get(f"/api/jobs/{jid}")
        doc = r.json()
        if doc["status"] in ("done", "failed"):
            return doc
        time.sleep(0.05)
    raise TimeoutError


def test_upload_and_metadata(client, demo_csv):
    r = upload(client, demo_csv)
    assert r.status_code == 201
    doc = r.json()
    jsonschema.validate(doc, schema("service_field.schema.json"))
    assert doc["report"]["nx"] == 51 and doc["report"]["ny"] == 51
    assert doc["report"]["has_out_of_plane"] is True
    meta = client.get(f"/api/fields/{doc['id']}").json()
    assert meta["id"] == doc["id"]


def test_upload_malformed_row(client, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("0,0,1,2\n1,0,1\n")
    r = upload(client, p)
    assert r.status_code == 400
    assert r.json()["error"]["kind"] == "MalformedRow"
    assert "line" in r.json()["error"]


def test_upload_empty(client, tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    r = upload(client, p)
    assert r.status_code == 400
    assert r.json()["error"]["kind"] == "EmptyFile"


def test_magnitude_cached_and_schema(client, demo_csv):
    fid = upload(client, demo_csv).json()["id"]
    m1 = client.get(f"/api/fields/{fid}/magnitude").json()
    jsonschema.validate(m1, schema("service_magnitude.schema.json"))
    m2 = client.get(f"/api/fields/{fid}/magnitude").json()
    assert m1 == m2
    assert m1["nx"] == 51 and len(m1["values"]) == 51 * 51


def test_crack_echo_snapped_chain(client, demo_csv):
    fid = upload(client, demo_csv).json()["id"]
    r = client.put(f"/api/fields/{fid}/crack", json=CRACK_DOC)
    assert r.status_code == 200
    doc = r.json()
    jsonschema.validate(doc, schema("service_crack.schema.json"))
    chain = doc["crack"]["snapped_chain"]
    assert len(chain) == 26
    assert doc["crack"]["n_seam_nodes"] == 25


def test_crack_tip_outside_422(client, demo_csv):
    fid = upload(client, demo_csv).json()["id"]
    bad = dict(CRACK_DOC, tip=[1.0, 0.0], mouth=[-1.1e-6, 0.0])
    r = client.put(f"/api/fields/{fid}/crack", json=bad)
    assert r.status_code == 422
    assert r.json()["error"]["kind"] == "TipOutsideGrid"


def test_mask_covering_everything_422(client, demo_csv):
    fid = upload(client, demo_csv).json()["id"]
    bad = dict(CRACK_DOC, mask={"kind": "rect",
                                "vertices": [[-1.0, -1.0], [1.0, 1.0]]})
    r = client.put(f"/api/fields/{fid}/crack", json=bad)
    assert r.status_code == 422
    assert r.json()["error"]["kind"] == "MaskCoversAllNodes"


def test_unknown_field_404(client):
    assert client.get("/api/fields/nope").status_code == 404
    assert client.get("/api/jobs/nope").status_code == 404


def test_job_requires_crack(client, demo_csv):
    fid = upload(client, demo_csv).json()["id"]
    r = client.post(f"/api/fields/{fid}/jobs",
                    json={"kind": "analysis",
                          "options": {"material": MATERIAL_DOC}})
    assert r.status_code == 409


def test_analysis_job_full_flow(client, demo_csv):
    fid = upload(client, demo_csv).json()["id"]
    client.put(f"/api/fields/{fid}/crack", json=CRACK_DOC)
    r = client.post(f"/api/fields/{fid}/jobs", json={
        "kind": "analysis",
        "options": {"material": MATERIAL_DOC,
                    "plateau": {"rel_tol": 0.02, "skip": 8}}})
    assert r.status_code == 202
    jid = r.json()["job_id"]
    doc = wait_done(client, jid)
    jsonschema.validate(doc, schema("service_job.schema.json"))
    assert doc["status"] == "done", doc
    plateau = doc["result"]["plateau"]
    assert abs(plateau["mean"]["K_I"] - 3e6) <= 0.15e6
    assert abs(plateau["mean"]["K_II"] - 1e6) <= 0.10e6
    assert abs(plateau["mean"]["K_III"] - 5e6) <= 0.25e6
    # idempotent reads
    again = client.get(f"/api/jobs/{jid}").json()
    assert again == doc


def test_second_job_while_running_409(client, demo_csv):
    fid = upload(client, demo_csv).json()["id"]
    client.put(f"/api/fields/{fid}/crack", json=CRACK_DOC)
    body = {"kind": "analysis", "options": {"material": MATERIAL_DOC}}
    r1 = client.post(f"/api/fields/{fid}/jobs", json=body)
    assert r1.status_code == 202
    r2 = client.post(f"/api/fields/{fid}/jobs", json=body)
    assert r2.status_code == 409
    wait_done(client, r1.json()["job_id"])


def test_qsweep_job_mode1(client, tmp_path):
    spec = SyntheticSpec(k1=3e6, k2=0.0, k3=0.0, material=STEEL,
                         nx=51, ny=51, spacing=PITCH, tip=(0.0, 0.0))
    p = tmp_path / "m1.csv"
    write_field(generate_williams_field(spec), p, units="m")
    fid = upload(client, p).json()["id"]
    client.put(f"/api/fields/{fid}/crack", json=CRACK_DOC)
    r = client.post(f"/api/fields/{fid}/jobs", json={
        "kind": "qsweep",
        "options": {"material": MATERIAL_DOC,
                    "angles_deg": list(range(-30, 31, 10)),
                    "n_contours": 16,
                    "plateau": {"rel_tol": 0.02, "skip": 4}}})
    assert r.status_code == 202, r.json()
    doc = wait_done(client, r.json()["job_id"])
    assert doc["status"] == "done", doc
    sug = doc["result"]["suggestion"]
    assert abs(sug["angle_deg"]) <= 5.0


def test_engine_and_cli_agree(client, demo_csv, tmp_path):
    # the service and the direct pipeline produce identical numbers
    from dicfrac.field import load_field
    from dicfrac.fracture import PlateauOptions
    from dicfrac.mesh import CrackDefinition
    from dicfrac.field import MaskRegion
    from dicfrac.pipeline import AnalysisOptions, analyze_field

    fid = upload(client, demo_csv).json()["id"]
    client.put(f"/api/fields/{fid}/crack", json=CRACK_DOC)
    r = client.post(f"/api/fields/{fid}/jobs", json={
        "kind": "analysis",
        "options": {"material": MATERIAL_DOC,
                    "plateau": {"rel_tol": 0.02, "skip": 8}}})
    doc = wait_done(client, r.json()["job_id"])
    assert doc["status"] == "done"

    field = load_field(demo_csv, units="m")
    crack = CrackDefinition(
        polyline=[tuple(CRACK_DOC["mouth"]), tuple(CRACK_DOC["tip"])],
        tip=tuple(CRACK_DOC["tip"]),
        mask=MaskRegion("rect", CRACK_DOC["mask"]["vertices"]))
    res = analyze_field(field, crack, STEEL,
                        AnalysisOptions(plateau=PlateauOptions(rel_tol=0.02,
                                                               skip=8)))
    assert doc["result"]["plateau"]["mean"]["K_I"] == res.plateau.mean["K_I"]
    assert doc["result"]["plateau"]["mean"]["J"] == res.plateau.mean["J"]
    assert doc["result"]["series"]["J"] == [float(v) for v in res.series.J]
