"""Inspection service HTTP contract."""

import json
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from paramnav.directions import DirectionSet
from paramnav.evaluation import latent_from_seed
from paramnav.generator import GeneratorModel
from paramnav.pngio import png_bytes
from paramnav.rng import Rng
from paramnav.service import create_app

T_RANGE = 0.8


@pytest.fixture()
def setup(tmp_path):
    model = GeneratorModel.init_random(Rng(42))
    basis = Rng(0).normal((8, 72))
    basis /= np.linalg.norm(basis, axis=1, keepdims=True)
    dirs = DirectionSet(layer="L3", parametrization="raw_kernel",
                        basis=basis.astype(np.float32), method="spectrum",
                        magnitude_range=T_RANGE,
                        scores=np.linspace(2, 0.5, 8).astype(np.float32))
    store = tmp_path / "annotations.jsonl"
    app = create_app(model, dirs, store)
    return model, dirs, store, TestClient(app)


def _annotation(direction=0, quality=4):
    return {"direction_id": direction, "label": "disc grows", "interpretable": True,
            "quality": quality, "t_min": -0.5, "t_max": 0.5, "annotator": "alice"}


def test_meta_and_directions_list(setup):
    _, dirs, _, client = setup
    meta = client.get("/api/meta").json()
    assert meta["direction_count"] == 8
    assert meta["t_limit"] == pytest.approx(2 * T_RANGE)
    listing = client.get("/api/directions").json()
    assert len(listing) == 8
    ids = [row["id"] for row in listing]
    assert ids == sorted(set(ids))
    again = client.get("/api/directions").json()
    assert listing == again
    for row in listing:
        assert set(row) >= {"id", "label", "method", "score", "magnitude_range"}


def test_render_zero_magnitude_matches_unshifted(setup):
    model, _, _, client = setup
    r = client.get("/api/render", params={"dir": 0, "t": 0.0, "seed": 3})
    assert r.status_code == 200
    assert r.headers["content-type"] == "image/png"
    want = png_bytes(model.generate(latent_from_seed(3))[0])
    assert r.content == want


def test_render_is_cacheable_and_pure(setup):
    _, _, _, client = setup
    a = client.get("/api/render", params={"dir": 2, "t": 0.25, "seed": 1})
    b = client.get("/api/render", params={"dir": 2, "t": 0.25, "seed": 1})
    assert a.content == b.content


def test_render_error_codes(setup):
    _, _, _, client = setup
    assert client.get("/api/render",
                      params={"dir": 99, "t": 0.0, "seed": 0}).status_code == 404
    r = client.get("/api/render",
                   params={"dir": 0, "t": 2 * T_RANGE + 1.0, "seed": 0})
    assert r.status_code == 400


def test_strip_endpoint(setup):
    _, _, _, client = setup
    r = client.get("/api/strip", params={"dir": 1, "seed": 0, "steps": 5, "tmax": 0.5})
    assert r.status_code == 200
    assert r.content[:8] == b"\x89PNG\r\n\x1a\n"


def test_submit_then_list_roundtrip(setup):
    _, _, _, client = setup
    sent = _annotation()
    r = client.post("/api/annotations", json=sent)
    assert r.status_code == 201
    records = client.get("/api/annotations").json()
    assert len(records) == 1
    for key, val in sent.items():
        assert records[0][key] == val
    assert records[0]["method"] == "spectrum"


def test_invalid_annotations_rejected_422(setup):
    _, _, _, client = setup
    assert client.post("/api/annotations",
                       json=_annotation(quality=6)).status_code == 422
    assert client.post("/api/annotations",
                       json=_annotation(direction=99)).status_code == 422
    bad = _annotation()
    del bad["label"]
    assert client.post("/api/annotations", json=bad).status_code == 422
    assert client.get("/api/annotations").json() == []


def test_interleaved_writers_all_persisted(setup):
    _, _, store, client = setup

    def submit(i):
        body = _annotation(direction=i % 8)
        body["annotator"] = f"worker-{i}"
        assert client.post("/api/annotations", json=body).status_code == 201

    threads = [threading.Thread(target=submit, args=(i,)) for i in range(12)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    lines = [json.loads(s) for s in store.read_text().splitlines() if s.strip()]
    assert len(lines) == 12
    assert {rec["annotator"] for rec in lines} == {f"worker-{i}" for i in range(12)}


def test_export_csv_grouped_by_method(setup):
    _, _, _, client = setup
    client.post("/api/annotations", json=_annotation(direction=3))
    client.post("/api/annotations", json=_annotation(direction=1))
    r = client.get("/api/annotations/export", params={"format": "csv"})
    assert r.status_code == 200
    lines = r.text.strip().splitlines()
    assert lines[0].startswith("method,direction_id,label")
    assert len(lines) == 3
    assert client.get("/api/annotations/export",
                      params={"format": "xml"}).status_code == 400


def test_service_never_mutates_model(setup):
    model, dirs, _, client = setup
    before = model.params_hash()
    basis_before = dirs.basis.copy()
    client.get("/api/render", params={"dir": 1, "t": 0.7, "seed": 4})
    client.post("/api/annotations", json=_annotation())
    assert model.params_hash() == before
    assert np.array_equal(dirs.basis, basis_before)
