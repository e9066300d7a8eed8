import numpy as np
import pytest
from fastapi.testclient import TestClient

import mahaknn
from mahaknn.service import create_app


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    cfg = mahaknn.SynthConfig(
        seed=31, n_train=300, n_test_id=100, n_test_ood=100, M=4, K=3, d=8, ood_shift=6.0
    )
    train, test = mahaknn.generate(cfg)
    mahaknn.write_embeddings(train, root / "train.emb")
    mahaknn.write_embeddings(test, root / "test.emb")
    artifact = mahaknn.fit_model(train)
    mahaknn.save_model(artifact, root / "model.mdl")
    return root, train, test


@pytest.fixture()
def client():
    return TestClient(create_app())


class TestHealthAndModel:
    def test_health_before_load(self, client):
        body = client.get("/health").json()
        assert body == {"status": "ok", "model_loaded": False}

    def test_model_endpoints_require_load(self, client):
        assert client.get("/model").status_code == 409
        r = client.post("/evaluate", json={"test_path": "x"})
        assert r.status_code == 409

    def test_load_and_info(self, client, artifacts):
        root, train, _ = artifacts
        r = client.post("/model/load", json={"path": str(root / "model.mdl")})
        assert r.status_code == 200
        info = r.json()
        assert info["k_layers"] == train.k_layers
        assert info["dim"] == train.dim
        assert client.get("/health").json()["model_loaded"] is True
        assert client.get("/model").json() == info

    def test_load_bad_path_maps_to_400(self, client):
        r = client.post("/model/load", json={"path": "/nonexistent.mdl"})
        assert r.status_code == 400
        assert r.json()["error"] == "IoFailure"


class TestFitAndEvaluate:
    def test_fit_then_evaluate(self, client, artifacts, tmp_path):
        root, _, _ = artifacts
        out_model = tmp_path / "svc.mdl"
        r = client.post(
            "/model/fit",
            json={"train_path": str(root / "train.emb"), "model_path": str(out_model)},
        )
        assert r.status_code == 200
        assert out_model.exists()
        r = client.post("/evaluate", json={"test_path": str(root / "test.emb")})
        assert r.status_code == 200
        report = r.json()
        assert report["auroc"] >= 0.95
        assert report["counts"]["tp"] + report["counts"]["fn"] == 100

    def test_fit_matches_cli_pipeline(self, client, artifacts, tmp_path):
        root, train, _ = artifacts
        out_model = tmp_path / "svc.mdl"
        r = client.post(
            "/model/fit",
            json={"train_path": str(root / "train.emb"), "model_path": str(out_model)},
        )
        assert r.status_code == 200
        direct = mahaknn.fit_model(train)
        assert mahaknn.load_model(out_model).equals(direct)


class TestDecide:
    def test_decide_with_logits(self, client, artifacts):
        root, _, test = artifacts
        client.post("/model/load", json={"path": str(root / "model.mdl")})
        r = client.post(
            "/decide",
            json={
                "embeddings": test.embeddings[:4].tolist(),
                "logits": test.logits[:4].tolist(),
            },
        )
        assert r.status_code == 200
        body = r.json()
        expected = mahaknn.decide_batch(
            mahaknn.EmbeddingSet.create(test.embeddings[:4], test.logits[:4]),
            mahaknn.load_model(root / "model.mdl"),
        )
        got = [(d["index"], d["label"]) for d in body["decisions"]]
        assert got == [(i, p.label) for i, p in enumerate(expected)]

    def test_decide_without_logits_gives_scores_only(self, client, artifacts):
        root, _, test = artifacts
        client.post("/model/load", json={"path": str(root / "model.mdl")})
        r = client.post("/decide", json={"embeddings": test.embeddings[:2].tolist()})
        assert r.status_code == 200
        for d in r.json()["decisions"]:
            assert d["label"] is None
            assert d["rejection_score"] >= 0

    def test_delta_override(self, client, artifacts):
        root, _, test = artifacts
        client.post("/model/load", json={"path": str(root / "model.mdl")})
        r = client.post(
            "/decide",
            json={
                "embeddings": test.embeddings[:3].tolist(),
                "logits": test.logits[:3].tolist(),
                "delta_override": -1.0,
            },
        )
        assert all(d["label"] == test.num_classes for d in r.json()["decisions"])

    def test_shape_mismatch_maps_to_400(self, client, artifacts):
        root, _, _ = artifacts
        client.post("/model/load", json={"path": str(root / "model.mdl")})
        bad = np.zeros((2, 1, 3)).tolist()  # wrong k_layers and dim
        r = client.post("/decide", json={"embeddings": bad})
        assert r.status_code == 400
        assert r.json()["error"] == "DimensionMismatch"

    def test_ragged_payload_maps_to_400(self, client, artifacts):
        root, _, _ = artifacts
        client.post("/model/load", json={"path": str(root / "model.mdl")})
        ragged = [[[1.0, 2.0], [3.0]]]
        r = client.post("/decide", json={"embeddings": ragged})
        assert r.status_code == 400
        assert r.json()["error"] == "DimensionMismatch"


class TestSynthEndpoint:
    def test_synth_writes_files(self, client, tmp_path):
        r = client.post(
            "/synth",
            json={
                "config": {"seed": 1, "n_train": 40, "n_test_id": 20,
                           "n_test_ood": 20, "M": 2, "K": 2, "d": 4},
                "out_train": str(tmp_path / "t.emb"),
                "out_test": str(tmp_path / "x.emb"),
            },
        )
        assert r.status_code == 200
        body = r.json()
        assert body["train"]["n"] == 40
        assert mahaknn.read_embeddings(tmp_path / "t.emb").n == 40

    def test_bad_config_maps_to_400(self, client, tmp_path):
        r = client.post(
            "/synth",
            json={"config": {"M": 1}, "out_train": str(tmp_path / "t.emb"),
                  "out_test": str(tmp_path / "x.emb")},
        )
        assert r.status_code == 400
        assert r.json()["error"] == "BadConfig"
