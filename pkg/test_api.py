import time
from collections import OrderedDict
from fractions import Fraction

import pytest
from fastapi.testclient import TestClient

from api.main import app
import core.background_worker as worker

client = TestClient(app)

CFG_A = {
    "weights": {"m": [2, 4, 8, 16], "n": [4, 8, 16, 32]},
    "ground": {"dim": 1, "norming_set": [[1], [-1]]},
}
CFG_Q = {
    "weights": {"m": [60, 120, 240, 480], "n": [8, 16, 32, 64], "tail_rule": "doubling"},
    "ground": {"dim": 1, "norming_set": [[1], [-1]]},
    "experiments": [{"name": "prop43", "kind": "quotient", "z": ["1"], "j0": 1}],
}


def test_health():
    response = client.get("/api/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"
    assert response.json()["queue_size"] >= 0
    assert client.head("/api/health").status_code == 200


def test_norm():
    response = client.post("/api/norm", json={"space": CFG_A, "vector": "1 -1 1 -1"})
    assert response.status_code == 200
    doc = response.json()
    lo, hi = Fraction(doc["lo"]), Fraction(doc["hi"])
    assert lo * lo <= Fraction(85, 16) <= hi * hi
    assert doc["witness"]["kind"] == "convex"


def test_norm_bad_vector_is_422():
    response = client.post("/api/norm", json={"space": CFG_A, "vector": "1/0"})
    assert response.status_code == 422
    assert "zero denominator" in response.json()["detail"]


def test_norm_bad_space_is_422():
    space = {"weights": {"m": [2, 4], "n": [4, 8], "extra": 1}, "ground": CFG_A["ground"]}
    response = client.post("/api/norm", json={"space": space, "vector": "1"})
    assert response.status_code == 422
    assert "weights.extra" in response.json()["detail"]


def test_norm_invalid_config_is_400():
    space = {"weights": {"m": [4, 2], "n": [4, 8]}, "ground": CFG_A["ground"]}
    response = client.post("/api/norm", json={"space": space, "vector": "1"})
    assert response.status_code == 400
    assert "strictly increasing" in response.json()["detail"]


def test_norm_extended_mode_rejected():
    response = client.post("/api/norm", json={"space": CFG_A, "vector": "1 -1", "mode": "extended"})
    assert response.status_code == 400


def test_jtree_norm():
    response = client.post("/api/jtree-norm", json={"tree": "(1 (3) (4))"})
    assert response.status_code == 200
    assert response.json()["squared"] == "25"
    nested = client.post("/api/jtree-norm", json={"tree": [1, [2, [3]]]})
    assert nested.json()["squared"] == "36"


def test_jtree_norm_parse_error():
    response = client.post("/api/jtree-norm", json={"tree": "(1 (3)"})
    assert response.status_code == 422


def test_check_pass():
    response = client.post("/api/check", json={"space": CFG_Q, "suite": "lemma41", "count": 10, "n": 1})
    assert response.status_code == 200
    doc = response.json()
    assert doc["status"] == "pass"
    assert doc["count"] == 10
    assert len(doc["space_sha256"]) == 64


def test_check_skipped():
    response = client.post("/api/check", json={"space": CFG_A, "suite": "lemma41", "count": 5})
    assert response.status_code == 200
    assert response.json()["status"] == "skipped"


def test_check_unknown_suite():
    response = client.post("/api/check", json={"space": CFG_A, "suite": "lemma99"})
    assert response.status_code == 400


def test_check_count_is_bounded():
    response = client.post("/api/check", json={"space": CFG_A, "suite": "jtree", "count": 0})
    assert response.status_code == 422


def _wait(job_id, timeout=60.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        job = client.get(f"/api/experiments/{job_id}").json()
        if job["status"] in ("done", "error"):
            return job
        time.sleep(0.05)
    pytest.fail(f"job {job_id} did not finish")


def test_experiment_job_runs_to_completion(monkeypatch, tmp_path):
    monkeypatch.setattr("core.experiments.OUTPUT_DIR", str(tmp_path))
    response = client.post("/api/experiments", json={"space": CFG_Q, "name": "prop43"})
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "queued"
    job = _wait(body["job_id"])
    assert job["status"] == "done", job.get("error")
    assert job["result"]["report"]["enclosure"]["lo"] == "1"
    assert (tmp_path / "prop43.json").exists()


def test_unknown_experiment_name():
    response = client.post("/api/experiments", json={"space": CFG_Q, "name": "nope"})
    assert response.status_code == 404


def test_unknown_job():
    response = client.get("/api/experiments/does-not-exist")
    assert response.status_code == 404
    assert response.json()["detail"] == "Job not found"


def _finish(job_id, name):
    worker.process_experiment_job({"job_id": job_id, "definition": None, "name": name, "output_dir": None})


def test_finished_jobs_past_the_cap_are_evicted(monkeypatch):
    monkeypatch.setattr(worker, "jobs", OrderedDict())
    monkeypatch.setattr(worker, "MAX_JOBS", 2)
    monkeypatch.setattr("core.experiments.run_experiment", lambda definition, name, output_dir=None: {"name": name})
    ids = []
    for k in range(5):
        job_id = worker.create_job(f"e{k}")
        _finish(job_id, f"e{k}")
        ids.append(job_id)
    assert [worker.get_job(j) for j in ids[:3]] == [None, None, None]
    assert [worker.get_job(j)["status"] for j in ids[3:]] == ["done", "done"]
    assert client.get(f"/api/experiments/{ids[0]}").status_code == 404
    assert client.get(f"/api/experiments/{ids[-1]}").json()["result"] == {"name": "e4"}


def test_unfinished_jobs_are_kept_past_the_cap(monkeypatch):
    monkeypatch.setattr(worker, "jobs", OrderedDict())
    monkeypatch.setattr(worker, "MAX_JOBS", 1)
    ids = [worker.create_job(f"e{k}") for k in range(3)]
    assert [worker.get_job(j)["status"] for j in ids] == ["queued"] * 3
