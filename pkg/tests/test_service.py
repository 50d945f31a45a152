import json

import pytest
from fastapi.testclient import TestClient

from bracketlab import service

client = TestClient(service.app)


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_enumerate_endpoint():
    resp = client.get("/enumerate", params={"length": 2})
    assert resp.status_code == 200
    body = resp.json()
    assert body["count"] == 4
    assert [r["text"] for r in body["rows"]] == ["((", "()", ")(", "))"]
    zero = [r for r in body["rows"] if r["text"] == ")("][0]
    assert zero["ternary"] == "zero"
    assert zero["balanced"] is True


def test_enumerate_cap_rejected():
    resp = client.get("/enumerate", params={"length": 25})
    assert resp.status_code == 400
    assert "cap" in resp.json()["detail"]


def test_verify_endpoint_small():
    resp = client.post("/verify", json={"samples": 25, "max_len": 8, "params": [1.0, -1.0, 1.0, 0.0]})
    assert resp.status_code == 200
    body = resp.json()
    assert body["ok"] is True
    assert body["inconsistencies"] == 0
    assert body["canonical"]["mismatches"] == 0
    assert body["canonical"]["closed_form_exact"] is True
    assert body["sweep"]["verdicts"]["indicators_fail_and_counterexample_found"] == 25
    assert all(c["ok"] for c in body["closed_form"])
    pr = body["params_report"]
    assert pr["indicators"]["holds"] is True
    assert pr["verdict"] == "equivalent_up_to_len"
    assert len(pr["cases"]) == 6


def test_verify_params_report_violating():
    resp = client.post("/verify", json={"samples": 5, "max_len": 6, "params": [1.0, -1.0, 0.9, 0.0]})
    body = resp.json()
    pr = body["params_report"]
    assert pr["indicators"]["holds"] is False
    assert pr["counterexample"] == "()"
    assert pr["verdict"] == "indicators_fail_and_counterexample_found"
    assert body["ok"] is True  # a falsified parameter set is consistent, not an inconsistency


def test_verify_bad_params_rejected():
    resp = client.post("/verify", json={"params": [1.0, 2.0]})
    assert resp.status_code == 400


def test_verify_writes_report(tmp_path):
    resp = client.post("/verify", json={"samples": 5, "max_len": 6, "out": str(tmp_path)})
    body = resp.json()
    assert body["report_path"]
    with open(body["report_path"]) as fh:
        report = json.load(fh)
    assert report["canonical"]["mismatches"] == 0


@pytest.fixture(scope="module")
def small_log(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    resp = client.post(
        "/train",
        json={"task": "binary", "bias": "off", "train_length": 2, "epochs": 6, "runs": 2,
              "seed": 11, "eval_samples": 50, "out": str(out)},
    )
    assert resp.status_code == 200
    return resp.json()


def test_train_endpoint(small_log):
    assert small_log["log_path"].endswith("runs_binary_bias-off_len2.jsonl")
    assert small_log["diverged"] == 0
    assert "train" in small_log["summary"]
    assert small_log["row"]["n_runs"] == 2


def test_eval_endpoint(small_log):
    resp = client.post(
        "/eval",
        json={"log": small_log["log_path"], "run_index": 1, "lengths": [10], "samples": 40, "seed": 2},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["run_index"] == 1
    assert set(body["accuracies"]) == {"10"}
    again = client.post(
        "/eval",
        json={"log": small_log["log_path"], "run_index": 1, "lengths": [10], "samples": 40, "seed": 2},
    )
    assert again.json() == body  # seeded evaluation reproduces


def test_eval_missing_run(small_log):
    resp = client.post("/eval", json={"log": small_log["log_path"], "run_index": 7})
    assert resp.status_code == 400


def test_report_endpoint(small_log, tmp_path):
    resp = client.post("/report", json={"logs": [small_log["log_path"]], "out": str(tmp_path)})
    assert resp.status_code == 200
    body = resp.json()
    assert body["table"].startswith("Experiment,")
    assert len(body["rows"]) == 1
    assert len(body["histograms"]) == 1
    assert set(body["paths"]) == {"table", "histograms_json", "histograms_csv"}


def test_report_no_logs():
    resp = client.post("/report", json={"logs": []})
    assert resp.status_code == 400


def test_report_missing_file():
    resp = client.post("/report", json={"logs": ["/nonexistent/log.jsonl"]})
    assert resp.status_code == 400


def test_train_invalid_task_rejected():
    resp = client.post("/train", json={"task": "quaternary", "train_length": 2})
    assert resp.status_code == 400
    assert "task" in resp.json()["detail"]


def test_eval_diverged_run_rejected(tmp_path):
    resp = client.post(
        "/train",
        json={"task": "binary", "bias": "off", "train_length": 8, "epochs": 30, "runs": 1,
              "seed": 0, "lr": 4.0, "eval_samples": 20, "out": str(tmp_path)},
    )
    body = resp.json()
    assert body["diverged"] == 1
    resp = client.post("/eval", json={"log": body["log_path"], "run_index": 0})
    assert resp.status_code == 400
    assert "did not finish" in resp.json()["detail"]
