"""End-to-end smoke test: the pipeline CLI trains against the live service.

Starts the service as a real subprocess (hash encoders, so no checkpoint
downloads), then drives `hatekit train --backend remote` and
`hatekit predict` on a 50-row fixture through their console entry points.
"""

import csv
import os
import socket
import subprocess
import sys
import time

import pytest
import requests


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def service():
    port = free_port()
    env = dict(os.environ, ES_PORT=str(port), ES_MODELS="xlmr:hash",
               ES_HASH_DIM="32", ES_MAX_BATCH="16", ES_EAGER="1")
    proc = subprocess.Popen([sys.executable, "-m", "embed_service"], env=env,
                            stdout=subprocess.PIPE, stderr=subprocess.STDOUT)
    endpoint = f"http://127.0.0.1:{port}"
    try:
        for _ in range(100):
            try:
                if requests.get(endpoint + "/v1/health", timeout=1).status_code == 200:
                    break
            except requests.RequestException:
                pass
            time.sleep(0.1)
        else:
            proc.terminate()
            raise RuntimeError("service did not become healthy")
        yield endpoint
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def write_fixture(path, n=50):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hasoc_id", "tweet_id", "text", "task_1"])
        for i in range(n):
            hof = i % 2 == 0
            text = f"{'grr' if hof else 'yay'}{i % 8} topic{i % 5}"
            writer.writerow([f"h{i}", f"t{i}", text, "HOF" if hof else "NOT"])


def hatekit(*args):
    return subprocess.run([sys.executable, "-m", "hatekit.cli", *args],
                          capture_output=True, text=True)


def test_train_and_predict_against_live_service(service, tmp_path):
    data = tmp_path / "fixture.csv"
    write_fixture(data)
    model = tmp_path / "model.json"

    result = hatekit("train", "--data", f"en={data}", "--mode", "mono",
                     "--task", "1a", "--backend", "remote",
                     "--endpoint", service, "--model-id", "xlmr",
                     "--seed", "5", "--hidden-dim", "8", "--batch-size", "16",
                     "--max-epochs", "5", "--out", str(model), "--no-figures")
    assert result.returncode == 0, result.stderr
    assert model.exists()

    preds = tmp_path / "preds.csv"
    result = hatekit("predict", "--model", str(model), "--in", str(data),
                     "--out", str(preds), "--backend", "remote",
                     "--endpoint", service, "--model-id", "xlmr")
    assert result.returncode == 0, result.stderr
    with open(preds, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 50
    assert all(r["predicted"] in {"NOT", "HOF"} for r in rows)


def test_health_dim_matches_embed(service):
    health = requests.get(service + "/v1/health", timeout=5).json()
    body = requests.post(service + "/v1/embed",
                         json={"model": "xlmr", "texts": ["a", "b", "c"]},
                         timeout=5).json()
    assert body["dim"] == health["dims"]["xlmr"] == 32
    assert len(body["vectors"]) == 3
