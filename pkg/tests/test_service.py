import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest
from fastapi.testclient import TestClient

from pano_probe.service import create_app

from conftest import write_engineered_curves, write_image_corpus


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


def test_variants_endpoint(client, image_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("variants_out")
    resp = client.post("/variants", json={
        "manifest": str(image_corpus),
        "out_dir": str(out),
        "divisions": 8,
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["pair_count"] == 2
    assert body["variant_count"] == 2 * 9
    assert (out / "variant_index.json").exists()


def test_variants_missing_manifest(client, tmp_path):
    resp = client.post("/variants", json={
        "manifest": str(tmp_path / "nope.json"),
        "out_dir": str(tmp_path / "out"),
    })
    assert resp.status_code == 422


def test_probe_textual_endpoint(client, synthetic_env):
    resp = client.post("/probe/textual", json={
        "manifest": str(synthetic_env.manifest),
        "store": str(synthetic_env.stores["textual"]),
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["report"]["verdict"] == "comprehends"
    assert body["report"]["metadata"]["format_cue"] == "<360panorama>, "
    assert body["csv"].startswith("# columns:")
    assert body["markdown"].startswith("|")


def test_probe_visual_endpoint(client, synthetic_env):
    resp = client.post("/probe/visual", json={
        "manifest": str(synthetic_env.manifest),
        "store": str(synthetic_env.stores["frozen"]),
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["report"]["verdict"] == "does_not_comprehend"
    assert len(body["report"]["per_condition"]) == 7
    assert body["report"]["bound"]["beta"] > 0


def test_probe_visual_alpha_and_bound_override(client, synthetic_env):
    resp = client.post("/probe/visual", json={
        "manifest": str(synthetic_env.manifest),
        "store": str(synthetic_env.stores["frozen"]),
        "alpha": 0.05,
        "bound_override": 1000.0,
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["report"]["metadata"]["alpha"] == 0.05
    assert body["report"]["bound"]["beta"] == 1000.0


def test_probe_missing_store_is_422(client, synthetic_env, tmp_path):
    resp = client.post("/probe/visual", json={
        "manifest": str(synthetic_env.manifest),
        "store": str(tmp_path / "missing_store.jsonl"),
    })
    assert resp.status_code in (404, 422, 500)
    assert "detail" in resp.json()


def test_probe_incomplete_store_is_404(client, synthetic_env, tmp_path):
    from pano_probe.scoring import store_read, store_write

    full = store_read(synthetic_env.stores["tuned"])
    partial = [r for r in full.records() if r.variant != "flip"]
    path = tmp_path / "noflip_store.jsonl"
    store_write(partial, path)
    resp = client.post("/probe/visual", json={
        "manifest": str(synthetic_env.manifest),
        "store": str(path),
    })
    assert resp.status_code == 404
    assert "flip" in resp.json()["detail"]


def test_probe_requires_provider(client, synthetic_env):
    resp = client.post("/probe/visual", json={
        "manifest": str(synthetic_env.manifest),
    })
    assert resp.status_code == 422


def test_lambda_endpoint(client, tmp_path):
    c1, c0 = write_engineered_curves(tmp_path)
    resp = client.post("/lambda", json={
        "curve_lambda1": str(c1),
        "curve_lambda0": str(c0),
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["knee_epoch"] == 3
    assert body["l1_knee"] == 0.0212
    assert body["l0_knee"] == 1.8854
    assert abs(body["lambda"] - 0.9889) < 5e-5


def test_lambda_flat_curve_is_422(client, tmp_path):
    flat = tmp_path / "flat.csv"
    flat.write_text(
        "epoch,loss\n" + "\n".join(f"{e},{20 - e}" for e in range(20)) + "\n"
    )
    resp = client.post("/lambda", json={
        "curve_lambda1": str(flat),
        "curve_lambda0": str(flat),
    })
    assert resp.status_code == 422
    assert "knee" in resp.json()["detail"]


def test_boxplot_endpoint_metrics(client, synthetic_env):
    for metric in ("orig-scores", "flip-diffs", "shift-diffs:512"):
        resp = client.post("/boxplot", json={
            "manifest": str(synthetic_env.manifest),
            "store": str(synthetic_env.stores["frozen"]),
            "metric": metric,
        })
        assert resp.status_code == 200
        summary = resp.json()["summary"]
        assert summary["n"] == len(synthetic_env.dataset)
        assert summary["q1"] <= summary["median"] <= summary["q3"]


def test_boxplot_flip_diffs_match_visual_bound(client, synthetic_env):
    box = client.post("/boxplot", json={
        "manifest": str(synthetic_env.manifest),
        "store": str(synthetic_env.stores["frozen"]),
        "metric": "flip-diffs",
    }).json()["summary"]
    probe = client.post("/probe/visual", json={
        "manifest": str(synthetic_env.manifest),
        "store": str(synthetic_env.stores["frozen"]),
    }).json()["report"]
    assert box["upper_fence"] == probe["bound"]["beta"]


def test_boxplot_unknown_metric(client, synthetic_env):
    resp = client.post("/boxplot", json={
        "manifest": str(synthetic_env.manifest),
        "store": str(synthetic_env.stores["frozen"]),
        "metric": "banana",
    })
    assert resp.status_code == 422


def test_compare_endpoint(client, synthetic_env):
    def probe(store):
        return client.post("/probe/visual", json={
            "manifest": str(synthetic_env.manifest),
            "store": str(synthetic_env.stores[store]),
        }).json()["report"]

    before, after = probe("frozen"), probe("tuned")
    resp = client.post("/compare", json={"before": before, "after": after})
    assert resp.status_code == 200
    delta = resp.json()["delta"]
    assert delta["flipped_count"] == 5


def test_compare_kind_mismatch_is_422(client, synthetic_env):
    visual = client.post("/probe/visual", json={
        "manifest": str(synthetic_env.manifest),
        "store": str(synthetic_env.stores["frozen"]),
    }).json()["report"]
    textual = client.post("/probe/textual", json={
        "manifest": str(synthetic_env.manifest),
        "store": str(synthetic_env.stores["textual"]),
    }).json()["report"]
    resp = client.post("/compare", json={"before": visual, "after": textual})
    assert resp.status_code == 422


# --- end to end against a live /embed service --------------------------------


class _EmbedHandler(BaseHTTPRequestHandler):
    """Deterministic toy encoder: vector seeded by a hash of the payload."""

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        doc = json.loads(self.rfile.read(length))
        seed = abs(hash((doc["kind"], doc["data"]))) % (2**31)
        rng = np.random.RandomState(seed)
        vec = rng.randn(8).tolist()  # intentionally not normalized
        body = json.dumps({"vector": vec}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def embed_server():
    server = HTTPServer(("127.0.0.1", 0), _EmbedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def test_probe_visual_over_embed_service(client, tmp_path, embed_server):
    manifest = write_image_corpus(tmp_path, n_pairs=3)
    out = tmp_path / "variants"
    resp = client.post("/variants", json={
        "manifest": str(manifest),
        "out_dir": str(out),
        "divisions": 8,
    })
    assert resp.status_code == 200
    resp = client.post("/probe/visual", json={
        "manifest": str(manifest),
        "service_url": embed_server,
        "variant_index": str(out / "variant_index.json"),
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["report"]["verdict"] in (
        "comprehends", "does_not_comprehend", "inconclusive",
    )
    assert len(body["report"]["per_condition"]) == 7


def test_probe_textual_over_embed_service(client, tmp_path, embed_server):
    manifest = write_image_corpus(tmp_path, n_pairs=3)
    resp = client.post("/probe/textual", json={
        "manifest": str(manifest),
        "service_url": embed_server,
        "generic_cues": ["", "image, "],
    })
    assert resp.status_code == 200
    assert len(resp.json()["report"]["per_condition"]) == 2
