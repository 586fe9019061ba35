"""HTTP API tests against a live threaded server instance."""

import base64
import json
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest

from genforge.phantom import phantom_generate
from genforge.server import make_server
from genforge.study import SOURCE_GROUPS

GEN_GROUPS = [g for g in SOURCE_GROUPS if g != "original"]


@pytest.fixture()
def live_server(tmp_path):
    server = make_server(tmp_path, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, tmp_path
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


def request_json(url, payload=None, method=None):
    data = json.dumps(payload).encode() if payload is not None else None
    req = urllib.request.Request(url, data=data, method=method)
    if data is not None:
        req.add_header("Content-Type", "application/json")
    with urllib.request.urlopen(req) as resp:
        return resp.status, json.loads(resp.read().decode())


def imgset_b64(image_set):
    import struct

    from genforge.imageset import IMGSET_MAGIC

    n, h, w = image_set.images.shape
    raw = IMGSET_MAGIC + struct.pack("<III", n, h, w) + image_set.images.astype("<f4").tobytes()
    return base64.b64encode(raw).decode()


def create_session_via_api(base, n_per_group=4, seed=3):
    body = {
        "real": {"imgset_b64": imgset_b64(phantom_generate(n_per_group + 2, 8, seed=0))},
        "fakes": {
            g: {"imgset_b64": imgset_b64(phantom_generate(n_per_group + 2, 8, seed=i + 1))}
            for i, g in enumerate(GEN_GROUPS)
        },
        "n_per_group": n_per_group,
        "seed": seed,
    }
    status, payload = request_json(f"{base}/sessions", body)
    assert status == 201
    return payload["session_id"], payload["n_items"]


class TestSessionLifecycle:
    def test_create_and_count(self, live_server):
        base, _ = live_server
        session_id, n_items = create_session_via_api(base, n_per_group=4)
        assert n_items == 20

    def test_create_from_paths(self, live_server):
        base, data_dir = live_server
        from genforge.imageset import save_set

        save_set(phantom_generate(6, 8, seed=0), data_dir / "real.imgset")
        save_set(phantom_generate(6, 8, seed=1), data_dir / "fake.imgset")
        body = {
            "real": {"path": "real.imgset"},
            "fakes": {"vanilla_vae": {"path": "fake.imgset"}},
            "n_per_group": 3,
            "seed": 1,
        }
        status, payload = request_json(f"{base}/sessions", body)
        assert status == 201 and payload["n_items"] == 6

    def test_next_and_submit_flow(self, live_server):
        base, _ = live_server
        session_id, n_items = create_session_via_api(base)
        answered = 0
        while True:
            status, nxt = request_json(f"{base}/sessions/{session_id}/next?reader=r1")
            assert status == 200
            if nxt["done"]:
                break
            assert nxt["answered"] == answered
            assert nxt["total"] == n_items
            # payload must decode as a binary PGM
            pgm = base64.b64decode(nxt["image_pgm_b64"])
            assert pgm.startswith(b"P5\n8 8\n65535\n")
            status, ack = request_json(
                f"{base}/sessions/{session_id}/responses",
                {"reader_id": "r1", "item_id": nxt["item_id"], "label": "real"},
            )
            assert status == 201 and ack["ok"]
            answered += 1
        assert answered == n_items

    def test_blinding_of_reader_payloads(self, live_server):
        base, _ = live_server
        session_id, _ = create_session_via_api(base)
        status, nxt = request_json(f"{base}/sessions/{session_id}/next?reader=r1")
        raw = json.dumps(nxt)
        for group in SOURCE_GROUPS:
            assert group not in raw
        assert "vae" not in raw and "gan" not in raw

    def test_report_and_kappa(self, live_server):
        base, _ = live_server
        session_id, n_items = create_session_via_api(base)
        rng = np.random.default_rng(0)
        for reader in ("r1", "r2"):
            while True:
                _, nxt = request_json(f"{base}/sessions/{session_id}/next?reader={reader}")
                if nxt["done"]:
                    break
                label = "real" if rng.random() < 0.5 else "fake"
                request_json(
                    f"{base}/sessions/{session_id}/responses",
                    {"reader_id": reader, "item_id": nxt["item_id"], "label": label},
                )
        status, report = request_json(f"{base}/sessions/{session_id}/report")
        assert status == 200
        assert report["complete"] == {"r1": True, "r2": True}
        assert list(report["kappa"]) == ["r1|r2"]
        for entry in report["items"]:
            assert "source_group" not in entry
        status, unblinded = request_json(f"{base}/sessions/{session_id}/report?unblind=true")
        assert {e["source_group"] for e in unblinded["items"]} == set(SOURCE_GROUPS)


class TestErrorPaths:
    def test_unknown_session_404(self, live_server):
        base, _ = live_server
        with pytest.raises(urllib.error.HTTPError) as err:
            request_json(f"{base}/sessions/study-none/next?reader=r1")
        assert err.value.code == 404
        assert "error" in json.loads(err.value.read().decode())

    def test_duplicate_response_409(self, live_server):
        base, _ = live_server
        session_id, _ = create_session_via_api(base)
        _, nxt = request_json(f"{base}/sessions/{session_id}/next?reader=r1")
        body = {"reader_id": "r1", "item_id": nxt["item_id"], "label": "real"}
        request_json(f"{base}/sessions/{session_id}/responses", body)
        with pytest.raises(urllib.error.HTTPError) as err:
            request_json(f"{base}/sessions/{session_id}/responses", body)
        assert err.value.code == 409

    def test_bad_body_400(self, live_server):
        base, _ = live_server
        session_id, _ = create_session_via_api(base)
        with pytest.raises(urllib.error.HTTPError) as err:
            request_json(f"{base}/sessions/{session_id}/responses", {"reader_id": "r1"})
        assert err.value.code == 400

    def test_missing_reader_param(self, live_server):
        base, _ = live_server
        session_id, _ = create_session_via_api(base)
        with pytest.raises(urllib.error.HTTPError) as err:
            request_json(f"{base}/sessions/{session_id}/next")
        assert err.value.code == 400

    def test_unknown_item_404(self, live_server):
        base, _ = live_server
        session_id, _ = create_session_via_api(base)
        with pytest.raises(urllib.error.HTTPError) as err:
            request_json(
                f"{base}/sessions/{session_id}/responses",
                {"reader_id": "r1", "item_id": "item-9999", "label": "real"},
            )
        assert err.value.code == 404


class TestConcurrentReaders:
    def test_two_readers_interleaved(self, live_server):
        from concurrent.futures import ThreadPoolExecutor

        base, _ = live_server
        session_id, n_items = create_session_via_api(base, n_per_group=4)

        def classify(reader):
            count = 0
            while True:
                _, nxt = request_json(f"{base}/sessions/{session_id}/next?reader={reader}")
                if nxt["done"]:
                    return count
                request_json(
                    f"{base}/sessions/{session_id}/responses",
                    {"reader_id": reader, "item_id": nxt["item_id"], "label": "fake"},
                )
                count += 1

        with ThreadPoolExecutor(max_workers=2) as pool:
            counts = list(pool.map(classify, ["r1", "r2"]))
        assert counts == [n_items, n_items]
        _, report = request_json(f"{base}/sessions/{session_id}/report")
        assert report["progress"] == {"r1": n_items, "r2": n_items}


class TestStaticServing:
    def test_serves_ui_files(self, tmp_path):
        static = tmp_path / "ui"
        static.mkdir()
        (static / "index.html").write_text("<html><body>study</body></html>")
        server = make_server(tmp_path / "data", port=0, static_dir=static)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{server.server_address[1]}"
        try:
            with urllib.request.urlopen(f"{base}/") as resp:
                assert resp.status == 200
                assert b"study" in resp.read()
            with pytest.raises(urllib.error.HTTPError) as err:
                urllib.request.urlopen(f"{base}/../secret")
            assert err.value.code == 404
        finally:
            server.shutdown()
            server.server_close()
            thread.join(timeout=5)

    def test_no_static_dir_404(self, live_server):
        base, _ = live_server
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(f"{base}/index.html")
        assert err.value.code == 404
