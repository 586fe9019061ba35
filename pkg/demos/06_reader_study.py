"""Run a blinded reader study end to end against the HTTP service.

Two synthetic readers classify a shuffled mix of real phantoms and
model samples; the service derives per-reader confusion tables in the
true/false positive/negative layout and Cohen's kappa between readers.
"""

import base64
import json
import struct
import tempfile
import threading
import urllib.request

from genforge import build_model, phantom_generate, sample
from genforge.imageset import IMGSET_MAGIC
from genforge.server import make_server


def imgset_blob(image_set):
    n, h, w = image_set.images.shape
    raw = IMGSET_MAGIC + struct.pack("<III", n, h, w) + image_set.images.astype("<f4").tobytes()
    return {"imgset_b64": base64.b64encode(raw).decode()}


def call(url, payload=None):
    data = json.dumps(payload).encode() if payload is not None else None
    req = urllib.request.Request(url, data=data)
    if data is not None:
        req.add_header("Content-Type", "application/json")
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read().decode())


real = phantom_generate(n=15, size=16, seed=1)
fakes = {}
for arch in ("vanilla_vae", "style_gan"):
    model = build_model(arch, image_size=16, seed=0)
    fakes[arch] = sample(model, n=15, seed=2)

with tempfile.TemporaryDirectory() as data_dir:
    server = make_server(data_dir, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"

    created = call(f"{base}/sessions", {
        "real": imgset_blob(real),
        "fakes": {name: imgset_blob(s) for name, s in fakes.items()},
        "n_per_group": 10,
        "seed": 4,
    })
    session = created["session_id"]
    print(f"session {session}: {created['n_items']} blinded items")

    # The untrained models emit obvious blobs, so give the synthetic readers
    # simple heuristics: reader 1 calls bright-and-structured images real,
    # reader 2 guesses mostly real.
    import numpy as np
    rng = np.random.default_rng(0)
    for reader, rule in (
        ("alice", lambda img: "real" if img.std() > 0.25 else "fake"),
        ("bob", lambda img: "real" if rng.random() < 0.7 else "fake"),
    ):
        while True:
            nxt = call(f"{base}/sessions/{session}/next?reader={reader}")
            if nxt["done"]:
                break
            pgm = base64.b64decode(nxt["image_pgm_b64"])
            header_end = pgm.index(b"65535\n") + 6
            pixels = np.frombuffer(pgm[header_end:], dtype=">u2") / 65535.0
            call(f"{base}/sessions/{session}/responses", {
                "reader_id": reader, "item_id": nxt["item_id"],
                "label": rule(pixels.reshape(16, 16)),
            })
        print(f"reader {reader} finished {nxt['total']} items")

    report = call(f"{base}/sessions/{session}/report")
    for reader, table in report["confusion_tables"].items():
        rows = table["outcomes"]
        print(f"\n{reader}:")
        for row in ("true_positives", "false_positives", "true_negatives", "false_negatives"):
            cells = "  ".join(f"{g}={v:5.1f}%" for g, v in rows[row].items())
            print(f"  {row:16s} {cells}")
    print(f"\ninter-reader kappa: "
          f"{ {k: round(v, 3) for k, v in report['kappa'].items()} }")

    server.shutdown()
    server.server_close()
    thread.join(timeout=5)
