"""The recommendation engine's own HTTP clients against a live stub sidecar."""

import socket
import threading
import time

import numpy as np
import pytest
import uvicorn

from seqrec_sidecar.service import Settings, create_app

seqrec_dense = pytest.importorskip(
    "seqrec.dense", reason="engine package not installed; client round-trip skipped"
)
from seqrec.corpus import Catalog, Item, SplitExample  # noqa: E402
from seqrec.generate import ExternalGenerator  # noqa: E402
from seqrec.textify import build_test_prompt  # noqa: E402


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def live_sidecar():
    port = free_port()
    app = create_app(Settings(mode="stub"))
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("sidecar did not start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_engine_embedding_provider_round_trip(live_sidecar):
    provider = seqrec_dense.HttpEmbeddingProvider(
        live_sidecar, name="stub-embedder-384", dim=384
    )
    vectors = provider.embed(["Title: quartz lip balm vanilla", "Title: cedar shampoo"], "passage")
    assert vectors.shape == (2, 384)
    assert np.linalg.norm(vectors[0]) == pytest.approx(1.0, abs=1e-4)
    again = provider.embed(["Title: quartz lip balm vanilla"], "passage")
    assert np.array_equal(vectors[0], again[0])


def test_engine_external_generator_round_trip(live_sidecar):
    catalog = Catalog([
        Item("A1", "cedar shampoo bar lavender"),
        Item("A2", "quartz lip balm vanilla"),
    ])
    example = SplitExample("u1", ("A1", "A2"), "A1", "test")
    prompt = build_test_prompt([catalog["A1"], catalog["A2"]])
    generator = ExternalGenerator(url=live_sidecar, beams=2, retries=2, backoff=0.05)
    candidates = generator.generate(example, catalog, prompt)
    assert candidates.queries == [
        "Title: quartz lip balm vanilla",
        "Title: cedar shampoo bar lavender",
    ]
    repeat = generator.generate(example, catalog, prompt)
    assert repeat.candidates == candidates.candidates
