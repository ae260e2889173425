import base64
import io
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from PIL import Image as PILImage

from segqa.backend import (
    BackendConfig,
    EchoBackend,
    EmptyBackend,
    FileBackend,
    PromptBackend,
    ReferenceBackend,
    RemoteBackend,
    build_backend,
    replace_prediction,
)
from segqa.errors import (
    BackendUnavailableError,
    ContractViolation,
    MissingFixtureError,
    ProtocolError,
)
from segqa.objects import BoxPrompt, PointPrompt, extract_objects
from segqa.raster import Image, SegmentationMap, save_mask

from oracles import flood_region


def square_image(size=20, lo=0, hi=255, at=(5, 5), side=10):
    px = np.full((size, size), lo, np.uint8)
    y, x = at
    px[y : y + side, x : x + side] = hi
    return Image(px), (slice(y, y + side), slice(x, x + side))


def test_uniform_image_point_gives_full_mask():
    img = Image(np.full((7, 9), 123, np.uint8))
    res = ReferenceBackend(tolerance=12).segment_point(img, PointPrompt(4, 3))
    assert res.mask.all()
    assert res.source == "reference"


def test_point_on_square_returns_exactly_the_square():
    img, sq = square_image()
    res = ReferenceBackend(tolerance=12).segment_point(img, PointPrompt(9, 9))
    expect = np.zeros_like(res.mask)
    expect[sq] = True
    assert np.array_equal(res.mask, expect)
    # agree with the independent flood-fill oracle
    oracle = flood_region(img.luma(), (9, 9), 12)
    ys, xs = np.nonzero(res.mask)
    assert set(zip(ys.tolist(), xs.tolist())) == oracle


def test_point_on_background_returns_background():
    img, sq = square_image()
    res = ReferenceBackend(tolerance=12).segment_point(img, PointPrompt(0, 0))
    expect = np.ones_like(res.mask)
    expect[sq] = False
    assert np.array_equal(res.mask, expect)


def test_box_around_square_returns_square():
    img, sq = square_image()
    backend = ReferenceBackend()
    expect = np.zeros((20, 20), bool)
    expect[sq] = True
    # tight box (single-tone inside: degenerate histogram -> whole box)
    res = backend.segment_box(img, BoxPrompt(5, 5, 14, 14))
    assert np.array_equal(res.mask, expect)
    # looser two-tone box: Otsu separates, center pixel picks the bright class
    res = backend.segment_box(img, BoxPrompt(2, 2, 17, 17))
    assert np.array_equal(res.mask, expect)


def test_box_over_uniform_region_returns_whole_box():
    img = Image(np.full((10, 10), 77, np.uint8))
    res = ReferenceBackend().segment_box(img, BoxPrompt(2, 3, 6, 8))
    expect = np.zeros((10, 10), bool)
    expect[3:9, 2:7] = True
    assert np.array_equal(res.mask, expect)


def test_1x1_box_returns_that_pixel():
    img, _ = square_image()
    res = ReferenceBackend().segment_box(img, BoxPrompt(4, 7, 4, 7))
    assert res.mask.sum() == 1 and res.mask[7, 4]


def test_box_mask_stays_inside_box():
    rng = np.random.default_rng(8)
    backend = ReferenceBackend()
    for _ in range(20):
        img = Image(rng.integers(0, 256, (16, 16)).astype(np.uint8))
        x0, y0 = rng.integers(0, 8, 2)
        x1 = int(rng.integers(x0, 16))
        y1 = int(rng.integers(y0, 16))
        box = BoxPrompt(int(x0), int(y0), x1, y1)
        res = backend.segment_box(img, box)
        outside = np.ones((16, 16), bool)
        outside[y0 : y1 + 1, x0 : x1 + 1] = False
        assert not (res.mask & outside).any()
        assert res.mask.any()  # largest component of a nonempty class


def test_point_mask_contains_seed_and_is_connected():
    rng = np.random.default_rng(12)
    backend = ReferenceBackend()
    for _ in range(20):
        img = Image(rng.integers(0, 256, (14, 14)).astype(np.uint8))
        y, x = rng.integers(0, 14, 2)
        res = backend.segment_point(img, PointPrompt(int(x), int(y)))
        assert res.mask[y, x]
        oracle = flood_region(img.luma(), (int(y), int(x)), 12)
        ys, xs = np.nonzero(res.mask)
        assert set(zip(ys.tolist(), xs.tolist())) == oracle


def test_reference_backend_is_deterministic():
    rng = np.random.default_rng(77)
    img = Image(rng.integers(0, 256, (24, 24)).astype(np.uint8))
    backend = ReferenceBackend(tolerance=20)
    a = backend.segment_point(img, PointPrompt(3, 4)).mask
    b = backend.segment_point(img, PointPrompt(3, 4)).mask
    assert np.array_equal(a, b)


def test_prompt_bounds_checked():
    img = Image(np.zeros((5, 5), np.uint8))
    backend = ReferenceBackend()
    with pytest.raises(ContractViolation):
        backend.segment_point(img, PointPrompt(5, 0))
    with pytest.raises(ContractViolation):
        backend.segment_box(img, BoxPrompt(0, 0, 5, 2))


def test_dimension_law_enforced():
    class Broken(PromptBackend):
        name = "broken"

        def _point_mask(self, image, prompt, ctx):
            return np.zeros((image.height + 1, image.width), bool)

    img = Image(np.zeros((4, 4), np.uint8))
    with pytest.raises(ProtocolError, match="dimensions"):
        Broken().segment_point(img, PointPrompt(0, 0))


def test_file_backend_replays_fixtures(tmp_path):
    from segqa.backend import QueryContext

    mask = np.zeros((6, 6), bool)
    mask[2:4, 2:4] = True
    d = tmp_path / "s1"
    d.mkdir()
    save_mask(mask, d / "1_1_point.png")
    backend = FileBackend(tmp_path)
    img = Image(np.zeros((6, 6), np.uint8))
    ctx = QueryContext(sample_id="s1", class_index=1, object_index=1)
    res = backend.segment_point(img, PointPrompt(2, 2), ctx)
    assert np.array_equal(res.mask, mask)
    with pytest.raises(MissingFixtureError, match="1_1_box.png"):
        backend.segment_box(img, BoxPrompt(2, 2, 3, 3), ctx)
    with pytest.raises(ContractViolation):
        backend.segment_point(img, PointPrompt(2, 2))


# ---------------------------------------------------------------------------
# remote backend against a local protocol stub
# ---------------------------------------------------------------------------


class StubHandler(BaseHTTPRequestHandler):
    behavior = "ok"
    calls = 0

    def log_message(self, *args):
        pass

    def do_POST(self):
        cls = type(self)
        cls.calls += 1
        if self.path != "/v1/segment":
            self.send_error(404)
            return
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        img = PILImage.open(io.BytesIO(base64.b64decode(body["image_png_base64"])))
        w, h = img.size
        if cls.behavior == "error500":
            self.send_error(500)
            return
        if cls.behavior == "malformed":
            payload = b"{\"nope\": 1}"
        else:
            if cls.behavior == "wrong_size":
                arr = np.zeros((h + 2, w), np.uint8)
            else:
                prompt = body["prompt"]
                arr = np.zeros((h, w), np.uint8)
                if prompt["type"] == "point":
                    arr[prompt["y"], prompt["x"]] = 255
                else:
                    arr[prompt["y_min"] : prompt["y_max"] + 1, prompt["x_min"] : prompt["x_max"] + 1] = 255
            buf = io.BytesIO()
            PILImage.fromarray(arr).save(buf, format="PNG")
            payload = json.dumps({"mask_png_base64": base64.b64encode(buf.getvalue()).decode()}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)


@pytest.fixture()
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    StubHandler.behavior = "ok"
    StubHandler.calls = 0
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()


def test_remote_round_trip(stub_server):
    backend = RemoteBackend(stub_server, timeout=5, retries=0)
    img = Image(np.zeros((8, 6), np.uint8))
    res = backend.segment_point(img, PointPrompt(2, 3))
    assert res.mask.shape == (8, 6)
    assert res.mask.sum() == 1 and res.mask[3, 2]
    res = backend.segment_box(img, BoxPrompt(1, 1, 4, 2))
    assert res.mask.sum() == 4 * 2
    assert res.source == "remote"


def test_remote_wrong_size_mask_is_protocol_error(stub_server):
    StubHandler.behavior = "wrong_size"
    backend = RemoteBackend(stub_server, timeout=5, retries=0)
    img = Image(np.zeros((8, 6), np.uint8))
    with pytest.raises(ProtocolError, match="dimensions"):
        backend.segment_point(img, PointPrompt(0, 0))


def test_remote_malformed_body_is_protocol_error(stub_server):
    StubHandler.behavior = "malformed"
    backend = RemoteBackend(stub_server, timeout=5, retries=0)
    img = Image(np.zeros((4, 4), np.uint8))
    with pytest.raises(ProtocolError, match="mask_png_base64"):
        backend.segment_point(img, PointPrompt(0, 0))


def test_remote_500_retries_then_unavailable(stub_server):
    StubHandler.behavior = "error500"
    backend = RemoteBackend(stub_server, timeout=5, retries=2)
    img = Image(np.zeros((4, 4), np.uint8))
    with pytest.raises(BackendUnavailableError, match="3 attempts"):
        backend.segment_point(img, PointPrompt(0, 0))
    assert StubHandler.calls == 3


def test_remote_failure_does_not_corrupt_next_call(stub_server):
    backend = RemoteBackend(stub_server, timeout=5, retries=0)
    img = Image(np.zeros((4, 4), np.uint8))
    StubHandler.behavior = "error500"
    with pytest.raises(BackendUnavailableError):
        backend.segment_point(img, PointPrompt(0, 0))
    StubHandler.behavior = "ok"
    res = backend.segment_point(img, PointPrompt(1, 1))
    assert res.mask[1, 1]


def test_remote_connection_refused():
    backend = RemoteBackend("http://127.0.0.1:9", timeout=0.2, retries=1)
    img = Image(np.zeros((4, 4), np.uint8))
    with pytest.raises(BackendUnavailableError):
        backend.segment_point(img, PointPrompt(0, 0))


# ---------------------------------------------------------------------------
# replace_prediction
# ---------------------------------------------------------------------------


def test_replace_prediction_empty_objects():
    img = Image(np.zeros((5, 5), np.uint8))
    out = replace_prediction(img, [], 2, ReferenceBackend())
    assert out.num_classes == 2 and not out.data.any()


def test_replace_prediction_echo_is_fixed_point():
    rng = np.random.default_rng(6)
    data = rng.random((2, 16, 16)) < 0.3
    pred = SegmentationMap(data)
    img = Image(np.zeros((16, 16), np.uint8))
    objs = extract_objects(pred)
    out = replace_prediction(img, objs, 2, EchoBackend(objs))
    assert np.array_equal(out.data, pred.data)


def test_replace_prediction_unions_overlapping_masks():
    class FixedBoxBackend(PromptBackend):
        name = "fixed"

        def __init__(self, answers):
            self.answers = list(answers)

        def _box_mask(self, image, prompt, ctx):
            return self.answers.pop(0)

        def _point_mask(self, image, prompt, ctx):
            raise AssertionError("not used")

    h = w = 10
    a = np.zeros((h, w), bool)
    a[0:4, 0:4] = True
    b = np.zeros((h, w), bool)
    b[2:6, 2:6] = True
    data = np.zeros((1, h, w), bool)
    data[0, 0:2, 0:2] = True
    data[0, 7:9, 7:9] = True
    objs = extract_objects(SegmentationMap(data))
    assert len(objs) == 2
    img = Image(np.zeros((h, w), np.uint8))
    out = replace_prediction(img, objs, 1, FixedBoxBackend([a, b]))
    assert np.array_equal(out.channel(0), a | b)


def test_empty_backend_and_config():
    img = Image(np.full((4, 4), 9, np.uint8))
    res = EmptyBackend().segment_point(img, PointPrompt(1, 1))
    assert not res.mask.any()
    assert isinstance(build_backend(BackendConfig(kind="reference")), ReferenceBackend)
    with pytest.raises(ContractViolation):
        BackendConfig(kind="nope")
    with pytest.raises(ContractViolation):
        BackendConfig(kind="remote", retries=-1)
    with pytest.raises(ContractViolation):
        build_backend(BackendConfig(kind="file"))
