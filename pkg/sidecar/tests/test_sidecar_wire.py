import io
import struct

import numpy as np
import pytest

from prednet_sidecar import wire

H = struct.Struct("<4sBBHHBHH")  # independent of the module under test


def request_bytes(frames, extension=2):
    n, h, w, c = frames.shape
    return H.pack(b"EIGP", 1, 1, w, h, c, n, extension) + frames.tobytes()


class TestReadRequest:
    def test_golden_request(self):
        frames = np.array([[[[0], [255]], [[128], [64]]]], dtype=np.uint8)
        req = wire.read_request(io.BytesIO(request_bytes(frames, 2)))
        assert req.extension == 2
        assert req.channels == 1
        assert np.array_equal(req.frames, frames)

    def test_eof_returns_none(self):
        assert wire.read_request(io.BytesIO(b"")) is None

    def test_bad_magic(self):
        with pytest.raises(wire.WireError, match="magic"):
            wire.read_request(io.BytesIO(b"NOPE" + b"\x00" * 11))

    def test_bad_version(self):
        data = H.pack(b"EIGP", 9, 1, 1, 1, 1, 1, 0) + b"\x00"
        with pytest.raises(wire.WireError, match="version"):
            wire.read_request(io.BytesIO(data))

    def test_truncated_header(self):
        with pytest.raises(wire.WireError, match="truncated"):
            wire.read_request(io.BytesIO(b"EIGP\x01"))

    def test_truncated_payload(self):
        frames = np.zeros((2, 4, 4, 1), dtype=np.uint8)
        data = request_bytes(frames)[:-3]
        with pytest.raises(wire.WireError, match="truncated"):
            wire.read_request(io.BytesIO(data))

    def test_non_request_type_consumed_and_rejected(self):
        # a stray response followed by a valid request: the reader skips
        # the former's payload so a retry stays framed
        frames = np.full((1, 2, 2, 1), 7, dtype=np.uint8)
        stray = H.pack(b"EIGP", 1, 2, 2, 2, 1, 1, 0) + b"\x00" * 4
        stream = io.BytesIO(stray + request_bytes(frames, 1))
        with pytest.raises(wire.WireError, match="type 2"):
            wire.read_request(stream)
        req = wire.read_request(stream)
        assert np.array_equal(req.frames, frames)

    def test_stray_error_message_consumed(self):
        stray = (H.pack(b"EIGP", 1, 3, 0, 0, 1, 0, 0)
                 + struct.pack("<H", 4) + b"boom")
        stream = io.BytesIO(stray)
        with pytest.raises(wire.WireError, match="type 3"):
            wire.read_request(stream)
        assert wire.read_request(stream) is None

    def test_zero_frames_rejected(self):
        data = H.pack(b"EIGP", 1, 1, 2, 2, 1, 0, 0)
        with pytest.raises(wire.WireError, match="zero"):
            wire.read_request(io.BytesIO(data))


class TestWrite:
    def test_golden_response(self):
        frames = np.array([[[[0], [255]], [[128], [64]]]], dtype=np.uint8)
        out = io.BytesIO()
        wire.write_response(out, frames)
        golden = (b"EIGP" + bytes([1, 2]) + struct.pack("<HH", 2, 2)
                  + bytes([1]) + struct.pack("<HH", 1, 0)
                  + bytes([0, 255, 128, 64]))
        assert out.getvalue() == golden

    def test_golden_error(self):
        out = io.BytesIO()
        wire.write_error(out, "boom")
        golden = (b"EIGP" + bytes([1, 3]) + struct.pack("<HH", 0, 0)
                  + bytes([1]) + struct.pack("<HH", 0, 0)
                  + struct.pack("<H", 4) + b"boom")
        assert out.getvalue() == golden

    def test_error_text_capped_at_u16(self):
        out = io.BytesIO()
        wire.write_error(out, "x" * 100000)
        (length,) = struct.unpack("<H", out.getvalue()[15:17])
        assert length == 65535
