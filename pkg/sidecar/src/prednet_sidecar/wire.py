"""Stdio wire protocol (EIGP), implemented independently of the engine
package so the two sides cross-check each other.

Framing (little-endian):
    magic       4 bytes  b"EIGP"
    version     u8       1
    msg_type    u8       1 = request, 2 = response, 3 = error
    width       u16
    height      u16
    channels    u8
    frame_count u16
    extension   u16
Request/response payload: frame_count frames of height*width*channels u8
intensities, row-major, channel-minor. Error payload: u16 byte length
followed by UTF-8 text.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"EIGP"
VERSION = 1
MSG_REQUEST = 1
MSG_RESPONSE = 2
MSG_ERROR = 3

HEADER = struct.Struct("<4sBBHHBHH")


class WireError(Exception):
    """Malformed or truncated traffic on the wire."""


@dataclass(frozen=True)
class Request:
    """One decoded type-1 message: frames as (n, height, width, channels) u8."""

    frames: np.ndarray
    extension: int

    @property
    def channels(self) -> int:
        return int(self.frames.shape[3])


def _read_exact(stream, n: int, context: str) -> bytes | None:
    """Read exactly n bytes; None on clean EOF at a message boundary."""
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            if not buf and context == "header":
                return None
            raise WireError(f"stream truncated while reading {context}")
        buf += chunk
    return buf


def read_request(stream) -> Request | None:
    """Read one type-1 message. Returns None on end-of-input.

    Raises WireError on bad framing or on a non-request message type;
    in the latter case the message's payload is consumed first so the
    caller can keep serving.
    """
    raw = _read_exact(stream, HEADER.size, "header")
    if raw is None:
        return None
    magic, version, msg_type, width, height, channels, frame_count, ext = \
        HEADER.unpack(raw)
    if magic != MAGIC:
        raise WireError(f"bad magic {magic!r}")
    if version != VERSION:
        raise WireError(f"unsupported protocol version {version}")
    if msg_type != MSG_REQUEST:
        # consume the payload so the stream stays framed
        if msg_type == MSG_ERROR:
            (length,) = struct.unpack(
                "<H", _read_exact(stream, 2, "error length"))
            _read_exact(stream, length, "error text")
        elif msg_type == MSG_RESPONSE:
            _read_exact(stream, frame_count * height * width * channels,
                        "response payload")
        else:
            raise WireError(f"unknown message type {msg_type}")
        raise WireError(f"expected a request (type 1), got type {msg_type}")
    if channels not in (1, 3):
        raise WireError(f"unsupported channel count {channels}")
    if width == 0 or height == 0 or frame_count == 0:
        raise WireError("request with zero-sized dimensions")
    payload = _read_exact(stream, frame_count * height * width * channels,
                          "request payload")
    frames = np.frombuffer(payload, dtype=np.uint8).reshape(
        frame_count, height, width, channels)
    return Request(frames=frames, extension=ext)


def write_response(stream, frames: np.ndarray) -> None:
    """Emit a type-2 message from (n, height, width, channels) u8 frames."""
    n, height, width, channels = frames.shape
    stream.write(HEADER.pack(MAGIC, VERSION, MSG_RESPONSE,
                             width, height, channels, n, 0))
    stream.write(np.ascontiguousarray(frames, dtype=np.uint8).tobytes())
    stream.flush()


def write_error(stream, text: str) -> None:
    """Emit a type-3 message carrying `text`."""
    data = text.encode("utf-8")[:65535]
    stream.write(HEADER.pack(MAGIC, VERSION, MSG_ERROR, 0, 0, 1, 0, 0))
    stream.write(struct.pack("<H", len(data)) + data)
    stream.flush()
