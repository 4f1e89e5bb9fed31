"""Wire protocol for external frame predictors.

Framing (all multi-byte integers little-endian):
  magic 'EIGP' | version u8=1 | msg_type u8 | width u16 | height u16 |
  channels u8 | frame_count u16 | extension u16 (0 outside requests)
followed by the payload: frame_count * height * width * channels bytes of u8
intensities for types 1 (request) and 2 (response), or u16 length + UTF-8
text for type 3 (error).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ProtocolError
from .imaging import Raster

MAGIC = b"EIGP"
VERSION = 1
MSG_REQUEST = 1
MSG_RESPONSE = 2
MSG_ERROR = 3

_HEADER = struct.Struct("<4sBBHHBHH")
HEADER_SIZE = _HEADER.size  # 15


@dataclass(frozen=True)
class Message:
    msg_type: int
    width: int
    height: int
    channels: int
    extension: int
    frames: tuple[Raster, ...] = ()
    error_text: str = ""


def frames_to_bytes(frames) -> bytes:
    return b"".join(
        np.round(f.pixels * 255.0).astype(np.uint8).tobytes() for f in frames)


def _bytes_to_frames(payload: bytes, count: int, width: int, height: int,
                     channels: int) -> tuple[Raster, ...]:
    frame_size = width * height * channels
    frames = []
    for k in range(count):
        chunk = payload[k * frame_size:(k + 1) * frame_size]
        arr = np.frombuffer(chunk, dtype=np.uint8).reshape(height, width, channels)
        frames.append(Raster(arr.astype(np.float64) / 255.0))
    return tuple(frames)


def encode(msg_type: int, frames=(), extension: int = 0, error_text: str = "",
           width: int = 0, height: int = 0, channels: int = 1) -> bytes:
    """Serialize one message. Geometry is taken from the frames when present."""
    if frames:
        width, height, channels = frames[0].width, frames[0].height, frames[0].channels
    header = _HEADER.pack(MAGIC, VERSION, msg_type, width, height, channels,
                          len(frames), extension if msg_type == MSG_REQUEST else 0)
    if msg_type == MSG_ERROR:
        text = error_text.encode("utf-8")
        return header + struct.pack("<H", len(text)) + text
    return header + frames_to_bytes(frames)


def _read_exact(stream, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            raise ProtocolError(f"stream truncated: wanted {n} bytes, got {len(buf)}")
        buf += chunk
    return buf


def read_message(stream) -> Message:
    """Read and validate one framed message from a binary stream."""
    header = _read_exact(stream, HEADER_SIZE)
    magic, version, msg_type, width, height, channels, frame_count, extension = \
        _HEADER.unpack(header)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported version {version}")
    if msg_type not in (MSG_REQUEST, MSG_RESPONSE, MSG_ERROR):
        raise ProtocolError(f"unknown message type {msg_type}")
    if msg_type == MSG_ERROR:
        (length,) = struct.unpack("<H", _read_exact(stream, 2))
        text = _read_exact(stream, length).decode("utf-8")
        return Message(msg_type, width, height, channels, extension, (), text)
    if channels not in (1, 3):
        raise ProtocolError(f"invalid channel count {channels}")
    payload = _read_exact(stream, frame_count * height * width * channels)
    frames = _bytes_to_frames(payload, frame_count, width, height, channels)
    return Message(msg_type, width, height, channels, extension, frames)
