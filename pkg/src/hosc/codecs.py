"""Binary PGM/PPM (P5/P6, 8-bit) and 16-bit PCM WAV readers and writers."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .signals import ImageBuffer, WaveBuffer


class ParseError(ValueError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} (at byte {offset})")
        self.offset = offset


class UnsupportedDepth(ValueError):
    pass


class UnsupportedEncoding(ValueError):
    pass


# -- PNM -------------------------------------------------------------------

_WS = b" \t\r\n\v\f"


def _pnm_token(buf: bytes, pos: int) -> tuple[bytes, int, int]:
    """Next header token after whitespace and comments: (token, start, end)."""
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c in _WS:
            pos += 1
        elif c == b"#":
            while pos < n and buf[pos : pos + 1] not in b"\r\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos : pos + 1] not in _WS and buf[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ParseError("unexpected end of header", pos)
    return buf[start:pos], start, pos


def decode_pnm(buf: bytes) -> ImageBuffer:
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"bad magic {magic!r}, expected P5 or P6", 0)
    channels = 1 if magic == b"P5" else 3
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        tok, start, pos = _pnm_token(buf, pos)
        if not tok.isdigit():
            raise ParseError(f"{name} is not a decimal integer: {tok!r}", start)
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval < 1 or maxval > 65535:
        raise ParseError(f"maxval {maxval} out of range", pos)
    if maxval > 255:
        raise UnsupportedDepth(f"maxval {maxval}: only 8-bit images are supported")
    if width < 1 or height < 1:
        raise ParseError(f"empty image {width}x{height}", pos)
    if pos >= len(buf) or buf[pos : pos + 1] not in _WS:
        raise ParseError("missing whitespace after maxval", pos)
    pos += 1
    need = width * height * channels
    data = buf[pos : pos + need]
    if len(data) < need:
        raise ParseError(f"truncated pixel data: need {need} bytes, have {len(data)}", pos + len(data))
    pixels = np.frombuffer(data, dtype=np.uint8).reshape(height, width, channels).copy()
    return ImageBuffer(pixels, maxval)


def encode_pnm(img: ImageBuffer) -> bytes:
    magic = b"P5" if img.channels == 1 else b"P6"
    header = b"%s\n%d %d\n%d\n" % (magic, img.width, img.height, img.maxval)
    return header + np.ascontiguousarray(img.pixels, dtype=np.uint8).tobytes()


def read_image(path) -> ImageBuffer:
    return decode_pnm(Path(path).read_bytes())


def write_image(path, img: ImageBuffer) -> None:
    Path(path).write_bytes(encode_pnm(img))


# -- WAV -------------------------------------------------------------------

_PCM = 1
_EXTENSIBLE = 0xFFFE


def decode_wav(buf: bytes) -> WaveBuffer:
    if len(buf) < 12 or buf[:4] != b"RIFF" or buf[8:12] != b"WAVE":
        raise ParseError("not a RIFF/WAVE file", 0)
    pos = 12
    fmt = None
    data = None
    while pos + 8 <= len(buf):
        cid = buf[pos : pos + 4]
        (size,) = struct.unpack_from("<I", buf, pos + 4)
        body = buf[pos + 8 : pos + 8 + size]
        if len(body) < size and cid != b"data":
            raise ParseError(f"truncated {cid!r} chunk", pos)
        if cid == b"fmt ":
            if size < 16:
                raise ParseError("fmt chunk too short", pos)
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == _EXTENSIBLE:
                if size < 40:
                    raise ParseError("extensible fmt chunk too short", pos)
                (sub,) = struct.unpack_from("<H", body, 24)
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            data = body
            break
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise ParseError("missing fmt chunk", pos)
    if data is None:
        raise ParseError("missing data chunk", pos)
    tag, channels, rate, _, block_align, bits = fmt
    if tag != _PCM:
        raise UnsupportedEncoding(f"format tag {tag:#x}: only integer PCM is supported")
    if bits != 16:
        raise UnsupportedEncoding(f"{bits}-bit samples: only 16-bit PCM is supported")
    if channels < 1 or block_align != 2 * channels:
        raise ParseError(f"inconsistent fmt: {channels} channels, block_align {block_align}", 12)
    frames = len(data) // block_align
    if frames == 0:
        raise ValueError("empty data chunk")
    pcm = np.frombuffer(data[: frames * block_align], dtype="<i2").reshape(frames, channels)
    if channels == 1:
        mono = pcm[:, 0].astype(np.int16)
    else:
        mono = np.rint(pcm.astype(np.float64).mean(axis=1)).astype(np.int16)
    return WaveBuffer(mono, int(rate))


def encode_wav(wave: WaveBuffer) -> bytes:
    pcm = np.asarray(wave.samples, dtype="<i2").tobytes()
    rate = int(wave.sample_rate)
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(pcm), b"WAVE",
        b"fmt ", 16, _PCM, 1, rate, rate * 2, 2, 16,
        b"data", len(pcm),
    )
    return header + pcm


def read_wav(path) -> WaveBuffer:
    return decode_wav(Path(path).read_bytes())


def write_wav(path, wave: WaveBuffer) -> None:
    Path(path).write_bytes(encode_wav(wave))
