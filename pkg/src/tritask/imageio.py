"""Binary PPM (P6) and PGM (P5) reading and writing, maxval 255 only."""

from __future__ import annotations

import numpy as np


class ImageFormatError(ValueError):
    """Raised for malformed or unsupported image files."""


def _read_header_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comment lines between header fields
    n = len(buf)
    while pos < n:
        ch = buf[pos:pos + 1]
        if ch in b" \t\r\n":
            pos += 1
        elif ch == b"#":
            while pos < n and buf[pos:pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos:pos + 1] not in b" \t\r\n":
        pos += 1
    if start == pos:
        raise ImageFormatError("truncated header")
    return buf[start:pos], pos


def load_image(path) -> np.ndarray:
    """Read a P5/P6 file into a channel-major float array scaled to [0,1].

    Returns shape (1, H, W) for PGM and (3, H, W) for PPM.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    magic, pos = _read_header_token(buf, 0)
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"{path}: unsupported magic {magic!r} (want P5 or P6)")
    fields = []
    for _ in range(3):
        tok, pos = _read_header_token(buf, pos)
        if not tok.isdigit():
            raise ImageFormatError(f"{path}: malformed header field {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise ImageFormatError(f"{path}: unsupported maxval {maxval} (want 255)")
    if width < 1 or height < 1:
        raise ImageFormatError(f"{path}: bad dimensions {width}x{height}")
    pos += 1  # exactly one whitespace byte after maxval
    channels = 3 if magic == b"P6" else 1
    need = width * height * channels
    payload = buf[pos:pos + need]
    if len(payload) != need:
        raise ImageFormatError(f"{path}: truncated payload ({len(payload)} of {need} bytes)")
    arr = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    arr = arr.reshape(height, width, channels)
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def save_image(img: np.ndarray, path) -> None:
    """Write a (1|3, H, W) array in [0,1] as P5/P6; values clamp then round."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise ValueError(f"save_image: expected (1|3, H, W) array, got {img.shape}")
    channels, height, width = img.shape
    bytes_ = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    magic = b"P6" if channels == 3 else b"P5"
    header = magic + b"\n%d %d\n255\n" % (width, height)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(bytes_.transpose(1, 2, 0).tobytes())
