"""Minimal PGM (P5) / PPM (P6) reading and PGM writing, 8-bit only."""

from __future__ import annotations

import numpy as np

from .errors import UnreadableImage


def _read_header_tokens(blob: bytes, count: int):
    """Read `count` whitespace-separated tokens, honoring '#' comments."""
    tokens = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(blob):
            raise UnreadableImage("truncated header")
        ch = blob[pos:pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            nl = blob.find(b"\n", pos)
            pos = len(blob) if nl < 0 else nl + 1
        else:
            end = pos
            while end < len(blob) and not blob[end:end + 1].isspace():
                end += 1
            tokens.append(blob[pos:end])
            pos = end
    return tokens, pos + 1  # single whitespace after maxval


def read_pnm(path) -> np.ndarray:
    """Read a P5 or P6 file; returns (H, W) or (H, W, 3) uint8."""
    try:
        blob = open(path, "rb").read()
    except OSError as exc:
        raise UnreadableImage(f"{path}: {exc}") from exc
    if blob[:2] not in (b"P5", b"P6"):
        raise UnreadableImage(f"{path}: not a P5/P6 file")
    channels = 1 if blob[:2] == b"P5" else 3
    try:
        tokens, offset = _read_header_tokens(blob[2:], 3)
        width, height, maxval = (int(t) for t in tokens)
    except (ValueError, UnreadableImage) as exc:
        raise UnreadableImage(f"{path}: bad header ({exc})") from exc
    if maxval != 255:
        raise UnreadableImage(f"{path}: only 8-bit images supported (maxval {maxval})")
    n = width * height * channels
    data = np.frombuffer(blob, dtype=np.uint8, count=n, offset=2 + offset)
    if data.size != n:
        raise UnreadableImage(f"{path}: truncated pixel data")
    img = data.reshape(height, width, channels)
    return img[:, :, 0] if channels == 1 else img


def write_pgm(path, image: np.ndarray) -> None:
    """Write uint8 grayscale as binary PGM."""
    img = np.ascontiguousarray(image, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
