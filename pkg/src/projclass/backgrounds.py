"""Background providers: procedural value noise or a local image directory."""

from __future__ import annotations

import os

import numpy as np

from .errors import EmptyDirectory, UnreadableImage
from .pgm import read_pnm

NOISE_OCTAVES = 4
NOISE_PERSISTENCE = 0.5

_LUMA = np.array([0.299, 0.587, 0.114])


def _smoothstep(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


def _value_noise_octave(rng: np.random.Generator, size: int, cells: int) -> np.ndarray:
    """Bilinearly interpolated random lattice, values in [0, 1]."""
    lattice = rng.random((cells + 1, cells + 1))
    coords = np.linspace(0.0, cells, size, endpoint=False)
    idx = np.floor(coords).astype(int)
    frac = _smoothstep(coords - idx)
    i = idx[:, None]
    j = idx[None, :]
    fy = frac[:, None]
    fx = frac[None, :]
    v00 = lattice[i, j]
    v01 = lattice[i, j + 1]
    v10 = lattice[i + 1, j]
    v11 = lattice[i + 1, j + 1]
    top = v00 + fx * (v01 - v00)
    bot = v10 + fx * (v11 - v10)
    return top + fy * (bot - top)


def value_noise(seed: int, index: int, size: int = 64,
                octaves: int = NOISE_OCTAVES,
                persistence: float = NOISE_PERSISTENCE) -> np.ndarray:
    """Multi-octave value noise, deterministic in (seed, index)."""
    rng = np.random.default_rng([seed, index, 0xB6])
    out = np.zeros((size, size))
    amplitude = 1.0
    total = 0.0
    cells = 4
    for _ in range(octaves):
        out += amplitude * _value_noise_octave(rng, size, min(cells, size))
        total += amplitude
        amplitude *= persistence
        cells *= 2
    return out / total


class ProceduralBackgrounds:
    """Noise backgrounds keyed by (seed, index)."""

    kind = "procedural-noise"

    def __init__(self, seed: int, size: int = 64):
        self.seed = int(seed)
        self.size = size

    def get(self, index: int) -> np.ndarray:
        return value_noise(self.seed, int(index), self.size)


def _bilinear_resize(img: np.ndarray, size: int) -> np.ndarray:
    h, w = img.shape
    ys = np.linspace(0, h - 1, size)
    xs = np.linspace(0, w - 1, size)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


class DirectoryBackgrounds:
    """Center-cropped, downscaled grayscale images from a directory.

    Accepts 8-bit PGM (P5) and PPM (P6) files; color is converted with
    luminance weights 0.299/0.587/0.114.
    """

    kind = "image-directory"

    def __init__(self, path, size: int = 64):
        self.size = size
        try:
            names = sorted(os.listdir(path))
        except OSError as exc:
            raise EmptyDirectory(f"{path}: {exc}") from exc
        self.files = [os.path.join(path, n) for n in names
                      if n.lower().endswith((".pgm", ".ppm"))]
        if not self.files:
            raise EmptyDirectory(f"{path}: no .pgm/.ppm images")

    def get(self, index: int) -> np.ndarray:
        path = self.files[int(index) % len(self.files)]
        img = read_pnm(path)
        if img.ndim == 3:
            img = img.astype(np.float64) @ _LUMA
        else:
            img = img.astype(np.float64)
        h, w = img.shape
        side = min(h, w)
        if side < 1:
            raise UnreadableImage(f"{path}: empty image")
        top = (h - side) // 2
        left = (w - side) // 2
        img = img[top:top + side, left:left + side]
        return np.clip(_bilinear_resize(img, self.size) / 255.0, 0.0, 1.0)


def make_provider(kind: str, seed: int = 0, path=None, size: int = 64):
    if kind == "procedural-noise":
        return ProceduralBackgrounds(seed, size)
    if kind == "image-directory":
        return DirectoryBackgrounds(path, size)
    raise ValueError(f"unknown background provider {kind!r}")
