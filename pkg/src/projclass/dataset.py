"""Rendered-sample dataset: generation and the AMED binary format.

A file holds the magic "AMED", a u16 version, u32 sample count, u16 width
and height, then per sample the class label (u8, 3 = none), the pose as
three little-endian f32, the query pixels as row-major u8 and the alpha
mask as u8 (0-255 encoding of [0, 1]).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import IoFailure
from .meshes import NONE_CLASS, POSITIVE_CLASSES, MeshModel, builtin_meshes
from .render import PoseParams, alpha_composite, render

MAGIC = b"AMED"
FORMAT_VERSION = 1

MIN_ALPHA_COVERAGE = 0.01


@dataclass
class Dataset:
    """In-memory view of a rendered-sample file."""

    labels: np.ndarray   # (N,) uint8
    poses: np.ndarray    # (N, 3) float32
    queries: np.ndarray  # (N, H, W) uint8
    alphas: np.ndarray   # (N, H, W) uint8

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def image_size(self) -> int:
        return self.queries.shape[1]

    def queries01(self) -> np.ndarray:
        return self.queries.astype(np.float32) / 255.0

    def subset(self, idx) -> "Dataset":
        return Dataset(self.labels[idx], self.poses[idx],
                       self.queries[idx], self.alphas[idx])


def save_dataset(path, ds: Dataset) -> None:
    n, h, w = ds.queries.shape
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<HIHH", FORMAT_VERSION, n, w, h)
    poses = np.ascontiguousarray(ds.poses, dtype="<f4")
    for i in range(n):
        blob += struct.pack("<B", int(ds.labels[i]))
        blob += poses[i].tobytes()
        blob += ds.queries[i].tobytes()
        blob += ds.alphas[i].tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_dataset(path) -> Dataset:
    try:
        blob = open(path, "rb").read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if blob[:4] != MAGIC:
        raise IoFailure(f"{path}: bad magic {blob[:4]!r}")
    version, n, w, h = struct.unpack_from("<HIHH", blob, 4)
    if version != FORMAT_VERSION:
        raise IoFailure(f"{path}: unsupported version {version}")
    labels = np.zeros(n, dtype=np.uint8)
    poses = np.zeros((n, 3), dtype=np.float32)
    queries = np.zeros((n, h, w), dtype=np.uint8)
    alphas = np.zeros((n, h, w), dtype=np.uint8)
    pos = 14
    plane = h * w
    record = 1 + 12 + 2 * plane
    if len(blob) != pos + n * record:
        raise IoFailure(f"{path}: size mismatch")
    for i in range(n):
        labels[i] = blob[pos]
        poses[i] = np.frombuffer(blob, dtype="<f4", count=3, offset=pos + 1)
        queries[i] = np.frombuffer(blob, dtype=np.uint8, count=plane,
                                   offset=pos + 13).reshape(h, w)
        alphas[i] = np.frombuffer(blob, dtype=np.uint8, count=plane,
                                  offset=pos + 13 + plane).reshape(h, w)
        pos += record
    return Dataset(labels, poses, queries, alphas)


def _render_positive(mesh: MeshModel, rng: np.random.Generator, size: int):
    """Draw poses until the coverage floor is met (first draw in practice)."""
    for _ in range(64):
        pose = PoseParams(*rng.uniform(-0.5, 0.5, 3))
        gray, alpha = render(mesh, pose, size)
        if (alpha > 0).mean() >= MIN_ALPHA_COVERAGE:
            return pose, gray, alpha
    raise RuntimeError(f"mesh {mesh.class_id}: cannot reach alpha coverage floor")


def generate_dataset(counts, seed: int, provider, size: int = 64,
                     meshes: list[MeshModel] | None = None,
                     bg_index_base: int = 0) -> Dataset:
    """Render a dataset with `counts[c]` samples for each class 0..3.

    Positive samples get a fresh uniform pose composited over a fresh
    background; none-class samples are background only with zero alpha.
    Deterministic in (seed, counts, provider settings).
    """
    if meshes is None:
        meshes = builtin_meshes()
    counts = list(counts)
    if len(counts) != 4 or any(c < 0 for c in counts):
        raise ValueError("counts must list four nonnegative per-class sizes")

    total = sum(counts)
    labels = np.zeros(total, dtype=np.uint8)
    poses = np.zeros((total, 3), dtype=np.float32)
    queries = np.zeros((total, size, size), dtype=np.uint8)
    alphas = np.zeros((total, size, size), dtype=np.uint8)

    row = 0
    bg_index = bg_index_base
    for label in (*POSITIVE_CLASSES, NONE_CLASS):
        rng = np.random.default_rng([seed, 0xDA, label])
        for _ in range(counts[label]):
            bg = provider.get(bg_index)
            bg_index += 1
            labels[row] = label
            if label == NONE_CLASS:
                queries[row] = np.clip(np.rint(255.0 * bg), 0, 255).astype(np.uint8)
            else:
                pose, gray, alpha = _render_positive(meshes[label], rng, size)
                poses[row] = pose.as_array().astype(np.float32)
                queries[row] = alpha_composite(gray, alpha, bg)
                alphas[row] = np.clip(np.rint(255.0 * alpha), 0, 255).astype(np.uint8)
            row += 1
    return Dataset(labels, poses, queries, alphas)


def render_pose_targets(n_per_class: int, seed: int, size: int = 64,
                        meshes: list[MeshModel] | None = None):
    """(class, pose) -> (gray, alpha) pairs on black, for projector training.

    Returns (class_ids, poses, grays, alphas) with float32 image planes.
    """
    if meshes is None:
        meshes = builtin_meshes()
    n = n_per_class * len(POSITIVE_CLASSES)
    class_ids = np.zeros(n, dtype=np.int64)
    poses = np.zeros((n, 3), dtype=np.float32)
    grays = np.zeros((n, size, size), dtype=np.float32)
    alphas = np.zeros((n, size, size), dtype=np.float32)
    row = 0
    for label in POSITIVE_CLASSES:
        rng = np.random.default_rng([seed, 0x9E, label])
        for _ in range(n_per_class):
            pose = PoseParams(*rng.uniform(-0.5, 0.5, 3))
            gray, alpha = render(meshes[label], pose, size)
            class_ids[row] = label
            poses[row] = pose.as_array().astype(np.float32)
            grays[row] = gray.astype(np.float32)
            alphas[row] = alpha.astype(np.float32)
            row += 1
    return class_ids, poses, grays, alphas
