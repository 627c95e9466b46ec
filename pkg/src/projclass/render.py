"""Orthographic software rasterizer for the built-in meshes.

The camera looks down -z; a mesh is rotated by extrinsic x-then-y-then-z
Euler angles (R = Rz @ Ry @ Rx), projected orthographically and drawn with
a z-buffer. Shading is flat Lambertian per triangle from one fixed
directional light plus an ambient term; coverage (alpha) is binary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMesh
from .meshes import MeshModel

IMAGE_SIZE = 64
POSE_MIN = -0.5
POSE_MAX = 0.5

# Pixels per model unit; meshes fill the unit box, so the object spans
# roughly two thirds of the 64-pixel frame.
_SCALE_PER_UNIT = 24.0

_LIGHT_DIR = np.array([0.4, 0.4, -0.82])
_AMBIENT = 0.25


@dataclass(frozen=True)
class PoseParams:
    """Euler rotation in radians, each component in [-0.5, 0.5]."""

    rx: float
    ry: float
    rz: float

    def __post_init__(self):
        for name, val in (("rx", self.rx), ("ry", self.ry), ("rz", self.rz)):
            if not (POSE_MIN <= val <= POSE_MAX):
                raise ValueError(f"{name}={val} outside [{POSE_MIN}, {POSE_MAX}]")

    def as_array(self) -> np.ndarray:
        return np.array([self.rx, self.ry, self.rz], dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "PoseParams":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))


def random_pose(rng: np.random.Generator) -> PoseParams:
    return PoseParams(*rng.uniform(POSE_MIN, POSE_MAX, size=3))


def euler_rotation(pose: PoseParams) -> np.ndarray:
    """Rotation matrix R = Rz(rz) @ Ry(ry) @ Rx(rx)."""
    cx, sx = np.cos(pose.rx), np.sin(pose.rx)
    cy, sy = np.cos(pose.ry), np.sin(pose.ry)
    cz, sz = np.cos(pose.rz), np.sin(pose.rz)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


def render(mesh: MeshModel, pose: PoseParams, size: int = IMAGE_SIZE):
    """Rasterize one mesh at one pose.

    Returns (gray, alpha), both (size, size) float64 in [0, 1]. Pixels
    outside the coverage mask are exactly 0 in the gray plane.
    """
    rot = euler_rotation(pose)
    verts = mesh.vertices @ rot.T

    scale = _SCALE_PER_UNIT * (size / IMAGE_SIZE)
    half = (size - 1) / 2.0
    px = half + scale * verts[:, 0]
    py = half - scale * verts[:, 1]
    pz = verts[:, 2]

    light = -_LIGHT_DIR / np.linalg.norm(_LIGHT_DIR)

    gray = np.zeros((size, size), dtype=np.float64)
    alpha = np.zeros((size, size), dtype=np.float64)
    zbuf = np.full((size, size), -np.inf)

    drawn = 0
    for t_idx, (i0, i1, i2) in enumerate(mesh.triangles):
        x0, x1, x2 = px[i0], px[i1], px[i2]
        y0, y1, y2 = py[i0], py[i1], py[i2]
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if abs(area) < 1e-12:
            continue

        lo_x = max(int(np.floor(min(x0, x1, x2))), 0)
        hi_x = min(int(np.ceil(max(x0, x1, x2))), size - 1)
        lo_y = max(int(np.floor(min(y0, y1, y2))), 0)
        hi_y = min(int(np.ceil(max(y0, y1, y2))), size - 1)
        if lo_x > hi_x or lo_y > hi_y:
            continue

        gx, gy = np.meshgrid(np.arange(lo_x, hi_x + 1), np.arange(lo_y, hi_y + 1))
        w0 = ((x1 - x0) * (gy - y0) - (gx - x0) * (y1 - y0)) / area
        w1 = ((x2 - x1) * (gy - y1) - (gx - x1) * (y2 - y1)) / area
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            continue

        z = w1 * pz[i0] + w2 * pz[i1] + w0 * pz[i2]
        sub = zbuf[lo_y:hi_y + 1, lo_x:hi_x + 1]
        visible = inside & (z > sub)
        if not visible.any():
            continue

        v0 = verts[i1] - verts[i0]
        v1 = verts[i2] - verts[i0]
        normal = np.cross(v0, v1)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal /= norm
        if normal[2] < 0:
            normal = -normal  # shade the side facing the camera
        intensity = _AMBIENT + (1.0 - _AMBIENT) * max(0.0, float(normal @ light))
        shade = min(1.0, mesh.base_shade[t_idx] * intensity)

        sub[visible] = z[visible]
        gray[lo_y:hi_y + 1, lo_x:hi_x + 1][visible] = shade
        alpha[lo_y:hi_y + 1, lo_x:hi_x + 1][visible] = 1.0
        drawn += 1

    if drawn == 0:
        raise DegenerateMesh(f"no triangle of class {mesh.class_id} survives projection")
    return gray, alpha


def alpha_composite(fg_gray: np.ndarray, alpha: np.ndarray,
                    bg_gray: np.ndarray) -> np.ndarray:
    """Blend foreground over background; all planes on [0,1] scale.

    Returns integer pixels in [0, 255] as uint8.
    """
    out = 255.0 * (alpha * fg_gray + (1.0 - alpha) * bg_gray)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
