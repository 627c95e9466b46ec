"""Three built-in low-poly meshes with distinct silhouettes.

Class 0 is a round head with two ear cones and a snout, class 1 a tall
ellipsoid body with a side beak and a belly panel, class 2 a flat cross of
elongated boxes with a tail fin. Per-triangle reflectance is painted
asymmetrically (for example the two ears differ in shade) so that small
rotations always change the rendered image in a recoverable way.

All vertex coordinates stay within [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MONKEY = 0
PENGUIN = 1
AEROPLANE = 2
NONE_CLASS = 3
POSITIVE_CLASSES = (MONKEY, PENGUIN, AEROPLANE)

CLASS_NAMES = {MONKEY: "head", PENGUIN: "tower", AEROPLANE: "cross", NONE_CLASS: "none"}


@dataclass
class MeshModel:
    """Triangle mesh in the unit box with per-triangle reflectance."""

    class_id: int
    vertices: np.ndarray   # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int32
    base_shade: np.ndarray  # (T,) float64 in [0, 1]

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.triangles = np.asarray(self.triangles, dtype=np.int32)
        self.base_shade = np.asarray(self.base_shade, dtype=np.float64)
        if np.abs(self.vertices).max() > 1.0 + 1e-12:
            raise ValueError("mesh vertices must lie in [-1, 1]")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise ValueError("triangle index out of range")
        if len(self.base_shade) != len(self.triangles):
            raise ValueError("one shade per triangle required")


class _Builder:
    def __init__(self):
        self.verts: list = []
        self.tris: list = []
        self.shades: list = []

    def add(self, verts, tris, shade):
        base = len(self.verts)
        self.verts.extend(verts)
        for t in tris:
            self.tris.append([base + t[0], base + t[1], base + t[2]])
        if np.isscalar(shade):
            self.shades.extend([shade] * len(tris))
        else:
            self.shades.extend(shade)

    def build(self, class_id) -> MeshModel:
        return MeshModel(class_id, np.array(self.verts), np.array(self.tris),
                         np.array(self.shades))


def _ellipsoid(center, radii, rings=9, segs=14):
    cx, cy, cz = center
    rx, ry, rz = radii
    verts = [(cx, cy + ry, cz), (cx, cy - ry, cz)]  # poles
    for i in range(1, rings):
        phi = np.pi * i / rings
        for j in range(segs):
            theta = 2 * np.pi * j / segs
            verts.append((cx + rx * np.sin(phi) * np.cos(theta),
                          cy + ry * np.cos(phi),
                          cz + rz * np.sin(phi) * np.sin(theta)))
    tris = []
    def ring(i, j):
        return 2 + (i - 1) * segs + (j % segs)
    for j in range(segs):
        tris.append((0, ring(1, j), ring(1, j + 1)))
        tris.append((1, ring(rings - 1, j + 1), ring(rings - 1, j)))
    for i in range(1, rings - 1):
        for j in range(segs):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            tris.append((a, c, b))
            tris.append((b, c, d))
    return verts, tris


def _cone(base_center, axis, base_radius, length, segs=8):
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    ref = np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(axis, ref)
    u /= np.linalg.norm(u)
    v = np.cross(axis, u)
    base = np.asarray(base_center, dtype=np.float64)
    tip = base + axis * length
    verts = [tuple(tip), tuple(base)]
    for j in range(segs):
        t = 2 * np.pi * j / segs
        verts.append(tuple(base + base_radius * (np.cos(t) * u + np.sin(t) * v)))
    tris = []
    for j in range(segs):
        a, b = 2 + j, 2 + (j + 1) % segs
        tris.append((0, a, b))
        tris.append((1, b, a))
    return verts, tris


def _box(center, half):
    cx, cy, cz = center
    hx, hy, hz = half
    v = [(cx + sx * hx, cy + sy * hy, cz + sz * hz)
         for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
    # index bits: x=4, y=2, z=1
    faces = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # -x, +x
        (0, 4, 5, 1), (2, 3, 7, 6),  # -y, +y
        (0, 2, 6, 4), (1, 5, 7, 3),  # -z, +z
    ]
    tris = []
    for a, b, c, d in faces:
        tris.append((a, b, c))
        tris.append((a, c, d))
    return v, tris


def monkey_mesh() -> MeshModel:
    """Round head, two differently shaded ear cones, dark snout."""
    b = _Builder()
    hv, ht = _ellipsoid((0.0, -0.05, 0.0), (0.62, 0.58, 0.62))
    b.add(hv, ht, 0.75)
    lv, lt = _cone((-0.42, 0.40, 0.0), (-0.55, 0.8, 0.0), 0.17, 0.42)
    b.add(lv, lt, 0.50)
    rv, rt = _cone((0.42, 0.40, 0.0), (0.55, 0.8, 0.0), 0.17, 0.42)
    b.add(rv, rt, 0.95)
    nv, nt = _cone((0.0, -0.18, 0.50), (0.15, -0.25, 0.95), 0.16, 0.32, segs=6)
    b.add(nv, nt, 0.35)
    return b.build(MONKEY)


def penguin_mesh() -> MeshModel:
    """Tall ellipsoid with a side beak, bright belly panel and one wing stub."""
    b = _Builder()
    bv, bt = _ellipsoid((0.0, 0.0, 0.0), (0.34, 0.93, 0.34), rings=10, segs=12)
    b.add(bv, bt, 0.55)
    kv, kt = _cone((0.24, 0.52, 0.05), (0.95, 0.18, 0.1), 0.11, 0.52, segs=6)
    b.add(kv, kt, 0.30)
    pv, pt = _box((0.0, -0.22, 0.30), (0.17, 0.42, 0.07))
    b.add(pv, pt, 0.95)
    wv, wt = _box((-0.40, 0.05, 0.0), (0.09, 0.36, 0.15))
    b.add(wv, wt, 0.40)
    return b.build(PENGUIN)


def aeroplane_mesh() -> MeshModel:
    """Flat cross: fuselage, forward wings, small tailplane and a tail fin."""
    b = _Builder()
    fv, ft = _box((0.0, 0.0, 0.0), (0.13, 0.85, 0.09))
    b.add(fv, ft, 0.70)
    wv, wt = _box((0.0, 0.28, 0.0), (0.92, 0.19, 0.05))
    b.add(wv, wt, [0.45] * 6 + [0.45] * 2 + [0.88, 0.88, 0.45, 0.45])
    tv, tt = _box((0.0, -0.74, 0.0), (0.40, 0.10, 0.04))
    b.add(tv, tt, 0.60)
    nv, nt = _box((0.0, -0.80, 0.17), (0.05, 0.14, 0.16))
    b.add(nv, nt, 0.30)
    return b.build(AEROPLANE)


def builtin_meshes() -> list[MeshModel]:
    """The three positive-class meshes, indexed by class id."""
    return [monkey_mesh(), penguin_mesh(), aeroplane_mesh()]
