"""Renderer, meshes, backgrounds and compositing tests."""

import numpy as np
import pytest

from projclass.backgrounds import (DirectoryBackgrounds, ProceduralBackgrounds,
                                   value_noise)
from projclass.errors import EmptyDirectory, UnreadableImage
from projclass.meshes import builtin_meshes
from projclass.pgm import read_pnm, write_pgm
from projclass.render import PoseParams, alpha_composite, euler_rotation, render


class TestEulerRotation:
    def test_zero_pose_identity(self):
        assert np.allclose(euler_rotation(PoseParams(0, 0, 0)), np.eye(3), atol=1e-15)

    def test_pure_z_rotation_column(self):
        r = euler_rotation(PoseParams(0, 0, 0.5))
        assert np.allclose(r[:, 0], [np.cos(0.5), np.sin(0.5), 0.0], atol=1e-12)

    def test_orthonormal_unit_determinant(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            r = euler_rotation(PoseParams(*rng.uniform(-0.5, 0.5, 3)))
            assert np.abs(r.T @ r - np.eye(3)).max() < 1e-12
            assert abs(np.linalg.det(r) - 1.0) < 1e-12

    def test_composition_order_z_y_x(self):
        pose = PoseParams(0.3, -0.2, 0.4)
        rx = euler_rotation(PoseParams(0.3, 0, 0))
        ry = euler_rotation(PoseParams(0, -0.2, 0))
        rz = euler_rotation(PoseParams(0, 0, 0.4))
        assert np.allclose(euler_rotation(pose), rz @ ry @ rx, atol=1e-14)

    def test_pose_range_enforced(self):
        with pytest.raises(ValueError):
            PoseParams(0.6, 0, 0)


class TestRender:
    def test_gray_zero_outside_alpha(self):
        for mesh in builtin_meshes():
            gray, alpha = render(mesh, PoseParams(0.1, -0.3, 0.2))
            assert np.all(gray[alpha == 0] == 0.0)
            assert gray.min() >= 0.0 and gray.max() <= 1.0

    def test_machine_scale_pose_change_identical(self):
        mesh = builtin_meshes()[0]
        g0, a0 = render(mesh, PoseParams(0, 0, 0))
        g1, a1 = render(mesh, PoseParams(0, 0, 1e-9))
        assert np.array_equal(g0, g1)
        assert np.array_equal(a0, a1)

    def test_zero_pose_coverage_fraction(self):
        for mesh in builtin_meshes():
            _, alpha = render(mesh, PoseParams(0, 0, 0))
            cov = (alpha > 0).mean()
            assert 0.10 <= cov <= 0.60, f"class {mesh.class_id}: coverage {cov}"

    def test_repeat_renders_bit_identical(self):
        mesh = builtin_meshes()[1]
        pose = PoseParams(-0.4, 0.25, 0.1)
        g0, a0 = render(mesh, pose)
        g1, a1 = render(mesh, pose)
        assert g0.tobytes() == g1.tobytes()
        assert a0.tobytes() == a1.tobytes()

    def test_meshes_pairwise_distinguishable(self):
        renders = [render(m, PoseParams(0, 0, 0))[0] for m in builtin_meshes()]
        for i in range(3):
            for j in range(i + 1, 3):
                assert np.abs(renders[i] - renders[j]).mean() >= 0.05

    def test_vertices_inside_unit_box(self):
        for mesh in builtin_meshes():
            assert np.abs(mesh.vertices).max() <= 1.0


class TestAlphaComposite:
    def test_alpha_zero_returns_background(self):
        rng = np.random.default_rng(1)
        bg = rng.random((64, 64))
        out = alpha_composite(np.zeros((64, 64)), np.zeros((64, 64)), bg)
        assert np.array_equal(out, np.clip(np.rint(bg * 255), 0, 255).astype(np.uint8))

    def test_alpha_one_returns_foreground(self):
        rng = np.random.default_rng(2)
        fg = rng.random((64, 64))
        out = alpha_composite(fg, np.ones((64, 64)), np.zeros((64, 64)))
        assert np.array_equal(out, np.clip(np.rint(fg * 255), 0, 255).astype(np.uint8))

    def test_midpoint_blend_value(self):
        fg = np.full((64, 64), 200 / 255.0)
        bg = np.full((64, 64), 100 / 255.0)
        out = alpha_composite(fg, np.full((64, 64), 0.5), bg)
        assert np.all(out == 150)

    def test_monotone_in_alpha_when_fg_brighter(self):
        rng = np.random.default_rng(3)
        fg = np.full((64, 64), 0.9)
        bg = np.full((64, 64), 0.2)
        a1 = rng.random((64, 64)) * 0.5
        a2 = a1 + rng.random((64, 64)) * 0.5
        assert np.all(alpha_composite(fg, a2, bg) >= alpha_composite(fg, a1, bg))


class TestBackgrounds:
    def test_procedural_deterministic(self):
        p = ProceduralBackgrounds(seed=123)
        assert p.get(7).tobytes() == p.get(7).tobytes()

    def test_procedural_distinct_indices(self):
        p = ProceduralBackgrounds(seed=123)
        assert not np.array_equal(p.get(0), p.get(1))

    def test_procedural_range(self):
        for idx in range(20):
            img = value_noise(5, idx)
            assert img.min() >= 0.0 and img.max() <= 1.0

    def test_directory_uniform_midgray(self, tmp_path):
        write_pgm(tmp_path / "flat.pgm", np.full((90, 120), 128, dtype=np.uint8))
        d = DirectoryBackgrounds(tmp_path)
        img = d.get(0)
        assert img.shape == (64, 64)
        assert np.allclose(img, 128 / 255.0, atol=1e-12)

    def test_directory_ppm_luminance(self, tmp_path):
        rgb = np.zeros((64, 64, 3), dtype=np.uint8)
        rgb[..., 1] = 200  # green only
        with open(tmp_path / "green.ppm", "wb") as fh:
            fh.write(b"P6\n64 64\n255\n" + rgb.tobytes())
        img = DirectoryBackgrounds(tmp_path).get(0)
        assert np.allclose(img, 0.587 * 200 / 255.0, atol=1e-9)

    def test_empty_directory_raises(self, tmp_path):
        with pytest.raises(EmptyDirectory):
            DirectoryBackgrounds(tmp_path)

    def test_unreadable_image_raises(self, tmp_path):
        (tmp_path / "bad.pgm").write_bytes(b"P5\n10 10\n255\n123")
        with pytest.raises(UnreadableImage):
            DirectoryBackgrounds(tmp_path).get(0)


class TestPgmIo:
    def test_pgm_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        img = rng.integers(0, 256, (48, 64), dtype=np.uint8)
        write_pgm(tmp_path / "x.pgm", img)
        assert np.array_equal(read_pnm(tmp_path / "x.pgm"), img)

    def test_comment_in_header(self, tmp_path):
        img = np.arange(12, dtype=np.uint8).reshape(3, 4)
        (tmp_path / "c.pgm").write_bytes(b"P5\n# a comment\n4 3\n255\n" + img.tobytes())
        assert np.array_equal(read_pnm(tmp_path / "c.pgm"), img)

    def test_sixteen_bit_rejected(self, tmp_path):
        (tmp_path / "deep.pgm").write_bytes(b"P5\n2 2\n65535\n" + b"\0" * 8)
        with pytest.raises(UnreadableImage):
            read_pnm(tmp_path / "deep.pgm")
