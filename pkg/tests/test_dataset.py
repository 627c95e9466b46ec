"""Dataset generation and AMED file format tests."""

import struct

import numpy as np
import pytest

from projclass.backgrounds import ProceduralBackgrounds
from projclass.dataset import (MAGIC, Dataset, generate_dataset, load_dataset,
                               render_pose_targets, save_dataset)
from projclass.errors import IoFailure


def small_dataset(seed=5, counts=(6, 6, 6, 6)):
    return generate_dataset(counts, seed=seed, provider=ProceduralBackgrounds(seed))


def test_counts_and_labels():
    ds = small_dataset()
    assert len(ds) == 24
    for label in range(4):
        assert (ds.labels == label).sum() == 6


def test_none_class_alpha_all_zero():
    ds = small_dataset()
    assert np.all(ds.alphas[ds.labels == 3] == 0)


def test_positive_alpha_coverage_at_least_one_percent():
    ds = generate_dataset((40, 40, 40, 10), seed=9,
                          provider=ProceduralBackgrounds(9))
    positives = ds.labels < 3
    frac = (ds.alphas[positives] > 0).mean(axis=(1, 2))
    assert frac.min() >= 0.01


def test_positive_poses_inside_box():
    ds = small_dataset()
    pos = ds.poses[ds.labels < 3]
    assert np.all(pos >= -0.5) and np.all(pos <= 0.5)


def test_generation_deterministic_bit_identical(tmp_path):
    a = small_dataset(seed=42)
    b = small_dataset(seed=42)
    pa, pb = tmp_path / "a.amed", tmp_path / "b.amed"
    save_dataset(pa, a)
    save_dataset(pb, b)
    assert pa.read_bytes() == pb.read_bytes()


def test_different_seed_differs():
    a = small_dataset(seed=1)
    b = small_dataset(seed=2)
    assert not np.array_equal(a.queries, b.queries)


def test_file_round_trip(tmp_path):
    ds = small_dataset()
    path = tmp_path / "ds.amed"
    save_dataset(path, ds)
    back = load_dataset(path)
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.poses, ds.poses)
    assert np.array_equal(back.queries, ds.queries)
    assert np.array_equal(back.alphas, ds.alphas)


def test_file_header_layout(tmp_path):
    ds = small_dataset()
    path = tmp_path / "ds.amed"
    save_dataset(path, ds)
    blob = path.read_bytes()
    assert blob[:4] == MAGIC
    version, n, w, h = struct.unpack_from("<HIHH", blob, 4)
    assert (version, n, w, h) == (1, 24, 64, 64)
    # first sample record: label u8 + pose 3*f32 + query + alpha
    assert blob[14] == ds.labels[0]
    pose = np.frombuffer(blob, dtype="<f4", count=3, offset=15)
    assert np.array_equal(pose, ds.poses[0])


def test_bad_magic_raises(tmp_path):
    path = tmp_path / "bad.amed"
    path.write_bytes(b"XXXX" + b"\0" * 20)
    with pytest.raises(IoFailure):
        load_dataset(path)


def test_subset_view():
    ds = small_dataset()
    sub = ds.subset(ds.labels == 2)
    assert len(sub) == 6
    assert np.all(sub.labels == 2)


def test_render_pose_targets_on_black():
    cids, poses, grays, alphas = render_pose_targets(4, seed=3)
    assert len(cids) == 12
    assert grays.shape == (12, 64, 64)
    # black outside coverage, binary alpha
    assert np.all(grays[alphas == 0] == 0)
    assert set(np.unique(alphas)) <= {0.0, 1.0}
    assert np.all((poses >= -0.5) & (poses <= 0.5))
