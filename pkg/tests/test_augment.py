import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jointseg.augment import (
    IntensityAugParams,
    IntensityRanges,
    SpatialAugConfig,
    apply_field,
    apply_intensity,
    rotation_matrix,
    sample_intensity,
    sample_spatial,
    upsample_control_grid,
)
from jointseg.errors import ConfigError, InvalidModeError, ShapeError
from jointseg.interp import Interp
from jointseg.preprocess import Modality
from jointseg.volume_io import LabelMap, Volume3
from oracles import trilinear_point

ZERO = SpatialAugConfig(0.0, 0.0, (1.0, 1.0), 8, 0.0)


def test_zero_ranges_zero_field(rng):
    disp = sample_spatial(ZERO, (5, 6, 7), rng)
    assert disp.shape == (3, 5, 6, 7)
    assert np.all(disp == 0)


def test_translation_only_constant_field():
    cfg = SpatialAugConfig(3.0, 0.0, (1.0, 1.0), 8, 0.0)
    disp = sample_spatial(cfg, (4, 5, 6), np.random.default_rng(3))
    t = np.random.default_rng(3).uniform(-3.0, 3.0, size=3)
    for a in range(3):
        np.testing.assert_allclose(disp[a], t[a], atol=1e-12)


def _rot_axis(axis, angle):
    c, s = math.cos(angle), math.sin(angle)
    m = [[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]]
    i, j = [k for k in range(3) if k != axis]
    if axis == 1:  # right-handed rotation about y maps z -> x
        i, j = j, i
    m[i][i], m[i][j], m[j][i], m[j][j] = c, -s, s, c
    return m


def test_rotation_only_matches_closed_form():
    cfg = SpatialAugConfig(0.0, 0.35, (1.0, 1.0), 8, 0.0)
    dims = (5, 4, 6)
    disp = sample_spatial(cfg, dims, np.random.default_rng(11))
    replay = np.random.default_rng(11)
    replay.uniform(-0.0, 0.0, size=3)
    angles = replay.uniform(-0.35, 0.35, size=3)
    mats = [_rot_axis(a, ang) for a, ang in enumerate(angles)]
    centre = [(n - 1) / 2 for n in dims]
    for v in itertools.product(*(range(n) for n in dims)):
        rel = [v[a] - centre[a] for a in range(3)]
        for m in reversed(mats):  # Rx @ Ry @ Rz applied to rel: Rz first
            rel = [sum(m[i][k] * rel[k] for k in range(3)) for i in range(3)]
        for a in range(3):
            assert disp[(a,) + v] == pytest.approx(rel[a] + centre[a] - v[a], abs=1e-10)


def test_rotation_matrix_orthonormal(rng):
    r = rotation_matrix(rng.uniform(-1, 1, 3))
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(r) == pytest.approx(1.0)


def test_control_grid_corners_hit_corner_voxels(rng):
    nodes = rng.standard_normal((3, 4, 4, 4))
    up = upsample_control_grid(nodes, (7, 10, 13))
    for corner in itertools.product((0, -1), repeat=3):
        np.testing.assert_allclose(up[(slice(None),) + corner], nodes[(slice(None),) + corner])


def test_elastic_bounded():
    cfg = SpatialAugConfig(0.0, 0.0, (1.0, 1.0), 8, 2.0)
    disp = sample_spatial(cfg, (9, 9, 9), np.random.default_rng(0))
    assert np.abs(disp).max() <= 2.0 + 1e-12
    assert np.abs(disp).max() > 0


def test_spatial_reproducible():
    cfg = SpatialAugConfig()
    a = sample_spatial(cfg, (6, 6, 6), np.random.default_rng(5))
    b = sample_spatial(cfg, (6, 6, 6), np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_config_validation():
    with pytest.raises(ConfigError):
        SpatialAugConfig(scale_range=(1.2, 0.8))
    with pytest.raises(ConfigError):
        SpatialAugConfig(max_translation=-1)
    with pytest.raises(ConfigError):
        IntensityRanges(ct_scale=(0.0, 1.0))


def test_zero_field_identity(rng):
    vol = Volume3(rng.standard_normal((4, 5, 6)))
    lab = LabelMap(rng.integers(0, 8, (4, 5, 6)))
    zero = np.zeros((3, 4, 5, 6))
    assert np.array_equal(apply_field(vol, zero, Interp.TRILINEAR).data, vol.data)
    assert np.array_equal(apply_field(vol, zero, Interp.NEAREST).data, vol.data)
    assert np.array_equal(apply_field(lab, zero, Interp.NEAREST).data, lab.data)


def test_integer_shift_nearest(rng):
    lab = LabelMap(rng.integers(1, 8, (5, 5, 5)))
    disp = np.zeros((3, 5, 5, 5))
    disp[0] = 2.0
    out = apply_field(lab, disp, Interp.NEAREST, fill=0).data
    assert np.array_equal(out[:3], lab.data[2:])
    assert np.all(out[3:] == 0)


def test_smooth_field_matches_oracle(rng):
    x = np.arange(8.0)
    data = (x[:, None, None] + 2 * x[None, :, None] - x[None, None, :]).astype(np.float32)
    vol = Volume3(data)
    disp = upsample_control_grid(rng.uniform(-1.5, 1.5, (3, 3, 3, 3)), (8, 8, 8))
    out = apply_field(vol, disp, Interp.TRILINEAR, fill=-99.0).data
    for v in itertools.product(range(8), repeat=3):
        p = [v[a] + disp[(a,) + v] for a in range(3)]
        if all(0 <= c <= 7 for c in p):
            ref = trilinear_point(data, *p)
        else:
            ref = -99.0
        assert out[v] == pytest.approx(ref, abs=1e-4)


def test_apply_field_errors():
    with pytest.raises(ShapeError):
        apply_field(Volume3(np.zeros((3, 3, 3))), np.zeros((3, 2, 3, 3)))
    with pytest.raises(InvalidModeError):
        apply_field(LabelMap(np.zeros((2, 2, 2))), np.zeros((3, 2, 2, 2)), Interp.TRILINEAR)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_nearest_warp_never_invents_labels(seed):
    r = np.random.default_rng(seed)
    lab = LabelMap(r.choice([0, 2, 5], size=(6, 6, 6)))
    disp = sample_spatial(SpatialAugConfig(2.0, 0.35, (0.8, 1.2), 4, 2.0), lab.dims, r)
    out = apply_field(lab, disp, Interp.NEAREST, fill=0)
    assert set(np.unique(out.data)) <= {0, 2, 5}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-10, 10))
def test_constant_volume_stays_constant(seed, value):
    r = np.random.default_rng(seed)
    vol = Volume3(np.full((6, 6, 6), value))
    disp = sample_spatial(SpatialAugConfig(3.0, 0.35, (0.8, 1.2), 4, 2.0), vol.dims, r)
    out = apply_field(vol, disp, Interp.TRILINEAR, fill=np.nan).data
    inside = ~np.isnan(out)
    np.testing.assert_allclose(out[inside], np.float32(value), rtol=1e-6, atol=1e-6)


def test_intensity_ranges_ct():
    p = sample_intensity(Modality.CT, range(8), np.random.default_rng(0))
    assert -0.2 <= p.global_shift <= 0.2 and 0.8 <= p.global_scale <= 1.2
    assert sorted(p.per_label) == list(range(1, 8))
    for t, s in p.per_label.values():
        assert -0.1 <= t <= 0.1 and 0.9 <= s <= 1.1
    assert sample_intensity(Modality.MR, [], np.random.default_rng(0)).per_label == {}


@pytest.mark.parametrize("modality,lo,hi", [(Modality.CT, 0.8, 1.2), (Modality.MR, 0.6, 1.4)])
def test_intensity_monte_carlo(modality, lo, hi):
    rng = np.random.default_rng(42)
    draws = [sample_intensity(modality, [0, 3], rng) for _ in range(10_000)]
    shifts = np.array([d.global_shift for d in draws])
    scales = np.array([d.global_scale for d in draws])
    lshift = np.array([d.per_label[3][0] for d in draws])
    lscale = np.array([d.per_label[3][1] for d in draws])
    for arr, a, b in ((shifts, -0.2, 0.2), (scales, lo, hi), (lshift, -0.1, 0.1), (lscale, 0.9, 1.1)):
        assert arr.min() >= a and arr.max() <= b
        span = b - a
        assert arr.min() < a + 0.01 * span and arr.max() > b - 0.01 * span


def test_apply_intensity_examples(rng):
    vol = Volume3(rng.standard_normal((4, 4, 4)))
    lab = LabelMap(rng.integers(0, 3, (4, 4, 4)))
    assert np.array_equal(apply_intensity(vol, lab, IntensityAugParams()).data, vol.data)
    out = apply_intensity(vol, lab, IntensityAugParams(0.2, 1.0))
    np.testing.assert_allclose(out.data, vol.data + 0.2, atol=1e-6)

    p = IntensityAugParams(0.1, 1.3, {1: (0.05, 0.9), 2: (-0.07, 1.08)})
    out = apply_intensity(vol, lab, p).data
    for v in itertools.product(range(4), repeat=3):
        x = float(vol.data[v])
        t, s = p.per_label.get(int(lab.data[v]), (0.0, 1.0))
        assert out[v] == pytest.approx(s * (1.3 * x + 0.1) + t, abs=1e-6)
    with pytest.raises(ShapeError):
        apply_intensity(vol, LabelMap(np.zeros((2, 2, 2))), p)
