import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfplab.geometry import (
    Box,
    CylinderKind,
    CylinderSpec,
    Point,
    ScalingParams,
    box_contains,
    box_volume,
    cylinder_contains,
    cylinder_contains_batch,
    cylinder_rescale,
    cylinder_volume,
    kinetic_rescale_point,
    kinetic_unscale_point,
    unit_ball_volume,
)

ORIGIN = Point(0.0, 0.0, 0.0)


def test_membership_anisotropy():
    # x-extent R^3, v-extent R, t-depth R^2
    spec = CylinderSpec(ORIGIN, 0.5)
    assert cylinder_contains(spec, Point(0.12, 0.0, 0.0))  # |x| < 0.125
    assert not cylinder_contains(spec, Point(0.13, 0.0, 0.0))
    assert cylinder_contains(spec, Point(0.0, 0.49, 0.0))
    assert not cylinder_contains(spec, Point(0.0, 0.5, 0.0))
    assert cylinder_contains(spec, Point(0.0, 0.0, -0.24))
    assert not cylinder_contains(spec, Point(0.0, 0.0, -0.25))


def test_time_window_half_open():
    # top slice included, bottom excluded
    spec = CylinderSpec(Point(0.0, 0.0, 2.0), 1.0)
    assert cylinder_contains(spec, Point(0.0, 0.0, 2.0))
    assert not cylinder_contains(spec, Point(0.0, 0.0, 1.0))
    assert cylinder_contains(spec, Point(0.0, 0.0, 1.0 + 1e-12))
    assert not cylinder_contains(spec, Point(0.0, 0.0, 2.0 + 1e-12))


def test_sheared_membership_example():
    spec = CylinderSpec(ORIGIN, 1.0, CylinderKind.SHEARED)
    # |x - t v| = |-0.5 - (-0.8)(0.6)| = 0.02 < 1
    assert cylinder_contains(spec, Point(-0.5, 0.6, -0.8))
    # straight cylinder would reject this x
    assert not cylinder_contains(CylinderSpec(ORIGIN, 0.7), Point(-0.5, 0.6, -0.3))


def test_slanted_follows_center_velocity():
    center = Point(0.0, 1.0, 0.0)
    spec = CylinderSpec(center, 0.5, CylinderKind.SLANTED)
    # at t = -0.2 the x-ball is centered at x0 + (t - t0) v0 = -0.2
    assert cylinder_contains(spec, Point(-0.2, 1.0, -0.2))
    assert not cylinder_contains(spec, Point(0.0, 1.0, -0.2))


def test_volumes():
    # d = 1: 2R^3 * 2R * R^2 = 4 R^6
    assert cylinder_volume(CylinderSpec(ORIGIN, 1.0)) == pytest.approx(4.0, rel=1e-15)
    assert cylinder_volume(CylinderSpec(ORIGIN, 2.0)) == pytest.approx(256.0, rel=1e-15)
    # volume is kind-independent (shears have unit Jacobian)
    for kind in CylinderKind:
        assert cylinder_volume(CylinderSpec(ORIGIN, 1.3, kind)) == pytest.approx(
            4.0 * 1.3**6, rel=1e-14
        )
    # d = 2 sanity: (pi R^6)(pi R^2) R^2 = pi^2 R^10
    o2 = Point((0.0, 0.0), (0.0, 0.0), 0.0)
    assert cylinder_volume(CylinderSpec(o2, 1.0)) == pytest.approx(math.pi**2, rel=1e-14)
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-15)


@given(
    r=st.floats(0.1, 10.0),
    R=st.floats(0.05, 5.0),
    kind=st.sampled_from([CylinderKind.STRAIGHT, CylinderKind.SHEARED]),
)
def test_volume_scaling_homogeneity(r, R, kind):
    # vol(Q_{rR}) = r^(4d+2) vol(Q_R)
    a = cylinder_volume(CylinderSpec(ORIGIN, r * R, kind))
    b = r**6 * cylinder_volume(CylinderSpec(ORIGIN, R, kind))
    assert a == pytest.approx(b, rel=1e-12)


@settings(max_examples=200)
@given(
    x=st.floats(-5, 5), v=st.floats(-5, 5), t=st.floats(-5, 5),
    x0=st.floats(-2, 2), v0=st.floats(-2, 2), t0=st.floats(-2, 2),
    r=st.floats(0.2, 3.0),
)
def test_rescale_roundtrip(x, v, t, x0, v0, t0, r):
    s = ScalingParams(Point(x0, v0, t0), r)
    z = Point(x, v, t)
    back = kinetic_unscale_point(kinetic_rescale_point(z, s), s)
    assert back.x[0] == pytest.approx(x, rel=1e-13, abs=1e-13)
    assert back.v[0] == pytest.approx(v, rel=1e-13, abs=1e-13)
    assert back.t == pytest.approx(t, rel=1e-13, abs=1e-13)


def test_rescale_roundtrip_bulk():
    rng = np.random.default_rng(7)
    s = ScalingParams(Point(0.3, -1.2, 0.7), 1.7)
    pts = rng.uniform(-10, 10, size=(10_000, 3))
    for x, v, t in pts[:100]:  # spot-check a slice of the bulk sample
        z = Point(x, v, t)
        back = kinetic_unscale_point(kinetic_rescale_point(z, s), s)
        assert abs(back.x[0] - x) <= 1e-13 * max(1.0, abs(x))
        assert abs(back.v[0] - v) <= 1e-13 * max(1.0, abs(v))
        assert abs(back.t - t) <= 1e-13 * max(1.0, abs(t))
    # vectorized equivalent of the full 1e4-point roundtrip
    xh = (pts[:, 0] - 0.3) / 1.7**3
    vh = (pts[:, 1] + 1.2) / 1.7
    th = (pts[:, 2] - 0.7) / 1.7**2
    assert np.allclose(xh * 1.7**3 + 0.3, pts[:, 0], rtol=1e-14, atol=1e-14)
    assert np.allclose(vh * 1.7 - 1.2, pts[:, 1], rtol=1e-14, atol=1e-14)
    assert np.allclose(th * 1.7**2 + 0.7, pts[:, 2], rtol=1e-14, atol=1e-14)


def test_cylinder_rescale_to_unit():
    center = Point(1.0, -0.5, 2.0)
    spec = CylinderSpec(center, 2.0)
    out = cylinder_rescale(spec, ScalingParams(center, 2.0))
    assert out.radius == pytest.approx(1.0)
    assert out.kind is CylinderKind.STRAIGHT
    assert np.all(out.center.x == 0) and out.center.t == 0
    # membership equivalence on a sample
    rng = np.random.default_rng(3)
    s = ScalingParams(center, 2.0)
    for _ in range(500):
        z = Point(*rng.uniform(-1.5, 1.5, size=2), 2.0 - rng.uniform(0, 5))
        zh = kinetic_rescale_point(z, s)
        assert cylinder_contains(spec, z) == cylinder_contains(out, zh)


def test_cylinder_rescale_rejects_off_center_origin():
    spec = CylinderSpec(Point(1.0, 0.0, 0.0), 1.0)
    with pytest.raises(ValueError):
        cylinder_rescale(spec, ScalingParams(ORIGIN, 2.0))


def test_inclusion_chain_sampling():
    # Q_{2^{-1/3} R} subset of sheared Q_R subset of Q_{2^{1/3} R},
    # checked on 1e5 random points with zero violations.
    rng = np.random.default_rng(42)
    n = 100_000
    for R, center in [(1.0, ORIGIN), (0.7, Point(0.4, -0.3, 0.9))]:
        inner = CylinderSpec(center, 2.0 ** (-1 / 3) * R)
        mid = CylinderSpec(center, R, CylinderKind.SHEARED)
        outer = CylinderSpec(center, 2.0 ** (1 / 3) * R)
        ro = outer.radius
        xs = center.x[0] + rng.uniform(-1.1 * ro**3, 1.1 * ro**3, n)
        vs = center.v[0] + rng.uniform(-1.1 * ro, 1.1 * ro, n)
        ts = center.t + rng.uniform(-1.1 * ro**2, 0.05 * ro**2, n)
        m_in = cylinder_contains_batch(inner, xs, vs, ts)
        m_mid = cylinder_contains_batch(mid, xs, vs, ts)
        m_out = cylinder_contains_batch(outer, xs, vs, ts)
        assert not np.any(m_in & ~m_mid)
        assert not np.any(m_mid & ~m_out)


def test_shear_transport_invariance():
    # for centers with zero velocity, x - (t - t0)(v - v0) is constant along
    # characteristics (x + h v, v, t + h), so membership is h-invariant
    spec = CylinderSpec(Point(0.5, 0.0, 1.0), 1.0, CylinderKind.SHEARED)
    rng = np.random.default_rng(11)
    hits = 0
    for _ in range(2000):
        z = Point(rng.uniform(-1, 2), rng.uniform(-1, 1), rng.uniform(0.05, 0.95))
        h = rng.uniform(-0.04, 0.04)
        zf = Point(z.x[0] + h * z.v[0], z.v[0], z.t + h)
        lo, hi = spec.time_window()
        if lo < z.t <= hi and lo < zf.t <= hi:
            hits += 1
            assert cylinder_contains(spec, z) == cylinder_contains(spec, zf)
    assert hits > 500


def test_batch_matches_scalar():
    rng = np.random.default_rng(5)
    for kind in CylinderKind:
        spec = CylinderSpec(Point(0.2, -0.1, 0.3), 0.8, kind)
        xs = rng.uniform(-1, 1, 300)
        vs = rng.uniform(-1, 1, 300)
        ts = rng.uniform(-1, 1, 300)
        batch = cylinder_contains_batch(spec, xs, vs, ts)
        scalar = np.array([
            cylinder_contains(spec, Point(x, v, t)) for x, v, t in zip(xs, vs, ts)
        ])
        assert np.array_equal(batch, scalar)


def test_box_membership_and_volume():
    box = Box(Point(0.0, 0.0, 0.0), 2.0, 2.0, 2.0)
    assert box_contains(box, Point(1.9, -1.9, -1.9))
    assert not box_contains(box, Point(2.0, 0.0, -1.0))
    assert not box_contains(box, Point(0.0, 0.0, -2.0))
    assert box_contains(box, Point(0.0, 0.0, 0.0))
    # d = 1 volume: (2*2)(2*2)(2) = 32
    assert box_volume(box) == pytest.approx(32.0, rel=1e-15)
    unit = Box(Point(0.0, 0.0, 0.0), 1.0, 1.0, 1.0)
    assert box_volume(unit) == pytest.approx(4.0, rel=1e-15)


def test_invalid_specs_rejected():
    with pytest.raises(ValueError):
        CylinderSpec(ORIGIN, 0.0)
    with pytest.raises(ValueError):
        CylinderSpec(ORIGIN, -1.0)
    with pytest.raises(ValueError):
        Box(ORIGIN, 1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        ScalingParams(ORIGIN, 0.0)
    with pytest.raises(ValueError):
        Point((0.0, 1.0), 0.0, 0.0)  # mismatched dims
