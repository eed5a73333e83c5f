import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kfplab.coefficients import (
    CoefficientField,
    CoefficientKind,
    eval_at,
    eval_matrix,
    eval_values,
    generate,
    kinetic_cells,
    rescale_field,
    validate_ellipticity,
)
from kfplab.geometry import Point, ScalingParams


def test_generate_validates_ellipticity_constants():
    with pytest.raises(ValueError):
        generate(CoefficientKind.CONSTANT, 0.0, 1.0)
    with pytest.raises(ValueError):
        generate(CoefficientKind.CONSTANT, 2.0, 1.0)
    with pytest.raises(ValueError):
        generate(CoefficientKind.CHECKERBOARD, 0.5, 1.0, cells=(0.1, -0.1, 0.1))
    f = generate(CoefficientKind.CONSTANT, 1.0, 1.0)
    assert eval_at(f, Point(0.3, -0.2, 0.7)) == 1.0


def test_checkerboard_parity():
    f = generate(CoefficientKind.CHECKERBOARD, 0.2, 1.0, cells=(0.1, 0.1, 0.1))
    # all indices 0 -> even parity -> lam
    assert eval_at(f, Point(0.05, 0.05, 0.05)) == 0.2
    # one index flips -> Lam
    assert eval_at(f, Point(0.15, 0.05, 0.05)) == 1.0
    assert eval_at(f, Point(0.05, 0.15, 0.05)) == 1.0
    assert eval_at(f, Point(0.05, 0.05, 0.15)) == 1.0
    # two flips -> even again
    assert eval_at(f, Point(0.15, 0.15, 0.05)) == 0.2
    # negative cells use floor, not truncation
    assert eval_at(f, Point(-0.05, 0.05, 0.05)) == 1.0


def test_kinetic_cell_anisotropy():
    assert kinetic_cells(0.5) == (0.125, 0.5, 0.25)


def test_oscillatory_formula():
    f = generate(CoefficientKind.OSCILLATORY, 0.5, 1.5, wavenumbers=(8, 8, 4))
    x, v, t = 0.3, -0.2, 0.9
    expected = 1.0 + 0.5 * np.sin(8 * x) * np.sin(8 * v) * np.cos(4 * t)
    assert eval_at(f, Point(x, v, t)) == pytest.approx(expected, rel=1e-15)


def test_laminate_determinism_and_range():
    f = generate(CoefficientKind.RANDOM_LAMINATE, 0.2, 1.0, seed=123, cells=(0.1, 0.2, 0.1))
    xs = np.linspace(-3, 3, 200)
    vs = np.linspace(-2, 2, 100)
    a = eval_values(f, xs[:, None], vs[None, :], 0.37)
    b = eval_values(f, xs[:, None], vs[None, :], 0.37)
    assert np.array_equal(a, b)
    assert a.min() >= 0.2 and a.max() <= 1.0
    # same cell -> same value; different cell -> (almost surely) different
    assert eval_at(f, Point(0.01, 0.01, 0.01)) == eval_at(f, Point(0.09, 0.19, 0.09))
    assert eval_at(f, Point(0.01, 0.01, 0.01)) != eval_at(f, Point(0.11, 0.01, 0.01))
    # a different seed decorrelates
    g = generate(CoefficientKind.RANDOM_LAMINATE, 0.2, 1.0, seed=124, cells=(0.1, 0.2, 0.1))
    assert eval_at(f, Point(0.01, 0.01, 0.01)) != eval_at(g, Point(0.01, 0.01, 0.01))


def test_laminate_chunk_order_independence():
    # counter-based draws cannot depend on evaluation order or chunk shape
    f = generate(CoefficientKind.RANDOM_LAMINATE, 0.2, 1.0, seed=9)
    xs = np.linspace(-1, 1, 64)
    whole = eval_values(f, xs, 0.3, -0.2)
    parts = np.concatenate([eval_values(f, xs[:13], 0.3, -0.2), eval_values(f, xs[13:], 0.3, -0.2)])
    assert np.array_equal(whole, parts)


def test_laminate_distribution_is_roughly_uniform():
    f = generate(CoefficientKind.RANDOM_LAMINATE, 0.0 + 1e-9, 1.0, seed=5, cells=(1, 1, 1))
    ix = np.arange(100_000)
    vals = eval_values(f, ix.astype(float) + 0.5, 0.5, 0.5)
    assert abs(vals.mean() - 0.5) < 5e-3
    assert abs(vals.std() - np.sqrt(1 / 12)) < 5e-3


@settings(max_examples=60)
@given(
    kind=st.sampled_from(list(CoefficientKind)),
    lam=st.floats(0.1, 1.0),
    spread=st.floats(0.0, 2.0),
    seed=st.integers(0, 2**31),
    x=st.floats(-10, 10), v=st.floats(-10, 10), t=st.floats(-10, 10),
)
def test_sandwich_holds_pointwise(kind, lam, spread, seed, x, v, t):
    f = generate(kind, lam, lam + spread, seed=seed)
    val = eval_at(f, Point(x, v, t))
    assert lam - 1e-12 <= val <= lam + spread + 1e-12


def test_validate_ellipticity_report():
    f = generate(CoefficientKind.CHECKERBOARD, 0.2, 1.0)
    xs, vs, ts = np.linspace(0, 1, 17), np.linspace(-1, 1, 17), np.linspace(0, 0.5, 9)
    rep = validate_ellipticity(f, xs, vs, ts)
    assert rep.passed
    assert rep.min_eig == 0.2 and rep.max_eig == 1.0
    assert rep.n_samples == 33 * 33 * 17


def test_rescale_field_exact_pullback():
    s = ScalingParams(Point(0.4, -0.3, 1.1), 2.0)
    rng = np.random.default_rng(0)
    for kind in CoefficientKind:
        f = generate(kind, 0.3, 1.4, seed=77)
        g = rescale_field(f, s)
        for _ in range(200):
            xh, vh, th = rng.uniform(-2, 2, 3)
            x = 0.4 + xh * 8.0
            v = -0.3 + vh * 2.0
            t = 1.1 + th * 4.0
            assert eval_at(g, Point(xh, vh, th)) == pytest.approx(
                eval_at(f, Point(x, v, t)), rel=1e-13, abs=1e-15
            )


def test_rescale_composes():
    s1 = ScalingParams(Point(0.1, 0.2, 0.3), 2.0)
    s2 = ScalingParams(Point(-0.4, 0.0, 0.6), 0.5)
    f = generate(CoefficientKind.CHECKERBOARD, 0.2, 1.0, cells=(0.07, 0.3, 0.11))
    g = rescale_field(rescale_field(f, s1), s2)
    # g(z) = f(unscale_1(unscale_2(z)))
    from kfplab.geometry import kinetic_unscale_point

    z = Point(0.37, -0.21, 0.55)
    zz = kinetic_unscale_point(kinetic_unscale_point(z, s2), s1)
    assert eval_at(g, z) == pytest.approx(eval_at(f, zz), rel=1e-13)


def test_checkerboard_rescale_matches_shrunk_cells():
    # dilation anchored at the origin with factor r turns cells (hx, hv, ht)
    # into (hx/r^3, hv/r, ht/r^2)
    origin = Point(0.0, 0.0, 0.0)
    f = generate(CoefficientKind.CHECKERBOARD, 0.2, 1.0, cells=(0.1, 0.1, 0.1))
    g = rescale_field(f, ScalingParams(origin, 2.0))
    h = generate(CoefficientKind.CHECKERBOARD, 0.2, 1.0, cells=(0.1 / 8, 0.1 / 2, 0.1 / 4))
    rng = np.random.default_rng(1)
    for _ in range(300):
        x, v, t = rng.uniform(-1, 1, 3)
        assert eval_at(g, Point(x, v, t)) == eval_at(h, Point(x, v, t))


def test_matrix_form_d2_sandwich():
    f = generate(CoefficientKind.RANDOM_LAMINATE, 0.3, 1.2, seed=3)
    z = Point((0.3, -0.8), (0.1, 0.4), 0.9)
    A = eval_matrix(f, z)
    assert A.shape == (2, 2)
    assert np.allclose(A, A.T, atol=1e-15)
    eigs = np.linalg.eigvalsh(A)
    assert eigs.min() >= 0.3 - 1e-12 and eigs.max() <= 1.2 + 1e-12
