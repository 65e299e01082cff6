"""Curve and generator families against independently derived values."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parmm import (
    BucketCurve,
    ConstantProductGenerator,
    CurveGenerator,
    LmsrCurve,
    LmsrGenerator,
    PairConstantProductGenerator,
    PiecewiseLinearCurve,
    PiecewisePolyCurve,
    SoftBucketCurve,
    SumCurve,
    TabulatedLiquidityCurve,
    UniswapV2Curve,
    brier_curve,
    curve_from_descriptor,
    generator_from_descriptor,
    normalize_curve,
)
from parmm.errors import DivergentIntegral

GRID = np.linspace(0.004, 0.996, 249)


def fd_dg(curve, p, h=1e-6):
    return (curve.g(p + h) - curve.g(p - h)) / (2 * h)


# ---------------------------------------------------------------------------
# double-integration pipeline
# ---------------------------------------------------------------------------


def test_constant_liquidity_two_is_quadratic_score():
    crv = PiecewisePolyCurve.from_liquidity([0.0, 1.0], [[2.0]])
    ref = brier_curve(1.0)
    for p in GRID:
        assert crv.g(p) == pytest.approx(ref.g(p), abs=1e-15)
        assert crv.d2g(p) == 2.0


def test_walkthrough_curves_from_liquidity():
    # liquidity 5 on [0, 0.6]: g = 2.5 p^2 - 2.1 p, then 0.9 (p - 1)
    g1 = PiecewisePolyCurve.from_liquidity([0, 0.6, 1], [[5.0], [0.0]])
    # liquidity 10 on [0.4, 1]: g = -1.8 p, then 5 p^2 - 5.8 p + 0.8
    g2 = PiecewisePolyCurve.from_liquidity([0, 0.4, 1], [[0.0], [10.0]])
    for p in GRID:
        e1 = 2.5 * p * p - 2.1 * p if p <= 0.6 else 0.9 * (p - 1.0)
        e2 = -1.8 * p if p <= 0.4 else 5 * p * p - 5.8 * p + 0.8
        assert g1.g(p) == pytest.approx(e1, abs=1e-12)
        assert g2.g(p) == pytest.approx(e2, abs=1e-12)
    assert g1.g(0.0) == 0.0 and abs(g1.g(1.0)) < 1e-15
    assert g2.g(0.0) == 0.0 and abs(g2.g(1.0)) < 1e-15


def test_from_liquidity_round_trip_random_profiles():
    rng = np.random.default_rng(11)
    for _ in range(20):
        cuts = np.sort(rng.uniform(0.1, 0.9, size=2))
        xs = [0.0, float(cuts[0]), float(cuts[1]), 1.0]
        # nonnegative quadratic pieces
        polys = [[float(rng.uniform(0, 3)), 0.0, float(rng.uniform(0, 2))] for _ in range(3)]
        crv = PiecewisePolyCurve.from_liquidity(xs, polys)
        assert abs(crv.g(0.0)) < 1e-14 and abs(crv.g(1.0)) < 1e-14
        for p in GRID:
            k = np.searchsorted(xs, p) - 1
            c = polys[min(max(k, 0), 2)]
            assert crv.d2g(p) == pytest.approx(c[0] + c[2] * p * p, rel=1e-12, abs=1e-12)
            assert fd_dg(crv, p) == pytest.approx(crv.dg(p), rel=1e-5, abs=1e-5)


# ---------------------------------------------------------------------------
# conjugates
# ---------------------------------------------------------------------------


def brute_conjugate(curve, q, m=20_001):
    ps = np.linspace(0.0, 1.0, m)
    vals = ps * q - np.array([curve.g(p) for p in ps])
    return float(vals.max())


@pytest.mark.parametrize(
    "curve",
    [
        LmsrCurve(1.3),
        UniswapV2Curve(0.8),
        brier_curve(2.0),
        PiecewisePolyCurve.from_liquidity([0, 0.6, 1], [[5.0], [0.0]]),
    ],
    ids=["lmsr", "v2", "brier", "walkthrough"],
)
def test_closed_form_conjugates_match_grid_maximization(curve):
    conj = curve.conjugate()
    for q in np.linspace(-3.0, 3.0, 25):
        assert conj.c(q) == pytest.approx(brute_conjugate(curve, q), abs=1e-6)


def test_walkthrough_conjugate_pieces():
    # g = 2.5 p^2 - 2.1 p then affine: c(q) = (q + 2.1)^2 / 10 on [-2.1, 0.9],
    # 0 below, q above (cost of one unit of the first outcome)
    crv = PiecewisePolyCurve.from_liquidity([0, 0.6, 1], [[5.0], [0.0]])
    conj = crv.conjugate()
    assert conj.c(-3.0) == pytest.approx(0.0, abs=1e-14)
    assert conj.c(2.0) == pytest.approx(2.0, abs=1e-14)
    for q in np.linspace(-2.1, 0.9, 13):
        assert conj.c(q) == pytest.approx((q + 2.1) ** 2 / 10.0, abs=1e-14)
    for q in np.linspace(-2.1, 0.9 - 1e-9, 13):
        assert conj.dc(q) == pytest.approx((q + 2.1) / 5.0, abs=1e-8)
    assert conj.dc(0.9 + 1e-9) == pytest.approx(1.0, abs=1e-8)  # flat g piece


def test_lmsr_conjugate_closed_form():
    crv = LmsrCurve(2.0)
    conj = crv.conjugate()
    for q in [-5.0, -0.3, 0.0, 1.7]:
        assert conj.c(q) == pytest.approx(2.0 * math.log1p(math.exp(q / 2.0)), rel=1e-14)


# ---------------------------------------------------------------------------
# buckets
# ---------------------------------------------------------------------------


def test_bucket_liquidity_restriction():
    base = LmsrCurve(1.0)
    crv = BucketCurve(base, 0.3, 0.7, 1.5)
    for p in GRID:
        want = 1.5 * base.d2g(p) if 0.3 < p < 0.7 else 0.0
        assert crv.d2g(p) == want
        assert fd_dg(crv, p) == pytest.approx(crv.dg(p), rel=2e-5, abs=2e-5)
    assert crv.g(0.0) == 0.0 and crv.g(1.0) == 0.0


def test_bucket_tiling_recovers_base():
    # buckets that tile (0, 1) sum back to the base curve up to an affine term,
    # which normalization removes entirely
    base = brier_curve(1.0)
    tiles = SumCurve(
        [BucketCurve(base, a, b, 1.0) for a, b in [(1e-9, 0.25), (0.25, 0.6), (0.6, 1 - 1e-9)]]
    )
    for p in GRID:
        assert tiles.g(p) == pytest.approx(base.g(p), abs=1e-7)


def test_soft_bucket_matches_quadrature():
    from scipy.integrate import quad

    crv = SoftBucketCurve([0.0, 0.3, 0.6, 1.0], [0.0, 2.0, 0.0, 0.0])

    def ell(p):
        f = np.interp(p, [0.0, 0.3, 0.6, 1.0], [0.0, 2.0, 0.0, 0.0])
        return f * 2.0 * (p * (1 - p)) ** -1.5

    for p in [0.1, 0.3, 0.45, 0.6, 0.8]:
        assert crv.d2g(p) == pytest.approx(ell(p), rel=1e-12)
        num, _ = quad(ell, 0.45, p, limit=200)
        assert crv.dg(p) - crv.dg(0.45) == pytest.approx(num, abs=1e-9)
    assert crv.g(0.0) == pytest.approx(0.0, abs=1e-12)
    assert crv.g(1.0) == pytest.approx(0.0, abs=1e-12)


def test_soft_bucket_tent_peaks_at_its_knot():
    crv = SoftBucketCurve([0.0, 0.2, 0.3, 0.45, 1.0], [0.0, 0.0, 1.0, 0.0, 0.0])
    ps = np.linspace(0.01, 0.99, 4901)
    vals = np.array([crv.d2g(p) for p in ps])
    assert ps[int(np.argmax(vals))] == pytest.approx(0.3, abs=1e-3)
    assert vals[ps < 0.2].max() == 0.0 and vals[ps > 0.45].max() == 0.0


def test_soft_bucket_zero_weights_is_flat():
    crv = SoftBucketCurve([0.0, 0.5, 1.0], [0.0, 0.0, 0.0])
    for p in GRID[::10]:
        assert crv.g(p) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# tabulated liquidity
# ---------------------------------------------------------------------------


def test_tabulated_liquidity_close_to_exact():
    grid = np.linspace(0.0, 1.0, 2001)
    crv = TabulatedLiquidityCurve(grid, np.full_like(grid, 2.0))
    ref = brier_curve(1.0)
    for p in GRID[::8]:
        assert crv.g(p) == pytest.approx(ref.g(p), abs=5e-6)
        assert crv.dg(p) == pytest.approx(ref.dg(p), abs=5e-4)


def test_tabulated_liquidity_rejects_bad_samples():
    grid = np.linspace(0.0, 1.0, 11)
    with pytest.raises(DivergentIntegral):
        TabulatedLiquidityCurve(grid, np.r_[np.inf, np.ones(10)])


# ---------------------------------------------------------------------------
# piecewise-linear curves
# ---------------------------------------------------------------------------


def test_piecewise_linear_elementary_shape():
    crv = PiecewiseLinearCurve([0.3], [1.0])
    for p in GRID:
        want = (0.3 - 1.0) * p if p <= 0.3 else 0.3 * (p - 1.0)
        assert crv.g(p) == pytest.approx(want, abs=1e-15)
    assert crv.dg(0.1) == pytest.approx(-0.7)
    assert crv.dg(0.9) == pytest.approx(0.3)
    assert crv.dg(0.3) == pytest.approx(-0.2)  # midpoint subgradient


# ---------------------------------------------------------------------------
# descriptors and normalization
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "desc",
    [
        {"family": "lmsr", "b": 1.5},
        {"family": "uniswap_v2", "alpha": 2.0},
        {"family": "brier", "scale": 1.0},
        {"family": "v3_bucket", "a": 0.2, "b": 0.7, "alpha": 1.3},
        {"family": "lmsr_bucket", "a": 0.1, "b": 0.5, "alpha": 0.7},
        {"family": "soft_bucket", "knots": [0.0, 0.4, 1.0], "weights": [0.0, 1.0, 0.0]},
        {"family": "piecewise_linear", "grid": [0.2, 0.6], "weights": [1.0, 2.0]},
        {"family": "piecewise_liquidity", "breakpoints": [0, 0.6, 1], "coefficients": [[5.0], [0.0]]},
        {"family": "constant_product", "n": 3, "alpha": 1.0},
        {"family": "pair_constant_product", "n": 3, "i": 0, "j": 2, "alpha": 1.0},
        {"family": "sum", "terms": [{"family": "lmsr", "b": 1.0}, {"family": "uniswap_v2", "alpha": 1.0}]},
    ],
)
def test_descriptor_round_trip(desc):
    G = generator_from_descriptor(desc, desc.get("n"))
    G2 = generator_from_descriptor(G.descriptor(), desc.get("n"))
    x = np.linspace(1.0, 2.0, G.n)
    assert G.value(x) == pytest.approx(G2.value(x), rel=1e-14, abs=1e-14)
    assert np.allclose(G.grad(x), G2.grad(x), atol=1e-14)


def test_normalize_curve_removes_chord():
    raw = PiecewisePolyCurve([0.0, 1.0], [[1.0, -0.5, 1.0]])  # g(0)=1, g(1)=1.5
    norm = normalize_curve(raw)
    assert norm.g(0.0) == pytest.approx(0.0, abs=1e-15)
    assert norm.g(1.0) == pytest.approx(0.0, abs=1e-15)
    for p in GRID[::20]:
        assert norm.d2g(p) == raw.d2g(p)


@given(st.floats(0.05, 0.95), st.floats(0.3, 3.0))
@settings(max_examples=60, deadline=None)
def test_lmsr_curve_derivative_consistency(p, b):
    crv = LmsrCurve(b)
    assert fd_dg(crv, p) == pytest.approx(crv.dg(p), rel=1e-5, abs=1e-5)
    h = 1e-5
    fd2 = (crv.dg(p + h) - crv.dg(p - h)) / (2 * h)
    assert fd2 == pytest.approx(crv.d2g(p), rel=1e-4, abs=1e-4)


def test_pair_generator_matches_two_outcome_shape():
    G = PairConstantProductGenerator(2, 0, 1, 1.2)
    C = CurveGenerator(UniswapV2Curve(1.2))
    for p1 in GRID[::25]:
        p = np.array([p1, 1 - p1])
        assert G.value(p) == pytest.approx(C.value(p), rel=1e-14)
        assert np.allclose(G.grad(p), C.grad(p), atol=1e-12)


def test_lmsr_generator_reduces_to_curve():
    G = LmsrGenerator(1.7, 2)
    C = CurveGenerator(LmsrCurve(1.7))
    for p1 in GRID[::25]:
        p = np.array([p1, 1 - p1])
        assert G.value(p) == pytest.approx(C.value(p), abs=1e-13)
        assert np.allclose(G.grad(p), C.grad(p), atol=1e-12)


def test_constant_product_uniform_values():
    G = ConstantProductGenerator(3, 1.0)
    u = np.ones(3) / 3
    assert G.value(u) == pytest.approx(-1.0)  # -3 * (1/27)^(1/3)
    assert np.allclose(G.grad(u), -np.ones(3))
