"""Duality, liquidity matrices, and infimal convolution."""

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
    PiecewisePolyCurve,
    ShiftedGenerator,
    SoftBucketCurve,
    SumGenerator,
    TrivialGenerator,
    UniswapV2Curve,
    brier_curve,
    conjugate_value,
    directional_liquidity,
    infimal_convolution_split,
    liability_of,
    liquidity_matrix,
    normalize_generator,
    price_of,
)
from parmm.convex_core import _fd_hessian
from parmm.errors import BoundaryPrice, VertexUnbounded


def families_n2():
    return [
        CurveGenerator(LmsrCurve(1.0)),
        CurveGenerator(LmsrCurve(0.4)),
        CurveGenerator(UniswapV2Curve(1.5)),
        CurveGenerator(brier_curve(2.0)),
        CurveGenerator(BucketCurve(UniswapV2Curve(1.0), 0.3, 0.7, 1.2)),
        CurveGenerator(BucketCurve(LmsrCurve(1.0), 0.2, 0.8, 0.9)),
        CurveGenerator(SoftBucketCurve([0.0, 0.4, 0.7, 1.0], [0.0, 1.5, 0.5, 0.0])),
        CurveGenerator(PiecewisePolyCurve.from_liquidity([0, 0.6, 1], [[5.0], [0.0]])),
        ConstantProductGenerator(2, 1.0),
    ]


def families_n3():
    return [
        LmsrGenerator(1.0, 3),
        LmsrGenerator(2.5, 3),
        ConstantProductGenerator(3, 1.0),
        SumGenerator([LmsrGenerator(0.7, 3), PairConstantProductGenerator(3, 0, 2, 1.0)]),
    ]


def random_prices(rng, n, count):
    ps = rng.dirichlet(np.ones(n), size=count)
    ps = np.clip(ps, 0.01, None)
    return ps / ps.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# duality round trips
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("G", families_n2() + families_n3(), ids=lambda G: type(G).__name__ + str(id(G) % 97))
def test_duality_round_trip(G):
    rng = np.random.default_rng(5)
    for p in random_prices(rng, G.n, 200):
        q = liability_of(G, p)
        res = conjugate_value(G, q)
        assert abs(res.cost) < 1e-8  # liability sits on the zero level set
        # price round trip; bucketed curves are flat off-bucket, where any
        # consistent price must reproduce the same liability instead
        q_back = liability_of(G, np.clip(res.price, 1e-9, None))
        assert np.max(np.abs(q_back - q)) < 1e-6


def test_price_round_trip_strictly_convex():
    rng = np.random.default_rng(9)
    for G in [CurveGenerator(LmsrCurve(1.0)), CurveGenerator(UniswapV2Curve(1.0)), LmsrGenerator(1.3, 3), ConstantProductGenerator(3, 1.0)]:
        for p in random_prices(rng, G.n, 200):
            q = liability_of(G, p)
            assert np.max(np.abs(price_of(G, q) - p)) < 1e-6


def test_euler_identity():
    rng = np.random.default_rng(2)
    for G in families_n2() + families_n3():
        for p in random_prices(rng, G.n, 20):
            q = liability_of(G, p)
            assert float(p @ q) == pytest.approx(G.value(p), abs=1e-9)


def test_one_homogeneous_extension():
    rng = np.random.default_rng(3)
    for G in families_n2() + families_n3():
        x = rng.uniform(0.2, 2.0, size=G.n)
        for lam in (0.5, 2.0, 7.3):
            assert G.value(lam * x) == pytest.approx(lam * G.value(x), rel=1e-12)
            assert np.allclose(G.grad(lam * x), G.grad(x), atol=1e-10)


def test_cash_invariance_of_cost():
    # C(q + c 1) = C(q) + c: adding cash to every outcome is just cash
    rng = np.random.default_rng(4)
    for G in [CurveGenerator(LmsrCurve(1.0)), LmsrGenerator(1.0, 3), ConstantProductGenerator(3, 1.0)]:
        q = liability_of(G, random_prices(rng, G.n, 1)[0])
        base = conjugate_value(G, q).cost
        for c in (-0.7, 0.3, 2.0):
            assert conjugate_value(G, q + c).cost == pytest.approx(base + c, abs=1e-9)


def test_solver_matches_closed_form_lmsr():
    # run the iterative path against the analytic conjugate
    G = LmsrGenerator(1.3, 3)

    class NoClosedForm(LmsrGenerator):
        def conjugate(self, q):
            return None

    H = NoClosedForm(1.3, 3)
    rng = np.random.default_rng(6)
    for _ in range(50):
        q = rng.normal(0.0, 1.0, size=3)
        want, pwant = G.conjugate(q)
        got = conjugate_value(H, q)
        assert got.cost == pytest.approx(want, abs=1e-9)
        if pwant.min() > 1e-4:
            assert np.max(np.abs(got.price - pwant)) < 1e-7


def test_boundary_liability_raises():
    G = CurveGenerator(LmsrCurve(1.0))
    with pytest.raises(BoundaryPrice):
        liability_of(G, np.array([1e-12, 1.0 - 1e-12]))


# ---------------------------------------------------------------------------
# liquidity matrices
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("G", families_n2() + families_n3(), ids=lambda G: type(G).__name__ + str(id(G) % 97))
def test_hessian_analytic_vs_finite_difference(G):
    rng = np.random.default_rng(8)
    for p in random_prices(rng, G.n, 50):
        H = G.hessian(p)
        if H is None:
            continue
        F = _fd_hessian(G, p)
        scale = max(1.0, float(np.abs(H).max()))
        assert np.max(np.abs(H - F)) / scale < 1e-4


def test_liquidity_matrix_properties():
    rng = np.random.default_rng(12)
    for G in [LmsrGenerator(1.0, 3), ConstantProductGenerator(3, 1.0), CurveGenerator(UniswapV2Curve(1.0))]:
        for p in random_prices(rng, G.n, 10):
            L = liquidity_matrix(G, p)
            assert np.allclose(L, L.T, atol=1e-12)
            assert np.max(np.abs(L @ p)) < 1e-8  # p spans the null space
            w = np.linalg.eigvalsh(L)
            assert w.min() > -1e-8  # positive semidefinite


def test_inverse_duality_two_outcomes():
    # curvature of cost and curve are reciprocal: c''(g'(p)) = 1 / g''(p)
    crv = LmsrCurve(1.0)
    conj = crv.conjugate()
    h = 1e-5
    for p in [0.2, 0.5, 0.8]:
        q = crv.dg(p)
        c2 = (conj.dc(q + h) - conj.dc(q - h)) / (2 * h)
        assert c2 == pytest.approx(1.0 / crv.d2g(p), rel=1e-6)


def test_directional_liquidity_uniform_values():
    # geometric-mean generator and its pairwise counterpart at the uniform
    # price, direction (1, 0, -1): values 6 and 9
    G1 = ConstantProductGenerator(3, 1.0)
    G2 = SumGenerator(
        [
            PairConstantProductGenerator(3, 0, 1, 1.0),
            PairConstantProductGenerator(3, 0, 2, 1.0),
            PairConstantProductGenerator(3, 1, 2, 1.0),
        ]
    )
    u = np.ones(3) / 3
    v = np.array([1.0, 0.0, -1.0])
    assert directional_liquidity(G1, u, v) == pytest.approx(6.0, abs=1e-6)
    assert directional_liquidity(G2, u, v) == pytest.approx(9.0, abs=1e-6)


def test_directional_liquidity_degenerate_limit():
    # as p2 -> 0, the geometric mean's (1,0,-1)-liquidity vanishes while the
    # pairwise generator keeps at least 1/sqrt(p1 p3)
    G1 = ConstantProductGenerator(3, 1.0)
    G2 = SumGenerator(
        [
            PairConstantProductGenerator(3, 0, 1, 1.0),
            PairConstantProductGenerator(3, 0, 2, 1.0),
            PairConstantProductGenerator(3, 1, 2, 1.0),
        ]
    )
    v = np.array([1.0, 0.0, -1.0])
    prev = None
    for p2 in [1e-2, 1e-4, 1e-6]:
        p = np.array([(1 - p2) / 2, p2, (1 - p2) / 2])
        l1 = directional_liquidity(G1, p, v)
        l2 = directional_liquidity(G2, p, v)
        if prev is not None:
            assert l1 < prev
        prev = l1
        assert l2 >= 1.0 / math.sqrt(p[0] * p[2]) - 1e-9
    assert prev < 1e-1


# ---------------------------------------------------------------------------
# infimal convolution
# ---------------------------------------------------------------------------


def test_split_parts_sum_and_share_level():
    rng = np.random.default_rng(14)
    for _ in range(100):
        k = int(rng.integers(1, 4))
        gens = [LmsrGenerator(float(rng.uniform(0.5, 2.0)), 3) for _ in range(k)]
        p = random_prices(rng, 3, 1)[0]
        q = np.sum([liability_of(G, p) for G in gens], axis=0) + float(rng.uniform(-0.5, 0.5))
        cost, parts, price = infimal_convolution_split(gens, q)
        assert np.max(np.abs(np.sum(parts, axis=0) - q)) < 1e-12
        # aggregate cost equals the sum of the parts' costs
        total = sum(conjugate_value(G, part).cost for G, part in zip(gens, parts))
        assert total == pytest.approx(cost, abs=1e-6)
        for G, part in zip(gens, parts):
            assert conjugate_value(G, part).cost == pytest.approx(cost / k, abs=1e-6)


def test_split_is_optimal():
    # no other decomposition of q attains a lower total cost
    rng = np.random.default_rng(15)
    gens = [LmsrGenerator(1.0, 3), LmsrGenerator(2.0, 3)]
    q = liability_of(gens[0], np.array([0.5, 0.3, 0.2])) + liability_of(gens[1], np.array([0.2, 0.5, 0.3]))
    cost, parts, _ = infimal_convolution_split(gens, q)
    for _ in range(200):
        delta = rng.normal(0.0, 0.3, size=3)
        alt = sum(
            conjugate_value(G, part + sgn * delta).cost
            for G, part, sgn in zip(gens, parts, (1.0, -1.0))
        )
        assert alt >= cost - 1e-9


def test_two_lmsr_split_closed_form():
    # parallel LMSRs aggregate to an LMSR with summed b, and the split is
    # proportional to b
    b1, b2 = 1.0, 2.5
    gens = [LmsrGenerator(b1, 3), LmsrGenerator(b2, 3)]
    combined = LmsrGenerator(b1 + b2, 3)
    rng = np.random.default_rng(16)
    for _ in range(50):
        p = random_prices(rng, 3, 1)[0]
        q = liability_of(combined, p)
        cost, parts, price = infimal_convolution_split(gens, q)
        assert cost == pytest.approx(conjugate_value(combined, q).cost, abs=1e-9)
        assert np.max(np.abs(price - p)) < 1e-9
        assert np.allclose(parts[0], b1 / (b1 + b2) * q, atol=1e-8)


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------


def test_normalize_generator_zeroes_vertices():
    G = ShiftedGenerator(LmsrGenerator(1.0, 3), np.array([-0.5, 0.2, 0.1]))
    assert np.max(np.abs(G.vertex_values() - np.array([0.5, -0.2, -0.1]))) < 1e-12
    N = normalize_generator(G)
    assert np.max(np.abs(N.vertex_values())) < 1e-12
    # liquidity is unchanged by the affine shift
    p = np.array([0.3, 0.3, 0.4])
    assert np.allclose(liquidity_matrix(N, p), liquidity_matrix(G, p), atol=1e-12)


def test_normalize_generator_identity_when_normalized():
    G = LmsrGenerator(1.0, 3)
    assert normalize_generator(G) is G
    T = TrivialGenerator(3)
    assert normalize_generator(T) is T


def test_normalize_rejects_unbounded_vertices():
    class Unbounded(LmsrGenerator):
        def vertex_values(self):
            return np.array([-np.inf] * self.n)

    with pytest.raises(VertexUnbounded):
        normalize_generator(Unbounded(1.0, 3))


@given(st.floats(0.05, 0.95), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
@settings(max_examples=50, deadline=None)
def test_conjugate_is_convex_and_monotone_lmsr(p, qa, qb):
    G = CurveGenerator(LmsrCurve(1.0))
    qa_vec = np.array([qa, -qa])
    qb_vec = np.array([qb, -qb])
    ca = conjugate_value(G, qa_vec).cost
    cb = conjugate_value(G, qb_vec).cost
    mid = conjugate_value(G, 0.5 * (qa_vec + qb_vec)).cost
    assert mid <= 0.5 * (ca + cb) + 1e-9
