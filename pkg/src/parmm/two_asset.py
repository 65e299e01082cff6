"""Two-outcome specializations: scalar-curve makers and AMM adapters.

A two-outcome maker is fully described by its curve g on [0, 1]: the maker's
liability at price p is (g(p) + g'(p)(1 - p), g(p) - p g'(p)) and its state
collapses to the scalar t = q_1 - q_2, recovered through the inverse of g'.
The constant-product and concentrated-liquidity pools below are thin adapters
over the general engine; their reserve bookkeeping is x = -q.
"""

from __future__ import annotations

import math

import numpy as np

from .convex_core import EPS
from .engine import MarketState, PositivePartFee, initialize
from .errors import (
    EmptyBucket,
    InsufficientReserves,
    InvariantViolated,
    OutOfRange,
)
from .generators import (
    BucketCurve,
    Curve1D,
    CurveGenerator,
    PiecewiseLinearCurve,
    SoftBucketCurve,
    SumCurve,
    UniswapV2Curve,
    UnsupportedFamily,
)

__all__ = [
    "liability2",
    "price2",
    "cost2",
    "bucket_curve",
    "soft_bucket_curve",
    "UniswapV2Market",
    "UniswapV3Market",
    "PiecewiseLinearMarket",
]


def liability2(curve: Curve1D, p: float) -> np.ndarray:
    """Scoring-rule liability of the curve maker quoting price p."""
    if not EPS <= p <= 1.0 - EPS:
        raise OutOfRange(f"price {p} outside the clamp")
    g = curve.g(p)
    d = curve.dg(p)
    return np.array([g + d * (1.0 - p), g - p * d])


def price2(curve: Curve1D, q) -> float:
    """Leftmost price consistent with liability q (scalar t = q1 - q2 also
    accepted).  Flat stretches and kinks of g' resolve to their left end."""
    t = float(q if np.ndim(q) == 0 else q[0] - q[1])
    lo, hi = EPS, 1.0 - EPS
    slack = 1e-12 * max(1.0, abs(t))
    if curve.dg(hi) < t - slack:
        raise OutOfRange(f"slope {t} above the reachable range")
    if curve.dg(lo) > t + slack:
        raise OutOfRange(f"slope {t} below the reachable range")
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        if curve.dg(mid) >= t:
            hi = mid
        else:
            lo = mid
    return hi


def cost2(curve: Curve1D, q) -> float:
    """Cost of liability q = (q1, q2) for the curve maker."""
    q = np.asarray(q, dtype=float)
    try:
        conj = curve.conjugate()
    except UnsupportedFamily:
        p = price2(curve, q)
        return float(p * q[0] + (1.0 - p) * q[1] - curve.g(p))
    return float(conj.c(q[0] - q[1]) + q[1])


def bucket_curve(base: Curve1D, a: float, b: float, weight: float = 1.0) -> BucketCurve:
    return BucketCurve(base, a, b, weight)


def soft_bucket_curve(knots, weights) -> SoftBucketCurve:
    return SoftBucketCurve(knots, weights)


# ---------------------------------------------------------------------------
# constant-product pool
# ---------------------------------------------------------------------------


class UniswapV2Market:
    """Constant-product pool x1 x2 = alpha^2 as an engine adapter.

    Reserves are the negated liabilities of the curve maker
    g(p) = -2 alpha sqrt(p (1-p)); the quoted price is x2 / (x1 + x2).
    Trades are bundles r toward the trader: reserves move to x - r.
    """

    def __init__(self, reserves, beta: float = 0.0):
        x = np.asarray(reserves, dtype=float)
        assert x.shape == (2,) and np.all(x > 0)
        self.alphas = {0: math.sqrt(x[0] * x[1])}
        fee = PositivePartFee(beta) if beta > 0 else None
        self.state = initialize(
            CurveGenerator(UniswapV2Curve(self.alphas[0])), liability=-x, fee=fee
        )

    @property
    def reserves(self) -> np.ndarray:
        return -self.state.total_liability()

    @property
    def price(self) -> float:
        return float(self.state.price[0])

    @property
    def alpha(self) -> float:
        return sum(self.alphas.values())

    def invariant(self) -> float:
        x = self.reserves
        return float(x[0] * x[1])

    def register_lp(self) -> int:
        lp_id = self.state.register_lp()
        self.alphas[lp_id] = 0.0
        return lp_id

    def mint(self, lp_id: int, alpha_new: float) -> np.ndarray:
        """Set an LP's liquidity share; returns the reserve bundle the LP must
        deposit (proportional to current reserves)."""
        assert alpha_new >= 0
        deposit = self.state.modify_liquidity(
            lp_id, CurveGenerator(UniswapV2Curve(alpha_new))
        )
        self.alphas[lp_id] = alpha_new
        return deposit

    def trade(self, r):
        """Execute the bundle r (toward the trader); the pool keeps its
        product invariant and positive reserves or the trade is rejected."""
        r = np.asarray(r, dtype=float)
        x = self.reserves
        x_new = x - r
        if np.any(x_new <= 0):
            raise InsufficientReserves(f"reserves would become {x_new}")
        target = self.alpha ** 2
        if abs(x_new[0] * x_new[1] - target) > 1e-9 * max(1.0, target):
            raise InvariantViolated(
                f"product {x_new[0] * x_new[1]:.12g} != {target:.12g}"
            )
        return self.state.execute_trade(bundle=r)

    def swap(self, amount_in: float, asset: int = 0) -> np.ndarray:
        """Bundle for a swap selling `amount_in` of one asset into the pool."""
        assert amount_in > 0 and asset in (0, 1)
        x = self.reserves
        other = 1 - asset
        out = x[other] - self.alpha ** 2 / (x[asset] + amount_in)
        r = np.zeros(2)
        r[asset] = -amount_in
        r[other] = out
        return r


# ---------------------------------------------------------------------------
# concentrated liquidity
# ---------------------------------------------------------------------------


class UniswapV3Market:
    """Concentrated-liquidity pool: constant-product liquidity restricted to
    price buckets [a_j, b_j], aggregated across LPs.

    Inside bucket j with total weight A the virtual reserves obey the shifted
    invariant (x1 + A sqrt((1-b)/b)) (x2 + A sqrt(a/(1-a))) = A^2.
    """

    def __init__(self, buckets, price: float, beta: float = 0.0):
        buckets = [(float(a), float(b)) for a, b in buckets]
        assert buckets == sorted(buckets)
        for (a, b), (a2, _) in zip(buckets, buckets[1:]):
            assert b <= a2 + 1e-12, "buckets must not overlap"
        assert all(0.0 < a < b < 1.0 for a, b in buckets)
        self.buckets = buckets
        self.beta = beta
        self.weights: dict[int, np.ndarray] = {0: np.zeros(len(buckets))}
        self.fee_ledger: dict[int, np.ndarray] = {0: np.zeros(2)}
        j = self.locate(price)
        if j is None:
            raise OutOfRange(f"opening price {price} not inside any bucket")
        self.weights[0][j] = 1.0
        self.state = MarketState(
            self._lp_curve(0), liability2(self._lp_curve(0), price), fee=None, strict=False
        )

    # -- bookkeeping ------------------------------------------------------

    def _lp_curve(self, lp_id: int) -> Curve1D:
        w = self.weights[lp_id]
        terms = [
            BucketCurve(UniswapV2Curve(1.0), a, b, wj)
            for (a, b), wj in zip(self.buckets, w)
            if wj > 0
        ]
        if not terms:
            from .generators import TrivialGenerator

            return TrivialGenerator(2)
        return terms[0] if len(terms) == 1 else SumCurve(terms)

    def aggregate_weight(self) -> np.ndarray:
        return np.sum([w for w in self.weights.values()], axis=0)

    def aggregate_curve(self) -> Curve1D:
        w = self.aggregate_weight()
        terms = [
            BucketCurve(UniswapV2Curve(1.0), a, b, wj)
            for (a, b), wj in zip(self.buckets, w)
            if wj > 0
        ]
        assert terms, "pool holds no liquidity"
        return terms[0] if len(terms) == 1 else SumCurve(terms)

    def locate(self, p: float):
        for j, (a, b) in enumerate(self.buckets):
            if a <= p <= b:
                return j
        return None

    @property
    def reserves(self) -> np.ndarray:
        return -self.state.total_liability()

    @property
    def price(self) -> float:
        return float(self.state.price[0])

    def register_lp(self) -> int:
        lp_id = self.state.register_lp()
        self.weights[lp_id] = np.zeros(len(self.buckets))
        self.fee_ledger[lp_id] = np.zeros(2)
        return lp_id

    def mint(self, lp_id: int, j: int, weight: float) -> np.ndarray:
        """Set an LP's weight on bucket j; returns the reserve deposit."""
        assert weight >= 0
        old = self.weights[lp_id][j]
        self.weights[lp_id][j] = weight
        try:
            curve = self._lp_curve(lp_id)
            gen = curve if isinstance(curve, Curve1D) else curve
            deposit = self.state.modify_liquidity(lp_id, gen)
        except Exception:
            self.weights[lp_id][j] = old
            raise
        # engine deposits are in liability space; reserves are the negation,
        # and the two agree because deposit = q_old - q_new = x_new - x_old
        return deposit

    def shifted_invariant_gap(self, j: int, p: float) -> float:
        """Deviation of bucket j's virtual reserves from its invariant at p."""
        a, b = self.buckets[j]
        A = float(self.aggregate_weight()[j])
        crv = BucketCurve(UniswapV2Curve(1.0), a, b, A)
        x = -liability2(crv, p)
        lhs = (x[0] + A * math.sqrt((1.0 - b) / b)) * (x[1] + A * math.sqrt(a / (1.0 - a)))
        return float(lhs - A * A)

    def trade(self, r):
        r = np.asarray(r, dtype=float)
        q = self.state.total_liability()
        agg = self.aggregate_curve()
        p_old = self.price
        p_new = price2(agg, q + r)
        j_old = self.locate(p_old)
        j_new = self.locate(p_new)
        if j_new is None:
            raise EmptyBucket(f"price {p_new:.6g} lands outside every bucket")
        lo, hi = min(j_old, j_new), max(j_old, j_new)
        W = self.aggregate_weight()
        crossed = list(range(lo, hi + 1))
        for j in crossed:
            if W[j] <= 0:
                raise EmptyBucket(f"bucket {j} holds no liquidity")
        for j in (j_old, j_new):
            p_chk = p_old if j == j_old else p_new
            if abs(self.shifted_invariant_gap(j, p_chk)) > 1e-9 * max(1.0, W[j] ** 2):
                raise InvariantViolated(f"bucket {j} off its shifted invariant")
        receipt = self.state.execute_trade(bundle=r)
        if self.beta > 0:
            trader_fee = self.beta * np.maximum(-r, 0.0)
            denom = float(W[crossed].sum())
            lp_fees = {}
            for lp_id, w in self.weights.items():
                share = float(w[crossed].sum()) / denom
                fee = share * trader_fee
                lp_fees[lp_id] = fee
                self.fee_ledger[lp_id] = self.fee_ledger[lp_id] + fee
            receipt.trader_fee = trader_fee
            receipt.lp_fees = lp_fees
        return receipt


# ---------------------------------------------------------------------------
# piecewise-linear book
# ---------------------------------------------------------------------------


class PiecewiseLinearMarket:
    """Limit-order-book-like maker: weight alpha_j posted at grid price a_j.

    State is the scalar liability t = q_1 - q_2.  The quoted price is the grid
    price of the active bucket j*, with fractional fill y in [0, 1); a state
    landing exactly on a bucket boundary opens the higher bucket with y = 0.
    """

    def __init__(self, grid, weights: dict | None = None):
        self.grid = np.asarray(grid, dtype=float)
        assert np.all(np.diff(self.grid) > 0)
        assert self.grid[0] > 0 and self.grid[-1] < 1
        self.weights: dict[int, np.ndarray] = {}
        if weights:
            for lp_id, w in weights.items():
                w = np.asarray(w, dtype=float)
                assert w.shape == self.grid.shape and np.all(w >= 0)
                self.weights[lp_id] = w
        self.t = float(np.sum(self.total_weights() * (self.grid - 1.0)))  # all buckets unfilled
        self._fill = (0, 0.0)  # cached active (slot, fraction) matching self.t

    def total_weights(self) -> np.ndarray:
        if not self.weights:
            return np.zeros_like(self.grid)
        return np.sum([w for w in self.weights.values()], axis=0)

    def register_lp(self, lp_id: int | None = None) -> int:
        if lp_id is None:
            lp_id = max(self.weights, default=-1) + 1
        self.weights[lp_id] = np.zeros_like(self.grid)
        return lp_id

    def curve(self) -> PiecewiseLinearCurve:
        return PiecewiseLinearCurve(self.grid, self.total_weights())

    # -- state decoding ---------------------------------------------------

    def _decode(self, t: float):
        """(j*, y) for scalar state t; OutOfRange outside the book."""
        alpha = self.total_weights()
        R = t - float(np.sum(alpha * (self.grid - 1.0)))
        total = float(alpha.sum())
        tol = 1e-12 * max(1.0, total)
        if R < -tol or R >= total:
            raise OutOfRange(f"state {t} outside the book")
        prefix = np.concatenate([[0.0], np.cumsum(alpha)[:-1]])
        feasible = np.nonzero(R - prefix >= -tol)[0]
        if len(feasible) == 0:
            raise OutOfRange(f"state {t} outside the book")
        j = int(feasible[-1])
        y = 0.0 if alpha[j] <= 0 else max(0.0, (R - prefix[j]) / alpha[j])
        if y >= 1.0:
            raise OutOfRange(f"state {t} outside the book")
        return j, y

    def _encode(self, j: int, y: float) -> float:
        alpha = self.total_weights()
        return (
            float(np.sum(alpha * (self.grid - 1.0)))
            + float(np.sum(alpha[:j]))
            + y * float(alpha[j])
        )

    @property
    def active(self):
        # the cached fill is authoritative while it still encodes to the
        # current scalar state bit-for-bit; this keeps deposits exact
        if self._fill is not None and self._encode(*self._fill) == self.t:
            return self._fill
        return self._decode(self.t)

    @property
    def price(self) -> float:
        return float(self.grid[self.active[0]])

    def unit_liability(self, j: int) -> float:
        """Scalar liability of a unit-weight maker at grid slot j in the
        current state: a_j - 1 if unfilled, a_j if filled, in between on the
        active slot."""
        jstar, y = self.active
        a = float(self.grid[j])
        if j < jstar:
            return a
        if j > jstar:
            return a - 1.0
        return a - 1.0 + y

    def modify_liquidity(self, lp_id: int, j: int, weight: float) -> float:
        """Set one LP weight; returns the scalar deposit that keeps the book's
        price and fill unchanged (exact, no rounding)."""
        assert weight >= 0
        if lp_id not in self.weights:
            self.register_lp(lp_id)
        jstar, y = self.active
        delta = (weight - self.weights[lp_id][j]) * self.unit_liability(j)
        self.weights[lp_id][j] = weight
        # re-encode the state from the preserved fill so that a matching
        # reverse modification refunds the deposit exactly
        self.t = self._encode(jstar, y)
        self._fill = (jstar, y)
        return delta

    def trade(self, r: float):
        """Move the scalar state by r; returns itemized fills
        [(slot j, filled weight, price a_j)], positive when the book sells."""
        alpha = self.total_weights()
        j0, y0 = self.active
        j1, y1 = self._decode(self.t + r)  # raises OutOfRange before mutating
        fills = []
        if r >= 0:
            for j in range(j0, j1 + 1):
                start = y0 if j == j0 else 0.0
                end = y1 if j == j1 else 1.0
                if end > start and alpha[j] > 0:
                    fills.append((j, float((end - start) * alpha[j]), float(self.grid[j])))
        else:
            for j in range(j0, j1 - 1, -1):
                start = y0 if j == j0 else 1.0
                end = y1 if j == j1 else 0.0
                if start > end and alpha[j] > 0:
                    fills.append((j, float((end - start) * alpha[j]), float(self.grid[j])))
        self.t += r
        self._fill = (j1, y1) if self._encode(j1, y1) == self.t else None
        return fills
