"""Generator families for cost-function market makers.

A generator is a convex, nonpositive function G on the probability simplex,
extended 1-homogeneously to the positive orthant via Gbar(x) = |x| * G(x/|x|).
Its gradient map p -> grad Gbar(p) is the liability a maker holds when quoting
price p, and its convex conjugate is the maker's cost function.

Two-outcome makers are built from scalar curves g on [0, 1] with
G(p) = g(p_1); the curve carries g, g', g'' and (when available) a closed-form
conjugate.  All curve families here are normalized so g(0) = g(1) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import expit, xlogy

from .errors import (
    DivergentIntegral,
    UnknownKind,
    UnsupportedFamily,
    VertexUnbounded,
)

_TINY = 1e-12


# ---------------------------------------------------------------------------
# scalar curves (two-outcome makers)
# ---------------------------------------------------------------------------


class Curve1D:
    """Convex curve g on [0, 1]; g(0) and g(1) finite for every family here."""

    pseudobarrier = False

    def g(self, p):
        raise NotImplementedError

    def dg(self, p):
        """Derivative; midpoint of the two one-sided slopes at a kink."""
        raise NotImplementedError

    def d2g(self, p):
        """Second derivative where defined (0 across kinks / flat pieces)."""
        raise NotImplementedError

    def conjugate(self):
        """Closed-form conjugate c(q) = sup_p pq - g(p), if the family has one."""
        raise UnsupportedFamily(f"{type(self).__name__} has no closed-form conjugate")

    def descriptor(self) -> dict:
        raise NotImplementedError


class Conjugate1D:
    """Convex conjugate c of a curve: c(q), and the maximizing p as dc(q)."""

    def c(self, q):
        raise NotImplementedError

    def dc(self, q):
        raise NotImplementedError


class PiecewisePolyCurve(Curve1D):
    """Piecewise-polynomial curve on breakpoints 0 = x_0 < ... < x_m = 1.

    polys[k] is the polynomial (in the global coordinate p) used on
    [xs[k], xs[k+1]].  Convexity is the caller's responsibility; the conjugate
    construction requires degree <= 2 and nondecreasing slopes.
    """

    def __init__(self, xs, polys):
        xs = np.asarray(xs, dtype=float)
        assert xs.ndim == 1 and len(xs) == len(polys) + 1
        assert abs(xs[0]) < _TINY and abs(xs[-1] - 1.0) < _TINY
        assert np.all(np.diff(xs) > 0)
        self.xs = xs
        self.polys = [Polynomial(np.asarray(P.coef if isinstance(P, Polynomial) else P, dtype=float)) for P in polys]

    @classmethod
    def from_liquidity(cls, xs, liq_polys) -> "PiecewisePolyCurve":
        """Build the curve whose second derivative is the given piecewise
        polynomial liquidity profile, normalized so g(0) = g(1) = 0.

        Double antiderivative with continuity across breakpoints, then chord
        subtraction; any antiderivative choice gives the same curve.
        """
        xs = np.asarray(xs, dtype=float)
        liq = [Polynomial(np.asarray(P.coef if isinstance(P, Polynomial) else P, dtype=float)) for P in liq_polys]
        A = []
        acc = 0.0
        for k, L in enumerate(liq):
            P = L.integ()
            P = P + (acc - P(xs[k]))
            A.append(P)
            acc = P(xs[k + 1])
        B = []
        acc = 0.0
        for k, P in enumerate(A):
            Q = P.integ()
            Q = Q + (acc - Q(xs[k]))
            B.append(Q)
            acc = Q(xs[k + 1])
        b1 = acc  # B(1), with B(0) = 0
        chord = Polynomial([0.0, b1])
        return cls(xs, [Q - chord for Q in B])

    def _piece(self, p):
        k = int(np.searchsorted(self.xs, p, side="right")) - 1
        return min(max(k, 0), len(self.polys) - 1)

    def g(self, p):
        return float(self.polys[self._piece(p)](p))

    def dg(self, p):
        k = self._piece(p)
        d = self.polys[k].deriv()(p)
        # midpoint subgradient at interior breakpoints
        if 0 < k and abs(p - self.xs[k]) < _TINY:
            d = 0.5 * (d + self.polys[k - 1].deriv()(p))
        elif k + 1 < len(self.polys) and abs(p - self.xs[k + 1]) < _TINY:
            d = 0.5 * (d + self.polys[k + 1].deriv()(p))
        return float(d)

    def d2g(self, p):
        return float(self.polys[self._piece(p)].deriv(2)(p))

    def conjugate(self) -> "PiecewisePolyConjugate":
        qs: list[float] = []
        pieces: list[Polynomial] = []
        g0 = self.g(0.0)
        g1 = self.g(1.0)
        pieces.append(Polynomial([-g0]))  # q <= g'(0+): maximizer p = 0
        prev_slope = None
        for k, P in enumerate(self.polys):
            assert P.degree() <= 2, "conjugate needs piecewise-quadratic curves"
            d = P.deriv()
            sl, sr = float(d(self.xs[k])), float(d(self.xs[k + 1]))
            assert sr >= sl - 1e-9, "curve must be convex"
            if prev_slope is None:
                qs.append(sl)
            elif sl > prev_slope + 1e-12:
                # slope jump at the breakpoint: affine conjugate piece
                x = self.xs[k]
                pieces.append(Polynomial([-self.g(x), x]))
                qs.append(sl)
            if sr > sl + 1e-12:
                coef = P.coef
                a2 = coef[2] if len(coef) > 2 else 0.0
                a1 = coef[1] if len(coef) > 1 else 0.0
                a0 = coef[0]
                # quadratic piece: c(q) = (q - a1)^2 / (4 a2) - a0
                pieces.append(Polynomial([a1 * a1 / (4 * a2) - a0, -2 * a1 / (4 * a2), 1.0 / (4 * a2)]))
                qs.append(sr)
            prev_slope = sr
        pieces.append(Polynomial([-g1, 1.0]))  # q >= g'(1-): maximizer p = 1
        return PiecewisePolyConjugate(np.asarray(qs), pieces, self)

    def descriptor(self) -> dict:
        return {
            "family": "piecewise_poly",
            "breakpoints": list(self.xs),
            "coefficients": [list(P.coef) for P in self.polys],
        }


class PiecewisePolyConjugate(Conjugate1D):
    def __init__(self, qs, pieces, curve):
        self.qs = qs
        self.pieces = pieces  # len(qs) + 1 pieces, outer two affine
        self.curve = curve

    def _piece(self, q):
        # side="left" resolves kinks of c to the left piece, matching the
        # leftmost-maximizer convention used by the price solvers
        return int(np.searchsorted(self.qs, q, side="left"))

    def c(self, q):
        return float(self.pieces[self._piece(q)](q))

    def dc(self, q):
        return float(min(max(self.pieces[self._piece(q)].deriv()(q), 0.0), 1.0))


def brier_curve(scale: float = 1.0) -> PiecewisePolyCurve:
    """Quadratic-score curve g(p) = scale * (p^2 - p); liquidity 2 * scale."""
    assert scale > 0
    crv = PiecewisePolyCurve([0.0, 1.0], [Polynomial([0.0, -scale, scale])])
    crv._brier_scale = scale
    return crv


class LmsrCurve(Curve1D):
    """Two-outcome LMSR shape g(p) = b (p log p + (1-p) log(1-p))."""

    pseudobarrier = True

    def __init__(self, b: float):
        assert b > 0, "b must be positive"
        self.b = b

    def g(self, p):
        return float(self.b * (xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)))

    def dg(self, p):
        return float(self.b * (np.log(p) - np.log1p(-p)))

    def d2g(self, p):
        return float(self.b / (p * (1.0 - p)))

    def conjugate(self):
        return _LmsrConjugate(self.b)

    def descriptor(self):
        return {"family": "lmsr", "b": self.b}


class _LmsrConjugate(Conjugate1D):
    def __init__(self, b):
        self.b = b

    def c(self, q):
        return float(self.b * np.logaddexp(0.0, q / self.b))

    def dc(self, q):
        return float(expit(q / self.b))


class UniswapV2Curve(Curve1D):
    """Constant-product shape g(p) = -2 a sqrt(p (1-p)); reserves x1 x2 = a^2."""

    def __init__(self, alpha: float):
        assert alpha >= 0
        self.alpha = alpha

    @property
    def pseudobarrier(self):
        return self.alpha > 0

    def g(self, p):
        return float(-2.0 * self.alpha * math.sqrt(max(p * (1.0 - p), 0.0)))

    def dg(self, p):
        w = math.sqrt(p * (1.0 - p))
        return float(self.alpha * (2.0 * p - 1.0) / w)

    def d2g(self, p):
        w = p * (1.0 - p)
        return float(self.alpha / (2.0 * w ** 1.5))

    def conjugate(self):
        return _V2Conjugate(self.alpha)

    def descriptor(self):
        return {"family": "uniswap_v2", "alpha": self.alpha}


class _V2Conjugate(Conjugate1D):
    def __init__(self, alpha):
        self.alpha = alpha

    def c(self, q):
        return float(0.5 * (q + math.hypot(2.0 * self.alpha, q)))

    def dc(self, q):
        return float(0.5 * (1.0 + q / math.hypot(2.0 * self.alpha, q)))


class BucketCurve(Curve1D):
    """Liquidity of a base curve restricted to [a, b], scaled by `weight`.

    The base maker's liquidity profile is zeroed outside [a, b] and the
    resulting curve renormalized to g(0) = g(1) = 0, giving a maker whose
    slope is affine outside the bucket and matches the base inside.
    """

    pseudobarrier = False

    def __init__(self, base: Curve1D, a: float, b: float, weight: float = 1.0):
        assert 0.0 < a < b < 1.0 and weight >= 0
        self.base, self.a, self.b, self.weight = base, a, b, weight
        self._ga, self._gb = base.g(a), base.g(b)
        self._da, self._db = base.dg(a), base.dg(b)
        # slopes of the affine tails
        self._lo = self._ga - self._gb - self._da * (a - 1.0) + self._db * (b - 1.0)
        self._hi = self._ga - self._gb - a * self._da + b * self._db

    def g(self, p):
        a, b, w = self.a, self.b, self.weight
        if p <= a:
            val = p * self._lo
        elif p >= b:
            val = (p - 1.0) * self._hi
        else:
            val = (
                self.base.g(p)
                + self._ga * (p - 1.0)
                - p * self._gb
                - self.a * self._da * (p - 1.0)
                + p * self._db * (b - 1.0)
            )
        return float(w * val)

    def dg(self, p):
        a, b, w = self.a, self.b, self.weight
        if p < a:
            val = self._lo
        elif p > b:
            val = self._hi
        else:
            val = self.base.dg(p) + self._ga - self._gb - a * self._da + self._db * (b - 1.0)
        return float(w * val)

    def d2g(self, p):
        if self.a < p < self.b:
            return float(self.weight * self.base.d2g(p))
        return 0.0

    def descriptor(self):
        short = None
        if isinstance(self.base, LmsrCurve) and self.base.b == 1.0:
            short = "lmsr_bucket"
        elif isinstance(self.base, UniswapV2Curve) and self.base.alpha == 1.0:
            short = "v3_bucket"
        elif getattr(self.base, "_brier_scale", None) == 1.0:
            short = "brier_bucket"
        if short is not None:
            return {"family": short, "a": self.a, "b": self.b, "alpha": self.weight}
        return {"family": "bucket", "base": self.base.descriptor(), "a": self.a, "b": self.b, "weight": self.weight}


class SoftBucketCurve(Curve1D):
    """Liquidity f(p) * 2 (p (1-p))^{-3/2} with f piecewise linear on knots.

    `knots` are the interior knots a_1 = 0 < ... < a_k = 1 and `weights` the
    liquidity heights at those knots; f interpolates them linearly.  The double
    integral has a closed form: with w = sqrt(p (1-p)) and base profile
    lb = 2 w^{-3},
        int lb dp        = 4 (2p - 1) / w
        int p lb dp      = 4 sqrt(p / (1-p))
        int^2 lb dp      = -8 w
        int^2 p lb dp    = -4 w + 2 asin(2p - 1)
    so no quadrature is needed.
    """

    pseudobarrier = False

    def __init__(self, knots, weights):
        knots = np.asarray(knots, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if len(knots) == len(weights) + 2:
            # outer knots below 0 / above 1 carry no mass on [0, 1]
            knots = knots[1:-1]
        assert len(knots) == len(weights) >= 2
        assert abs(knots[0]) < _TINY and abs(knots[-1] - 1.0) < _TINY
        assert np.all(np.diff(knots) > 0) and np.all(weights >= 0)
        self.knots, self.weights = knots, weights
        # per-interval affine pieces f = u + v p
        v = np.diff(weights) / np.diff(knots)
        u = weights[:-1] - v * knots[:-1]
        self._u, self._v = u, v
        # chain antiderivative constants; anchor at the piece containing 1/2
        m = len(u)
        j0 = min(max(int(np.searchsorted(knots, 0.5, side="right")) - 1, 0), m - 1)
        CA = np.zeros(m)
        CB = np.zeros(m)
        CA[j0] = -(u[j0] * self._I0(0.5) + v[j0] * self._I1(0.5))
        for j in range(j0 + 1, m):
            t = knots[j]
            CA[j] = (u[j - 1] - u[j]) * self._I0(t) + (v[j - 1] - v[j]) * self._I1(t) + CA[j - 1]
        for j in range(j0 - 1, -1, -1):
            t = knots[j + 1]
            CA[j] = (u[j + 1] - u[j]) * self._I0(t) + (v[j + 1] - v[j]) * self._I1(t) + CA[j + 1]
        self._CA = CA
        CB[j0] = -(u[j0] * self._J0(0.5) + v[j0] * self._J1(0.5) + CA[j0] * 0.5)
        for j in range(j0 + 1, m):
            t = knots[j]
            CB[j] = self._B_raw(j - 1, t) + CB[j - 1] - self._B_raw(j, t)
        for j in range(j0 - 1, -1, -1):
            t = knots[j + 1]
            CB[j] = self._B_raw(j + 1, t) + CB[j + 1] - self._B_raw(j, t)
        self._CB = CB
        b0 = self._B(0.0)
        b1 = self._B(1.0)
        self._b0, self._slope = b0, b1 - b0

    @staticmethod
    def _I0(p):
        return 4.0 * (2.0 * p - 1.0) / math.sqrt(p * (1.0 - p))

    @staticmethod
    def _I1(p):
        return 4.0 * math.sqrt(p / (1.0 - p))

    @staticmethod
    def _J0(p):
        return -8.0 * math.sqrt(p * (1.0 - p))

    @staticmethod
    def _J1(p):
        return -4.0 * math.sqrt(p * (1.0 - p)) + 2.0 * math.asin(2.0 * p - 1.0)

    def _piece(self, p):
        j = int(np.searchsorted(self.knots, p, side="right")) - 1
        return min(max(j, 0), len(self._u) - 1)

    def _B_raw(self, j, p):
        return self._u[j] * self._J0(p) + self._v[j] * self._J1(p) + self._CA[j] * p

    def _B(self, p):
        j = self._piece(p)
        return self._B_raw(j, p) + self._CB[j]

    def f(self, p):
        return float(np.interp(p, self.knots, self.weights))

    def g(self, p):
        return float(self._B(p) - self._b0 - self._slope * p)

    def dg(self, p):
        j = self._piece(p)
        A = self._u[j] * self._I0(p) + self._v[j] * self._I1(p) + self._CA[j]
        return float(A - self._slope)

    def d2g(self, p):
        return float(self.f(p) * 2.0 * (p * (1.0 - p)) ** -1.5)

    def descriptor(self):
        return {"family": "soft_bucket", "knots": list(self.knots), "weights": list(self.weights)}


class PiecewiseLinearCurve(Curve1D):
    """Sum of weighted one-kink curves with kinks at interior grid prices.

    The j-th elementary curve has slope a_j - 1 left of a_j and slope a_j to
    the right; its maker quotes price a_j for every state inside its capacity.
    """

    pseudobarrier = False

    def __init__(self, grid, weights):
        grid = np.asarray(grid, dtype=float)
        weights = np.asarray(weights, dtype=float)
        assert grid.ndim == 1 and len(grid) == len(weights) > 0
        assert np.all(np.diff(grid) > 0) and grid[0] > 0 and grid[-1] < 1
        assert np.all(weights >= 0)
        self.grid, self.weights = grid, weights

    def g(self, p):
        a, w = self.grid, self.weights
        return float(np.sum(np.where(a >= p, (a - 1.0) * p, a * (p - 1.0)) * w))

    def dg(self, p):
        a, w = self.grid, self.weights
        at = np.abs(a - p) < _TINY
        slopes = np.where(a > p, a - 1.0, a)
        slopes = np.where(at, a - 0.5, slopes)
        return float(np.sum(slopes * w))

    def d2g(self, p):
        return 0.0

    def descriptor(self):
        return {"family": "piecewise_linear", "grid": list(self.grid), "weights": list(self.weights)}


class TabulatedLiquidityCurve(Curve1D):
    """Curve integrated numerically from liquidity samples on a grid.

    Integrals use composite Simpson in the substituted variable theta with
    p = sin^2(theta), which clusters nodes near the endpoints where liquidity
    profiles typically blow up.  Derivative/second-derivative queries
    interpolate the tabulated antiderivatives linearly, so accuracy is set by
    the grid resolution.
    """

    pseudobarrier = False

    def __init__(self, grid, values):
        from scipy.integrate import cumulative_simpson

        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        assert grid.ndim == 1 and grid.shape == values.shape and len(grid) >= 3
        assert np.all(np.diff(grid) > 0)
        assert abs(grid[0]) < 1e-9 or grid[0] > 0
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise DivergentIntegral("liquidity samples must be finite and nonnegative")
        self.grid, self.values = grid, values
        theta = np.arcsin(np.sqrt(np.clip(grid, 0.0, 1.0)))
        integrand = values * np.sin(2.0 * theta)  # dp = sin(2 theta) d theta
        A = cumulative_simpson(integrand, x=theta, initial=0.0)
        B = cumulative_simpson(A * np.sin(2.0 * theta), x=theta, initial=0.0)
        self._A, self._B = A, B
        self._chord = (B[-1] - B[0]) / (grid[-1] - grid[0])

    def g(self, p):
        B = np.interp(p, self.grid, self._B)
        return float(B - self._B[0] - self._chord * (p - self.grid[0]))

    def dg(self, p):
        return float(np.interp(p, self.grid, self._A) - self._chord)

    def d2g(self, p):
        return float(np.interp(p, self.grid, self.values))

    def descriptor(self):
        return {"family": "tabulated_liquidity", "grid": list(self.grid), "values": list(self.values)}


class SumCurve(Curve1D):
    def __init__(self, curves):
        terms = []
        for c in curves:
            terms.extend(c.terms if isinstance(c, SumCurve) else [c])
        assert terms
        self.terms = terms

    @property
    def pseudobarrier(self):
        return any(c.pseudobarrier for c in self.terms)

    def g(self, p):
        return sum(c.g(p) for c in self.terms)

    def dg(self, p):
        return sum(c.dg(p) for c in self.terms)

    def d2g(self, p):
        return sum(c.d2g(p) for c in self.terms)

    def descriptor(self):
        return {"family": "sum", "terms": [c.descriptor() for c in self.terms]}


class ShiftedCurve(Curve1D):
    """inner minus its chord, so g(0) = g(1) = 0."""

    def __init__(self, inner: Curve1D):
        self.inner = inner
        self._g0 = inner.g(0.0)
        self._g1 = inner.g(1.0)
        if not (math.isfinite(self._g0) and math.isfinite(self._g1)):
            raise VertexUnbounded("curve endpoint values are not finite")

    @property
    def pseudobarrier(self):
        return self.inner.pseudobarrier

    def g(self, p):
        return self.inner.g(p) - (1.0 - p) * self._g0 - p * self._g1

    def dg(self, p):
        return self.inner.dg(p) - (self._g1 - self._g0)

    def d2g(self, p):
        return self.inner.d2g(p)

    def descriptor(self):
        return {"family": "shifted", "inner": self.inner.descriptor()}


def normalize_curve(curve: Curve1D) -> Curve1D:
    g0, g1 = curve.g(0.0), curve.g(1.0)
    if not (math.isfinite(g0) and math.isfinite(g1)):
        raise VertexUnbounded("curve endpoint values are not finite")
    if abs(g0) <= _TINY and abs(g1) <= _TINY:
        return curve
    return ShiftedCurve(curve)


# ---------------------------------------------------------------------------
# n-asset generators
# ---------------------------------------------------------------------------


class Generator:
    """Convex nonpositive generator on the n-simplex, 1-homogeneously extended.

    value/grad accept any strictly positive vector x (grad is 0-homogeneous, so
    finite differencing off the simplex is legitimate); hessian returns the
    analytic Hessian of the extension at a simplex point, or None.
    """

    n: int
    is_pseudobarrier = False

    def value(self, x) -> float:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, p):
        return None

    def conjugate(self, q):
        """Closed-form (cost, maximizer) if the family has one, else None."""
        return None

    def vertex_values(self) -> np.ndarray:
        """G at the simplex vertices; raises VertexUnbounded if infinite."""
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError


class CurveGenerator(Generator):
    """Two-outcome generator G(p) = g(p_1) built from a scalar curve."""

    n = 2

    def __init__(self, curve: Curve1D):
        self.curve = curve

    @property
    def is_pseudobarrier(self):
        return self.curve.pseudobarrier

    def value(self, x):
        x = np.asarray(x, dtype=float)
        s = x.sum()
        return float(s * self.curve.g(x[0] / s))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        s = x.sum()
        p = x[0] / s
        gp = self.curve.g(p)
        dp = self.curve.dg(p)
        base = gp - p * dp
        return np.array([dp + base, base])

    def hessian(self, p):
        p = np.asarray(p, dtype=float)
        s = p.sum()
        t = p[0] / s
        v = np.array([1.0 - t, -t])
        return self.curve.d2g(t) / s * np.outer(v, v)

    def conjugate(self, q):
        try:
            conj = self.curve.conjugate()
        except UnsupportedFamily:
            return None
        t = q[0] - q[1]
        cost = conj.c(t) + q[1]
        p1 = conj.dc(t)
        return cost, np.array([p1, 1.0 - p1])

    def vertex_values(self):
        g0, g1 = self.curve.g(0.0), self.curve.g(1.0)
        if not (math.isfinite(g0) and math.isfinite(g1)):
            raise VertexUnbounded("curve endpoint values are not finite")
        return np.array([g1, g0])

    def descriptor(self):
        return self.curve.descriptor()


class LmsrGenerator(Generator):
    """G(p) = b * sum_i p_i log p_i."""

    is_pseudobarrier = True

    def __init__(self, b: float, n: int):
        assert b > 0 and n >= 2
        self.b, self.n = b, n

    def value(self, x):
        x = np.asarray(x, dtype=float)
        s = x.sum()
        return float(self.b * np.sum(xlogy(x, x / s)))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return self.b * np.log(x / x.sum())

    def hessian(self, p):
        p = np.asarray(p, dtype=float)
        s = p.sum()
        return self.b * (np.diag(s / p) - np.ones((self.n, self.n))) / s

    def conjugate(self, q):
        z = np.asarray(q, dtype=float) / self.b
        m = z.max()
        e = np.exp(z - m)
        cost = self.b * (m + np.log(e.sum()))
        return cost, e / e.sum()

    def vertex_values(self):
        return np.zeros(self.n)

    def descriptor(self):
        return {"family": "lmsr", "b": self.b, "n": self.n}


class ConstantProductGenerator(Generator):
    """G(p) = -n (alpha * prod_i p_i)^{1/n}; reserves satisfy prod x_i = alpha."""

    is_pseudobarrier = True

    def __init__(self, n: int, alpha: float = 1.0):
        assert n >= 2 and alpha > 0
        self.n, self.alpha = n, alpha

    def _gm(self, x):
        return math.exp((math.log(self.alpha) + np.sum(np.log(x))) / self.n)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(-self.n * self._gm(x))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return -self._gm(x) / x

    def hessian(self, p):
        p = np.asarray(p, dtype=float)
        gm = self._gm(p)
        inv = 1.0 / p
        return gm * (np.diag(inv * inv) - np.outer(inv, inv) / self.n)

    def conjugate(self, q):
        if self.n != 2:
            return None
        q = np.asarray(q, dtype=float)
        t = q[0] - q[1]
        r = math.hypot(2.0 * math.sqrt(self.alpha), t)
        cost = 0.5 * (t + r) + q[1]
        p1 = 0.5 * (1.0 + t / r)
        return cost, np.array([p1, 1.0 - p1])

    def vertex_values(self):
        return np.zeros(self.n)

    def descriptor(self):
        return {"family": "constant_product", "n": self.n, "alpha": self.alpha}


class PairConstantProductGenerator(Generator):
    """G(p) = -2 alpha sqrt(p_i p_j): constant-product liquidity on one pair."""

    def __init__(self, n: int, i: int, j: int, alpha: float = 1.0):
        assert n >= 2 and 0 <= i < j < n and alpha >= 0
        self.n, self.i, self.j, self.alpha = n, i, j, alpha

    @property
    def is_pseudobarrier(self):
        # for n > 2 the generator is flat in the remaining coordinates
        return self.n == 2 and self.alpha > 0

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(-2.0 * self.alpha * math.sqrt(x[self.i] * x[self.j]))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(self.n)
        r = math.sqrt(x[self.i] * x[self.j])
        out[self.i] = -self.alpha * r / x[self.i]
        out[self.j] = -self.alpha * r / x[self.j]
        return out

    def hessian(self, p):
        p = np.asarray(p, dtype=float)
        i, j = self.i, self.j
        r = math.sqrt(p[i] * p[j])
        H = np.zeros((self.n, self.n))
        H[i, i] = self.alpha * r / (2.0 * p[i] ** 2)
        H[j, j] = self.alpha * r / (2.0 * p[j] ** 2)
        H[i, j] = H[j, i] = -self.alpha / (2.0 * r)
        return H

    def vertex_values(self):
        return np.zeros(self.n)

    def descriptor(self):
        return {"family": "pair_constant_product", "n": self.n, "i": self.i, "j": self.j, "alpha": self.alpha}


class SumGenerator(Generator):
    def __init__(self, terms):
        flat = []
        for t in terms:
            flat.extend(t.terms if isinstance(t, SumGenerator) else [t])
        assert flat
        self.terms = flat
        self.n = flat[0].n
        assert all(t.n == self.n for t in flat)

    @property
    def is_pseudobarrier(self):
        return any(t.is_pseudobarrier for t in self.terms)

    def value(self, x):
        return sum(t.value(x) for t in self.terms)

    def grad(self, x):
        return np.sum([t.grad(x) for t in self.terms], axis=0)

    def hessian(self, p):
        hs = [t.hessian(p) for t in self.terms]
        if any(h is None for h in hs):
            return None
        return np.sum(hs, axis=0)

    def vertex_values(self):
        return np.sum([t.vertex_values() for t in self.terms], axis=0)

    def descriptor(self):
        return {"family": "sum", "terms": [t.descriptor() for t in self.terms]}


class TrivialGenerator(Generator):
    """The zero generator: no liquidity, liability always zero."""

    def __init__(self, n: int):
        self.n = n

    def value(self, x):
        return 0.0

    def grad(self, x):
        return np.zeros(self.n)

    def hessian(self, p):
        return np.zeros((self.n, self.n))

    def vertex_values(self):
        return np.zeros(self.n)

    def descriptor(self):
        return {"family": "trivial", "n": self.n}


class ShiftedGenerator(Generator):
    """inner minus the linear function <x, shift>; zero at the vertices."""

    def __init__(self, inner: Generator, shift):
        self.inner = inner
        self.shift = np.asarray(shift, dtype=float)
        self.n = inner.n

    @property
    def is_pseudobarrier(self):
        return self.inner.is_pseudobarrier

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.inner.value(x) - float(x @ self.shift)

    def grad(self, x):
        return self.inner.grad(x) - self.shift

    def hessian(self, p):
        return self.inner.hessian(p)

    def conjugate(self, q):
        res = self.inner.conjugate(np.asarray(q, dtype=float) + self.shift)
        return res

    def vertex_values(self):
        return self.inner.vertex_values() - self.shift

    def descriptor(self):
        return {"family": "shifted", "inner": self.inner.descriptor(), "shift": list(self.shift)}


# ---------------------------------------------------------------------------
# JSON descriptors
# ---------------------------------------------------------------------------


def curve_from_descriptor(d: dict) -> Curve1D:
    fam = d.get("family")
    if fam == "lmsr":
        return LmsrCurve(d["b"])
    if fam == "uniswap_v2":
        return UniswapV2Curve(d["alpha"])
    if fam == "brier":
        return brier_curve(d.get("scale", 1.0))
    if fam == "piecewise_poly":
        return PiecewisePolyCurve(d["breakpoints"], d["coefficients"])
    if fam == "piecewise_liquidity":
        return PiecewisePolyCurve.from_liquidity(d["breakpoints"], d["coefficients"])
    if fam == "v3_bucket":
        return BucketCurve(UniswapV2Curve(1.0), d["a"], d["b"], d.get("alpha", 1.0))
    if fam == "lmsr_bucket":
        return BucketCurve(LmsrCurve(1.0), d["a"], d["b"], d.get("alpha", 1.0))
    if fam == "brier_bucket":
        return BucketCurve(brier_curve(1.0), d["a"], d["b"], d.get("alpha", 1.0))
    if fam == "bucket":
        return BucketCurve(curve_from_descriptor(d["base"]), d["a"], d["b"], d.get("weight", 1.0))
    if fam == "soft_bucket":
        return SoftBucketCurve(d["knots"], d["weights"])
    if fam == "piecewise_linear":
        return PiecewiseLinearCurve(d["grid"], d["weights"])
    if fam == "tabulated_liquidity":
        return TabulatedLiquidityCurve(d["grid"], d["values"])
    if fam == "sum":
        return SumCurve([curve_from_descriptor(t) for t in d["terms"]])
    if fam == "shifted":
        return ShiftedCurve(curve_from_descriptor(d["inner"]))
    raise UnknownKind(f"unknown curve family {fam!r}")


_CURVE_FAMILIES = {
    "uniswap_v2", "brier", "piecewise_poly", "piecewise_liquidity",
    "v3_bucket", "lmsr_bucket", "brier_bucket", "bucket", "soft_bucket",
    "piecewise_linear", "tabulated_liquidity", "shifted_curve",
}


def generator_from_descriptor(d: dict, n: int | None = None) -> Generator:
    fam = d.get("family")
    if fam == "lmsr":
        return LmsrGenerator(d["b"], d.get("n", n or 2))
    if fam == "constant_product":
        return ConstantProductGenerator(d.get("n", n or 2), d.get("alpha", 1.0))
    if fam == "pair_constant_product":
        return PairConstantProductGenerator(d.get("n", n or 2), d["i"], d["j"], d.get("alpha", 1.0))
    if fam == "trivial":
        return TrivialGenerator(d.get("n", n or 2))
    if fam == "sum":
        terms = [generator_from_descriptor(t, n) for t in d["terms"]]
        return SumGenerator(terms)
    if fam == "shifted":
        return ShiftedGenerator(generator_from_descriptor(d["inner"], n), d["shift"])
    if fam in _CURVE_FAMILIES:
        if n not in (None, 2):
            raise UnknownKind(f"curve family {fam!r} only supports two outcomes")
        return CurveGenerator(curve_from_descriptor(d))
    raise UnknownKind(f"unknown generator family {fam!r}")
