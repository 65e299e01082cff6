"""Market engine: parallel liquidity providers behind one coherent price.

Each LP posts a generator and holds the liability bundle its maker owes at the
shared market price.  Trades are net bundles against the aggregate maker (the
sum of generators); the engine splits every trade across LPs so each stays on
the zero level set of its own cost function.  Fees are tracked per LP and
never touch the pricing math.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .convex_core import (
    EPS,
    conjugate_value,
    liability_of,
    price_of,
)
from .errors import (
    LiabilityMismatch,
    NotLevelSet,
    NotPseudobarrier,
    UnknownKind,
)
from .generators import Generator, SumGenerator, TrivialGenerator

_LEVEL_TOL = 1e-8


# ---------------------------------------------------------------------------
# fee schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormFee:
    """Trader pays the cash amount beta * ||r||; LPs share it pro rata by the
    norm of their fill.  Budget balanced by construction."""

    beta: float
    norm: str = "l1"  # "l1" or "l2"

    def __post_init__(self):
        assert self.beta >= 0 and self.norm in ("l1", "l2")

    def _norm(self, r):
        return float(np.linalg.norm(r, 1 if self.norm == "l1" else 2))


@dataclass(frozen=True)
class PositivePartFee:
    """Trader pays the bundle beta * max(-r, 0); LP i receives
    beta * max(-r_i, 0).  Budget balanced for two outcomes, generally not for
    more: the per-LP positive parts can exceed the positive part of the sum."""

    beta: float

    def __post_init__(self):
        assert self.beta >= 0


def compute_fees(scheme, r, parts):
    """Fees for a net trade r split into per-LP fills.

    Returns (trader_fee, lp_fees): cash floats for NormFee, bundles for
    PositivePartFee.
    """
    r = np.asarray(r, dtype=float)
    if isinstance(scheme, NormFee):
        trader = scheme.beta * scheme._norm(r)
        norms = np.array([scheme._norm(ri) for ri in parts])
        total = norms.sum()
        if total <= 0.0:
            return 0.0, [0.0 for _ in parts]
        return trader, list(trader * norms / total)
    if isinstance(scheme, PositivePartFee):
        trader = scheme.beta * np.maximum(-r, 0.0)
        return trader, [scheme.beta * np.maximum(-np.asarray(ri, float), 0.0) for ri in parts]
    raise UnknownKind(f"unknown fee scheme {scheme!r}")


def audit_budget_balance(scheme, receipt):
    """Bundle by which LP fee income exceeds what the trader paid.

    Cash fees are lifted to the 1-direction (one unit of every outcome pays
    one unit of cash).  Zero for NormFee; can be strictly positive for
    PositivePartFee with three or more outcomes.
    """
    n = len(receipt.bundle)
    ones = np.ones(n)

    def lift(x):
        return x * ones if np.isscalar(x) or np.ndim(x) == 0 else np.asarray(x, float)

    total_lp = sum(lift(f) for f in receipt.lp_fees.values())
    return total_lp - lift(receipt.trader_fee)


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------


@dataclass
class LpRecord:
    lp_id: int
    generator: Generator
    liability: np.ndarray
    cash_fees: float = 0.0
    bundle_fees: np.ndarray | None = None


@dataclass
class TradeReceipt:
    bundle: np.ndarray
    parts: dict  # lp_id -> fill bundle
    price_before: np.ndarray
    price_after: np.ndarray
    trader_fee: object  # float (cash) or ndarray (bundle)
    lp_fees: dict  # lp_id -> float or ndarray


class MarketState:
    """Protocol state: LP records, shared price, fee scheme.

    strict mode requires the aggregate generator to be a pseudobarrier (its
    gradient blows up at the boundary), which keeps every price query interior.
    """

    def __init__(self, generator: Generator, liability, fee=None, strict: bool = True, price_hint=None):
        generator = _as_generator(generator)
        n = generator.n
        q0 = np.zeros(n) if liability is None else np.asarray(liability, dtype=float)
        if strict and not generator.is_pseudobarrier:
            raise NotPseudobarrier("strict markets need a pseudobarrier generator")
        self.n = n
        self.fee = fee
        self.strict = strict
        self.records: list[LpRecord] = [LpRecord(0, generator, q0.copy(), 0.0, np.zeros(n))]
        p = price_of(self._aggregate(), q0, price_hint)
        if np.max(np.abs(liability_of(generator, p) - q0)) > 1e-8:
            raise LiabilityMismatch("q0 is not on the zero level set of the cost function")
        self.price = p

    # -- helpers ----------------------------------------------------------

    def _nontrivial(self):
        return [rec for rec in self.records if not isinstance(rec.generator, TrivialGenerator)]

    def _aggregate(self) -> Generator:
        gens = [rec.generator for rec in self._nontrivial()]
        if not gens:
            raise NotLevelSet("market holds no liquidity")
        return gens[0] if len(gens) == 1 else SumGenerator(gens)

    def total_liability(self) -> np.ndarray:
        return np.sum([rec.liability for rec in self.records], axis=0)

    def check_coherent(self, tol=1e-6) -> float:
        worst = 0.0
        for rec in self._nontrivial():
            dev = np.max(np.abs(rec.liability - liability_of(rec.generator, self.price)))
            worst = max(worst, float(dev))
        assert worst <= tol, f"incoherent state: liability deviation {worst:.3e}"
        return worst

    # -- operations -------------------------------------------------------

    def register_lp(self) -> int:
        lp_id = len(self.records)
        self.records.append(LpRecord(lp_id, TrivialGenerator(self.n), np.zeros(self.n), 0.0, np.zeros(self.n)))
        return lp_id

    def modify_liquidity(self, lp_id: int, generator: Generator) -> np.ndarray:
        """Swap an LP's generator; returns the bundle the LP must deposit
        (negative components are withdrawals)."""
        from .convex_core import normalize_generator

        rec = self.records[lp_id]
        generator = _as_generator(generator)
        assert generator.n == self.n
        if not isinstance(generator, TrivialGenerator):
            generator = normalize_generator(generator)
        old_gen = rec.generator
        rec.generator = generator
        try:
            self._aggregate()
        except NotLevelSet:
            rec.generator = old_gen
            raise
        if self.strict and not self._aggregate().is_pseudobarrier:
            rec.generator = old_gen
            raise NotPseudobarrier("modification would remove the last pseudobarrier")
        target = (
            np.zeros(self.n)
            if isinstance(generator, TrivialGenerator)
            else liability_of(generator, self.price)
        )
        deposit = rec.liability - target
        rec.liability = target
        return deposit

    def quote_completion(self, partial) -> tuple[np.ndarray, float]:
        """Complete a partial bundle into a valid net trade by adding cash in
        the 1-direction; returns (full bundle, cash added per outcome)."""
        partial = np.asarray(partial, dtype=float)
        agg = self._aggregate()
        q = self.total_liability()
        c0 = conjugate_value(agg, q, self.price).cost
        c1 = conjugate_value(agg, q + partial, self.price).cost
        beta = c0 - c1
        return partial + beta * np.ones(self.n), float(beta)

    def execute_trade(self, bundle=None, target_price=None) -> TradeReceipt:
        agg = self._aggregate()
        q = self.total_liability()
        if bundle is None:
            assert target_price is not None
            p_new = np.asarray(target_price, dtype=float)
            p_new = p_new / p_new.sum()
            bundle = liability_of(agg, p_new) - q
        else:
            bundle = np.asarray(bundle, dtype=float)
            c0 = conjugate_value(agg, q, self.price).cost
            res = conjugate_value(agg, q + bundle, self.price)
            if abs(res.cost - c0) > _LEVEL_TOL * max(1.0, float(np.abs(q).max())):
                raise NotLevelSet(f"trade moves the aggregate cost by {res.cost - c0:.3e}")
            p_new = price_of(agg, q + bundle, self.price)
        nontrivial = self._nontrivial()
        parts = {}
        fills = []
        total = np.zeros(self.n)
        for rec in nontrivial:
            fill = liability_of(rec.generator, p_new) - rec.liability
            parts[rec.lp_id] = fill
            total += fill
        residual = bundle - total
        for rec in nontrivial:
            parts[rec.lp_id] = parts[rec.lp_id] + residual / len(nontrivial)
        for rec in self.records:
            if rec.lp_id not in parts:
                parts[rec.lp_id] = np.zeros(self.n)
        trader_fee, lp_fee_list = (0.0, [0.0] * len(self.records))
        lp_fees = {}
        if self.fee is not None:
            ordered = [parts[rec.lp_id] for rec in self.records]
            trader_fee, lp_fee_list = compute_fees(self.fee, bundle, ordered)
        receipt = TradeReceipt(
            bundle=bundle,
            parts=parts,
            price_before=self.price.copy(),
            price_after=p_new.copy(),
            trader_fee=trader_fee,
            lp_fees={rec.lp_id: lp_fee_list[k] for k, rec in enumerate(self.records)},
        )
        for rec in self.records:
            rec.liability = rec.liability + parts[rec.lp_id]
            fee = receipt.lp_fees[rec.lp_id]
            if np.isscalar(fee) or np.ndim(fee) == 0:
                rec.cash_fees += float(fee)
            else:
                rec.bundle_fees = rec.bundle_fees + np.asarray(fee, float)
        self.price = p_new
        return receipt

    def audit_no_liability(self, lp_id: int, grid: int = 10) -> float:
        """Worst-case component of the LP's liability over a price grid; a
        nonpositive generator never leaves the LP owing the trader, so the
        audit value should never exceed ~0."""
        rec = self.records[lp_id]
        if isinstance(rec.generator, TrivialGenerator):
            return 0.0
        worst = -np.inf
        for p in _simplex_grid(self.n, grid):
            worst = max(worst, float(liability_of(rec.generator, p).max()))
        return worst

    def snapshot(self) -> dict:
        return {
            "price": list(self.price),
            "lps": [
                {
                    "id": rec.lp_id,
                    "generator": rec.generator.descriptor(),
                    "liability": list(rec.liability),
                    "cash_fees": rec.cash_fees,
                    "bundle_fees": list(rec.bundle_fees) if rec.bundle_fees is not None else None,
                }
                for rec in self.records
            ],
        }


def _as_generator(g) -> Generator:
    if isinstance(g, Generator):
        return g
    from .generators import Curve1D, CurveGenerator

    if isinstance(g, Curve1D):
        return CurveGenerator(g)
    raise UnknownKind(f"not a generator: {g!r}")


def _simplex_grid(n: int, m: int):
    """Deterministic m^(n-1)-point grid of the relative interior, by stick
    breaking over an interior grid of (0, 1)^(n-1)."""
    u = (np.arange(m) + 0.5) / m
    for combo in product(u, repeat=n - 1):
        p = np.empty(n)
        rest = 1.0
        for i, t in enumerate(combo):
            p[i] = t * rest
            rest -= p[i]
        p[n - 1] = rest
        if p.min() > EPS:
            yield p


def initialize(generator, liability=None, price=None, fee=None, strict=True) -> MarketState:
    """Open a market with one LP.  Supply either the opening liability q0
    (checked against the zero level set) or an opening price."""
    generator = _as_generator(generator)
    hint = None
    if liability is None:
        assert price is not None
        hint = np.asarray(price, dtype=float)
        hint = hint / hint.sum()
        liability = liability_of(generator, hint)
    return MarketState(generator, liability, fee=fee, strict=strict, price_hint=hint)
