"""Command-line interface: scenario replay, trace reports, equivalence suite.

`run` replays a JSON scenario deterministically and writes a JSONL trace with
one line per event (result plus full state snapshot), numbers rounded to 12
significant digits so reruns are byte-identical.  `report` derives CSV/JSON
summaries from a trace.  `equivalence` runs the randomized cross-check suite.

Exit codes: 0 success, 1 market/validation failure, 2 malformed input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .convex_core import directional_liquidity, liquidity_matrix
from .engine import (
    MarketState,
    NormFee,
    PositivePartFee,
    audit_budget_balance,
    initialize,
)
from .equivalence import equivalence_suite
from .errors import ParmmError, UnknownKind
from .generators import (
    BucketCurve,
    CurveGenerator,
    LmsrCurve,
    UniswapV2Curve,
    brier_curve,
    generator_from_descriptor,
)
from .two_asset import liability2


def _round(obj):
    """Round floats to 12 significant digits, recursively."""
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, (np.floating,)):
        return float(f"{float(obj):.12g}")
    if isinstance(obj, np.ndarray):
        return [_round(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def _fee_scheme(name: str | None, beta: float):
    if name is None or beta == 0:
        return None
    if name == "norm-l1":
        return NormFee(beta, "l1")
    if name == "norm-l2":
        return NormFee(beta, "l2")
    if name == "positive-part":
        return PositivePartFee(beta)
    raise UnknownKind(f"unknown fee scheme {name!r}")


def _as_price(value, n):
    if np.ndim(value) == 0:
        assert n == 2, "scalar prices only make sense for two outcomes"
        return np.array([float(value), 1.0 - float(value)])
    return np.asarray(value, dtype=float)


def run_scenario(scenario: dict, mode=None, fee_name=None, beta=None):
    """Replay a scenario; returns the list of trace records."""
    n = int(scenario.get("n", 2))
    mode = mode or scenario.get("mode", "strict")
    if mode not in ("strict", "lenient"):
        raise UnknownKind(f"unknown mode {mode!r}")
    fee_cfg = scenario.get("fee", {})
    fee_name = fee_name or fee_cfg.get("scheme")
    beta = beta if beta is not None else fee_cfg.get("beta", 0.0)
    fee = _fee_scheme(fee_name, beta)

    trace = [{"meta": {"version": __version__, "n": n, "mode": mode,
                       "fee": {"scheme": fee_name, "beta": beta} if fee else None}}]
    state: MarketState | None = None
    last_receipt = None
    for idx, ev in enumerate(scenario["events"]):
        op = ev["op"]
        result: dict = {}
        if op == "initialize":
            gen = generator_from_descriptor(ev["generator"], n)
            kwargs = {"fee": fee, "strict": mode == "strict"}
            if "price" in ev:
                state = initialize(gen, price=_as_price(ev["price"], n), **kwargs)
            else:
                state = initialize(gen, liability=np.asarray(ev["liability"], float), **kwargs)
            result = {"price": state.price}
        elif op == "register_lp":
            result = {"lp": state.register_lp()}
        elif op == "modify_liquidity":
            gen = generator_from_descriptor(ev["generator"], n)
            deposit = state.modify_liquidity(int(ev["lp"]), gen)
            result = {"lp": int(ev["lp"]), "deposit": deposit}
        elif op == "execute_trade":
            if "target_price" in ev:
                receipt = state.execute_trade(target_price=_as_price(ev["target_price"], n))
            else:
                receipt = state.execute_trade(bundle=np.asarray(ev["bundle"], float))
            last_receipt = receipt
            result = {
                "bundle": receipt.bundle,
                "parts": {str(k): v for k, v in receipt.parts.items()},
                "price_after": receipt.price_after,
                "trader_fee": receipt.trader_fee,
                "lp_fees": {str(k): v for k, v in receipt.lp_fees.items()},
            }
        elif op == "quote_completion":
            full, cash = state.quote_completion(np.asarray(ev["bundle"], float))
            result = {"bundle": full, "cash": cash}
        elif op == "query":
            what = ev.get("what")
            if what == "price":
                result = {"price": state.price}
            elif what == "liabilities":
                result = {"liabilities": {str(r.lp_id): r.liability for r in state.records}}
            elif what == "fees":
                result = {
                    "fees": {
                        str(r.lp_id): {"cash": r.cash_fees, "bundle": r.bundle_fees}
                        for r in state.records
                    }
                }
            elif what == "liquidity":
                result = {
                    "liquidity": {
                        str(r.lp_id): liquidity_matrix(r.generator, state.price)
                        for r in state.records
                    }
                }
            elif what == "no_liability":
                result = {
                    "worst_liability": {
                        str(r.lp_id): state.audit_no_liability(r.lp_id)
                        for r in state.records
                    }
                }
            elif what == "budget_imbalance":
                assert last_receipt is not None, "no trade executed yet"
                result = {"imbalance": audit_budget_balance(state.fee, last_receipt)}
            else:
                raise UnknownKind(f"unknown query {what!r}")
        else:
            raise UnknownKind(f"unknown op {op!r}")
        trace.append({"event": idx, "op": op, "result": result, "state": state.snapshot()})
    return trace


def _write_trace(trace, out):
    for rec in trace:
        out.write(json.dumps(_round(rec), separators=(",", ":")) + "\n")


def _load_trace(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def report_price_path(trace, out):
    states = [rec for rec in trace if "state" in rec]
    n = len(states[0]["state"]["price"])
    w = csv.writer(out)
    w.writerow(["event"] + [f"p{i + 1}" for i in range(n)])
    for rec in states:
        w.writerow([rec["event"]] + rec["state"]["price"])


def report_liquidity_profile(trace, out, grid=99):
    last = [rec for rec in trace if "state" in rec][-1]["state"]
    n = len(last["price"])
    if n != 2:
        raise UnknownKind("liquidity profiles are only defined for two outcomes")
    gens = {lp["id"]: generator_from_descriptor(lp["generator"], 2) for lp in last["lps"]}
    v = np.array([1.0, -1.0])
    w = csv.writer(out)
    w.writerow(["p"] + [f"lp{k}" for k in gens] + ["aggregate"])
    for p1 in (np.arange(grid) + 0.5) / grid:
        p = np.array([p1, 1.0 - p1])
        vals = [directional_liquidity(G, p, v) for G in gens.values()]
        w.writerow(_round([p1] + vals + [sum(vals)]))


def _table1_oracle(base: str, a: float, b: float, p: float, weight: float):
    """Independent closed forms for bucketed liabilities (score differences of
    the base maker, clamped to the bucket)."""
    pc = min(max(p, a), b)
    if base == "v2":
        q1 = -np.sqrt((1 - pc) / pc) + np.sqrt((1 - b) / b)
        q2 = -np.sqrt(pc / (1 - pc)) + np.sqrt(a / (1 - a))
    elif base == "lmsr":
        q1 = np.log(pc / b)
        q2 = np.log((1 - pc) / (1 - a))
    elif base == "brier":
        q1 = -((1 - pc) ** 2) + (1 - b) ** 2
        q2 = -(pc ** 2) + a ** 2
    else:  # pragma: no cover
        raise UnknownKind(base)
    return weight * np.array([q1, q2])


def report_table1_check(out, samples=200, seed=7):
    """Bucketed curves against the closed-form liability columns."""
    rng = np.random.default_rng(seed)
    bases = {
        "v2": UniswapV2Curve(1.0),
        "lmsr": LmsrCurve(1.0),
        "brier": brier_curve(1.0),
    }
    w = csv.writer(out)
    w.writerow(["base", "max_deviation"])
    worst_all = 0.0
    for name, base in bases.items():
        worst = 0.0
        for _ in range(samples):
            a = float(rng.uniform(0.05, 0.6))
            b = float(rng.uniform(a + 0.1, 0.95))
            weight = float(rng.uniform(0.5, 2.0))
            crv = BucketCurve(base, a, b, weight)
            for p in (rng.uniform(0.01, a), rng.uniform(a, b), rng.uniform(b, 0.99)):
                got = liability2(crv, float(p))
                want = _table1_oracle(name, a, b, float(p), weight)
                worst = max(worst, float(np.max(np.abs(got - want))))
        w.writerow([name, f"{worst:.3e}"])
        worst_all = max(worst_all, worst)
    return worst_all


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser():
    ap = argparse.ArgumentParser(prog="parmm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="replay a scenario file")
    run_p.add_argument("scenario")
    run_p.add_argument("--out", default=None, help="trace path (default stdout)")
    run_p.add_argument("--mode", choices=["strict", "lenient"], default=None)
    run_p.add_argument("--beta", type=float, default=None)
    run_p.add_argument("--fee", choices=["norm-l1", "norm-l2", "positive-part"], default=None)

    rep_p = sub.add_parser("report", help="summarize a trace")
    rep_p.add_argument("trace")
    rep_p.add_argument("--kind", required=True,
                       choices=["price-path", "liquidity-profile", "table1-check", "equivalence"])
    rep_p.add_argument("--grid", type=int, default=99)

    eq_p = sub.add_parser("equivalence", help="run the randomized cross-check suite")
    eq_p.add_argument("--n", type=int, default=2)
    eq_p.add_argument("--trials", type=int, default=100)
    eq_p.add_argument("--seed", type=int, default=0)
    eq_p.add_argument("--out", default=None)
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            with open(args.scenario) as fh:
                scenario = json.load(fh)
            trace = run_scenario(scenario, args.mode, args.fee, args.beta)
            if args.out:
                with open(args.out, "w") as fh:
                    _write_trace(trace, fh)
            else:
                _write_trace(trace, sys.stdout)
            return 0
        if args.command == "report":
            if args.kind == "table1-check":
                worst = report_table1_check(sys.stdout)
                return 0 if worst <= 1e-9 else 1
            if args.kind == "equivalence":
                with open(args.trace) as fh:
                    report = json.load(fh)
                json.dump(_round(report), sys.stdout, indent=2)
                sys.stdout.write("\n")
                return 0 if report.get("pass") else 1
            trace = _load_trace(args.trace)
            if args.kind == "price-path":
                report_price_path(trace, sys.stdout)
            else:
                report_liquidity_profile(trace, sys.stdout, args.grid)
            return 0
        if args.command == "equivalence":
            report = equivalence_suite(args.n, args.trials, args.seed)
            payload = json.dumps(_round(report), indent=2) + "\n"
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(payload)
            else:
                sys.stdout.write(payload)
            return 0 if report["pass"] else 1
    except (UnknownKind, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParmmError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
