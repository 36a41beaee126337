"""Command-line interface: pricing, simulation, distribution dumps, calibration.

All commands read market data from a JSON file (or the bundled fixture),
write a JSON result (stdout or --out) and optional CSV plot data.  Exit
codes: 0 success, 2 usage/schema errors, 3 numerical-quality failures.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .affine import ModelParams, ParamSegment, TimeChange
from .calibration import CalibSpec, bootstrap_slopes, calibrate
from .config import RunConfig, set_config
from .errors import AjdCreditError, NumericalQuality, PoleCollision, SchemaError
from .largepool import lp_expected_loss, lp_tranche_put, solve_mu
from .lossdist import BasketState, default_count_distribution, expected_defaults, tranche_put
from .market import MarketFile, load_bundled_market, load_market
from .mc import (IndexCdsObserver, NtdObserver, SimConfig, SwaptionObserver,
                 TrancheObserver, estimate_prices)
from .pricers import (LegSchedule, TrancheSpec, price_cdo_tranche, price_index_cds,
                      price_ntd, quote_transform)
from .swaptions import SwaptionSpec, swaption_exact, swaption_fast_payer, swaption_fast_receiver

USAGE_EXIT = 2
NUMERICAL_EXIT = 3


def _load_json(path: str, what: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise SchemaError(path, f"{what} file not found")
    except json.JSONDecodeError as exc:
        raise SchemaError(path, f"invalid JSON: {exc}")


def _parse_params(doc: dict, market: MarketFile) -> tuple[ModelParams, TimeChange | None]:
    seg_keys = ("lambda_inf", "kappa", "sigma", "n", "gamma", "theta",
                "alpha", "beta", "xi", "zeta", "eta")
    if "segments" in doc:
        segments = tuple(
            ParamSegment(t_start=float(s.get("t_start", 0.0)),
                         t_end=(None if s.get("t_end") is None else float(s["t_end"])),
                         **{k: s[k] for k in seg_keys if k in s})
            for s in doc["segments"])
    else:
        segments = (ParamSegment(0.0, None,
                                 **{k: doc[k] for k in seg_keys if k in doc}),)
    model = ModelParams(float(doc["lambda0"]), segments, market.basket.jump_law)
    tc = None
    if "slopes" in doc:
        mats = [m.maturity for m in market.quotes.maturities]
        slopes = [float(a) for a in doc["slopes"]]
        tc = TimeChange(tuple(mats[: len(slopes) - 1]), tuple(slopes))
    return model, tc


def _resolve_tc(args, model, market, tc):
    if tc is not None and not args.bootstrap:
        return tc
    return bootstrap_slopes(model, market.quotes)


def _maturity(market: MarketFile, label: str) -> float:
    for mq in market.quotes.maturities:
        if mq.label == label:
            return mq.maturity
    try:
        return float(label)
    except ValueError:
        raise SchemaError("--maturity", f"unknown maturity {label!r}")


def _emit(result: dict, out: str | None) -> None:
    text = json.dumps(result, indent=2, sort_keys=True, default=float)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.12g}" if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--market", help="market JSON file (default: bundled iTraxx fixture)")
    p.add_argument("--params", required=True, help="model parameter JSON file")
    p.add_argument("--bootstrap", action="store_true",
                   help="re-solve time-change slopes from the index quotes")
    p.add_argument("--config", help="numerical configuration JSON file")
    p.add_argument("--out", help="write the JSON result here instead of stdout")


def _setup(args) -> tuple[MarketFile, ModelParams, TimeChange]:
    if args.config:
        set_config(RunConfig(**_load_json(args.config, "config")))
    market = load_market(args.market) if args.market else load_bundled_market()
    model, tc = _parse_params(_load_json(args.params, "params"), market)
    tc = _resolve_tc(args, model, market, tc)
    return market, model, tc


def _cmd_price_cds(args) -> dict:
    market, model, tc = _setup(args)
    T = _maturity(market, args.maturity)
    mq = next((m for m in market.quotes.maturities if m.maturity == T), None)
    spread = args.spread_bp / 1e4 if args.spread_bp is not None else \
        (mq.index_running if mq else 0.0)
    res = price_index_cds(LegSchedule.quarterly(T), spread, model, tc,
                          market.basket, market.curve, cpty=args.cpty)
    res["spread"] = spread
    res["maturity"] = T
    res["quote_transform"] = quote_transform(spread, T, res["pv"])
    return res


def _cmd_price_cdo(args) -> dict:
    market, model, tc = _setup(args)
    T = _maturity(market, args.maturity)
    spread = args.running_bp / 1e4
    tranche = TrancheSpec(args.attach_pct / 100.0, args.detach_pct / 100.0, spread)
    if args.method == "largepool":
        consts = solve_mu(market.basket.jump_law, market.basket.n_names)

        def band(state, t, strike, mdl, tchg, basket, cpty):
            if strike <= 0.0:
                return 0.0
            if strike >= basket.jump_law.l1:
                return strike - lp_expected_loss(t, mdl, tchg, consts)
            return lp_tranche_put(t, strike, mdl, tchg, consts)

        res = price_cdo_tranche(LegSchedule.quarterly(T), tranche, model, tc,
                                market.basket, market.curve, band_fn=band)
    else:
        res = price_cdo_tranche(LegSchedule.quarterly(T), tranche, model, tc,
                                market.basket, market.curve, cpty=args.cpty)
    res["maturity"] = T
    res["method"] = args.method
    res["quote_transform"] = quote_transform(spread, T, res["upfront"])
    return res


def _cmd_price_ntd(args) -> dict:
    market, model, tc = _setup(args)
    T = _maturity(market, args.maturity)
    res = price_ntd(LegSchedule.quarterly(T), args.rank, model, tc, market.basket,
                    market.curve, recovery=args.recovery,
                    spread=args.spread_bp / 1e4, cpty=args.cpty)
    res["maturity"] = T
    res["rank"] = args.rank
    return res


def _cmd_price_swaption(args) -> dict:
    market, model, tc = _setup(args)
    T = _maturity(market, args.maturity)
    spec = SwaptionSpec(args.expiry, T, args.strike_bp / 1e4, args.side,
                        fep=not args.no_fep)
    if args.method == "fast":
        fn = swaption_fast_payer if spec.side == "payer" else swaption_fast_receiver
        pv = fn(spec, model, tc, market.basket, market.curve)
        return {"pv": pv, "method": "fast", "side": spec.side,
                "expiry": spec.expiry, "maturity": T, "strike": spec.strike}
    res = swaption_exact(spec, model, tc, market.basket, market.curve)
    res.update({"method": "exact", "side": spec.side, "expiry": spec.expiry,
                "maturity": T, "strike": spec.strike})
    return res


def _cmd_mc_price(args) -> dict:
    market, model, tc = _setup(args)
    T = _maturity(market, args.maturity)
    cfg = SimConfig(paths=args.paths, dt=args.dt, seed=args.seed,
                    antithetic=not args.no_antithetic)
    curve = market.curve
    sched = LegSchedule.quarterly(T)
    horizon = T
    if args.instrument == "cds":
        obs = IndexCdsObserver(sched, curve, args.spread_bp / 1e4, market.basket)
    elif args.instrument == "cdo":
        tranche = TrancheSpec(args.attach_pct / 100.0, args.detach_pct / 100.0,
                              args.running_bp / 1e4)
        obs = TrancheObserver(sched, curve, tranche, market.basket)
    elif args.instrument == "ntd":
        lgd = 1.0 - args.recovery if args.recovery is not None \
            else market.basket.jump_law.l1
        obs = NtdObserver(sched, curve, args.rank, lgd, args.spread_bp / 1e4,
                          market.basket)
    else:
        spec = SwaptionSpec(args.expiry, T, args.strike_bp / 1e4, args.side,
                            fep=not args.no_fep)
        obs = SwaptionObserver(spec, model, tc, market.basket, curve)
        horizon = spec.expiry
    stats = estimate_prices([obs], model, tc, market.basket, horizon, cfg)[0]
    return {"instrument": args.instrument, "pv": stats.mean,
            "std_err": stats.std_err, "paths": stats.paths,
            "seed": args.seed, "dt": args.dt}


def _cmd_loss_dist(args) -> dict:
    market, model, tc = _setup(args)
    T = _maturity(market, args.maturity)
    state = BasketState()
    nm = market.basket.n_names
    if args.kind == "counts":
        dist = default_count_distribution(state, T, model, tc, nm)
        rows = [(k, float(p)) for k, p in enumerate(dist)]
        header = ["k", "probability"]
        summary = {"kind": "counts", "maturity": T, "sum": float(dist.sum()),
                   "mean": float(dist @ np.arange(nm + 1))}
    else:
        l1 = market.basket.jump_law.l1
        strikes = np.arange(0.01, l1 - 1e-9, 0.01)
        rows = [(float(k), tranche_put(state, T, float(k), model, tc, nm))
                for k in strikes]
        header = ["strike", "expected_put"]
        summary = {"kind": "tranche", "maturity": T, "points": len(rows)}
    if args.csv:
        _write_csv(args.csv, header, rows)
        summary["csv"] = args.csv
    else:
        summary["rows"] = rows
    summary["expected_defaults"] = expected_defaults(state, T, model, tc, nm)
    return summary


def _cmd_calibrate(args) -> dict:
    if args.config:
        set_config(RunConfig(**_load_json(args.config, "config")))
    market = load_market(args.quotes) if args.quotes else load_bundled_market()
    doc = _load_json(args.spec, "calibration spec")
    spec = CalibSpec(
        free=tuple(doc["free"]),
        bounds={k: tuple(v) for k, v in doc["bounds"].items()},
        fixed=doc.get("fixed", {}),
        ratio_lambda_inf_kappa=doc.get("ratio_lambda_inf_kappa"),
        ratio_sigma2_kappa_lambda_inf=doc.get("ratio_sigma2_kappa_lambda_inf"),
        mode=doc.get("mode", "global"),
        maturity_index=doc.get("maturity_index", 0),
        population=doc.get("population"),
        f_weight=doc.get("f_weight", 0.8),
        cr=doc.get("cr", 0.9),
        max_generations=doc.get("max_generations", 200),
        stop_objective=doc.get("stop_objective", 0.0),
        seed=doc.get("seed", 0),
        workers=args.workers or doc.get("workers", 1),
    )
    result = calibrate(spec, market.quotes)
    seg = result.model.segments[0]
    out = {
        "objective": result.objective_value,
        "generations": result.generations,
        "evaluations": result.evaluations,
        "converged": result.converged,
        "budget_exhausted": result.budget_exhausted,
        "parameters": {
            "lambda0": result.model.lambda0,
            **{k: getattr(seg, k) for k in ("lambda_inf", "kappa", "sigma", "n",
                                            "gamma", "theta", "alpha", "beta")},
        },
        "slopes": list(result.time_change.slopes),
        "quotes": result.per_quote,
    }
    if args.plot_csv:
        rows = []
        for q in result.per_quote:
            T = q["maturity"]
            if q["kind"] == "upfront":
                mkt = quote_transform(0.05, T, q["market"])
                mdl = quote_transform(0.05, T, q["model"])
            else:
                mkt = quote_transform(q["market"], T, 0.0)
                mdl = quote_transform(q["model"], T, 0.0)
            rows.append((q["label"], q["attach"], q["detach"], mkt, mdl))
        _write_csv(args.plot_csv, ["label", "attach", "detach",
                                   "market_transform", "model_transform"], rows)
        out["plot_csv"] = args.plot_csv
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ajdcredit",
                                 description="Credit index derivatives under a "
                                             "top-down affine jump-diffusion model")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price-cds", help="price the index CDS")
    _add_common(p)
    p.add_argument("--maturity", required=True)
    p.add_argument("--spread-bp", type=float)
    p.add_argument("--cpty", action="store_true")
    p.set_defaults(fn=_cmd_price_cds)

    p = sub.add_parser("price-cdo", help="price a CDO tranche")
    _add_common(p)
    p.add_argument("--maturity", required=True)
    p.add_argument("--attach-pct", type=float, required=True)
    p.add_argument("--detach-pct", type=float, required=True)
    p.add_argument("--running-bp", type=float, default=500.0)
    p.add_argument("--method", choices=("exact", "largepool"), default="exact")
    p.add_argument("--cpty", action="store_true")
    p.set_defaults(fn=_cmd_price_cdo)

    p = sub.add_parser("price-ntd", help="price an Nth-to-default")
    _add_common(p)
    p.add_argument("--maturity", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--recovery", type=float)
    p.add_argument("--spread-bp", type=float, default=0.0)
    p.add_argument("--cpty", action="store_true")
    p.set_defaults(fn=_cmd_price_ntd)

    p = sub.add_parser("price-swaption", help="price an index swaption")
    _add_common(p)
    p.add_argument("--maturity", required=True)
    p.add_argument("--expiry", type=float, required=True)
    p.add_argument("--strike-bp", type=float, required=True)
    p.add_argument("--side", choices=("payer", "receiver"), default="payer")
    p.add_argument("--method", choices=("exact", "fast"), default="exact")
    p.add_argument("--no-fep", action="store_true")
    p.set_defaults(fn=_cmd_price_swaption)

    p = sub.add_parser("mc-price", help="Monte Carlo price")
    _add_common(p)
    p.add_argument("--instrument", choices=("cds", "cdo", "ntd", "swaption"),
                   required=True)
    p.add_argument("--maturity", required=True)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--dt", type=float, default=1.0 / 365.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-antithetic", action="store_true")
    p.add_argument("--spread-bp", type=float, default=0.0)
    p.add_argument("--attach-pct", type=float, default=0.0)
    p.add_argument("--detach-pct", type=float, default=3.0)
    p.add_argument("--running-bp", type=float, default=500.0)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--recovery", type=float)
    p.add_argument("--expiry", type=float, default=0.5)
    p.add_argument("--strike-bp", dest="strike_bp", type=float, default=165.0)
    p.add_argument("--side", choices=("payer", "receiver"), default="payer")
    p.add_argument("--no-fep", action="store_true")
    p.set_defaults(fn=_cmd_mc_price)

    p = sub.add_parser("loss-dist", help="dump default-count or tranche-put curves")
    _add_common(p)
    p.add_argument("--maturity", required=True)
    p.add_argument("--kind", choices=("counts", "tranche"), default="counts")
    p.add_argument("--csv")
    p.set_defaults(fn=_cmd_loss_dist)

    p = sub.add_parser("calibrate", help="calibrate to market quotes")
    p.add_argument("--quotes", help="market JSON file (default: bundled fixture)")
    p.add_argument("--spec", required=True, help="calibration spec JSON")
    p.add_argument("--config")
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--plot-csv")
    p.set_defaults(fn=_cmd_calibrate)

    return ap


def run_command(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_EXIT
    try:
        result = args.fn(args)
    except (NumericalQuality, PoleCollision) as exc:
        _emit({"error": {"type": type(exc).__name__, "message": str(exc)}},
              getattr(args, "out", None))
        return NUMERICAL_EXIT
    except AjdCreditError as exc:
        _emit({"error": {"type": type(exc).__name__, "message": str(exc)}},
              getattr(args, "out", None))
        return USAGE_EXIT
    _emit(result, getattr(args, "out", None))
    return 0


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
