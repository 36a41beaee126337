"""Two-stage calibration: bootstrap the time-change slopes onto the index
quotes, then differential evolution over the intensity parameters against
tranche quotes weighted by bid-ask.

Every candidate evaluation re-runs the bootstrap, so index quotes are matched
exactly throughout and only tranche errors drive the search.  The DE is the
classic rand/1/bin scheme with elitist selection; population members evaluate
in parallel (results keyed by member index, so worker count cannot change the
trajectory).
"""
from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .affine import ModelParams, TimeChange
from .errors import AjdCreditError, NoSolution
from .pricers import (Basket, DiscountCurve, LegSchedule, TrancheSpec,
                      price_cdo_tranche, price_index_cds)

PARAM_NAMES = ("lambda0", "lambda_inf", "kappa", "sigma", "n", "gamma",
               "theta", "alpha", "beta")


@dataclass(frozen=True)
class TrancheQuote:
    """One tranche quote: upfront (fraction, with a running spread) or
    breakeven spread (decimal); ``bid_ask`` in the same unit as ``mid``."""

    attach: float
    detach: float
    kind: str            # "upfront" | "spread"
    mid: float
    bid_ask: float
    running: float = 0.0

    def __post_init__(self):
        if self.kind not in ("upfront", "spread"):
            raise ValueError("kind must be 'upfront' or 'spread'")
        if self.bid_ask <= 0.0:
            raise ValueError("bid-ask width must be positive")


@dataclass(frozen=True)
class MaturityQuotes:
    maturity: float
    index_price: float       # quoted as 1 - upfront, e.g. 1.02505
    index_running: float     # decimal running spread
    tranches: tuple[TrancheQuote, ...]
    label: str = ""

    @property
    def index_upfront(self) -> float:
        return 1.0 - self.index_price


@dataclass(frozen=True)
class QuoteSet:
    maturities: tuple[MaturityQuotes, ...]
    curve: DiscountCurve
    basket: Basket

    def __post_init__(self):
        mats = [m.maturity for m in self.maturities]
        if sorted(mats) != mats:
            raise ValueError("maturities must be sorted")


def bootstrap_slopes(model: ModelParams, quotes: QuoteSet,
                     curve: DiscountCurve | None = None,
                     basket: Basket | None = None,
                     bracket: tuple[float, float] = (1e-3, 1e3)) -> TimeChange:
    """Solve the slope a_i per maturity so each index quote reprices exactly.

    Earlier slopes stay frozen while later ones are solved, one bracketed
    root-find per maturity.
    """
    curve = curve or quotes.curve
    basket = basket or quotes.basket
    mats = [m.maturity for m in quotes.maturities]
    slopes: list[float] = []
    for i, mq in enumerate(quotes.maturities):
        sched = LegSchedule.quarterly(mq.maturity)

        def gap(a: float) -> float:
            tc = TimeChange(tuple(mats[:len(slopes)]), tuple(slopes + [a]))
            pv = price_index_cds(sched, mq.index_running, model, tc, basket, curve)["pv"]
            return pv - mq.index_upfront

        lo, hi = bracket
        try:
            f_lo, f_hi = gap(lo), gap(hi)
            if not (np.isfinite(f_lo) and np.isfinite(f_hi)) or f_lo * f_hi > 0.0:
                raise NoSolution(
                    f"index quote at T={mq.maturity} unreachable on slope bracket {bracket}")
            slopes.append(brentq(gap, lo, hi, xtol=1e-14))
        except AjdCreditError:
            raise
        except Exception as exc:  # numerical failure inside pricing
            raise NoSolution(f"bootstrap failed at T={mq.maturity}: {exc}") from exc
    return TimeChange(tuple(mats[:-1]), tuple(slopes))


def tranche_model_value(mq: MaturityQuotes, tq: TrancheQuote, model: ModelParams,
                        tc: TimeChange, basket: Basket, curve: DiscountCurve) -> float:
    """Model value of one tranche quote, in the quote's own unit."""
    sched = LegSchedule.quarterly(mq.maturity)
    res = price_cdo_tranche(sched, TrancheSpec(tq.attach, tq.detach, tq.running),
                            model, tc, basket, curve)
    return res["upfront"] if tq.kind == "upfront" else res["breakeven_spread"]


def objective(model: ModelParams, tc: TimeChange, quotes: QuoteSet,
              basket: Basket | None = None, curve: DiscountCurve | None = None,
              maturity_indices: tuple[int, ...] | None = None) -> float:
    """Sum of squared tranche errors in bid-ask units (index quotes excluded:
    the bootstrap matches them exactly)."""
    basket = basket or quotes.basket
    curve = curve or quotes.curve
    total = 0.0
    indices = maturity_indices if maturity_indices is not None \
        else tuple(range(len(quotes.maturities)))
    for i in indices:
        mq = quotes.maturities[i]
        for tq in mq.tranches:
            val = tranche_model_value(mq, tq, model, tc, basket, curve)
            total += ((val - tq.mid) / tq.bid_ask) ** 2
    return total


@dataclass(frozen=True)
class CalibSpec:
    """Free parameters, bounds and DE settings.

    ``ratio_lambda_inf_kappa`` freezes lambda_inf = r * kappa;
    ``ratio_sigma2_kappa_lambda_inf`` freezes sigma = sqrt(r * kappa * lambda_inf);
    both mirror the single-maturity setup of the reference calibration.
    The ``n`` gene is real-coded and rounded at evaluation.
    """

    free: tuple[str, ...]
    bounds: dict = field(default_factory=dict)   # name -> (lo, hi)
    fixed: dict = field(default_factory=dict)    # name -> value
    ratio_lambda_inf_kappa: float | None = None
    ratio_sigma2_kappa_lambda_inf: float | None = None
    mode: str = "global"                         # "global" | "single"
    maturity_index: int = 0
    population: int | None = None                # default 10 * dim
    f_weight: float = 0.8
    cr: float = 0.9
    max_generations: int = 200
    stop_objective: float = 0.0
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in self.free:
            if name not in PARAM_NAMES:
                raise ValueError(f"unknown parameter {name}")
            if name not in self.bounds:
                raise ValueError(f"missing bounds for {name}")
            lo, hi = self.bounds[name]
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bounds for {name} must be finite with lo < hi")
        if self.mode not in ("global", "single"):
            raise ValueError("mode must be 'global' or 'single'")

    def decode(self, genes) -> ModelParams:
        params = {name: 0.0 for name in PARAM_NAMES}
        params.update(self.fixed)
        for name, g in zip(self.free, genes):
            params[name] = float(g)
        if self.ratio_lambda_inf_kappa is not None:
            params["lambda_inf"] = self.ratio_lambda_inf_kappa * params["kappa"]
        if self.ratio_sigma2_kappa_lambda_inf is not None:
            params["sigma"] = math.sqrt(self.ratio_sigma2_kappa_lambda_inf
                                        * params["kappa"] * params["lambda_inf"])
        params["n"] = int(round(params["n"]))
        return ModelParams.constant(**params)


@dataclass
class CalibResult:
    model: ModelParams
    time_change: TimeChange
    objective_value: float
    genes: np.ndarray
    generations: int
    evaluations: int
    converged: bool
    budget_exhausted: bool
    per_quote: list


_PENALTY = 1e9


def _evaluate(genes, spec: CalibSpec, quotes: QuoteSet) -> float:
    try:
        model = spec.decode(genes)
        tc = bootstrap_slopes(model, quotes)
        scope = (spec.maturity_index,) if spec.mode == "single" else None
        return objective(model, tc, quotes, maturity_indices=scope)
    except (AjdCreditError, ValueError, FloatingPointError, OverflowError):
        return _PENALTY


_worker_ctx: dict = {}


def _worker_init(spec, quotes):
    _worker_ctx["spec"] = spec
    _worker_ctx["quotes"] = quotes


def _worker_eval(genes):
    return _evaluate(genes, _worker_ctx["spec"], _worker_ctx["quotes"])


def calibrate(spec: CalibSpec, quotes: QuoteSet,
              curve: DiscountCurve | None = None,
              basket: Basket | None = None) -> CalibResult:
    """DE/rand/1/bin over the free parameters; deterministic under the seed."""
    if curve is not None or basket is not None:
        quotes = replace(quotes, curve=curve or quotes.curve,
                         basket=basket or quotes.basket)
    dim = len(spec.free)
    lo = np.array([spec.bounds[name][0] for name in spec.free])
    hi = np.array([spec.bounds[name][1] for name in spec.free])
    pop_size = spec.population or 10 * dim
    rng = np.random.default_rng(spec.seed)
    pop = lo + rng.random((pop_size, dim)) * (hi - lo)

    pool = None
    if spec.workers > 1:
        pool = multiprocessing.get_context("fork").Pool(
            spec.workers, initializer=_worker_init, initargs=(spec, quotes))

    def run_batch(members):
        if pool is not None:
            return np.array(pool.map(_worker_eval, members))
        return np.array([_evaluate(m, spec, quotes) for m in members])

    try:
        fitness = run_batch(pop)
        evaluations = pop_size
        generations = 0
        for gen in range(spec.max_generations):
            if fitness.min() <= spec.stop_objective:
                break
            trials = np.empty_like(pop)
            for i in range(pop_size):
                a, b, c = rng.choice(
                    [j for j in range(pop_size) if j != i], size=3, replace=False)
                mutant = np.clip(pop[a] + spec.f_weight * (pop[b] - pop[c]), lo, hi)
                cross = rng.random(dim) < spec.cr
                cross[rng.integers(dim)] = True
                trials[i] = np.where(cross, mutant, pop[i])
            trial_fit = run_batch(trials)
            evaluations += pop_size
            better = trial_fit <= fitness
            pop[better] = trials[better]
            fitness[better] = trial_fit[better]
            generations = gen + 1
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    best_idx = int(np.argmin(fitness))
    best = pop[best_idx]
    best_fit = float(fitness[best_idx])
    model = spec.decode(best)
    tc = bootstrap_slopes(model, quotes)
    scope = (spec.maturity_index,) if spec.mode == "single" else \
        tuple(range(len(quotes.maturities)))
    per_quote = []
    for i in scope:
        mq = quotes.maturities[i]
        for tq in mq.tranches:
            val = tranche_model_value(mq, tq, model, tc, quotes.basket, quotes.curve)
            per_quote.append({
                "maturity": mq.maturity,
                "label": mq.label,
                "attach": tq.attach,
                "detach": tq.detach,
                "kind": tq.kind,
                "market": tq.mid,
                "model": val,
                "bid_ask": tq.bid_ask,
                "error_bid_ask": (val - tq.mid) / tq.bid_ask,
            })
    converged = best_fit <= spec.stop_objective
    return CalibResult(model, tc, best_fit, best, generations, evaluations,
                       converged, budget_exhausted=not converged, per_quote=per_quote)
