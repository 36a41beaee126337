"""Monte Carlo simulator of the full model, used as ground truth in tests.

Full-truncation Euler for the CIR part (positive part of the intensity in
drift and diffusion), compound-Poisson Gamma jumps, pool events thinned into
the basket with probability (N_M - N)/N_M per jump, catastrophe marker with
intensity alpha*lam + beta, counterparty marker with probability xi per pool
jump plus intensity zeta*lam + eta.  The time change runs the model clock at
the local slope, matching the closed-form convention exactly.

Paths stream through observers chunk by chunk; per-chunk RNG streams are
spawned from the seed with numpy's SeedSequence (chunk k uses spawn key k),
so results do not depend on scheduling.  Antithetic pairs mirror the
Brownian increments (jump draws stay independent).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .affine import ModelParams, TimeChange, effective_segments
from .laws import FixedLoss
from .pricers import Basket, DiscountCurve, LegSchedule, TrancheSpec
from .swaptions import SwaptionSpec, _forward_leg_factors


@dataclass(frozen=True)
class SimConfig:
    paths: int = 100_000
    dt: float = 1.0 / 365.0
    seed: int = 12345
    antithetic: bool = True
    chunk_size: int = 250_000

    def __post_init__(self):
        if self.dt > 1.0 / 252.0:
            raise ValueError("dt must be at most 1/252")
        if self.paths < 10_000:
            raise ValueError("at least 10^4 paths required")


@dataclass(frozen=True)
class PathStats:
    mean: float
    std_err: float
    paths: int


class _State:
    __slots__ = ("lam", "ntilde", "pool_loss", "n", "basket_loss", "q", "r")

    def __init__(self, n_paths: int, lam0: float):
        self.lam = np.full(n_paths, lam0)
        self.ntilde = np.zeros(n_paths, dtype=np.int64)
        self.pool_loss = np.zeros(n_paths)
        self.n = np.zeros(n_paths, dtype=np.int64)
        self.basket_loss = np.zeros(n_paths)
        self.q = np.zeros(n_paths, dtype=bool)
        self.r = np.zeros(n_paths, dtype=bool)


def _draw_losses(law, size, rng):
    if isinstance(law, FixedLoss):
        return np.full(size, law.l1)
    cum = np.cumsum([w for _, w in law.points])
    vals = np.array([l for l, _ in law.points])
    return vals[np.searchsorted(cum, rng.random(size), side="right").clip(0, len(vals) - 1)]


def _advance(state: _State, seg, slope, length, basket, cfg, rng, z_sign):
    """Euler steps across one constant-parameter stretch of calendar length."""
    n_paths = len(state.lam)
    nm = basket.n_names
    n_sub = max(1, int(math.ceil(length / cfg.dt)))
    h = slope * (length / n_sub)  # model-time step
    comps = seg.jump_components
    half = n_paths // 2
    for _ in range(n_sub):
        lam_plus = np.maximum(state.lam, 0.0)

        # pool defaults, thinned into the basket one event at a time
        counts = rng.poisson(lam_plus * h)
        while True:
            idx = np.nonzero(counts > 0)[0]
            if idx.size == 0:
                break
            sizes = _draw_losses(basket.jump_law, idx.size, rng)
            state.ntilde[idx] += 1
            state.pool_loss[idx] += sizes
            accept = rng.random(idx.size) < (nm - state.n[idx]) / nm
            hit = idx[accept]
            state.n[hit] += 1
            state.basket_loss[hit] += sizes[accept] / nm
            if seg.xi > 0.0:
                state.r[idx[rng.random(idx.size) < seg.xi]] = True
            counts[idx] -= 1

        # catastrophe and counterparty markers
        if seg.alpha > 0.0 or seg.beta > 0.0:
            fired = rng.poisson(seg.alpha * lam_plus * h + seg.beta * h) > 0
            fresh = fired & ~state.q
            state.q |= fired
            state.n[fresh] = nm
            state.basket_loss[fresh] = basket.jump_law.l1
        if seg.zeta > 0.0 or seg.eta > 0.0:
            state.r |= rng.poisson(seg.zeta * lam_plus * h + seg.eta * h) > 0

        # intensity: CIR drift/diffusion plus Gamma jumps
        z = rng.standard_normal(half if z_sign is not None else n_paths)
        if z_sign is not None:
            z = np.concatenate([z, -z])
        dlam = seg.kappa * (seg.lambda_inf - lam_plus) * h \
            + seg.sigma * np.sqrt(lam_plus * h) * z
        for g, n_shape, th in comps:
            cnt = rng.poisson(g * h, n_paths)
            jumping = np.nonzero(cnt > 0)[0]
            if jumping.size:
                dlam[jumping] += rng.gamma((n_shape + 1) * cnt[jumping], th)
        state.lam += dlam


def simulate(model: ModelParams, tc: TimeChange | None, basket: Basket,
             horizon: float, cfg: SimConfig, observers=()):
    """Run the path ensemble, notifying observers at their requested times.

    Returns the per-chunk payoff arrays produced by each observer's
    ``collect``; without observers, returns the terminal states of the last
    chunk (handy for distribution tests).
    """
    tc = tc or TimeChange.identity()
    obs_times = sorted({t for o in observers for t in o.times} | {horizon})
    pieces = effective_segments(model, tc, 0.0, horizon)
    cuts = sorted({t0 for t0, *_ in pieces} | {horizon} | set(obs_times))

    n_chunks = max(1, math.ceil(cfg.paths / cfg.chunk_size))
    sizes = [cfg.paths // n_chunks + (1 if i < cfg.paths % n_chunks else 0)
             for i in range(n_chunks)]
    streams = np.random.SeedSequence(cfg.seed).spawn(n_chunks)

    payoffs = [[] for _ in observers]
    last_state = None
    for size, ss in zip(sizes, streams):
        if cfg.antithetic and size % 2:
            size += 1
        rng = np.random.default_rng(ss)
        state = _State(size, model.lambda0)
        for o in observers:
            o.start_chunk(size)
        t = 0.0
        for t_next in cuts:
            if t_next <= t:
                continue
            mid = 0.5 * (t + t_next)
            seg = model.segment_at(mid)
            _advance(state, seg, tc.slope_at(mid), t_next - t, basket, cfg, rng,
                     z_sign=True if cfg.antithetic else None)
            for o in observers:
                if t_next in o.times:
                    o.observe(t_next, state)
            t = t_next
        for buf, o in zip(payoffs, observers):
            buf.append(o.collect())
        last_state = state
    if not observers:
        return last_state
    return [np.concatenate(b) for b in payoffs]


def _stats(payoff: np.ndarray, antithetic: bool) -> PathStats:
    if antithetic:
        half = len(payoff) // 2
        pair = 0.5 * (payoff[:half] + payoff[half:])
        se = float(pair.std(ddof=1) / math.sqrt(half)) if half > 1 else 0.0
        return PathStats(float(pair.mean()), se, len(payoff))
    se = float(payoff.std(ddof=1) / math.sqrt(len(payoff)))
    return PathStats(float(payoff.mean()), se, len(payoff))


class _LegObserver:
    """Accumulates protection and premium legs of CDS-like payoffs."""

    def __init__(self, schedule: LegSchedule, curve: DiscountCurve, spread: float):
        self.schedule = schedule
        self.curve = curve
        self.spread = spread
        self.times = set(schedule.ends) | set(schedule.mids)
        self._mid_info = {m: (a, curve.df(m))
                          for m, a in zip(schedule.mids, schedule.accruals)}
        self._end_df = {e: curve.df(e) for e in schedule.ends}

    def start_chunk(self, size):
        self.prot = np.zeros(size)
        self.ann = np.zeros(size)
        self.prev = np.zeros(size)

    def exposure(self, state):  # notional at risk for the premium leg
        raise NotImplementedError

    def shortfall(self, state):  # cumulated protection variable
        raise NotImplementedError

    def observe(self, t, state):
        if t in self._end_df:
            cur = self.shortfall(state)
            self.prot += self._end_df[t] * (cur - self.prev)
            self.prev = cur
        if t in self._mid_info:
            acc, df = self._mid_info[t]
            self.ann += acc * df * self.exposure(state)

    def collect(self):
        return self.prot - self.spread * self.ann


class IndexCdsObserver(_LegObserver):
    def __init__(self, schedule, curve, spread, basket):
        super().__init__(schedule, curve, spread)
        self.basket = basket

    def exposure(self, state):
        return (self.basket.n_names - state.n) / self.basket.n_names

    def shortfall(self, state):
        return state.basket_loss.copy()  # snapshot: the engine mutates in place


class TrancheObserver(_LegObserver):
    def __init__(self, schedule, curve, tranche: TrancheSpec, basket):
        super().__init__(schedule, curve, tranche.running_spread)
        self.tranche = tranche

    def _band(self, loss):
        return (np.maximum(self.tranche.detach - loss, 0.0)
                - np.maximum(self.tranche.attach - loss, 0.0))

    def exposure(self, state):
        return self._band(state.basket_loss)

    def shortfall(self, state):
        # credit leg collects decrements of the remaining notional
        return -self._band(state.basket_loss)

    def start_chunk(self, size):
        super().start_chunk(size)
        self.prev = -np.full(size, self.tranche.detach - self.tranche.attach)


class NtdObserver(_LegObserver):
    def __init__(self, schedule, curve, rank, lgd, spread, basket):
        super().__init__(schedule, curve, spread)
        self.rank = rank
        self.lgd = lgd

    def exposure(self, state):
        return (state.n < self.rank).astype(float)

    def shortfall(self, state):
        return self.lgd * (state.n >= self.rank).astype(float)


class SwaptionObserver:
    """Conditional forward-swap value at expiry from the closed-form legs,
    positive part per side (the joint law of (lam_t, N_t) is what is tested)."""

    def __init__(self, spec: SwaptionSpec, model, tc, basket, curve):
        self.spec = spec
        self.basket = basket
        self.df0 = curve.df(spec.expiry)
        self.times = {spec.expiry}
        self._legs = _forward_leg_factors(spec.expiry, spec.maturity, model,
                                          tc or TimeChange.identity(), basket, curve)

    def start_chunk(self, size):
        self.payoff = np.zeros(size)

    def observe(self, t, state):
        nm = self.basket.n_names
        s1, s2 = self._legs(np.maximum(state.lam, 0.0))
        value = (nm - state.n) / nm * (self.basket.jump_law.l1 * s1
                                       - self.spec.strike * s2)
        fep = state.basket_loss if self.spec.fep else 0.0
        raw = value + fep if self.spec.side == "payer" else -(value + fep)
        self.payoff = self.df0 * np.maximum(raw, 0.0)

    def collect(self):
        return self.payoff


class TransformObserver:
    """exp(u * pool_loss) on the Q = 0 branch at a single date (CF cross-check)."""

    def __init__(self, horizon, u):
        self.times = {horizon}
        self.u = u

    def start_chunk(self, size):
        self.payoff = np.zeros(size)

    def observe(self, t, state):
        self.payoff = np.where(state.q, 0.0, np.exp(self.u * state.pool_loss))

    def collect(self):
        return self.payoff


def estimate_prices(observers, model, tc, basket, horizon, cfg: SimConfig
                    ) -> list[PathStats]:
    """One shared ensemble, one PathStats per observer."""
    payoffs = simulate(model, tc, basket, horizon, cfg, observers)
    return [_stats(p, cfg.antithetic) for p in payoffs]


def estimate_price(observer, model, tc, basket, horizon, cfg: SimConfig) -> PathStats:
    return estimate_prices([observer], model, tc, basket, horizon, cfg)[0]
