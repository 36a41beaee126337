"""Discounted-cashflow pricing of index CDS, CDO tranches and Nth-to-default.

Conventions fixed here (the quotes absorb small convention differences):
quarterly schedule generated backwards from maturity with a front stub,
ACT/365 year fractions (dates are year fractions directly), protection legs
discount loss increments at period ends, premium legs use expectations and
discounting at period midpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .affine import ModelParams, TimeChange
from .errors import InvalidRank, InvalidTranche
from .laws import FixedLoss, JumpSizeLaw
from .lossdist import BasketState, digital_below, expected_defaults, tranche_put


@dataclass(frozen=True)
class Basket:
    """Index basket conventions: size, loss-given-default law, total notional."""

    n_names: int = 125
    jump_law: JumpSizeLaw = field(default_factory=lambda: FixedLoss(0.6))
    notional: float = 1.0

    @classmethod
    def fixed_recovery(cls, n_names: int = 125, recovery: float = 0.4,
                       notional: float = 1.0) -> "Basket":
        return cls(n_names, FixedLoss(1.0 - recovery), notional)


class DiscountCurve:
    """Deterministic discounting: flat continuous rate or log-linear ZC factors."""

    def __init__(self, times: np.ndarray, factors: np.ndarray):
        times = np.asarray(times, dtype=float)
        factors = np.asarray(factors, dtype=float)
        if times.ndim != 1 or times.shape != factors.shape or len(times) < 1:
            raise ValueError("times and factors must be equal-length 1-d arrays")
        if np.any(np.diff(times) <= 0.0) or times[0] <= 0.0:
            raise ValueError("times must be positive and strictly increasing")
        if np.any(factors <= 0.0):
            raise ValueError("zero-coupon factors must be positive")
        self._t = np.concatenate([[0.0], times])
        self._logf = np.concatenate([[0.0], np.log(factors)])

    @classmethod
    def flat(cls, rate: float) -> "DiscountCurve":
        curve = cls.__new__(cls)
        curve._t = None
        curve._rate = rate
        return curve

    @classmethod
    def from_points(cls, points) -> "DiscountCurve":
        pts = sorted(points)
        return cls(np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))

    def df(self, t):
        t = np.asarray(t, dtype=float)
        if self._t is None:
            out = np.exp(-self._rate * t)
        else:
            # log-linear between nodes, flat forward beyond the last node
            slope_end = (self._logf[-1] - self._logf[-2]) / (self._t[-1] - self._t[-2])
            inside = np.interp(t, self._t, self._logf)
            beyond = self._logf[-1] + slope_end * (t - self._t[-1])
            out = np.exp(np.where(t <= self._t[-1], inside, beyond))
        return float(out) if out.ndim == 0 else out

    def fwd_df(self, t1, t2):
        return self.df(t2) / self.df(t1)


@dataclass(frozen=True)
class LegSchedule:
    """Coupon periods (start_i, end_i] with accrual fractions and midpoints."""

    maturity: float
    starts: tuple[float, ...]
    ends: tuple[float, ...]

    @classmethod
    def quarterly(cls, maturity: float, start: float = 0.0, freq: int = 4) -> "LegSchedule":
        if maturity <= start:
            raise ValueError("maturity must exceed the schedule start")
        step = 1.0 / freq
        ends = []
        d = maturity
        while d > start + 1e-9:
            ends.append(d)
            d -= step
        ends = tuple(reversed(ends))
        starts = (start,) + ends[:-1]
        return cls(maturity, starts, ends)

    @property
    def accruals(self) -> np.ndarray:
        return np.array(self.ends) - np.array(self.starts)

    @property
    def mids(self) -> np.ndarray:
        return 0.5 * (np.array(self.starts) + np.array(self.ends))


@dataclass(frozen=True)
class TrancheSpec:
    """Attachment/detachment as loss fractions, plus the running spread."""

    attach: float
    detach: float
    running_spread: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.attach < self.detach <= 1.0:
            raise InvalidTranche(f"invalid tranche [{self.attach}, {self.detach}]")


def _expected_band(state: BasketState, T: float, strike: float, model: ModelParams,
                   tc: TimeChange, basket: Basket, cpty: bool) -> float:
    """E[(strike - L_T)^+]; strikes at or past the max loss use the exact
    linear form strike - E(L_T) via the expected default count."""
    l1 = basket.jump_law.l1
    if strike <= 0.0:
        return 0.0
    if strike >= l1:
        en = expected_defaults(state, T, model, tc, basket.n_names, cpty)
        return strike - l1 * en / basket.n_names
    return tranche_put(state, T, strike, model, tc, basket.n_names,
                       basket.jump_law, cpty)


def price_index_cds(schedule: LegSchedule, spread: float, model: ModelParams,
                    tc: TimeChange | None = None, basket: Basket | None = None,
                    curve: DiscountCurve | None = None, cpty: bool = False,
                    state: BasketState | None = None) -> dict:
    """Buy-protection PV of the index CDS (protection leg minus premium leg).

    Returns the legs, the PV at the given running spread and the breakeven
    spread, all per unit of total notional.
    """
    tc = tc or TimeChange.identity()
    basket = basket or Basket()
    curve = curve or DiscountCurve.flat(0.0)
    state = state or BasketState()
    l1 = basket.jump_law.l1
    nm = basket.n_names

    def eloss(t):
        return l1 * expected_defaults(state, t, model, tc, nm, cpty) / nm

    prot = 0.0
    prev = eloss(state.t)
    for end in schedule.ends:
        cur = eloss(end)
        prot += curve.df(end) * (cur - prev)
        prev = cur
    annuity = 0.0
    for start, end, mid, acc in zip(schedule.starts, schedule.ends,
                                    schedule.mids, schedule.accruals):
        en = expected_defaults(state, mid, model, tc, nm, cpty)
        annuity += acc * curve.df(mid) * (nm - en) / nm
    pv = prot - spread * annuity
    return {
        "protection_leg": prot,
        "risky_annuity": annuity,
        "pv": pv,
        "breakeven_spread": prot / annuity if annuity > 0.0 else math.inf,
    }


def price_cdo_tranche(schedule: LegSchedule, tranche: TrancheSpec, model: ModelParams,
                      tc: TimeChange | None = None, basket: Basket | None = None,
                      curve: DiscountCurve | None = None, cpty: bool = False,
                      state: BasketState | None = None,
                      band_fn=None) -> dict:
    """PV, breakeven running spread and upfront of a CDO tranche.

    The remaining tranche notional is E[(d - L)^+] - E[(a - L)^+]; the credit
    leg collects its decrements, the premium leg accrues on it.  Results are
    per unit of total notional except ``upfront`` which is per unit of
    tranche notional.
    """
    tc = tc or TimeChange.identity()
    basket = basket or Basket()
    curve = curve or DiscountCurve.flat(0.0)
    state = state or BasketState()
    band = band_fn or _expected_band

    def remaining(t):
        up = band(state, t, tranche.detach, model, tc, basket, cpty)
        low = band(state, t, tranche.attach, model, tc, basket, cpty)
        return up - low

    credit = 0.0
    prev = remaining(state.t)
    for end in schedule.ends:
        cur = remaining(end)
        credit += curve.df(end) * (prev - cur)
        prev = cur
    annuity = 0.0
    for mid, acc in zip(schedule.mids, schedule.accruals):
        annuity += acc * curve.df(mid) * remaining(mid)
    width = tranche.detach - tranche.attach
    pv = credit - tranche.running_spread * annuity
    return {
        "credit_leg": credit,
        "risky_annuity": annuity,
        "pv": pv,
        "breakeven_spread": credit / annuity if annuity > 0.0 else math.inf,
        "upfront": pv / width,
    }


def price_ntd(schedule: LegSchedule, rank: int, model: ModelParams,
              tc: TimeChange | None = None, basket: Basket | None = None,
              curve: DiscountCurve | None = None, recovery: float | None = None,
              spread: float = 0.0, cpty: bool = False,
              state: BasketState | None = None) -> dict:
    """Nth-to-default: protection pays 1-R on the rank-th basket default,
    premium accrues while fewer than ``rank`` names have defaulted."""
    tc = tc or TimeChange.identity()
    basket = basket or Basket()
    curve = curve or DiscountCurve.flat(0.0)
    state = state or BasketState()
    if not 1 <= rank < basket.n_names:
        raise InvalidRank(f"rank {rank} outside [1, {basket.n_names})")
    lgd = (1.0 - recovery) if recovery is not None else basket.jump_law.l1

    def alive(t):
        return digital_below(state, t, rank, model, tc, basket.n_names, cpty)

    prot = 0.0
    prev = alive(state.t)
    for end in schedule.ends:
        cur = alive(end)
        prot += curve.df(end) * lgd * (prev - cur)
        prev = cur
    annuity = 0.0
    for mid, acc in zip(schedule.mids, schedule.accruals):
        annuity += acc * curve.df(mid) * alive(mid)
    pv = prot - spread * annuity
    return {
        "protection_leg": prot,
        "risky_annuity": annuity,
        "pv": pv,
        "breakeven_spread": prot / annuity if annuity > 0.0 else math.inf,
    }


def quote_transform(spread: float, maturity: float, upfront: float) -> float:
    """Loss proxy (s*T + U)/(1 + s*T/2) used for plotting quote comparisons."""
    st = spread * maturity
    return (st + upfront) / (1.0 + 0.5 * st)
