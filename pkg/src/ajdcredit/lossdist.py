"""Finite-basket distributions and expectations from the characteristic function.

All Fourier work in count space runs on the periodic grid p in [-pi, pi)
(the pool count is integer valued, so the discrete sum is exact up to the
neglected tail), against kernels from `pool`.  Catastrophe mass P(Q_T > 0)
is carried separately and lands on the full-default state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .affine import CharArg, ModelParams, TimeChange, char_fn
from .config import get_config
from .errors import InvalidDetachment, InvalidRank, NumericalQuality, PoleCollision
from .laws import JumpSizeLaw
from .pool import cached_pool_matrix, kernel_ft_digital, kernel_ft_tranche


@dataclass(frozen=True)
class BasketState:
    """Conditioning state at time t: (lam, N, L, Q, R) is Markov for the basket."""

    t: float = 0.0
    n_defaults: int = 0
    loss: float = 0.0      # realized basket loss, fraction of total notional
    q: int = 0
    r: int = 0
    lam: float | None = None  # None = model lambda0 (only valid at t = 0)

    def intensity(self, model: ModelParams) -> float:
        if self.lam is not None:
            return self.lam
        if self.t != 0.0:
            raise ValueError("state at t > 0 must carry the current intensity")
        return model.lambda0


def _intensity_arg(ey: float, n_names: int) -> CharArg:
    return CharArg(0.0, math.log1p(-1.0 / n_names), 0.0, ex=0.0, ey=ey)


@lru_cache(maxsize=8192)
def _survival_factor(model: ModelParams, tc: TimeChange, t: float, T: float,
                     ey: float, n_names: int, lam: float) -> float:
    """E_t[(1 - 1/N_M)^{dN} 1_{Q_T=0} (1_{R_T=0})] given lambda_t."""
    coeffs = char_fn(t, T, _intensity_arg(ey, n_names), model, tc)
    return float(np.real(coeffs.value(lam)))


def expected_defaults(state: BasketState, T: float, model: ModelParams,
                      tc: TimeChange | None = None, n_names: int = 125,
                      counterparty_filter: bool = False) -> float:
    """Conditional expected number of basket defaults at T.

    N_M - (N_M - N_t) * exp(A + B lam_t) with the count argument
    v = ln(1 - 1/N_M) and the catastrophe filter e^x = 0.
    """
    if T < state.t:
        raise ValueError("T must not precede the state time")
    if state.q:
        return float(n_names)
    tc = tc or TimeChange.identity()
    ey = 0.0 if counterparty_filter else 1.0
    surv = _survival_factor(model, tc, state.t, T, ey, n_names, state.intensity(model))
    return n_names - (n_names - state.n_defaults) * surv


@lru_cache(maxsize=4096)
def _count_cf_grid(model: ModelParams, tc: TimeChange, t: float, T: float,
                   ey: float, grid_size: int, lam: float) -> np.ndarray:
    """exp(A + B lam) over v = i p_m on the DFT grid, with e^x = 0."""
    p = 2.0 * np.pi * np.fft.fftfreq(grid_size)
    arg = CharArg(0.0, 1j * p, 0.0, ex=0.0, ey=ey)
    values = char_fn(t, T, arg, model, tc).value(lam)
    values.setflags(write=False)
    return values


@lru_cache(maxsize=8192)
def count_support(model: ModelParams, tc: TimeChange, t: float, T: float,
                  lam: float, eps: float | None = None) -> int:
    """Smallest j with a Chernoff-certified bound P(dN > j) < eps.

    Probes E[e^{v dN}] at a few real v > 0 (skipping arguments where the
    transform explodes) and minimizes (ln E + ln 1/eps)/v.
    """
    eps = eps or get_config().tail_eps
    best = None
    log_inv_eps = math.log(1.0 / eps)
    for v in (0.02, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6):
        try:
            val = char_fn(t, T, CharArg(0.0, v, 0.0, ex=1.0, ey=1.0), model, tc).value(lam)
        except (PoleCollision, FloatingPointError):
            continue
        m = float(np.real(val))
        if not np.isfinite(m) or m <= 0.0:
            continue
        j = (math.log(m) + log_inv_eps) / v
        if best is None or j < best:
            best = j
    if best is None:
        raise NumericalQuality("could not bound the pool-count tail (transform explodes)")
    return int(math.ceil(best)) + 1


def _grid_size_for(model: ModelParams, tc: TimeChange, t: float, T: float,
                   lam: float) -> int:
    cfg = get_config()
    need = count_support(model, tc, t, T, lam, cfg.tail_eps)
    size = cfg.count_grid
    while need > 0.9 * size:
        size *= 2
        if size > cfg.count_grid_max:
            raise NumericalQuality(
                f"count support {need} exceeds the maximum grid {cfg.count_grid_max}")
    return size


def _catastrophe_prob(state: BasketState, T: float, model: ModelParams,
                      tc: TimeChange, ey: float) -> float:
    coeffs = char_fn(state.t, T, CharArg(0.0, 0.0, 0.0, ex=0.0, ey=ey), model, tc)
    return 1.0 - float(np.real(coeffs.value(state.intensity(model))))


def default_count_distribution(state: BasketState, T: float, model: ModelParams,
                               tc: TimeChange | None = None, n_names: int = 125,
                               counterparty_filter: bool = False) -> np.ndarray:
    """P(N_T = k), k = 0..N_M, by Fourier inversion of the pool count plus projection."""
    if T < state.t:
        raise ValueError("T must not precede the state time")
    tc = tc or TimeChange.identity()
    out = np.zeros(n_names + 1)
    if state.q:
        out[n_names] = 1.0
        return out
    if T == state.t:
        out[state.n_defaults] = 1.0
        return out
    ey = 0.0 if counterparty_filter else 1.0
    lam = state.intensity(model)
    grid_size = _grid_size_for(model, tc, state.t, T, lam)
    cf = _count_cf_grid(model, tc, state.t, T, ey, grid_size, lam)
    pool_probs = np.real(np.fft.fft(cf)) / grid_size
    floor = pool_probs.min()
    if floor < -get_config().neg_prob_tol:
        raise NumericalQuality(f"count inversion produced probability {floor}")
    np.clip(pool_probs, 0.0, None, out=pool_probs)
    pm = cached_pool_matrix(n_names, grid_size - 1, state.n_defaults)
    out[state.n_defaults:] = pool_probs @ pm.rows
    out[n_names] += _catastrophe_prob(state, T, model, tc, ey)
    total = out.sum()
    if abs(total - 1.0) > 1e-8:
        raise NumericalQuality(f"count distribution mass {total} deviates from 1")
    return out / total


def tranche_put(state: BasketState, T: float, strike: float, model: ModelParams,
                tc: TimeChange | None = None, n_names: int = 125,
                jump_law: JumpSizeLaw | None = None,
                counterparty_filter: bool = False) -> float:
    """E_t[(strike - L_T)^+], strike and loss as fractions of basket notional.

    Requires strike < l1 (the tranche must not contain the basket end); the
    catastrophe branch then contributes zero.  Realized losses shift the
    strike and the projection matrix starts from the current default count.
    """
    tc = tc or TimeChange.identity()
    law = jump_law or model.jump_law
    if not 0.0 <= strike < law.l1:
        raise InvalidDetachment(f"strike {strike} outside [0, {law.l1}) of notional")
    if strike == 0.0 or state.q:
        return 0.0
    remaining = strike - state.loss
    if remaining <= 0.0:
        return 0.0
    if T == state.t:
        return remaining
    ey = 0.0 if counterparty_filter else 1.0
    if counterparty_filter and state.r:
        return 0.0
    lam = state.intensity(model)
    grid_size = _grid_size_for(model, tc, state.t, T, lam)
    kernel = kernel_ft_tranche(remaining * n_names, n_names, law,
                               grid_size - 1, grid_size, state.n_defaults)
    cf = _count_cf_grid(model, tc, state.t, T, ey, grid_size, lam)
    return kernel.integrate_against(cf) / n_names


def digital_below(state: BasketState, T: float, rank: int, model: ModelParams,
                  tc: TimeChange | None = None, n_names: int = 125,
                  counterparty_filter: bool = False) -> float:
    """P_t(N_T < rank), 1 <= rank < N_M (catastrophe counts as full default)."""
    if not 1 <= rank < n_names:
        raise InvalidRank(f"rank {rank} outside [1, {n_names})")
    tc = tc or TimeChange.identity()
    if state.q or state.n_defaults >= rank:
        return 0.0
    if T == state.t:
        return 1.0
    ey = 0.0 if counterparty_filter else 1.0
    if counterparty_filter and state.r:
        return 0.0
    lam = state.intensity(model)
    grid_size = _grid_size_for(model, tc, state.t, T, lam)
    kernel = kernel_ft_digital(rank - state.n_defaults, n_names,
                               grid_size - 1, grid_size, state.n_defaults)
    cf = _count_cf_grid(model, tc, state.t, T, ey, grid_size, lam)
    return kernel.integrate_against(cf)


def infinite_pool_moments(T: float, model: ModelParams,
                          tc: TimeChange | None = None, order: int = 2
                          ) -> tuple[float, float | None]:
    """Mean (and variance) of the pool loss via Richardson-extrapolated
    central differences of the transform along real u."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    tc = tc or TimeChange.identity()
    h = get_config().fd_step
    u = np.array([h, -h, 0.5 * h, -0.5 * h])
    vals = np.real(char_fn(0.0, T, CharArg(u, 0.0, 0.0), model, tc).value(model.lambda0))
    d1_h = (vals[0] - vals[1]) / (2.0 * h)
    d1_h2 = (vals[2] - vals[3]) / h
    mean = (4.0 * d1_h2 - d1_h) / 3.0
    if order == 1:
        return mean, None
    d2_h = (vals[0] - 2.0 + vals[1]) / (h * h)
    d2_h2 = (vals[2] - 2.0 + vals[3]) / (0.25 * h * h)
    second = (4.0 * d2_h2 - d2_h) / 3.0
    return mean, second - mean * mean
