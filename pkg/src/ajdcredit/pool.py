"""Projection of infinite-pool default counts onto a finite basket.

Each pool default lands in a basket of size ``N_M`` with probability
``(N_M - N)/N_M`` where ``N`` is the number of basket defaults so far.  The
matrix ``p_jk = P(N = k | Ntilde = j)`` satisfies

    p_{j+1,k} = (k/N_M) p_{j,k} + ((N_M - k + 1)/N_M) p_{j,k-1},
    p_{0,k} = delta_{k0},

and is built here by that recursion (the alternating-sum closed form is an
exact small-size cross-check only).  Payoff kernels in count space and their
Fourier transforms on the periodic grid p in [-pi, pi) are also built here;
none of these objects depend on the model parameters, so everything is cached
per process.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .config import get_config
from .errors import InvalidDetachment, InvalidRank, SizeTooLarge
from .laws import FixedLoss, JumpSizeLaw


@dataclass(frozen=True)
class PoolMatrix:
    """Rows j = 0..j_max of p_jk; k counts defaults beyond ``initial_defaults``."""

    n_names: int
    j_max: int
    initial_defaults: int
    rows: np.ndarray  # shape (j_max + 1, n_names - initial_defaults + 1)

    @property
    def k_range(self) -> int:
        return self.n_names - self.initial_defaults


def build_pool_matrix(n_names: int, j_max: int, initial_defaults: int = 0) -> PoolMatrix:
    """Run the thinning recursion for j = 0..j_max."""
    if n_names < 1:
        raise ValueError("n_names must be at least 1")
    if j_max < 0:
        raise ValueError("j_max must be nonnegative")
    if not 0 <= initial_defaults < n_names:
        raise ValueError("initial_defaults must be in [0, n_names)")
    width = n_names - initial_defaults + 1
    rows = np.zeros((j_max + 1, width))
    rows[0, 0] = 1.0
    k = np.arange(width)
    stay = (k + initial_defaults) / n_names
    move = (n_names - initial_defaults - (k - 1)) / n_names  # from k-1 to k
    for j in range(j_max):
        nxt = stay * rows[j]
        nxt[1:] += move[1:] * rows[j, :-1]
        rows[j + 1] = nxt
    return PoolMatrix(n_names, j_max, initial_defaults, rows)


def closed_form_pjk(n_names: int, j: int, k: int) -> float:
    """Alternating-sum solution of the recursion, evaluated in exact arithmetic.

    Valid (and only permitted) for small baskets; the coefficients grow
    combinatorially and the sum is useless in floating point at index size.
    """
    if n_names > 30:
        raise SizeTooLarge(f"closed form restricted to n_names <= 30, got {n_names}")
    if not (0 <= k <= n_names and j >= 0):
        raise ValueError("need 0 <= k <= n_names and j >= 0")
    num = 0
    for l in range(k + 1):
        term = math.comb(k, l) * (l ** j if (l, j) != (0, 0) else 1)
        num += term if (k - l) % 2 == 0 else -term
    num *= math.comb(n_names, k)
    return float(Fraction(num, n_names ** j))


def conditional_mean_var(n_names: int, j: int) -> tuple[float, float]:
    """Mean and variance of the basket count given j pool defaults."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    q1 = (1.0 - 1.0 / n_names) ** j
    q2 = (1.0 - 2.0 / n_names) ** j if n_names >= 2 else 0.0
    e = n_names * (1.0 - q1)
    v = n_names * (q1 + (n_names - 1) * q2 - n_names * q1 * q1)
    return e, v


@dataclass(frozen=True)
class PayoffKernelFT:
    """Fourier transform of a count-space payoff kernel on the DFT grid."""

    grid: np.ndarray      # p values, DFT ordering over [-pi, pi)
    values: np.ndarray    # complex \hat f(p)
    counts: np.ndarray    # the underlying real kernel f(j), j = 0..j_max
    n_names: int
    j_max: int
    label: str

    def integrate_against(self, cf_values: np.ndarray) -> float:
        """(1/2pi) int f_hat(-p) Phi(p) dp on the periodic grid (exact discrete sum)."""
        return float(np.real(np.vdot(self.values, cf_values)) / len(self.grid))

    def invert(self) -> np.ndarray:
        """Recover f(j) from the transform (round-trip check)."""
        return np.real(np.fft.fft(self.values) / len(self.values))[: self.j_max + 1]


def _dft_kernel(counts: np.ndarray, grid_size: int, n_names: int, label: str) -> PayoffKernelFT:
    if len(counts) > grid_size:
        raise ValueError("kernel support exceeds the Fourier grid")
    padded = np.zeros(grid_size)
    padded[: len(counts)] = counts
    values = grid_size * np.fft.ifft(padded)  # sum_j f_j e^{+i p_m j}
    grid = 2.0 * np.pi * np.fft.fftfreq(grid_size)
    return PayoffKernelFT(grid, values, np.asarray(counts, dtype=float),
                          n_names, len(counts) - 1, label)


def _conditional_put_values(jump_law: JumpSizeLaw, strike: float, k_max: int) -> np.ndarray:
    """c_k = E[(strike - S_k)^+], S_k the sum of k i.i.d. losses (name units).

    Fixed losses reduce to (strike - l1*k)^+; discrete laws are convolved
    iteratively on a grid of step min_loss/8.
    """
    if isinstance(jump_law, FixedLoss):
        k = np.arange(k_max + 1)
        return np.maximum(strike - jump_law.l1 * k, 0.0)
    step = jump_law.min_loss / 8.0
    n_eff = min(k_max, int(strike / jump_law.min_loss) + 1)
    size = int(strike / step) + 2
    payoff = np.maximum(strike - step * np.arange(size), 0.0)
    base = np.zeros(size)
    for l, wgt in jump_law.points:
        idx = int(round(l / step))
        if idx < size:
            base[idx] += wgt
    out = np.zeros(k_max + 1)
    out[0] = strike
    dist = np.zeros(size)
    dist[0] = 1.0
    for k in range(1, n_eff + 1):
        dist = np.convolve(dist, base)[:size]
        out[k] = float(dist @ payoff)
    return out


_cache_lock = threading.Lock()
_pool_cache: dict[tuple, PoolMatrix] = {}
_kernel_cache: dict[tuple, PayoffKernelFT] = {}


def clear_caches() -> None:
    with _cache_lock:
        _pool_cache.clear()
        _kernel_cache.clear()


def cached_pool_matrix(n_names: int, j_max: int, initial_defaults: int = 0) -> PoolMatrix:
    key = (n_names, j_max, initial_defaults)
    with _cache_lock:
        hit = _pool_cache.get(key)
    if hit is not None:
        return hit
    built = build_pool_matrix(n_names, j_max, initial_defaults)
    with _cache_lock:
        _pool_cache.setdefault(key, built)
    return built


def kernel_ft_tranche(strike_units: float, n_names: int, jump_law: JumpSizeLaw,
                      j_max: int | None = None, grid_size: int | None = None,
                      initial_defaults: int = 0) -> PayoffKernelFT:
    """Transform of f_K(j) = sum_k p_jk E[(K - S_k)^+], K in name-loss units."""
    grid_size = grid_size or get_config().count_grid
    j_max = grid_size - 1 if j_max is None else j_max
    max_loss = jump_law.l1 * (n_names - initial_defaults)
    if not 0.0 <= strike_units < max_loss:
        raise InvalidDetachment(
            f"detachment {strike_units} outside [0, {max_loss}) name units")
    key = ("tranche", n_names, initial_defaults, jump_law, round(strike_units, 12),
           j_max, grid_size)
    with _cache_lock:
        hit = _kernel_cache.get(key)
    if hit is not None:
        return hit
    pm = cached_pool_matrix(n_names, j_max, initial_defaults)
    payoff = _conditional_put_values(jump_law, strike_units, pm.k_range)
    counts = pm.rows @ payoff
    kernel = _dft_kernel(counts, grid_size, n_names, f"put@{strike_units}")
    with _cache_lock:
        _kernel_cache.setdefault(key, kernel)
    return kernel


def kernel_ft_digital(rank: int, n_names: int, j_max: int | None = None,
                      grid_size: int | None = None, initial_defaults: int = 0
                      ) -> PayoffKernelFT:
    """Transform of g_k(j) = P(fewer than ``rank`` extra basket defaults | j)."""
    grid_size = grid_size or get_config().count_grid
    j_max = grid_size - 1 if j_max is None else j_max
    if not 1 <= rank < n_names - initial_defaults:
        raise InvalidRank(f"rank {rank} outside [1, {n_names - initial_defaults})")
    key = ("digital", n_names, initial_defaults, rank, j_max, grid_size)
    with _cache_lock:
        hit = _kernel_cache.get(key)
    if hit is not None:
        return hit
    pm = cached_pool_matrix(n_names, j_max, initial_defaults)
    counts = pm.rows[:, :rank].sum(axis=1)
    kernel = _dft_kernel(counts, grid_size, n_names, f"digital<{rank}")
    with _cache_lock:
        _kernel_cache.setdefault(key, kernel)
    return kernel
