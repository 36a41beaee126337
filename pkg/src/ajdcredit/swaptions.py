"""Index swaptions: exact pricing via the joint (count, intensity) law at
expiry, and the fast large-pool approximation as a single Fourier integral.

The exact route inverts the transform E[e^{i p Ntilde_t + (-c + i q) lam_t}
1_{Q_t=0}] on a 2-d grid (periodic in the count, damped in the intensity),
projects counts onto the basket, and integrates the positive part of the
conditional forward-swap value.  The fast route linearizes the exercise
boundary in lam_t around an anchor and reduces the price to a sine-kernel
integral of transform differences; the payer follows from call-put parity
against the forward contract with front-end protection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .affine import CharArg, ModelParams, TimeChange, char_fn
from .config import get_config
from .errors import AnchorInvalid, NumericalQuality, PoleCollision
from .largepool import LargePoolConsts, solve_mu
from .lossdist import count_support
from .pool import cached_pool_matrix
from .pricers import Basket, DiscountCurve, LegSchedule


@dataclass(frozen=True)
class SwaptionSpec:
    """Option on the index CDS: exercise at ``expiry`` into a swap to ``maturity``.

    ``strike`` is the running spread (per year, decimal).  ``fep``: the
    contract carries front-end protection (losses before expiry paid at
    exercise against the payer side).
    """

    expiry: float
    maturity: float
    strike: float
    side: str = "payer"
    fep: bool = True

    def __post_init__(self):
        if not 0.0 < self.expiry < self.maturity:
            raise ValueError("need 0 < expiry < maturity")
        if self.strike <= 0.0:
            raise ValueError("strike must be positive")
        if self.side not in ("payer", "receiver"):
            raise ValueError("side must be 'payer' or 'receiver'")


@dataclass(frozen=True)
class JointGrid:
    """Joint mass of (pool count j, intensity lam) at the expiry, Q_t = 0 branch.

    ``mass[j, i]`` already carries the lam-cell weight; ``cat_mass`` is the
    catastrophe probability P(Q_t > 0).
    """

    t: float
    lam: np.ndarray          # node values, uniform grid from 0
    mass: np.ndarray         # (count_grid, n_lam)
    cat_mass: float
    clipped: float           # total negative mass removed

    @property
    def total(self) -> float:
        return float(self.mass.sum()) + self.cat_mass


def _lambda_moments(t, model, tc, ex=1.0):
    h = 1e-6
    w = np.array([h, -h])
    vals = np.real(char_fn(0.0, t, CharArg(0.0, 0.0, w, ex=ex, ey=1.0), model, tc)
                   .value(model.lambda0))
    base = 1.0 if ex == 1.0 else float(
        np.real(char_fn(0.0, t, CharArg(0.0, 0.0, 0.0, ex=ex, ey=1.0), model, tc)
                .value(model.lambda0)))
    mean = (vals[0] - vals[1]) / (2.0 * h)
    second = (vals[0] - 2.0 * base + vals[1]) / (h * h)
    return mean, max(second - mean * mean, 0.0)


def _lambda_tail_bound(t, model, tc, eps=1e-7):
    """Chernoff bound for the intensity support at t (transform pole-aware)."""
    theta_max = max(max((th for _, _, th in seg.jump_components), default=0.0)
                    for seg in model.segments)
    probes = [s for s in (0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0)
              if theta_max == 0.0 or s < 0.9 / theta_max]
    if theta_max > 0.0:
        probes.append(0.8 / theta_max)
    best = None
    for s in probes:
        try:
            val = char_fn(0.0, t, CharArg(0.0, 0.0, s, ex=1.0, ey=1.0), model, tc) \
                .value(model.lambda0)
        except (PoleCollision, FloatingPointError):
            continue
        m = float(np.real(val))
        if not np.isfinite(m) or m <= 0.0:
            continue
        lam_max = (math.log(m) + math.log(1.0 / eps)) / s
        if best is None or lam_max < best:
            best = lam_max
    if best is None:
        raise NumericalQuality("could not bound the intensity tail")
    return best


def joint_density(t: float, model: ModelParams, tc: TimeChange | None = None,
                  count_grid: int | None = None, lam_fft: int | None = None
                  ) -> JointGrid:
    """Fourier inversion of the joint (Ntilde_t, lam_t) law on the Q_t=0 branch.

    Exact periodic sum over the integer count; damped transform
    (w = -c + iq) inverted by FFT on a uniform intensity grid sized from a
    Chernoff tail bound, with resolution tied to the diffusion scale.
    """
    tc = tc or TimeChange.identity()
    cfg = get_config()
    m_p = count_grid or cfg.joint_count_grid
    while count_support(model, tc, 0.0, t, model.lambda0) > 0.9 * m_p:
        m_p *= 2
        if m_p > cfg.count_grid_max:
            raise NumericalQuality("count support exceeds the joint grid cap")

    mean, var = _lambda_moments(t, model, tc)
    lam_max = max(_lambda_tail_bound(t, model, tc), mean + 8.0 * math.sqrt(var),
                  2.0 * model.lambda0 + 1e-3)
    seg = model.segment_at(0.5 * t)
    slope = tc.slope_at(0.5 * t)
    feature = seg.sigma * math.sqrt(max(mean, 1e-3) * min(slope * t, 1.0 / seg.kappa))
    feature = max(feature, 1e-4)
    n_lam = lam_fft or cfg.joint_lambda_fft
    d_lam = max(feature / 6.0, lam_max / n_lam)
    span = n_lam * d_lam  # >= lam_max; bins past lam_max are dropped below
    d_q = 2.0 * math.pi / span
    # the e^{c lam} unwind amplifies FFT rounding noise at the tail, so the
    # damping is capped relative to the covered range (and backed off on
    # excessive clipping below)
    damp = min(max(1.0 / max(mean, 1e-6), 0.1), 10.0, 8.0 / lam_max)

    p = 2.0 * np.pi * np.fft.fftfreq(m_p)
    q = d_q * np.arange(n_lam)
    n_keep = min(n_lam, int(math.ceil(lam_max / d_lam)) + 2)
    lam = d_lam * np.arange(n_keep)

    while True:
        arg = CharArg(0.0, 1j * p[:, None], -damp + 1j * q[None, :], ex=0.0, ey=1.0)
        cf = char_fn(0.0, t, arg, model, tc).value(model.lambda0)
        by_count = np.fft.fft(cf, axis=0) / m_p    # E[e^{(-c+iq) lam}; Ntilde = j]
        by_count[:, 0] *= 0.5                      # one-sided trapezoid in q
        dens = np.real(np.fft.fft(by_count, axis=1)[:, :n_keep])
        dens *= np.exp(damp * lam)[None, :] * (d_q / math.pi)
        mass = dens * d_lam
        neg = mass < 0.0
        clipped = float(-mass[neg].sum())
        if clipped <= 1e-6 or damp <= 0.05:
            break
        damp *= 0.5
    if clipped > 1e-4:
        raise NumericalQuality(f"joint density clipped mass {clipped}")
    mass[neg] = 0.0

    cat = 1.0 - float(np.real(
        char_fn(0.0, t, CharArg(0.0, 0.0, 0.0, ex=0.0, ey=1.0), model, tc)
        .value(model.lambda0)))
    total = mass.sum() + cat
    if abs(total - 1.0) > 1e-6:
        raise NumericalQuality(f"joint density mass {total} deviates from 1")
    mass *= (1.0 - cat) / mass.sum()
    return JointGrid(t, lam, mass, cat, clipped)


def _forward_leg_factors(t, maturity, model, tc, basket, curve):
    """Per-period (A, B) factors of the conditional forward swap value.

    Given (lam_t, N_t = k), the swap value is
    (N_M - k)/N_M * (l1 * S1(lam) - K * S2(lam)) with S1, S2 built from the
    survival factors exp(A + B lam) at period ends and midpoints.
    """
    sched = LegSchedule.quarterly(maturity, start=t)
    arg = CharArg(0.0, math.log1p(-1.0 / basket.n_names), 0.0, ex=0.0, ey=1.0)
    ends = list(sched.ends)
    coeffs_end = [char_fn(t, tau, arg, model, tc) for tau in ends]
    coeffs_mid = [char_fn(t, tau, arg, model, tc) for tau in sched.mids]
    df_end = curve.df(np.array(ends)) / curve.df(t)
    df_mid = curve.df(sched.mids) / curve.df(t)

    def s1_s2(lam):
        lam = np.asarray(lam, dtype=float)
        prev = np.ones_like(lam)
        s1 = np.zeros_like(lam)
        for dfe, ce in zip(df_end, coeffs_end):
            cur = np.real(ce.value(lam))
            s1 += dfe * (prev - cur)
            prev = cur
        s2 = np.zeros_like(lam)
        for dfm, acc, cm in zip(df_mid, sched.accruals, coeffs_mid):
            s2 += acc * dfm * np.real(cm.value(lam))
        return s1, s2

    return s1_s2


def swaption_exact(spec: SwaptionSpec, model: ModelParams,
                   tc: TimeChange | None = None, basket: Basket | None = None,
                   curve: DiscountCurve | None = None,
                   joint: JointGrid | None = None) -> dict:
    """Exact swaption PV by integrating the conditional swap value against the
    joint (count, intensity) law at expiry.  Losses enter as l1 * N_t."""
    tc = tc or TimeChange.identity()
    basket = basket or Basket()
    curve = curve or DiscountCurve.flat(0.0)
    grid = joint or joint_density(spec.expiry, model, tc)
    nm = basket.n_names
    l1 = basket.jump_law.l1

    s1_s2 = _forward_leg_factors(spec.expiry, spec.maturity, model, tc, basket, curve)
    s1, s2 = s1_s2(grid.lam)

    pm = cached_pool_matrix(nm, grid.mass.shape[0] - 1, 0)
    weights = grid.mass.T @ pm.rows              # (n_lam, nm + 1)

    k = np.arange(nm + 1)
    value = (nm - k)[None, :] / nm * (l1 * s1 - spec.strike * s2)[:, None]
    fep_loss = (l1 * k / nm)[None, :] if spec.fep else 0.0
    payer_pay = np.maximum(value + fep_loss, 0.0)
    recv_pay = np.maximum(-value - fep_loss, 0.0)

    df0 = curve.df(spec.expiry)
    payer = df0 * (float(np.sum(weights * payer_pay))
                   + grid.cat_mass * (l1 if spec.fep else 0.0))
    receiver = df0 * float(np.sum(weights * recv_pay))
    out = {
        "payer": payer,
        "receiver": receiver,
        "pv": payer if spec.side == "payer" else receiver,
        "cat_mass": grid.cat_mass,
    }
    return out


def _h_weights(spec: SwaptionSpec, basket: Basket, curve: DiscountCurve):
    """Nodes and weights discretizing h(tau) = [delta(tau-T) + K/l1 + r(tau)] ZC(t,tau).

    The Dirac lands at T; the spread and instantaneous-rate parts sum on the
    coupon grid (the r part as ZC decrements across periods).
    """
    sched = LegSchedule.quarterly(spec.maturity, start=spec.expiry)
    df_t = curve.df(spec.expiry)
    nodes = list(sched.mids) + [spec.maturity]
    w = []
    k_over_l1 = spec.strike / basket.jump_law.l1
    for start, end, mid, acc in zip(sched.starts, sched.ends, sched.mids, sched.accruals):
        zc_mid = curve.df(mid) / df_t
        w.append(k_over_l1 * acc * zc_mid + (curve.df(start) - curve.df(end)) / df_t)
    w.append(curve.df(spec.maturity) / df_t)
    return np.array(nodes), np.array(w)


def swaption_fast_receiver(spec: SwaptionSpec, model: ModelParams,
                           tc: TimeChange | None = None, basket: Basket | None = None,
                           curve: DiscountCurve | None = None,
                           anchor: float | None = None,
                           consts: LargePoolConsts | None = None) -> float:
    """Large-pool receiver swaption as a one-dimensional sine-kernel integral.

    The exercise boundary in the pool loss, L*(lam_t), is linearized around
    the anchor intensity; with the symmetric cutoff choice the indicator
    inversion collapses to sin(p(alpha - beta*Lambda))/p.  Prices the
    front-end-protected contract only.
    """
    tc = tc or TimeChange.identity()
    basket = basket or Basket()
    curve = curve or DiscountCurve.flat(0.0)
    if not spec.fep:
        raise ValueError("the fast method prices the front-end-protected contract")
    consts = consts or solve_mu(basket.jump_law, basket.n_names)
    mu, l_max = consts.mu, consts.max_loss
    t = spec.expiry

    nodes, w = _h_weights(spec, basket, curve)
    coeffs = [char_fn(t, tau, CharArg(-mu, 0.0, 0.0, ex=0.0, ey=1.0), model, tc)
              for tau in nodes]
    a_fwd = np.array([float(np.real(c.A)) for c in coeffs])
    b_fwd = np.array([float(np.real(c.B)) for c in coeffs])

    def l_star(lam):
        return math.log(float(np.sum(w * np.exp(a_fwd + b_fwd * lam)))) / mu

    if l_star(0.0) <= 0.0:
        return 0.0  # never exercised

    if anchor is None:
        # typical intensity, backed off toward 0 until it sits inside the
        # exercise region (L*(0) > 0 guarantees a valid anchor exists)
        mean, _ = _lambda_moments(t, model, tc)
        anchor = max(mean, 0.0)
        while anchor > 1e-12 and l_star(anchor) < 0.0:
            anchor *= 0.5
        if l_star(anchor) < 0.0:
            anchor = 0.0
    elif l_star(anchor) < 0.0:
        raise AnchorInvalid(f"L*({anchor}) < 0; pick a smaller anchor")

    g = w * np.exp(a_fwd + b_fwd * anchor)
    alpha = math.log(float(np.sum(g))) / mu
    beta = float(np.sum(g * b_fwd) / np.sum(g)) / mu
    c_eff = alpha - beta * anchor
    if c_eff <= 0.0:
        return 0.0

    def bracket(p):
        """sum_tau w e^{A(t,tau)} E[e^{-(ip+mu)L + (ip beta + B(t,tau)) lam}; Q=0]
        minus E[e^{-ip L + ip beta lam}; Q=0], vectorized over p."""
        total = np.zeros_like(p, dtype=np.complex128)
        for w_tau, a_tau, b_tau in zip(w, a_fwd, b_fwd):
            cf = char_fn(0.0, t, CharArg(-1j * p - mu, 0.0, 1j * p * beta + b_tau,
                                         ex=0.0, ey=1.0), model, tc)
            total += w_tau * np.exp(a_tau) * cf.value(model.lambda0)
        cf0 = char_fn(0.0, t, CharArg(-1j * p, 0.0, 1j * p * beta, ex=0.0, ey=1.0),
                      model, tc)
        return total - cf0.value(model.lambda0)

    # 2/pi * int_0^inf Re{ sin(p c) / p * bracket } dp, adaptive range
    span, n_pts = 48.0, 3072
    total, lo = 0.0, 0.0
    while True:
        p = np.linspace(lo, lo + span, n_pts, endpoint=False) + 0.5 * span / n_pts
        vals = np.sin(p * c_eff) / p * bracket(p)
        total += 2.0 / math.pi * float(np.real(np.sum(vals))) * (span / n_pts)
        lo += span
        if np.max(np.abs(vals)) * span < 1e-9 or lo >= 2048.0:
            break
    pv_units = l_max * total * curve.df(t)
    return pv_units / basket.n_names


def swaption_fast_payer(spec: SwaptionSpec, model: ModelParams,
                        tc: TimeChange | None = None, basket: Basket | None = None,
                        curve: DiscountCurve | None = None,
                        anchor: float | None = None,
                        consts: LargePoolConsts | None = None) -> float:
    """Payer via call-put parity: receiver plus the forward contract value
    L_M [1 - sum_tau h(tau) E(e^{-mu Ltilde_tau}; Q_tau = 0)] ZC(0, t)."""
    tc = tc or TimeChange.identity()
    basket = basket or Basket()
    curve = curve or DiscountCurve.flat(0.0)
    consts = consts or solve_mu(basket.jump_law, basket.n_names)
    receiver = swaption_fast_receiver(spec, model, tc, basket, curve, anchor, consts)
    forward = fast_forward_value(spec, model, tc, basket, curve, consts)
    return receiver + forward


def fast_forward_value(spec: SwaptionSpec, model: ModelParams,
                       tc: TimeChange | None = None, basket: Basket | None = None,
                       curve: DiscountCurve | None = None,
                       consts: LargePoolConsts | None = None) -> float:
    """Time-0 value of (protection - premium + front-end protection) on the
    forward swap, in the h-weight discretization used by the fast pricer."""
    tc = tc or TimeChange.identity()
    basket = basket or Basket()
    curve = curve or DiscountCurve.flat(0.0)
    consts = consts or solve_mu(basket.jump_law, basket.n_names)
    nodes, w = _h_weights(spec, basket, curve)
    phi = np.array([float(np.real(
        char_fn(0.0, tau, CharArg(-consts.mu, 0.0, 0.0, ex=0.0, ey=1.0), model, tc)
        .value(model.lambda0))) for tau in nodes])
    pv_units = consts.max_loss * (1.0 - float(np.sum(w * phi))) * curve.df(spec.expiry)
    return pv_units / basket.n_names
