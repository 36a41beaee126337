"""Closed-form characteristic function of the loss-intensity model.

State: pool loss ``Ltilde``, pool default count ``Ntilde``, intensity
``lam`` (CIR with Gamma-distributed upward jumps), catastrophe marker ``Q``
(jumps with intensity ``alpha*lam + beta``) and counterparty marker ``R``
(jumps with probability ``xi`` per pool default plus intensity
``zeta*lam + eta``).

The conditional transform is exponential-affine:

    E_t[ exp(u*Ltilde_T + v*Ntilde_T + w*lam_T + x*Q_T + y*R_T) ]
        = exp(A + B*lam_t + u*Ltilde_t + v*Ntilde_t + x*Q_t + y*R_t)

with A, B solving a Riccati system backwards from ``A=0, B=w`` at ``T``.
Both coefficients have closed forms for piecewise-constant parameters; the
extended arguments ``x = -inf`` / ``y = -inf`` (survival indicators) are
encoded through ``ex = e^x = 0`` / ``ey = e^y = 0``.

`char_fn` evaluates the closed form; `ode_oracle` integrates the same system
with a fixed-step RK4 scheme and exists purely as an independent check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateSigma, PoleCollision
from .laws import FixedLoss, JumpSizeLaw

SIGMA_FLOOR = 1e-6
_POLE_TOL = 1e-12


@dataclass(frozen=True)
class ParamSegment:
    """Intensity-process parameters, constant over [t_start, t_end).

    The Gamma jump component has integer shape index ``n`` (mean jump size
    ``(n+1)*theta``) and arrival rate ``gamma``; extra components may be
    supplied as ``extra_jumps = ((gamma, n, theta), ...)``.
    """

    t_start: float
    t_end: float | None  # None = open-ended
    lambda_inf: float
    kappa: float
    sigma: float
    n: int = 0
    gamma: float = 0.0
    theta: float = 1.0
    alpha: float = 0.0
    beta: float = 0.0
    xi: float = 0.0
    zeta: float = 0.0
    eta: float = 0.0
    extra_jumps: tuple[tuple[float, int, float], ...] = ()

    def __post_init__(self):
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")
        if self.theta <= 0.0:
            raise ValueError("theta must be positive")
        if self.gamma < 0.0 or self.alpha < 0.0 or self.beta < 0.0:
            raise ValueError("gamma, alpha, beta must be nonnegative")
        if self.zeta < 0.0 or self.eta < 0.0:
            raise ValueError("zeta, eta must be nonnegative")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError("xi must be in [0, 1]")
        if self.n < 0 or int(self.n) != self.n:
            raise ValueError("n must be a nonnegative integer")

    @property
    def jump_components(self) -> tuple[tuple[float, int, float], ...]:
        """All (gamma, n, theta) Gamma components of the intensity jumps."""
        base = ((self.gamma, int(self.n), self.theta),) if self.gamma > 0.0 else ()
        return base + tuple((g, int(n), th) for g, n, th in self.extra_jumps)

    def scaled(self, a: float) -> "ParamSegment":
        """Parameter scaling equivalent to running time at speed ``a``.

        lambda_inf, kappa, sigma, gamma, theta, beta, eta scale by ``a``;
        n, alpha, xi, zeta are invariant.
        """
        if a == 1.0:
            return self
        return replace(
            self,
            lambda_inf=a * self.lambda_inf,
            kappa=a * self.kappa,
            sigma=a * self.sigma,
            gamma=a * self.gamma,
            theta=a * self.theta,
            beta=a * self.beta,
            eta=a * self.eta,
            extra_jumps=tuple((a * g, n, a * th) for g, n, th in self.extra_jumps),
        )


@dataclass(frozen=True)
class TimeChange:
    """Piecewise-affine deterministic time change, applied as parameter scaling.

    ``slopes[i]`` applies on (breakpoints[i-1], breakpoints[i]]; the final
    slope extends past the last breakpoint.  ``len(slopes) ==
    len(breakpoints) + 1``.
    """

    breakpoints: tuple[float, ...] = ()
    slopes: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if len(self.slopes) != len(self.breakpoints) + 1:
            raise ValueError("need one slope per interval (len(slopes) == len(breakpoints) + 1)")
        if any(a <= 0.0 for a in self.slopes):
            raise ValueError("slopes must be strictly positive")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if self.breakpoints and self.breakpoints[0] <= 0.0:
            raise ValueError("breakpoints must be positive")

    def slope_at(self, tau: float) -> float:
        for b, a in zip(self.breakpoints, self.slopes):
            if tau <= b:
                return a
        return self.slopes[-1]

    @classmethod
    def identity(cls) -> "TimeChange":
        return cls((), (1.0,))


@dataclass(frozen=True)
class ModelParams:
    """Initial intensity, piecewise-constant segments and the loss-size law."""

    lambda0: float
    segments: tuple[ParamSegment, ...]
    jump_law: JumpSizeLaw = field(default_factory=lambda: FixedLoss(0.6))

    def __post_init__(self):
        if self.lambda0 < 0.0:
            raise ValueError("lambda0 must be nonnegative")
        if not self.segments:
            raise ValueError("at least one parameter segment required")

    @classmethod
    def constant(cls, lambda0, lambda_inf, kappa, sigma, n=0, gamma=0.0, theta=1.0,
                 alpha=0.0, beta=0.0, xi=0.0, zeta=0.0, eta=0.0,
                 jump_law: JumpSizeLaw | None = None) -> "ModelParams":
        seg = ParamSegment(0.0, None, lambda_inf, kappa, sigma, n, gamma, theta,
                           alpha, beta, xi, zeta, eta)
        return cls(lambda0, (seg,), jump_law or FixedLoss(0.6))

    def segment_at(self, t: float) -> ParamSegment:
        for seg in self.segments:
            end = math.inf if seg.t_end is None else seg.t_end
            if seg.t_start <= t < end:
                return seg
        raise ValueError(f"no parameter segment covers t={t}")


@dataclass(frozen=True)
class CharArg:
    """Argument of the characteristic function.

    ``u`` conjugates the pool loss, ``v`` the pool count, ``w`` the intensity.
    ``ex = e^x`` and ``ey = e^y`` encode the catastrophe/counterparty
    variables; 0 means the survival indicator (x or y = -inf).  u, v, w may be
    numpy arrays (broadcast together).
    """

    u: complex | np.ndarray = 0.0
    v: complex | np.ndarray = 0.0
    w: complex | np.ndarray = 0.0
    ex: float = 1.0
    ey: float = 1.0


@dataclass(frozen=True)
class AffineCoeffs:
    """The (A, B) pair: log-transform intercept and intensity loading."""

    A: complex | np.ndarray
    B: complex | np.ndarray

    def value(self, lam: float | np.ndarray):
        """exp(A + B*lam), the transform at intensity ``lam`` (count/loss terms at 0)."""
        with np.errstate(over="ignore"):  # extreme probe arguments may saturate to inf
            return np.exp(self.A + self.B * lam)


def psi(arg: CharArg, seg: ParamSegment, phiJ_u) -> complex | np.ndarray:
    """Constant term of the Riccati equation for B.

    psi = 1 - e^v phi_J(u) [1 - xi (1 - e^y)] + alpha (1 - e^x) + zeta (1 - e^y)
    """
    ev = np.exp(np.asarray(arg.v, dtype=np.complex128))
    return (1.0 - ev * phiJ_u * (1.0 - seg.xi * (1.0 - arg.ey))
            + seg.alpha * (1.0 - arg.ex) + seg.zeta * (1.0 - arg.ey))


def b_roots(psi_val, seg: ParamSegment):
    """Constant solutions of the Riccati equation: (kappa +/- sqrt(kappa^2 + 2 sigma^2 psi)) / sigma^2.

    The minus root is evaluated as -2 psi / (kappa + sqrt(...)), which is the
    same number without the cancellation that kills precision when
    sigma^2 |psi| << kappa^2.
    """
    if seg.sigma < SIGMA_FLOOR:
        raise DegenerateSigma(f"sigma={seg.sigma} below floor {SIGMA_FLOOR}")
    s2 = seg.sigma * seg.sigma
    root = np.sqrt(np.asarray(seg.kappa * seg.kappa + 2.0 * s2 * psi_val, dtype=np.complex128))
    return (seg.kappa + root) / s2, -2.0 * psi_val / (seg.kappa + root)


def _check_theta_pole(val, theta: float):
    if np.any(np.abs(val) < _POLE_TOL * max(1.0, theta)):
        raise PoleCollision(f"1 - theta*B vanished (theta={theta})")


def _expm1_c(z):
    """exp(z) - 1 for complex arrays, series-stabilized near 0."""
    z = np.asarray(z, dtype=np.complex128)
    small = np.abs(z) < 1e-4
    if not small.any():
        with np.errstate(over="ignore"):
            return np.exp(z) - 1.0
    zs = np.where(small, z, 0.0)
    series = zs * (1.0 + zs * (0.5 + zs * (1.0 / 6.0 + zs / 24.0)))
    with np.errstate(over="ignore"):
        direct = np.exp(z) - 1.0
    return np.where(small, series, direct)


def _log1p_c(z):
    """log(1 + z) for complex arrays, series-stabilized near 0."""
    z = np.asarray(z, dtype=np.complex128)
    small = np.abs(z) < 1e-4
    if not small.any():
        return np.log(1.0 + z)
    zs = np.where(small, z, 0.0)
    series = zs * (1.0 - zs * (0.5 - zs * (1.0 / 3.0 - zs / 4.0)))
    return np.where(small, series, np.log(1.0 + z))


def solve_segment(arg_terminal: AffineCoeffs, arg: CharArg, seg: ParamSegment,
                  dt: float, phiJ_u=None) -> AffineCoeffs:
    """Propagate (A, B) backwards across one constant-parameter stretch of length dt.

    B follows the explicit Riccati solution; A adds the log/pole-decomposition
    terms (one block per Gamma jump component of the intensity) plus the
    linear catastrophe/counterparty contributions
    ``-beta (1-e^x) dt - eta (1-e^y) dt``.

    All ratios are evaluated through the common denominator
    ``D = (w - B_+) - (w - B_-) e^{-s dt}`` which stays finite at ``w = B_+``,
    so the constant-solution limit needs no special casing.  Complex logs use
    the principal branch; validity over the argument region is enforced by the
    ODE-oracle tests, not by continuity tracking.
    """
    if dt < 0.0:
        raise ValueError("dt must be nonnegative")
    if dt == 0.0:
        return arg_terminal

    if phiJ_u is None:
        raise ValueError("phiJ_u (loss-law transform at u) is required for dt > 0")

    psi_val = psi(arg, seg, phiJ_u)
    b_plus, b_minus = b_roots(psi_val, seg)
    s = 0.5 * seg.sigma * seg.sigma * (b_plus - b_minus)  # = sqrt(kappa^2 + 2 sigma^2 psi)

    w = np.asarray(arg_terminal.B, dtype=np.complex128)
    em1 = _expm1_c(-s * dt)  # e^{-s dt} - 1
    # D = (w - B_+) - (w - B_-) e^{-s dt}, rearranged so dt -> 0 has no cancellation
    denom = (b_minus - b_plus) - (w - b_minus) * em1
    scale = np.abs(b_minus - b_plus) + np.abs((w - b_minus) * em1)
    if np.any(np.abs(denom) <= 1e-13 * scale):
        raise PoleCollision("Riccati denominator vanished (solution diverges on this argument)")

    B = (w * (b_minus - b_plus) - b_plus * (w - b_minus) * em1) / denom
    # log[(B - B_+)/(w - B_+)] = log1p[(w - B_-) em1 / D]; the minus-root log
    # follows from the exact continuous-branch identity ratio_minus = ratio_plus e^{-s dt}
    log_ratio_plus = _log1p_c((w - b_minus) * em1 / denom)
    log_ratio_minus = log_ratio_plus - s * dt

    kli = seg.kappa * seg.lambda_inf
    components = seg.jump_components

    def phi_x(z, n, theta):
        return (1.0 - theta * z) ** (-(n + 1))

    coef_plus = kli * b_plus
    coef_minus = kli * b_minus
    for g, n, th in components:
        _check_theta_pole(1.0 - th * b_plus, th)
        _check_theta_pole(1.0 - th * b_minus, th)
        coef_plus = coef_plus + g * (phi_x(b_plus, n, th) - 1.0)
        coef_minus = coef_minus + g * (phi_x(b_minus, n, th) - 1.0)

    A = np.asarray(arg_terminal.A, dtype=np.complex128) \
        + (coef_plus * log_ratio_plus - coef_minus * log_ratio_minus) / s

    for g, n, th in components:
        one_m_thB = 1.0 - th * B
        one_m_thw = 1.0 - th * w
        _check_theta_pole(one_m_thB, th)
        _check_theta_pole(one_m_thw, th)
        log_theta = np.log(one_m_thB / one_m_thw)
        A = A + (g / s) * (phi_x(b_minus, n, th) - phi_x(b_plus, n, th)) * log_theta
        if n > 0:
            inv_B = 1.0 / one_m_thB
            inv_w = 1.0 / one_m_thw
            inv_p = 1.0 / (1.0 - th * b_plus)
            inv_m = 1.0 / (1.0 - th * b_minus)
            powB, poww = inv_B, inv_w
            acc = np.zeros_like(B)
            for k in range(1, n + 1):
                acc = acc + (inv_p ** (n - k + 1) - inv_m ** (n - k + 1)) * (powB - poww) / k
                if k < n:
                    powB = powB * inv_B
                    poww = poww * inv_w
            A = A + (g / s) * acc

    A = A - seg.beta * (1.0 - arg.ex) * dt - seg.eta * (1.0 - arg.ey) * dt
    return AffineCoeffs(A, B)


def effective_segments(model: ModelParams, tc: TimeChange, t: float, T: float
                       ) -> list[tuple[float, float, ParamSegment, float]]:
    """Partition calendar (t, T] into constant-parameter stretches.

    Returns (t0, t1, segment, slope) tuples.  The time change runs the model
    clock at ``slope`` on each stretch, so the affine system integrates over
    an effective length ``slope * (t1 - t0)`` — exactly equivalent to the
    parameter scaling table with the intensity state rescaled alongside.
    """
    cuts = {t, T}
    for seg in model.segments:
        for b in (seg.t_start, seg.t_end):
            if b is not None and t < b < T:
                cuts.add(b)
    for b in tc.breakpoints:
        if t < b < T:
            cuts.add(b)
    grid = sorted(cuts)
    pieces = []
    for t0, t1 in zip(grid, grid[1:]):
        mid = 0.5 * (t0 + t1)
        pieces.append((t0, t1, model.segment_at(mid), tc.slope_at(mid)))
    return pieces


def char_fn(t: float, T: float, arg: CharArg, model: ModelParams,
            tc: TimeChange | None = None) -> AffineCoeffs:
    """Closed-form (A, B) over calendar [t, T], chaining backwards from (0, w).

    Intermediary boundary conditions carry (A, B) across segment and slope
    breakpoints; on each stretch the model clock runs at the time-change
    slope.  B multiplies the model intensity (lambda0 at t = 0).
    """
    if not 0.0 <= t <= T:
        raise ValueError(f"need 0 <= t <= T, got t={t}, T={T}")
    tc = tc or TimeChange.identity()
    u = np.asarray(arg.u, dtype=np.complex128)
    v = np.asarray(arg.v, dtype=np.complex128)
    w = np.asarray(arg.w, dtype=np.complex128)
    shape = np.broadcast_shapes(u.shape, v.shape, w.shape)
    coeffs = AffineCoeffs(np.zeros(shape, dtype=np.complex128),
                          np.broadcast_to(w, shape).astype(np.complex128))
    if t == T:
        return coeffs
    phiJ_u = model.jump_law.phi(u)
    for t0, t1, seg, slope in reversed(effective_segments(model, tc, t, T)):
        coeffs = solve_segment(coeffs, arg, seg, slope * (t1 - t0), phiJ_u)
    return coeffs


def ode_oracle(t: float, T: float, arg: CharArg, model: ModelParams,
               tc: TimeChange | None = None, steps: int = 2000) -> AffineCoeffs:
    """Fixed-step RK4 backward integration of the (A, B) system; test oracle only."""
    if steps < 100:
        raise ValueError("steps must be at least 100")
    if not 0.0 <= t <= T:
        raise ValueError(f"need 0 <= t <= T, got t={t}, T={T}")
    tc = tc or TimeChange.identity()
    u = np.asarray(arg.u, dtype=np.complex128)
    v = np.asarray(arg.v, dtype=np.complex128)
    w = np.asarray(arg.w, dtype=np.complex128)
    shape = np.broadcast_shapes(u.shape, v.shape, w.shape)
    A = np.zeros(shape, dtype=np.complex128)
    B = np.broadcast_to(w, shape).astype(np.complex128).copy()
    if t == T:
        return AffineCoeffs(A, B)

    phiJ_u = model.jump_law.phi(u)
    pieces = effective_segments(model, tc, t, T)
    total = sum(slope * (t1 - t0) for t0, t1, _, slope in pieces)

    for t0, t1, seg, slope in reversed(pieces):
        length = slope * (t1 - t0)
        n_steps = max(10, int(round(steps * length / total)))
        h = length / n_steps
        psi_val = psi(arg, seg, phiJ_u)
        kli = seg.kappa * seg.lambda_inf
        half_s2 = 0.5 * seg.sigma * seg.sigma
        comps = seg.jump_components
        bx = seg.beta * (1.0 - arg.ex) + seg.eta * (1.0 - arg.ey)

        def deriv(Acur, Bcur):
            dB = seg.kappa * Bcur - half_s2 * Bcur * Bcur + psi_val
            dA = -kli * Bcur + bx
            for g, n, th in comps:
                dA = dA - g * ((1.0 - th * Bcur) ** (-(n + 1)) - 1.0)
            return dA, dB

        for _ in range(n_steps):
            k1a, k1b = deriv(A, B)
            k2a, k2b = deriv(A - 0.5 * h * k1a, B - 0.5 * h * k1b)
            k3a, k3b = deriv(A - 0.5 * h * k2a, B - 0.5 * h * k2b)
            k4a, k4b = deriv(A - h * k3a, B - h * k3b)
            A = A - (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
            B = B - (h / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)

    return AffineCoeffs(A, B)
