"""Jump-size (loss-given-default) laws for the pool loss process.

A law describes the distribution of the loss ``l = 1 - R`` a single default
adds to the pool loss, together with its moment transform
``phi(z) = E[exp(z*l)]`` which enters the characteristic function.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FixedLoss:
    """Deterministic loss per default (recovery ``1 - l1``)."""

    l1: float

    def __post_init__(self):
        if not 0.0 < self.l1 <= 1.0:
            raise ValueError(f"loss per default must be in (0, 1], got {self.l1}")

    @property
    def mean(self) -> float:
        return self.l1

    @property
    def min_loss(self) -> float:
        return self.l1

    @property
    def points(self) -> tuple[tuple[float, float], ...]:
        return ((self.l1, 1.0),)

    def phi(self, z):
        """Moment transform E[e^{z l}] = e^{z l1}."""
        return np.exp(np.asarray(z, dtype=np.complex128) * self.l1)


@dataclass(frozen=True)
class DiscreteLoss:
    """Discrete loss-size law: i.i.d. draws from ``points = ((l_i, w_i), ...)``."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("discrete loss law needs at least one point")
        total = sum(w for _, w in self.points)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {total}")
        for l, w in self.points:
            if not 0.0 < l <= 1.0:
                raise ValueError(f"loss sizes must be in (0, 1], got {l}")
            if w < 0.0:
                raise ValueError(f"weights must be nonnegative, got {w}")

    @property
    def mean(self) -> float:
        return sum(l * w for l, w in self.points)

    @property
    def l1(self) -> float:
        return self.mean

    @property
    def min_loss(self) -> float:
        return min(l for l, _ in self.points)

    def phi(self, z):
        z = np.asarray(z, dtype=np.complex128)
        out = np.zeros_like(z)
        for l, w in self.points:
            out = out + w * np.exp(z * l)
        return out


JumpSizeLaw = FixedLoss | DiscreteLoss
