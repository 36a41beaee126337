"""Process-wide numerical settings (grid sizes, tolerances, threading)."""
from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class RunConfig:
    count_grid: int = 4096        # DFT size for count-space Fourier inversion
    count_grid_max: int = 32768   # hard cap when the count support forces growth
    tail_eps: float = 1e-8        # neglected pool-count tail probability
    neg_prob_tol: float = 1e-10   # inversion negatives beyond this raise NumericalQuality
    joint_count_grid: int = 512   # count DFT size for the swaption joint density
    joint_lambda_fft: int = 8192  # intensity FFT size for the joint density
    fd_step: float = 1e-5         # finite-difference step for CF moments
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("count_grid", "count_grid_max", "joint_count_grid",
                     "joint_lambda_fft", "threads"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.fd_step <= 0 or self.tail_eps <= 0:
            raise ValueError("tolerances must be positive")


_config = RunConfig()


def get_config() -> RunConfig:
    return _config


def set_config(cfg: RunConfig) -> None:
    global _config
    _config = cfg


def update_config(**kwargs) -> RunConfig:
    global _config
    _config = replace(_config, **kwargs)
    return _config
