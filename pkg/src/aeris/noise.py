"""
Ornstein-Uhlenbeck model of relative Rabi-amplitude errors.

The process is advanced with the exact discretization

    eps(t + dt) = eps(t) exp(-dt / tau_c) + sigma sqrt(1 - exp(-2 dt / tau_c)) N(0, 1)

so ``sigma`` is the stationary standard deviation regardless of ``dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

__all__ = ["NoiseModel", "OUTrajectory", "ou_path", "ou_trajectory"]


@dataclass(frozen=True)
class NoiseModel:
    """Relative RF amplitude noise.

    Parameters
    ----------
    sigma : float
        Stationary standard deviation of the relative error.
    corr_time : float
        Correlation time (s).
    amp_shift : float
        Constant relative offset added to the fluctuation.
    step : float
        Update interval of the piecewise-constant path (s).
    seed : int
        Seed of the random stream.
    """

    sigma: float = 0.0
    corr_time: float = 1e-3
    amp_shift: float = 0.0
    step: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not self.corr_time > 0:
            raise ValueError("corr_time must be > 0")
        if not self.step > 0:
            raise ValueError("step must be > 0")

    @property
    def is_null(self) -> bool:
        return self.sigma == 0 and self.amp_shift == 0


def ou_path(sigma: float, corr_time: float, step: float, n: int, rng,
            size=()) -> np.ndarray:
    """``n`` consecutive OU samples started from the stationary law.

    ``size`` prepends independent batch axes; the result has shape
    ``size + (n,)``.
    """
    size = tuple(np.atleast_1d(size)) if size != () else ()
    z = rng.standard_normal(size + (n,))
    if n == 0:
        return z
    a = math.exp(-step / corr_time)
    b = math.sqrt(-math.expm1(-2.0 * step / corr_time))
    x = sigma * b * z
    x[..., 0] = sigma * z[..., 0]
    # AR(1) recursion out[i] = a out[i-1] + x[i]
    return lfilter([1.0], [1.0, -a], x, axis=-1)


@dataclass(frozen=True)
class OUTrajectory:
    """Piecewise-constant perturbation ``eps(t) + amp_shift``.

    ``values[i]`` holds on ``[i * hold_step, (i + 1) * hold_step)``; times past
    the end keep the last value.
    """

    values: np.ndarray
    hold_step: float
    amp_shift: float = 0.0

    def __call__(self, t):
        idx = np.floor(np.asarray(t) / self.hold_step + 1e-9).astype(int)
        idx = np.clip(idx, 0, len(self.values) - 1)
        out = self.values[idx] + self.amp_shift
        return float(out) if np.ndim(out) == 0 else out


def ou_trajectory(noise: NoiseModel, duration: float, rng=None) -> OUTrajectory:
    """Sample one perturbation path covering ``[0, duration]``.

    Deterministic for a given ``noise.seed`` unless a generator is passed.
    """
    if not duration > 0:
        raise ValueError("duration must be > 0")
    n = max(1, math.ceil(duration / noise.step - 1e-9))
    if noise.sigma == 0:
        values = np.zeros(n)
    else:
        rng = np.random.default_rng(noise.seed) if rng is None else rng
        values = ou_path(noise.sigma, noise.corr_time, noise.step, n, rng)
    return OUTrajectory(values=values, hold_step=noise.step,
                        amp_shift=noise.amp_shift)
