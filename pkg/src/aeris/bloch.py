"""
Bloch-equation dynamics in the frame rotating at the RF carrier.

Free precession uses the exact solution; RF drive is integrated with a
fixed-step classical RK4. All functions broadcast over leading axes of the
magnetization array (shape ``(..., 3)``), with detunings broadcasting against
``m[..., 0]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import PulseParams

__all__ = [
    "DriveTrajectory",
    "StepSizeError",
    "bloch_rhs",
    "free_precess",
    "drive",
    "rotation_closed_form",
    "rotation_speed_error",
    "default_step",
]

TWO_PI = 2.0 * math.pi
# RK4 global error is ~3e-9 per Rabi period at this resolution
STEPS_PER_PERIOD = 500


class StepSizeError(ValueError):
    """Integration step too coarse or incommensurate with the pulse."""


def _rate(T):
    return 0.0 if math.isinf(T) else 1.0 / T


@dataclass(frozen=True)
class DriveTrajectory:
    """Uniformly sampled drive solution; ``states[..., j, :]`` is at ``times[j]``."""

    times: np.ndarray
    states: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[..., -1, :]

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])


def bloch_rhs(m, omega, phase, delta, r1, r2):
    """dM/dt with angular Rabi rate ``omega`` and angular detuning ``delta``."""
    mx, my, mz = m[..., 0], m[..., 1], m[..., 2]
    ws = omega * math.sin(phase) if np.isscalar(phase) else omega * np.sin(phase)
    wc = omega * math.cos(phase) if np.isscalar(phase) else omega * np.cos(phase)
    dx = -r2 * mx - delta * my + ws * mz
    dy = delta * mx - r2 * my - wc * mz
    dz = -ws * mx + wc * my - r1 * mz + r1
    return np.stack([dx, dy, dz], axis=-1)


def free_precess(m, detuning, duration: float, T1: float = math.inf,
                 T2_star: float = math.inf) -> np.ndarray:
    """Exact evolution with the RF off.

    The transverse part turns by ``2 pi detuning duration`` and decays with
    ``T2_star``; ``mz`` relaxes toward 1 with ``T1``.
    """
    if duration < 0:
        raise ValueError("duration must be >= 0")
    m = np.asarray(m, dtype=float)
    angle = TWO_PI * np.asarray(detuning, dtype=float) * duration
    e2 = math.exp(-duration * _rate(T2_star))
    e1 = math.exp(-duration * _rate(T1))
    c, s = np.cos(angle) * e2, np.sin(angle) * e2
    mx, my, mz = m[..., 0], m[..., 1], m[..., 2]
    out = np.stack([c * mx - s * my, s * mx + c * my,
                    1.0 + (mz - 1.0) * e1 * np.ones_like(c)], axis=-1)
    return out


def default_step(rabi: float, noise_step: float | None = None) -> float:
    """Largest step no coarser than ``1/STEPS_PER_PERIOD`` of the Rabi period
    that also divides the noise update interval."""
    h = 1.0 / (STEPS_PER_PERIOD * rabi)
    if noise_step is None:
        return h
    if noise_step <= h:
        return noise_step
    return noise_step / math.ceil(noise_step / h - 1e-9)


def _n_steps(duration: float, step: float) -> int:
    n = round(duration / step)
    if n < 1 or abs(n * step - duration) > 1e-6 * step:
        raise StepSizeError(
            f"step {step:g} s does not divide duration {duration:g} s")
    return n


def drive(m, pulse: PulseParams, detuning=0.0, T1: float = math.inf,
          T2_star: float = math.inf,
          rabi_perturbation: Callable[[float], float] | None = None,
          step: float | None = None) -> DriveTrajectory:
    """Integrate the Bloch equations under RF drive with classical RK4.

    Parameters
    ----------
    m : array_like, shape (..., 3)
        Initial magnetization.
    pulse : PulseParams
        Rabi frequency (Hz), phase (rad) and duration (s).
    detuning : float or array_like
        Offset of each component from the carrier (Hz); kept during drive.
    rabi_perturbation : callable, optional
        Relative Rabi error ``eps(t)``; the instantaneous rate is
        ``2 pi rabi (1 + eps(t))``. Callables with a ``hold_step`` attribute
        are piecewise constant and are held over each integration step
        (sampled at the step midpoint); others are evaluated at the RK4 nodes.
    step : float, optional
        Integration step; defaults to :func:`default_step`.

    Returns
    -------
    DriveTrajectory
        States on the uniform grid ``0, h, ..., duration`` (time relative to
        the pulse start).
    """
    if pulse.duration <= 0:
        raise ValueError("pulse duration must be > 0")
    if pulse.rabi <= 0:
        raise ValueError("drive needs rabi > 0")
    period = 1.0 / pulse.rabi
    if step is None:
        step = default_step(pulse.rabi, getattr(rabi_perturbation, "hold_step", None))
    if step > period / 100.0 * (1 + 1e-12):
        raise StepSizeError(
            f"step {step:g} s exceeds a 100th of the Rabi period {period:g} s")
    n = _n_steps(pulse.duration, step)

    m = np.array(m, dtype=float)
    delta = TWO_PI * np.asarray(detuning, dtype=float)
    r1, r2 = _rate(T1), _rate(T2_star)
    w0 = TWO_PI * pulse.rabi
    phase = pulse.phase
    held = hasattr(rabi_perturbation, "hold_step")

    def omega(t):
        if rabi_perturbation is None:
            return w0
        return w0 * (1.0 + rabi_perturbation(t))

    out = np.empty(np.broadcast_shapes(m.shape[:-1], delta.shape) + (n + 1, 3))
    out[..., 0, :] = m
    y = np.broadcast_to(m, out.shape[:-2] + (3,)).copy()
    h = step
    for j in range(n):
        t = j * h
        if held:
            w1 = w2 = w3 = omega(t + 0.5 * h)
        else:
            w1, w2, w3 = omega(t), omega(t + 0.5 * h), omega(t + h)
        k1 = bloch_rhs(y, w1, phase, delta, r1, r2)
        k2 = bloch_rhs(y + 0.5 * h * k1, w2, phase, delta, r1, r2)
        k3 = bloch_rhs(y + 0.5 * h * k2, w2, phase, delta, r1, r2)
        k4 = bloch_rhs(y + h * k3, w3, phase, delta, r1, r2)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[..., j + 1, :] = y
    return DriveTrajectory(times=np.arange(n + 1) * h, states=out)


def rotation_closed_form(m0, rabi: float, t) -> np.ndarray:
    """Resonant, relaxation-free rotation about x by ``2 pi rabi t``.

    ``t`` may be an array; the result then has shape ``t.shape + (3,)``.
    """
    m0 = np.asarray(m0, dtype=float)
    a = TWO_PI * rabi * np.asarray(t, dtype=float)
    c, s = np.cos(a), np.sin(a)
    mx, my, mz = m0[..., 0], m0[..., 1], m0[..., 2]
    return np.stack([mx * np.ones_like(c), c * my - s * mz, s * my + c * mz],
                    axis=-1)


def rotation_speed_error(detuning: float, rabi: float) -> float:
    """First-order relative change of the rotation rate from off-resonance,
    ``delta^2 / (2 Omega^2)``."""
    if rabi <= 0:
        raise ValueError("rabi must be > 0")
    return (detuning / rabi) ** 2 / 2.0
