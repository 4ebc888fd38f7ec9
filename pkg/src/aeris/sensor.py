"""
NV-ensemble response to the induced nuclear signal.

The sensor sees the field ``B(t)`` only while a dynamical-decoupling train is
running. With instantaneous pi pulses the train acts as a sign function
``m(t)`` and the accumulated phase is ``gamma_e * int m(t) B(t) dt``. The
geometric factors of the dipolar coupling between a hemispherical sample and
a shallow NV are computed here as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import PhysicalConstants

__all__ = [
    "SensorModel",
    "GeometryConfig",
    "Modulation",
    "ConvergenceError",
    "modulation_function",
    "acquire_phase",
    "measure_sigma_y",
    "geometric_integral",
    "geometric_sweep",
]

MODULATIONS = ("xy4", "double_echo")


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SensorModel:
    """Idealized NV ensemble read out along sigma_y.

    ``readout_noise`` is the standard deviation of additive Gaussian noise on
    each recorded expectation value (0 disables it).
    """

    gamma_e: float = PhysicalConstants().gamma_e
    modulation: str = "xy4"
    small_angle: bool = False
    readout_noise: float = 0.0

    def __post_init__(self):
        if self.modulation not in MODULATIONS:
            raise ValueError(f"modulation must be one of {MODULATIONS}")
        if not self.gamma_e > 0:
            raise ValueError("gamma_e must be > 0")
        if self.readout_noise < 0:
            raise ValueError("readout_noise must be >= 0")

    @property
    def readout_axis(self) -> str:
        return "y"

    def respond(self, phase, rng=None):
        """<sigma_y> after accumulating ``phase = gamma_e int m B dt``.

        The coupling ``H = -gamma_e B sigma_z / 2`` turns the |+> state by
        ``-phase`` about z, hence the sign.
        """
        out = measure_sigma_y(-np.asarray(phase, dtype=float), self.small_angle)
        if self.readout_noise > 0:
            rng = np.random.default_rng() if rng is None else rng
            out = out + self.readout_noise * rng.standard_normal(np.shape(out))
        return out


@dataclass(frozen=True)
class Modulation:
    """Sign function of an instantaneous pi-pulse train on ``[0, t_m]``.

    ``pulse_times`` lists every pulse; ``flips`` only those strictly inside
    the window, where the toggling-frame sign changes.
    """

    kind: str
    t_m: float
    pulse_times: np.ndarray

    @property
    def flips(self) -> np.ndarray:
        p = self.pulse_times
        eps = 1e-9 * self.t_m
        return p[(p > eps) & (p < self.t_m - eps)]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        n = np.searchsorted(self.flips, t, side="right")
        out = np.where(n % 2 == 0, 1.0, -1.0)
        return float(out) if out.ndim == 0 else out

    def node_weights(self, times) -> np.ndarray:
        """Trapezoid weights for ``int m(t) s(t) dt`` on a uniform grid.

        Each interval takes the sign at its midpoint, so a flip falling on a
        grid node is integrated exactly piecewise.
        """
        times = np.asarray(times, dtype=float)
        h = np.diff(times)
        mid = self((times[:-1] + times[1:]) / 2.0)
        w = np.zeros_like(times)
        w[:-1] += 0.5 * h * mid
        w[1:] += 0.5 * h * mid
        return w


def _periods(t_m: float, rabi: float) -> int:
    n = t_m * rabi
    k = round(n)
    if k < 1 or abs(n - k) > 1e-6:
        raise ValueError(
            f"t_m = {t_m:g} s is not a whole number of Rabi periods at {rabi:g} Hz")
    return k


def modulation_function(model: SensorModel | str, t_m: float,
                        rabi: float) -> Modulation:
    """Pulse train matched to the induced signal of one rotation stage.

    ``xy4``: a pi pulse every half Rabi period, so the sign follows
    ``sign(sin(2 pi rabi t))``; two signal periods give one XY4 block.
    ``double_echo``: matched to the robust stage where the rotation reverses
    at ``t_m / 2``; one pi pulse at the middle of each half.
    """
    kind = model if isinstance(model, str) else model.modulation
    if kind not in MODULATIONS:
        raise ValueError(f"unknown modulation {kind!r}")
    n = _periods(t_m, rabi)
    if n % 2:
        raise ValueError(f"{kind} needs an even number of signal periods in t_m, got {n}")
    half = 0.5 / rabi
    if kind == "xy4":
        pulses = half * np.arange(1, 2 * n + 1)
    else:
        # sign(sin) in each half, inverted in the second half
        k = np.arange(1, n)
        first = half * k
        pulses = np.concatenate([first, first + t_m / 2.0])
    return Modulation(kind=kind, t_m=t_m, pulse_times=pulses)


def acquire_phase(signal, modulation: Callable, t_m: float, gamma_e: float,
                  times=None) -> float:
    """Phase ``gamma_e * int_0^t_m m(t) s(t) dt`` by the trapezoid rule.

    ``signal`` is either a callable of time or samples on ``times`` (a uniform
    grid covering ``[0, t_m]``, typically the Bloch integrator grid). Without
    ``times`` a grid of 4000 intervals is used.
    """
    if times is None:
        times = np.linspace(0.0, t_m, 4001)
    times = np.asarray(times, dtype=float)
    s = signal(times) if callable(signal) else np.asarray(signal, dtype=float)
    if isinstance(modulation, Modulation):
        w = modulation.node_weights(times)
    else:
        h = np.diff(times)
        mid = np.asarray(modulation((times[:-1] + times[1:]) / 2.0), dtype=float)
        w = np.zeros_like(times)
        w[:-1] += 0.5 * h * mid
        w[1:] += 0.5 * h * mid
    return float(gamma_e * np.dot(w, s))


def measure_sigma_y(phi, small_angle: bool = False):
    """<sigma_y> of an NV prepared in |+> and turned by ``phi`` about z."""
    if small_angle:
        return phi
    return np.sin(phi)


@dataclass(frozen=True)
class GeometryConfig:
    """Sample region above a shallow NV.

    The sample fills ``z >= 0`` (diamond surface at ``z = 0``, NV at depth
    ``nv_depth`` below it) within ``hemisphere_radius`` of the centre point:
    the NV itself (``center="nv"``) or the surface point above it
    (``center="surface"``). Lengths in m.
    """

    nv_depth: float
    hemisphere_radius: float
    nv_axis: tuple = (0.0, 0.0, 1.0)
    center: str = "nv"

    def __post_init__(self):
        if not self.nv_depth > 0:
            raise ValueError("nv_depth must be > 0")
        if not self.hemisphere_radius > 0:
            raise ValueError("hemisphere_radius must be > 0")
        a = np.asarray(self.nv_axis, dtype=float)
        if a.shape != (3,) or not abs(np.linalg.norm(a) - 1.0) < 1e-9:
            raise ValueError("nv_axis must be a unit 3-vector")
        object.__setattr__(self, "nv_axis", tuple(float(x) for x in a))
        if self.center not in ("nv", "surface"):
            raise ValueError("center must be 'nv' or 'surface'")


def _frame(axis):
    n = np.asarray(axis, dtype=float)
    trial = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = trial - n * np.dot(trial, n)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2, n


def _hemisphere_sums(radius: float, axis, nu: int, nphi: int, offset: float):
    # lengths in units of the NV depth; NV at (0, 0, -1), surface z = 0,
    # region centre at (0, 0, -offset)
    e1, e2, n = _frame(axis)
    zmax = radius - offset
    if zmax <= 0:
        return 0.0, 0.0, 0.0
    L = math.log1p(zmax)
    u = (np.arange(nu) + 0.5) / nu
    z = np.expm1(u * L)
    dz = L * (1.0 + z) / nu
    rho_max = np.sqrt(np.maximum(radius**2 - (z + offset)**2, 0.0))
    Lr = np.log1p(rho_max)
    v = (np.arange(nu) + 0.5) / nu
    rho = np.expm1(np.outer(Lr, v))                      # (nz, nrho)
    drho = Lr[:, None] * (1.0 + rho) / nu
    phi = 2 * math.pi * (np.arange(nphi) + 0.5) / nphi
    dphi = 2 * math.pi / nphi

    zz = (z + 1.0)[:, None, None]
    x = rho[:, :, None] * np.cos(phi)
    y = rho[:, :, None] * np.sin(phi)
    r2 = x**2 + y**2 + zz**2
    r = np.sqrt(r2)
    rz = (x * n[0] + y * n[1] + zz * n[2]) / r
    rx = (x * e1[0] + y * e1[1] + zz * e1[2]) / r
    ry = (x * e2[0] + y * e2[1] + zz * e2[2]) / r
    dV = (rho * drho * dz[:, None])[:, :, None] * dphi
    inv_r3 = dV / (r2 * r)
    F = np.sum((3.0 * rz**2 - 1.0) * inv_r3)
    Gx = np.sum(3.0 * rz * rx * inv_r3)
    Gy = np.sum(3.0 * rz * ry * inv_r3)
    return float(F), float(Gx), float(Gy)


def geometric_integral(geom: GeometryConfig, resolution: int = 200,
                       n_phi: int | None = None, rtol: float = 5e-3):
    """Dipolar integrals over the sample hemisphere.

    Integrates ``f = (3 r_z^2 - 1) / r^3`` and ``g_{x,y} = 3 r_z r_{x,y} / r^3``
    (``r_z`` along the NV axis, distances in units of the NV depth) over the
    sample region described by ``geom``. Midpoint rule in cylindrical
    coordinates with logarithmically graded height and radius.

    Returns
    -------
    (F, Gx, Gy) : tuple of float

    Raises
    ------
    ConvergenceError
        If halving ``resolution`` moves ``F`` by more than ``rtol``.
    """
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    radius = geom.hemisphere_radius / geom.nv_depth
    if n_phi is None:
        n_phi = 4 if geom.nv_axis == (0.0, 0.0, 1.0) else max(16, resolution // 4)
    offset = 1.0 if geom.center == "nv" else 0.0
    full = np.array(_hemisphere_sums(radius, geom.nv_axis, resolution, n_phi, offset))
    scale = np.linalg.norm(full)
    if scale == 0.0:  # hemisphere does not reach above the surface
        return 0.0, 0.0, 0.0
    # F alone vanishes for an axis at the magic angle, so compare all three
    half = np.array(_hemisphere_sums(radius, geom.nv_axis, resolution // 2, n_phi, offset))
    change = np.linalg.norm(full - half) / scale
    if change > rtol:
        raise ConvergenceError(
            f"(F, Gx, Gy) changed by {change:.2%} between resolutions "
            f"{resolution // 2} and {resolution}")
    F, Gx, Gy = (float(x) for x in full)
    return F, Gx, Gy


def geometric_sweep(ratios, resolution: int = 200, nv_axis=(0.0, 0.0, 1.0),
                    center: str = "nv"):
    """``geometric_integral`` over hemisphere radii given in NV depths.

    Returns an array with columns ``radius/depth, F, Gx, Gy``.
    """
    rows = []
    for q in ratios:
        geom = GeometryConfig(1.0, float(q), tuple(nv_axis), center)
        F, Gx, Gy = geometric_integral(geom, resolution=resolution)
        rows.append((float(q), F, Gx, Gy))
    return np.array(rows)
