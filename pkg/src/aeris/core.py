"""
Domain types, physical constants and sample spectral models.

Frequencies are ordinary (Hz) everywhere in the public API; the dynamics
convert to angular rates internally. Magnetization is dimensionless with the
thermal polarization normalized to unit modulus, so field amplitudes ``b_k``
carry the polarization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import constants as sc

__all__ = [
    "PhysicalConstants",
    "SpectralComponent",
    "SpectralModel",
    "SampleSpec",
    "MagnetizationVector",
    "PulseParams",
    "MultipletPattern",
    "build_multiplet",
    "estimate_total_amplitude",
    "proton_density",
    "AVOGADRO",
]

AVOGADRO = sc.Avogadro


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA constants in SI units (gyromagnetic ratios in rad/s/T)."""

    hbar: float = sc.hbar
    mu0: float = sc.mu_0
    kB: float = sc.k
    gamma_e: float = 2 * math.pi * 28.024951e9
    gamma_n: float = sc.physical_constants["proton gyromag. ratio"][0]

    def __post_init__(self):
        for name in ("hbar", "mu0", "kB", "gamma_e", "gamma_n"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


class MagnetizationVector(NamedTuple):
    """Dimensionless nuclear magnetization of one spectral component.

    Behaves as a length-3 sequence, so ``np.asarray(m)`` gives ``[mx, my, mz]``.
    """

    mx: float
    my: float
    mz: float

    @classmethod
    def from_array(cls, a) -> "MagnetizationVector":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def norm(self) -> float:
        return math.sqrt(self.mx**2 + self.my**2 + self.mz**2)


THERMAL = MagnetizationVector(0.0, 0.0, 1.0)


@dataclass(frozen=True)
class PulseParams:
    """RF pulse: Rabi frequency in Hz, phase in rad, duration in s."""

    rabi: float
    phase: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        if self.rabi < 0:
            raise ValueError("rabi must be >= 0")
        if self.duration < 0:
            raise ValueError("duration must be >= 0")


@dataclass(frozen=True)
class SpectralComponent:
    """One line of the sample spectrum.

    ``detuning`` is the signed offset (Hz) of the line from the RF carrier and
    ``amplitude`` the field (T) it produces on the sensor axis at full
    polarization.
    """

    detuning: float
    amplitude: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")


@dataclass(frozen=True)
class SpectralModel:
    components: tuple[SpectralComponent, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def from_arrays(cls, detunings, amplitudes) -> "SpectralModel":
        detunings = np.atleast_1d(np.asarray(detunings, dtype=float))
        amplitudes = np.atleast_1d(np.asarray(amplitudes, dtype=float))
        if detunings.shape != amplitudes.shape:
            raise ValueError("detunings and amplitudes must have equal length")
        return cls(tuple(SpectralComponent(float(d), float(a))
                         for d, a in zip(detunings, amplitudes)))

    @property
    def detunings(self) -> np.ndarray:
        return np.array([c.detuning for c in self.components], dtype=float)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([c.amplitude for c in self.components], dtype=float)

    @property
    def total_amplitude(self) -> float:
        return float(self.amplitudes.sum())

    def __len__(self):
        return len(self.components)

    def check_nyquist(self, tau: float) -> None:
        """Raise if any line cannot be represented with sample spacing ``tau``."""
        limit = 1.0 / (2.0 * tau)
        bad = [c.detuning for c in self.components if abs(c.detuning) >= limit]
        if bad:
            raise ValueError(
                f"detunings {bad} Hz exceed the Nyquist limit {limit:g} Hz "
                f"for tau = {tau:g} s")


@dataclass(frozen=True)
class SampleSpec:
    """Sample and environment.

    Parameters
    ----------
    B_ext : float
        Static field (T).
    temperature : float
        Sample temperature (K).
    proton_density : float
        Spin density (m^-3).
    T1, T2_star : float
        Relaxation and dephasing times (s). ``math.inf`` disables the term.
    rf_carrier : float
        RF carrier frequency (Hz), the 0 ppm reference.
    """

    B_ext: float
    temperature: float
    proton_density: float
    T1: float
    T2_star: float
    rf_carrier: float = 0.0
    components: tuple[SpectralComponent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.B_ext > 0:
            raise ValueError("B_ext must be > 0")
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")
        if not self.proton_density > 0:
            raise ValueError("proton_density must be > 0")
        if not self.T2_star > 0:
            raise ValueError("T2_star must be > 0")
        if not self.T1 >= self.T2_star:
            raise ValueError("T1 must be >= T2_star")


@dataclass(frozen=True)
class MultipletPattern:
    """Binomial-like line pattern for one chemical site.

    ``ratios`` are the relative line intensities (e.g. ``(1, 3, 3, 1)``) and
    ``fraction`` the share of the total amplitude produced by the site.
    """

    ratios: tuple[float, ...]
    fraction: float

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if not self.ratios:
            raise ValueError("a pattern needs at least one line")
        if any(r <= 0 for r in self.ratios):
            raise ValueError("pattern ratios must be positive")
        if self.fraction < 0:
            raise ValueError("pattern fraction must be >= 0")

    @property
    def multiplicity(self) -> int:
        return len(self.ratios)


def build_multiplet(shifts_ppm: Sequence[float], reference_freq: float,
                    j_coupling: float, patterns: Sequence,
                    total_amplitude: float) -> SpectralModel:
    """Expand chemical shifts and J-multiplets into a line list.

    Parameters
    ----------
    shifts_ppm : sequence of float
        Chemical shift of each site, in ppm from the carrier reference.
    reference_freq : float
        Carrier frequency (Hz) at 0 ppm.
    j_coupling : float
        Line splitting inside each multiplet (Hz).
    patterns : sequence of MultipletPattern or (ratios, fraction) pairs
        One per shift.
    total_amplitude : float
        Sum of all line amplitudes (T).

    Returns
    -------
    SpectralModel
        Lines ordered site by site, lowest detuning first inside a site.

    Notes
    -----
    The carrier sits at the 0 ppm reference above every line, so a site at
    ``s`` ppm is centred at ``-s * 1e-6 * reference_freq``.
    """
    if not patterns:
        raise ValueError("patterns must not be empty")
    if total_amplitude < 0:
        raise ValueError("total_amplitude must be >= 0")
    if len(patterns) != len(shifts_ppm):
        raise ValueError("need one pattern per chemical shift")
    pats = [p if isinstance(p, MultipletPattern) else MultipletPattern(*p)
            for p in patterns]
    fsum = sum(p.fraction for p in pats)
    if not math.isclose(fsum, 1.0, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"amplitude fractions sum to {fsum}, expected 1")

    comps = []
    for shift, pat in zip(shifts_ppm, pats):
        center = -shift * 1e-6 * reference_freq
        m = pat.multiplicity
        rsum = sum(pat.ratios)
        offsets = (np.arange(m) - (m - 1) / 2.0) * j_coupling
        for off, ratio in zip(offsets, pat.ratios):
            comps.append(SpectralComponent(
                detuning=float(center + off),
                amplitude=total_amplitude * pat.fraction * ratio / rsum))
    return SpectralModel(tuple(comps))


def estimate_total_amplitude(constants: PhysicalConstants, sample: SampleSpec,
                             geometric_factor: float) -> float:
    """Field on the sensor axis from a fully thermally polarized sample (T).

    ``hbar^2 gamma_n^2 mu0 rho B_ext / (16 pi kB T) * F``; ``F`` is the
    dimensionless dipolar integral from :func:`aeris.sensor.geometric_integral`.
    """
    if geometric_factor < 0:
        raise ValueError("geometric_factor must be >= 0")
    c = constants
    prefactor = (c.hbar**2 * c.gamma_n**2 * c.mu0 * sample.proton_density
                 * sample.B_ext / (16 * math.pi * c.kB * sample.temperature))
    return prefactor * geometric_factor


def proton_density(mass_density: float, molar_mass: float,
                   protons_per_molecule: float) -> float:
    """Number density of protons (m^-3) of a pure liquid."""
    if mass_density <= 0 or molar_mass <= 0 or protons_per_molecule < 0:
        raise ValueError("inputs must be positive")
    return mass_density / molar_mass * AVOGADRO * protons_per_molecule
