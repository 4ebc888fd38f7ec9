"""
The AERIS sequence: trigger pulse, then alternating free precession and
induced rotation stages read out by the NV ensemble.

Cycle ``n`` reads the sample after a cumulated precession time ``n * tau``:
the first rotation stage follows the trigger pulse directly and every later
one is preceded by a free precession of length ``tau``. Magnetization carries
over from cycle to cycle, so relaxation accumulates.

RF amplitude noise is drawn independently for every stage (trigger and each
rotation stage), starting from the stationary OU law at the stage start.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernel
from .bloch import TWO_PI, _rate, default_step
from .core import SampleSpec, SpectralModel
from .noise import NoiseModel, ou_path
from .sensor import SensorModel, modulation_function

__all__ = [
    "ProtocolSchedule",
    "MeasurementRecord",
    "AerisRun",
    "run_aeris",
    "run_aeris_robust",
    "average_realizations",
    "expected_record",
    "realization_seeds",
]

VARIANTS = ("standard", "robust")
NOISE_RESAMPLING = "per-stage: stationary OU draw at each stage start"


@dataclass(frozen=True)
class ProtocolSchedule:
    """Timing of the sequence.

    Parameters
    ----------
    tau : float
        Free precession time between readouts (s).
    t_m : float
        Length of each rotation/measurement stage (s); whole Rabi periods.
    cycles : int
        Number of readouts.
    rabi : float
        RF Rabi frequency (Hz).
    trigger_phase : float
        Phase of the trigger pi/2 pulse (rad): 0 for the cosine record,
        pi/2 for the sine record.
    variant : {"standard", "robust"}
        ``robust`` reverses the rotation halfway through each stage.
    ideal_trigger : bool
        Apply the trigger as an instantaneous, error-free pi/2 rotation
        instead of integrating a finite pulse. A finite pulse lets each line
        precess for an effective ``2/pi`` of its duration, a constant phase
        ``2 pi delta_k t_p (2/pi)`` absent from the closed-form record.
    """

    tau: float
    t_m: float
    cycles: int
    rabi: float
    trigger_phase: float = 0.0
    variant: str = "standard"
    ideal_trigger: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if not self.t_m > 0:
            raise ValueError("t_m must be > 0")
        if not self.rabi > 0:
            raise ValueError("rabi must be > 0")
        if int(self.cycles) != self.cycles or self.cycles < 1:
            raise ValueError("cycles must be a positive integer")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        periods = self.t_m * self.rabi
        if abs(periods - round(periods)) > 1e-6 or round(periods) < 1:
            raise ValueError("t_m must be a whole number of Rabi periods")
        if self.variant == "robust" and round(periods) % 2:
            raise ValueError("robust variant needs an even number of Rabi periods")

    @property
    def nyquist(self) -> float:
        return 1.0 / (2.0 * self.tau)

    @property
    def precession_times(self) -> np.ndarray:
        return np.arange(self.cycles) * self.tau

    def replace(self, **kw) -> "ProtocolSchedule":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class MeasurementRecord:
    """Stroboscopic ``<sigma_y>_n`` series on the precession-time axis."""

    values: np.ndarray
    precession_times: np.ndarray
    trigger_phase: float
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.values)

    @property
    def tau(self) -> float:
        if len(self.precession_times) > 1:
            return float(self.precession_times[1] - self.precession_times[0])
        return float(self.metadata.get("schedule", {}).get("tau", math.nan))


def realization_seeds(seed: int, count: int) -> list[int]:
    """Independent integer seeds derived from one master seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


@dataclass(frozen=True)
class AerisRun:
    """A configured experiment; call it with a seed to get one record."""

    sample: SampleSpec
    model: SpectralModel
    schedule: ProtocolSchedule
    sensor: SensorModel = SensorModel()
    noise: NoiseModel | None = None

    def __call__(self, seed: int | None = None) -> MeasurementRecord:
        seed = self._seed() if seed is None else seed
        values = self.run_batch([seed])[0]
        return self._record(values, seeds=[seed])

    def _seed(self) -> int:
        return self.noise.seed if self.noise is not None else 0

    def _record(self, values, seeds, realizations=1) -> MeasurementRecord:
        s = self.schedule
        meta = {
            "schedule": dataclasses.asdict(s),
            "sample": {k: v for k, v in dataclasses.asdict(self.sample).items()
                       if k != "components"},
            "detunings_hz": self.model.detunings.tolist(),
            "amplitudes_t": self.model.amplitudes.tolist(),
            "sensor": dataclasses.asdict(self.sensor),
            "noise": None if self.noise is None else dataclasses.asdict(self.noise),
            "noise_resampling": NOISE_RESAMPLING,
            "seeds": [int(x) for x in seeds],
            "realizations": realizations,
        }
        return MeasurementRecord(values=np.asarray(values, dtype=float),
                                 precession_times=s.precession_times,
                                 trigger_phase=s.trigger_phase, metadata=meta)

    def _stage_layout(self, h):
        s = self.schedule
        n_stage = round(s.t_m / h)
        if abs(n_stage * h - s.t_m) > 1e-6 * h:
            raise ValueError("integration step does not divide t_m")
        if s.variant == "robust":
            half = n_stage // 2
            if 2 * half != n_stage:
                raise ValueError("integration step does not divide t_m / 2")
            return n_stage, np.array([1.0, -1.0]), np.array([0.0, 0.0]), \
                np.array([half, half], dtype=np.int64)
        return n_stage, np.array([1.0]), np.array([0.0]), \
            np.array([n_stage], dtype=np.int64)

    def run_batch(self, seeds: Sequence[int], chunk: int = 50) -> np.ndarray:
        """Records for each seed, shape ``(len(seeds), cycles)``."""
        s, smp, noise = self.schedule, self.sample, self.noise
        self.model.check_nyquist(s.tau)
        noisy = noise is not None and not noise.is_null
        h = default_step(s.rabi, noise.step if noisy else None)
        n_stage, sub_c, sub_s, sub_n = self._stage_layout(h)
        t_trig = 0.25 / s.rabi
        if s.ideal_trigger:
            n_trig = 0
            m0 = np.array([math.sin(s.trigger_phase), -math.cos(s.trigger_phase), 0.0])
        else:
            n_trig = round(t_trig / h)
            if abs(n_trig * h - t_trig) > 1e-6 * h:
                raise ValueError("integration step does not divide the trigger pulse")
            m0 = np.array([0.0, 0.0, 1.0])
        if noisy:
            hold = round(noise.step / h)
            if abs(hold * h - noise.step) > 1e-6 * h:
                raise ValueError("noise step must be a multiple of the integration step")
            n_int = -(-max(n_stage, n_trig) // hold)
        else:
            hold, n_int = max(n_stage, n_trig) + 1, 1

        mod = modulation_function("double_echo" if s.variant == "robust" else "xy4",
                                  s.t_m, s.rabi)
        weights = mod.node_weights(np.arange(n_stage + 1) * h)
        delta = TWO_PI * self.model.detunings
        amp = self.model.amplitudes
        r1, r2 = _rate(smp.T1), _rate(smp.T2_star)
        e2 = math.exp(-s.tau * r2)
        prec_c = np.cos(delta * s.tau) * e2
        prec_s = np.sin(delta * s.tau) * e2
        e1 = math.exp(-s.tau * r1)
        n_stages = s.cycles + 1

        seeds = list(seeds)
        values = np.empty((len(seeds), s.cycles))
        for start in range(0, len(seeds), chunk):
            part = seeds[start:start + chunk]
            rngs = [np.random.default_rng(sd) for sd in part]
            if noisy:
                eps = np.stack([
                    ou_path(noise.sigma, noise.corr_time, noise.step, n_int, g,
                            size=n_stages) if noise.sigma > 0
                    else np.zeros((n_stages, n_int))
                    for g in rngs]) + noise.amp_shift
            else:
                eps = np.zeros((len(part), n_stages, 1))
            acc = np.zeros((len(part), s.cycles))
            _kernel.accumulate_phases(
                delta, amp, r1, r2, TWO_PI * s.rabi, h, m0,
                math.cos(s.trigger_phase), math.sin(s.trigger_phase), n_trig,
                sub_c, sub_s, sub_n, s.cycles, prec_c, prec_s, e1,
                weights, eps, hold, acc)
            phase = self.sensor.gamma_e * acc
            for i, g in enumerate(rngs):
                values[start + i] = self.sensor.respond(phase[i], rng=g)
        return values


def run_aeris(sample: SampleSpec, model: SpectralModel, schedule: ProtocolSchedule,
              sensor: SensorModel = SensorModel(),
              noise: NoiseModel | None = None) -> MeasurementRecord:
    """Simulate one measurement record.

    The rotation stages drive along x; the NV train is XY4 for the standard
    variant and a double echo for the robust one (chosen from
    ``schedule.variant``). Noise, when given, scales the Rabi rate by
    ``1 + eps(t) + amp_shift`` in every pulse including the trigger.
    """
    return AerisRun(sample, model, schedule, sensor, noise)()


def run_aeris_robust(sample: SampleSpec, model: SpectralModel,
                     schedule: ProtocolSchedule, sensor: SensorModel = SensorModel(),
                     noise: NoiseModel | None = None) -> MeasurementRecord:
    """Robust variant: each stage drives ``+x`` for ``t_m/2`` then ``-x``."""
    return run_aeris(sample, model, schedule.replace(variant="robust"), sensor, noise)


def average_realizations(runner: Callable, realizations: int,
                         seeds: Sequence[int] | None = None) -> MeasurementRecord:
    """Element-wise mean of independent records.

    ``runner`` is an :class:`AerisRun` or any callable mapping a seed to a
    :class:`MeasurementRecord`. Seeds default to ones derived from the
    runner's noise seed.
    """
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    if seeds is None:
        base = runner._seed() if isinstance(runner, AerisRun) else 0
        seeds = [base] if realizations == 1 else realization_seeds(base, realizations)
    seeds = list(seeds)
    if len(seeds) != realizations:
        raise ValueError("need one seed per realization")
    if isinstance(runner, AerisRun):
        values = runner.run_batch(seeds)
        return runner._record(values.mean(axis=0), seeds=seeds,
                              realizations=realizations)
    records = [runner(sd) for sd in seeds]
    mean = np.mean([r.values for r in records], axis=0)
    first = records[0]
    meta = dict(first.metadata, seeds=seeds, realizations=realizations)
    return MeasurementRecord(mean, first.precession_times, first.trigger_phase, meta)


def expected_record(model: SpectralModel, schedule: ProtocolSchedule,
                    gamma_e: float, T2_star: float = math.inf) -> np.ndarray:
    """Closed-form record ``(2 gamma_e t_m / pi) sum_k b_k cos(delta_k n tau + theta)``.

    ``theta`` is the trigger phase; ``theta = 0`` is the cosine record and
    ``theta = pi/2`` gives ``-sum_k b_k sin(delta_k n tau)``. An optional
    ``exp(-n tau / T2_star)`` envelope models free-precession dephasing.
    """
    t = schedule.precession_times
    arg = TWO_PI * np.outer(t, model.detunings) + schedule.trigger_phase
    env = np.exp(-t * _rate(T2_star))
    return (2 * gamma_e * schedule.t_m / math.pi) * env * (np.cos(arg) @ model.amplitudes)
