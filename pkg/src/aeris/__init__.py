"""
Simulation of amplitude-encoded radio-induced signal (AERIS) NMR detection
with an NV-ensemble sensor: Bloch dynamics of the sample under RF control,
phase acquisition by the sensor, RF amplitude noise and spectral analysis.
"""

__version__ = "0.1.0"

from .core import (PhysicalConstants, SpectralComponent, SpectralModel, SampleSpec,
                   MagnetizationVector, PulseParams, MultipletPattern, build_multiplet,
                   estimate_total_amplitude, proton_density)
from .bloch import (DriveTrajectory, StepSizeError, free_precess, drive,
                    rotation_closed_form, rotation_speed_error)
from .noise import NoiseModel, ou_trajectory
from .sensor import (SensorModel, GeometryConfig, ConvergenceError, modulation_function,
                     acquire_phase, measure_sigma_y, geometric_integral, geometric_sweep)
from .protocol import (ProtocolSchedule, MeasurementRecord, AerisRun, run_aeris,
                       run_aeris_robust, average_realizations, expected_record)
from .spectra import (Spectrum, PeakFit, FitError, assemble_complex, dft, find_peaks,
                      fit_lorentzian, simulate_records, simulate_spectrum,
                      fwhm_vs_noise_curve)
from .config import ConfigError, ExperimentConfig, load_config
