"""
TOML experiment configuration.

Every dimensional key carries its unit in the name (``tau_ms``,
``b_ext_tesla``). Loading resolves the file into a canonical nested dict
(defaults filled in, units as written) from which the physics objects are
built; the canonical dict round-trips through JSON unchanged and its hash
tags every output file.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core import (MultipletPattern, SampleSpec, SpectralModel, build_multiplet)
from .noise import NoiseModel
from .protocol import AerisRun, ProtocolSchedule
from .sensor import GeometryConfig, SensorModel

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "preset_path",
           "PRESETS"]

PRESETS = ("ethanol", "robustness_mild", "robustness_severe")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# (key, type, default); default ``...`` means required
_SCHEMA: dict[str, list[tuple[str, type, Any]]] = {
    "sample": [
        ("b_ext_tesla", float, ...),
        ("temperature_kelvin", float, ...),
        ("proton_density_per_m3", float, ...),
        ("t1_s", float, ...),
        ("t2_star_s", float, ...),
        ("rf_carrier_hz", float, 0.0),
        ("detunings_hz", list, None),
        ("amplitudes_pt", list, None),
    ],
    "multiplet": [
        ("shifts_ppm", list, ...),
        ("reference_freq_hz", float, ...),
        ("j_coupling_hz", float, ...),
        ("ratios", list, ...),
        ("fractions", list, ...),
        ("total_amplitude_nt", float, ...),
    ],
    "schedule": [
        ("tau_ms", float, ...),
        ("t_m_us", float, ...),
        ("cycles", int, ...),
        ("rabi_khz", float, ...),
        ("variant", str, "standard"),
        ("ideal_trigger", bool, False),
    ],
    "sensor": [
        ("small_angle", bool, False),
        ("readout_noise", float, 0.0),
    ],
    "geometry": [
        ("nv_depth_nm", float, 10.0),
        ("radius_over_depth", list, [0.5, 1, 1.5, 2, 2.5, 3, 4, 5, 7, 10, 20, 50, 100]),
        ("nv_axis", list, [0.0, 0.0, 1.0]),
        ("center", str, "nv"),
        ("resolution", int, 200),
    ],
    "noise": [
        ("sigma_rel", float, 0.0),
        ("corr_time_ms", float, 1.0),
        ("amp_shift_rel", float, 0.0),
        ("step_us", float, 1.0),
        ("realizations", int, 1),
    ],
    "analysis": [
        ("zero_pad", int, 4),
        ("prominence", float, 5.0),
        ("mode", str, "absorption"),
        ("central_window_hz", list, None),
        ("fit_half_width_hz", float, 3.0),
    ],
    "robustness": [
        ("sigma_grid_rel", list, [0.0, 0.005, 0.01, 0.015, 0.02]),
        ("corr_time_ms", float, 1.0),
        ("amp_shift_rel", float, 0.0),
        ("realizations", int, 200),
        ("window_half_width_hz", float, 8.0),
    ],
}


def _coerce(path: str, value, typ):
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(path, "must be finite")
        return float(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if not isinstance(value, list):
        raise ConfigError(path, f"expected an array, got {value!r}")
    return copy.deepcopy(value)


def _resolve(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a table")
    known = set(_SCHEMA) | {"seed"}
    for key in raw:
        if key not in known:
            raise ConfigError(key, "unknown key")
    out: dict[str, Any] = {}
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "expected a non-negative integer")
    out["seed"] = seed
    for table, fields in _SCHEMA.items():
        if table == "multiplet":
            src = raw.get("sample", {}).get("multiplet")
            if src is None:
                continue
        else:
            src = raw.get(table)
            if src is None:
                if table in ("sample", "schedule"):
                    raise ConfigError(table, "missing table")
                src = {}
        base = table if table != "multiplet" else "sample.multiplet"
        if not isinstance(src, dict):
            raise ConfigError(base, "expected a table")
        names = {f[0] for f in fields}
        for key in src:
            if key not in names and not (table == "sample" and key == "multiplet"):
                raise ConfigError(f"{base}.{key}", "unknown key")
        res = {}
        for key, typ, default in fields:
            if key in src and src[key] is not None:
                res[key] = _coerce(f"{base}.{key}", src[key], typ)
            elif default is ...:
                raise ConfigError(f"{base}.{key}", "required")
            else:
                res[key] = copy.deepcopy(default)
        if table == "multiplet":
            out["sample"]["multiplet"] = res
        else:
            out[table] = res
    return out


def _validate(cfg: dict) -> None:
    smp = cfg["sample"]
    has_lines = smp["detunings_hz"] is not None or smp["amplitudes_pt"] is not None
    if has_lines == ("multiplet" in smp):
        raise ConfigError("sample", "give either detunings_hz/amplitudes_pt or a "
                          "[sample.multiplet] table, not both or neither")
    if has_lines:
        d, a = smp["detunings_hz"], smp["amplitudes_pt"]
        if d is None or a is None:
            raise ConfigError("sample.amplitudes_pt" if a is None else "sample.detunings_hz",
                              "required alongside its partner list")
        if len(d) != len(a) or not d:
            raise ConfigError("sample.amplitudes_pt",
                              "must be non-empty and as long as sample.detunings_hz")
        for i, v in enumerate(d):
            _coerce(f"sample.detunings_hz[{i}]", v, float)
        for i, v in enumerate(a):
            if _coerce(f"sample.amplitudes_pt[{i}]", v, float) < 0:
                raise ConfigError(f"sample.amplitudes_pt[{i}]", "must be >= 0")
    else:
        m = smp["multiplet"]
        n = len(m["shifts_ppm"])
        for key in ("ratios", "fractions"):
            if len(m[key]) != n:
                raise ConfigError(f"sample.multiplet.{key}",
                                  "needs one entry per shift")
    s = cfg["schedule"]
    if s["cycles"] < 1:
        raise ConfigError("schedule.cycles", "must be >= 1")
    for key in ("tau_ms", "t_m_us", "rabi_khz"):
        if not s[key] > 0:
            raise ConfigError(f"schedule.{key}", "must be > 0")
    if s["variant"] not in ("standard", "robust"):
        raise ConfigError("schedule.variant", "must be 'standard' or 'robust'")
    n = cfg["noise"]
    if n["sigma_rel"] < 0:
        raise ConfigError("noise.sigma_rel", "must be >= 0")
    if n["realizations"] < 1:
        raise ConfigError("noise.realizations", "must be >= 1")
    for key in ("corr_time_ms", "step_us"):
        if not n[key] > 0:
            raise ConfigError(f"noise.{key}", "must be > 0")
    a = cfg["analysis"]
    if a["zero_pad"] < 1:
        raise ConfigError("analysis.zero_pad", "must be >= 1")
    if not a["prominence"] > 0:
        raise ConfigError("analysis.prominence", "must be > 0")
    if a["mode"] not in ("absorption", "magnitude", "power"):
        raise ConfigError("analysis.mode", "must be absorption, magnitude or power")
    w = a["central_window_hz"]
    if w is not None and (len(w) != 2 or w[0] >= w[1]):
        raise ConfigError("analysis.central_window_hz", "expected [low, high]")
    r = cfg["robustness"]
    if not r["sigma_grid_rel"]:
        raise ConfigError("robustness.sigma_grid_rel", "must not be empty")
    if any((not isinstance(x, (int, float))) or x < 0 for x in r["sigma_grid_rel"]):
        raise ConfigError("robustness.sigma_grid_rel", "entries must be numbers >= 0")
    if r["realizations"] < 1:
        raise ConfigError("robustness.realizations", "must be >= 1")
    if not r["window_half_width_hz"] > 0:
        raise ConfigError("robustness.window_half_width_hz", "must be > 0")
    g = cfg["geometry"]
    if not g["nv_depth_nm"] > 0:
        raise ConfigError("geometry.nv_depth_nm", "must be > 0")
    if g["center"] not in ("nv", "surface"):
        raise ConfigError("geometry.center", "must be 'nv' or 'surface'")
    if g["resolution"] < 8:
        raise ConfigError("geometry.resolution", "must be >= 8")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration; ``data`` is the canonical resolved dict."""

    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        cfg = _resolve(raw)
        _validate(cfg)
        out = cls(cfg)
        for path, build in (("sample", out.sample), ("schedule", out.schedule),
                            ("sensor", out.sensor), ("noise", out.noise),
                            ("geometry", out.geometry)):
            try:
                build()
            except ValueError as exc:
                raise ConfigError(path, str(exc)) from exc
        return out

    @property
    def seed(self) -> int:
        return self.data["seed"]

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2)

    @property
    def hash(self) -> str:
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def with_overrides(self, seed=None, variant=None, realizations=None):
        d = copy.deepcopy(self.data)
        if seed is not None:
            d["seed"] = int(seed)
        if variant is not None:
            d["schedule"]["variant"] = variant
        if realizations is not None:
            d["noise"]["realizations"] = int(realizations)
            d["robustness"]["realizations"] = int(realizations)
        return ExperimentConfig.from_dict(d)

    # physics objects

    def spectral_model(self) -> SpectralModel:
        smp = self.data["sample"]
        if "multiplet" in smp:
            m = smp["multiplet"]
            pats = [MultipletPattern(tuple(r), f) for r, f in zip(m["ratios"], m["fractions"])]
            return build_multiplet(m["shifts_ppm"], m["reference_freq_hz"],
                                   m["j_coupling_hz"], pats,
                                   m["total_amplitude_nt"] * 1e-9)
        return SpectralModel.from_arrays(smp["detunings_hz"],
                                         [a * 1e-12 for a in smp["amplitudes_pt"]])

    def sample(self) -> SampleSpec:
        s = self.data["sample"]
        return SampleSpec(B_ext=s["b_ext_tesla"], temperature=s["temperature_kelvin"],
                          proton_density=s["proton_density_per_m3"], T1=s["t1_s"],
                          T2_star=s["t2_star_s"], rf_carrier=s["rf_carrier_hz"],
                          components=self.spectral_model().components)

    def schedule(self, trigger_phase: float = 0.0) -> ProtocolSchedule:
        s = self.data["schedule"]
        return ProtocolSchedule(tau=s["tau_ms"] * 1e-3, t_m=s["t_m_us"] * 1e-6,
                                cycles=s["cycles"], rabi=s["rabi_khz"] * 1e3,
                                trigger_phase=trigger_phase, variant=s["variant"],
                                ideal_trigger=s["ideal_trigger"])

    def sensor(self) -> SensorModel:
        s = self.data["sensor"]
        mod = "double_echo" if self.data["schedule"]["variant"] == "robust" else "xy4"
        return SensorModel(modulation=mod, small_angle=s["small_angle"],
                           readout_noise=s["readout_noise"])

    def noise(self) -> NoiseModel | None:
        n = self.data["noise"]
        model = NoiseModel(sigma=n["sigma_rel"], corr_time=n["corr_time_ms"] * 1e-3,
                           amp_shift=n["amp_shift_rel"], step=n["step_us"] * 1e-6,
                           seed=self.seed)
        return None if model.is_null else model

    def realizations(self) -> int:
        return 1 if self.noise() is None else self.data["noise"]["realizations"]

    def geometry(self, ratio: float = 1.0) -> GeometryConfig:
        g = self.data["geometry"]
        d = g["nv_depth_nm"] * 1e-9
        return GeometryConfig(d, ratio * d, tuple(g["nv_axis"]), g["center"])

    def build_run(self) -> AerisRun:
        """The configured experiment.

        Raises ``ValueError`` (not ``ConfigError``) when a physics
        precondition such as the Nyquist limit fails.
        """
        run = AerisRun(self.sample(), self.spectral_model(), self.schedule(),
                       self.sensor(), self.noise())
        run.model.check_nyquist(run.schedule.tau)
        return run

    def central_window(self) -> tuple[float, float]:
        """Fit window of the central peak.

        Defaults to the line nearest the middle of the spectral span.
        """
        w = self.data["analysis"]["central_window_hz"]
        if w is not None:
            return tuple(w)
        d = self.spectral_model().detunings
        mid = 0.5 * (d.min() + d.max())
        c = float(d[abs(d - mid).argmin()])
        hw = self.data["analysis"]["fit_half_width_hz"]
        return (c - hw, c + hw)

    def robustness_window(self) -> tuple[float, float]:
        """Wider window around the central line for noise-broadened fits."""
        lo, hi = self.central_window()
        c, hw = 0.5 * (lo + hi), self.data["robustness"]["window_half_width_hz"]
        return (c - hw, c + hw)


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise ConfigError("<preset>", f"unknown preset {name!r}; choose from {PRESETS}")
    return Path(str(resources.files("aeris") / "presets" / f"{name}.toml"))


def load_config(source) -> ExperimentConfig:
    """Load a TOML file, a resolved-config JSON file, a preset name or a dict."""
    if isinstance(source, dict):
        return ExperimentConfig.from_dict(source)
    if isinstance(source, str) and source in PRESETS and not Path(source).exists():
        source = preset_path(source)
    path = Path(source)
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(str(path), f"parse error: {exc}") from exc
    return ExperimentConfig.from_dict(raw)
