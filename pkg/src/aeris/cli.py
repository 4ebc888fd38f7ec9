"""
Command-line entry point.

    aeris simulate   --config ethanol --out run/
    aeris spectrum   --records run/ --svg
    aeris geometry   --config ethanol --out geo/
    aeris robustness --config robustness_mild --realizations 50 --svg

Exit codes: 2 invalid configuration or input, 3 physics precondition
violated, 4 I/O failure, 5 fit non-convergence (partial results written).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .protocol import MeasurementRecord
from .sensor import ConvergenceError, geometric_sweep
from .spectra import (FitError, assemble_complex, dft, find_peaks, fit_lorentzian,
                      fwhm_vs_noise_curve, simulate_records)

log = logging.getLogger("aeris")

EXIT_CONFIG, EXIT_PHYSICS, EXIT_IO, EXIT_FIT = 2, 3, 4, 5
RECORD_COLUMNS = ("n", "precession_time_s", "sigma_y")


class InputError(ValueError):
    """Invalid command input other than the config (maps to exit 2)."""


def _versions() -> dict:
    import numba
    import scipy
    return {"aeris": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__}


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8", newline="\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_record_csv(path: Path, record: MeasurementRecord) -> None:
    lines = [",".join(RECORD_COLUMNS)]
    for n, (t, v) in enumerate(zip(record.precession_times, record.values)):
        lines.append(f"{n},{_fmt(t)},{_fmt(v)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_record_csv(path: Path, trigger_phase: float, metadata=None) -> MeasurementRecord:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or tuple(c.strip() for c in text[0].split(",")) != RECORD_COLUMNS:
        raise InputError(f"{path}: header must be {','.join(RECORD_COLUMNS)}")
    try:
        rows = np.array([[float(x) for x in line.split(",")] for line in text[1:] if line],
                        dtype=float).reshape(-1, 3)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if rows.shape[0] == 0:
        raise InputError(f"{path}: no data rows")
    if not np.array_equal(rows[:, 0], np.arange(len(rows))):
        raise InputError(f"{path}: column n must count 0, 1, 2, ...")
    return MeasurementRecord(rows[:, 2], rows[:, 1], trigger_phase, metadata or {})


def _save_svg(fig, path: Path, description: str) -> None:
    import matplotlib
    matplotlib.rcParams["svg.hashsalt"] = "aeris"
    fig.savefig(path, format="svg", metadata={"Date": None, "Description": description})


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt, plt.subplots(figsize=(7, 4))


def _stamp(cfg: ExperimentConfig) -> dict:
    return {"seed": cfg.seed, "config_sha256": cfg.hash}


# commands

def cmd_simulate(cfg: ExperimentConfig, out: Path, svg: bool = False) -> int:
    """Cosine and sine records as CSV plus ``metadata.json``."""
    run = cfg.build_run()
    n_real = cfg.realizations()
    log.info("simulating %d cycles, %d realization(s), variant %s",
             run.schedule.cycles, n_real, run.schedule.variant)
    cos_rec, sin_rec = simulate_records(run, n_real, cfg.seed)
    out.mkdir(parents=True, exist_ok=True)
    files = {"cos": "record_cos.csv", "sin": "record_sin.csv"}
    write_record_csv(out / files["cos"], cos_rec)
    write_record_csv(out / files["sin"], sin_rec)
    meta = {
        **_stamp(cfg),
        "command": "simulate",
        "files": files,
        "trigger_phases_rad": {"cos": cos_rec.trigger_phase, "sin": sin_rec.trigger_phase},
        "tau_s": run.schedule.tau,
        "realizations": n_real,
        "realization_seeds": {"cos": cos_rec.metadata["seeds"],
                              "sin": sin_rec.metadata["seeds"]},
        "noise_resampling": cos_rec.metadata["noise_resampling"],
        "config": cfg.data,
        "versions": _versions(),
    }
    _dump_json(out / "metadata.json", meta)
    if svg:
        plt, (fig, ax) = _figure()
        ax.plot(cos_rec.precession_times, cos_rec.values, lw=0.6, label="trigger phase 0")
        ax.plot(sin_rec.precession_times, sin_rec.values, lw=0.6, label="trigger phase pi/2")
        ax.set_xlabel("precession time (s)")
        ax.set_ylabel("<sigma_y>")
        ax.legend()
        _save_svg(fig, out / "records.svg", json.dumps(_stamp(cfg)))
        plt.close(fig)
    return 0


def _fit_windows(spec, peaks, half_width):
    f = [spec.frequencies[i] for i, _ in peaks]
    wins = []
    for j, c in enumerate(f):
        lo, hi = c - half_width, c + half_width
        if j > 0:
            lo = max(lo, 0.5 * (f[j - 1] + c))
        if j + 1 < len(f):
            hi = min(hi, 0.5 * (c + f[j + 1]))
        wins.append((lo, hi))
    return wins


def cmd_spectrum(cos_path: Path, sin_path: Path, out: Path,
                 cfg: ExperimentConfig | None = None, svg: bool = False,
                 meta_path: Path | None = None) -> int:
    """Spectrum, peaks and per-peak Lorentzian fits of a record pair."""
    source = {}
    if meta_path is not None and meta_path.exists():
        source = json.loads(meta_path.read_text(encoding="utf-8"))
    phases = source.get("trigger_phases_rad", {"cos": 0.0, "sin": math.pi / 2})
    if cfg is None and "config" in source:
        cfg = ExperimentConfig.from_dict(source["config"])
    analysis = cfg.data["analysis"] if cfg is not None else \
        {"zero_pad": 4, "prominence": 5.0, "mode": "absorption",
         "central_window_hz": None, "fit_half_width_hz": 3.0}

    cos_rec = read_record_csv(cos_path, phases["cos"])
    sin_rec = read_record_csv(sin_path, phases["sin"])
    if len(cos_rec) != len(sin_rec):
        raise InputError(f"records differ in length ({len(cos_rec)} vs {len(sin_rec)})")
    try:
        series = assemble_complex(cos_rec, sin_rec)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    tau = cos_rec.tau if len(cos_rec) > 1 else source.get("tau_s", math.nan)
    if not tau > 0:
        raise InputError("cannot infer tau from a single-row record without metadata")
    spec = dft(series, tau, analysis["zero_pad"])
    mode = analysis["mode"]
    peaks = find_peaks(spec, analysis["prominence"], mode)

    stamp = {"seed": source.get("seed"), "config_sha256": source.get("config_sha256"),
             "analysis_config_sha256": cfg.hash if cfg is not None else None}
    peak_rows, failures = [], 0
    for (i, h), win in zip(peaks, _fit_windows(spec, peaks, analysis["fit_half_width_hz"])):
        row = {"bin": int(i), "frequency_hz": float(spec.frequencies[i]), "height": h}
        try:
            fit = fit_lorentzian(spec, win, mode, analysis["prominence"])
            row["fit"] = {"center_hz": fit.center, "fwhm_hz": fit.fwhm,
                          "amplitude": fit.amplitude, "baseline": fit.baseline,
                          "residual_norm": fit.residual_norm, "window_hz": list(win)}
        except FitError as exc:
            row["fit"] = {"error": str(exc), "window_hz": list(win)}
            failures += 1
        peak_rows.append(row)
    central = None
    if cfg is not None:
        try:
            fit = fit_lorentzian(spec, cfg.central_window(), mode, analysis["prominence"])
            central = {"window_hz": list(cfg.central_window()), "center_hz": fit.center,
                       "fwhm_hz": fit.fwhm, "amplitude": fit.amplitude,
                       "residual_norm": fit.residual_norm}
        except FitError as exc:
            central = {"window_hz": list(cfg.central_window()), "error": str(exc)}
            failures += 1

    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "spectrum.json", {
        **stamp, "bin_width_hz": spec.bin_width, "zero_pad_factor": spec.zero_pad_factor,
        "tau_s": tau, "frequencies_hz": spec.frequencies.tolist(),
        "magnitude": spec.magnitudes.tolist(), "real": spec.absorption.tolist(),
        "imag": spec.complex_values.imag.tolist()})
    _dump_json(out / "peaks.json", {**stamp, "mode": mode,
                                    "prominence": analysis["prominence"],
                                    "peaks": peak_rows, "central": central})
    if svg:
        plt, (fig, ax) = _figure()
        y = spec.values(mode)
        ax.plot(spec.frequencies, y, lw=0.7)
        ax.plot([spec.frequencies[i] for i, _ in peaks], [v for _, v in peaks], "rv", ms=4)
        ax.set_xlabel("detuning (Hz)")
        ax.set_ylabel(f"{mode} (arb.)")
        _save_svg(fig, out / "spectrum.svg", json.dumps(stamp))
        plt.close(fig)
    log.info("%d peaks, %d fit failure(s)", len(peaks), failures)
    return EXIT_FIT if failures else 0


def cmd_geometry(cfg: ExperimentConfig, out: Path, svg: bool = False) -> int:
    """F, Gx, Gy against hemisphere radius (in NV depths) as ``geometry.csv``."""
    g = cfg.data["geometry"]
    rows = geometric_sweep(g["radius_over_depth"], g["resolution"], tuple(g["nv_axis"]),
                           g["center"])
    out.mkdir(parents=True, exist_ok=True)
    lines = ["radius_over_depth,F,Gx,Gy"]
    lines += [",".join(_fmt(x) for x in r) for r in rows]
    (out / "geometry.csv").write_text("\n".join(lines) + "\n", encoding="utf-8",
                                      newline="\n")
    _dump_json(out / "metadata.json", {**_stamp(cfg), "command": "geometry",
                                       "files": {"table": "geometry.csv"},
                                       "config": cfg.data, "versions": _versions()})
    if svg:
        plt, (fig, ax) = _figure()
        ax.semilogx(rows[:, 0], rows[:, 1], "o-")
        ax.set_xlabel("hemisphere radius / NV depth")
        ax.set_ylabel("F")
        _save_svg(fig, out / "geometry.svg", json.dumps(_stamp(cfg)))
        plt.close(fig)
    return 0


def cmd_robustness(cfg: ExperimentConfig, out: Path, svg: bool = False) -> int:
    """Central-line FWHM against OU amplitude for both variants."""
    r = cfg.data["robustness"]
    run = cfg.build_run()
    window = cfg.robustness_window()
    log.info("FWHM sweep over %d noise levels, %d realizations",
             len(r["sigma_grid_rel"]), r["realizations"])
    rows = fwhm_vs_noise_curve(run, r["sigma_grid_rel"], window, r["realizations"],
                               corr_time=r["corr_time_ms"] * 1e-3,
                               amp_shift=r["amp_shift_rel"], seed=cfg.seed,
                               zero_pad_factor=cfg.data["analysis"]["zero_pad"],
                               mode=cfg.data["analysis"]["mode"])
    floor = 1.0 / (math.pi * run.sample.T2_star)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["sigma_rel,fwhm_standard_hz,fwhm_robust_hz,failed"]
    for row in rows:
        lines.append(f"{_fmt(row.sigma)},{_fmt(row.fwhm_standard)},"
                     f"{_fmt(row.fwhm_robust)},{'|'.join(row.failed)}")
    (out / "fwhm_curve.csv").write_text("\n".join(lines) + "\n", encoding="utf-8",
                                        newline="\n")
    _dump_json(out / "metadata.json", {**_stamp(cfg), "command": "robustness",
                                       "files": {"table": "fwhm_curve.csv"},
                                       "fwhm_floor_hz": floor, "window_hz": list(window),
                                       "config": cfg.data, "versions": _versions()})
    if svg:
        plt, (fig, ax) = _figure()
        s = [100 * row.sigma for row in rows]
        ax.plot(s, [row.fwhm_standard for row in rows], "o-", label="standard")
        ax.plot(s, [row.fwhm_robust for row in rows], "s-", label="robust")
        ax.axhline(floor, color="grey", label="1/(pi T2*)")
        ax.set_xlabel("relative OU amplitude (%)")
        ax.set_ylabel("central FWHM (Hz)")
        ax.legend()
        _save_svg(fig, out / "fwhm_curve.svg", json.dumps(_stamp(cfg)))
        plt.close(fig)
    return EXIT_FIT if any(row.failed for row in rows) else 0


# argument handling

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aeris", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        sp.add_argument("--config", required=needs_config,
                        help="TOML file, resolved JSON or preset name")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--svg", action="store_true", help="also write an SVG plot")
        sp.add_argument("--realizations", type=int, help="override realization count")
        sp.add_argument("--variant", choices=("standard", "robust"))

    common(sub.add_parser("simulate", help="simulate cosine and sine records"))
    sp = sub.add_parser("spectrum", help="spectrum, peaks and fits of a record pair")
    common(sp, needs_config=False)
    sp.add_argument("--records", type=Path,
                    help="directory holding record_cos.csv, record_sin.csv, metadata.json")
    sp.add_argument("--cos", type=Path, help="cosine record CSV")
    sp.add_argument("--sin", type=Path, help="sine record CSV")
    common(sub.add_parser("geometry", help="geometric factor sweep"))
    common(sub.add_parser("robustness", help="FWHM against control-noise amplitude"))
    return p


def _config(args) -> ExperimentConfig | None:
    if args.config is None:
        return None
    if args.realizations is not None and args.realizations < 1:
        raise ConfigError("--realizations", "must be >= 1")
    if args.seed is not None and args.seed < 0:
        raise ConfigError("--seed", "must be >= 0")
    cfg = load_config(args.config)
    return cfg.with_overrides(args.seed, args.variant, args.realizations)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, args.svg)
        if args.command == "geometry":
            return cmd_geometry(cfg, args.out, args.svg)
        if args.command == "robustness":
            return cmd_robustness(cfg, args.out, args.svg)
        if args.records is not None:
            cos_p, sin_p = args.records / "record_cos.csv", args.records / "record_sin.csv"
            meta_p = args.records / "metadata.json"
        elif args.cos is not None and args.sin is not None:
            cos_p, sin_p, meta_p = args.cos, args.sin, None
        else:
            raise InputError("give --records DIR or both --cos and --sin")
        return cmd_spectrum(cos_p, sin_p, args.out, cfg, args.svg, meta_p)
    except (ConfigError, InputError) as exc:
        print(f"aeris: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FitError as exc:
        print(f"aeris: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except OSError as exc:
        print(f"aeris: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ConvergenceError) as exc:
        print(f"aeris: physics precondition violated: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
