import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aeris import (AerisRun, FitError, MeasurementRecord, ProtocolSchedule, Spectrum,
                   assemble_complex, dft, find_peaks, fit_lorentzian, fwhm_vs_noise_curve,
                   simulate_spectrum)
from aeris.spectra import lorentzian

TAU = 1e-3


def _record(values, phase):
    values = np.asarray(values, dtype=float)
    return MeasurementRecord(values, np.arange(len(values)) * TAU, phase, {})


def _phasor_records(delta, n, decay=math.inf, phase=math.pi / 2):
    t = np.arange(n) * TAU
    env = np.exp(-t / decay)
    # a pi/2 trigger yields -sin, a -pi/2 trigger +sin
    sgn = -math.sin(phase)
    return (_record(env * np.cos(2 * np.pi * delta * t), 0.0),
            _record(sgn * env * np.sin(2 * np.pi * delta * t), phase))


@pytest.mark.parametrize("phase", [math.pi / 2, -math.pi / 2])
def test_assemble_single_phasor(phase):
    c, s = _phasor_records(-234.9, 300, phase=phase)
    z = assemble_complex(c, s)
    np.testing.assert_allclose(np.abs(z), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.angle(z[1:] / z[:-1]), 2 * np.pi * -234.9 * TAU, atol=1e-12)


def test_assemble_zero_sine_is_real():
    z = assemble_complex(_record(np.ones(10), 0.0), _record(np.zeros(10), math.pi / 2))
    assert np.all(z.imag == 0)


def test_assemble_rejects_mismatch():
    with pytest.raises(ValueError):
        assemble_complex(_record(np.ones(10), 0.0), _record(np.ones(9), math.pi / 2))
    with pytest.raises(ValueError):
        assemble_complex(_record(np.ones(10), 0.0), _record(np.ones(10), 0.3))
    a = MeasurementRecord(np.ones(4), np.arange(4) * TAU, 0.0, {"detunings_hz": [1.0]})
    b = MeasurementRecord(np.ones(4), np.arange(4) * TAU, math.pi / 2, {"detunings_hz": [2.0]})
    with pytest.raises(ValueError):
        assemble_complex(a, b)
    b2 = MeasurementRecord(np.ones(4), np.arange(4) * 2 * TAU, math.pi / 2, {})
    with pytest.raises(ValueError):
        assemble_complex(a, b2)


def test_frequency_axis():
    for n, pad in [(10, 1), (11, 1), (1500, 4), (7, 3)]:
        spec = dft(np.ones(n), TAU, pad)
        N = n * pad
        assert len(spec) == N
        assert spec.bin_width == pytest.approx(1 / (N * TAU))
        np.testing.assert_allclose(np.diff(spec.frequencies), spec.bin_width)
        assert spec.frequencies[0] > -1 / (2 * TAU) - 1e-9
        assert spec.frequencies[-1] <= 1 / (2 * TAU) + 1e-9
        assert 0.0 in spec.frequencies


def test_dft_errors():
    with pytest.raises(ValueError):
        dft([], TAU)
    with pytest.raises(ValueError):
        dft([1.0], TAU, 0)
    with pytest.raises(ValueError):
        dft([1.0], TAU, 2.5)


def test_on_bin_phasor_single_bin():
    n = 400
    k0 = -37
    delta = k0 / (n * TAU)
    z = np.exp(2j * np.pi * delta * np.arange(n) * TAU)
    spec = dft(z, TAU, 1)
    big = np.flatnonzero(spec.magnitudes > 1e-9 * n)
    assert big.tolist() == [np.flatnonzero(np.isclose(spec.frequencies, delta))[0]]
    assert spec.magnitudes[big[0]] == pytest.approx(n)
    peaks = find_peaks(spec, 5.0, "magnitude")
    assert len(peaks) == 1 and spec.frequencies[peaks[0][0]] == pytest.approx(delta)


def test_flat_spectrum_has_no_peaks():
    spec = dft(np.r_[1.0, np.zeros(99)], TAU, 1)
    for mode in ("absorption", "magnitude", "power"):
        assert find_peaks(spec, 5.0, mode) == []
    with pytest.raises(ValueError):
        find_peaks(spec, 0.0)


def test_flat_topped_maximum_counts_once():
    vals = np.array([0, 0, 0, 1, 5, 5, 1, 0, 0, 0, 0, 0], dtype=float)
    spec = Spectrum(np.arange(12.0), vals + 0j, 1.0, 1)
    assert find_peaks(spec, 2.0) == [(4, 5.0)]


def test_decaying_phasor_lorentzian_width():
    t2 = 0.2
    c, s = _phasor_records(-234.9, 20000, decay=t2)
    spec = dft(assemble_complex(c, s), TAU, 4)
    fit = fit_lorentzian(spec, (-239.9, -229.9))
    assert fit.fwhm == pytest.approx(1 / (math.pi * t2), rel=0.01)
    assert fit.center == pytest.approx(-234.9, abs=0.01)
    # the modulus is a square-root Lorentzian, sqrt(3) times wider at half height
    mag = spec.magnitudes
    sel = np.abs(spec.frequencies + 234.9) < 5
    above = spec.frequencies[sel][mag[sel] >= mag[sel].max() / 2]
    assert np.ptp(above) == pytest.approx(math.sqrt(3) / (math.pi * t2), rel=0.02)


def test_exact_lorentzian_recovered():
    f = np.arange(-300, -170, 0.125)
    y = lorentzian(f, -234.9, 1.62, 1.0)
    spec = Spectrum(f, y + 0j, 0.125, 4)
    fit = fit_lorentzian(spec, (-240.0, -230.0))
    assert fit.center == pytest.approx(-234.9, rel=1e-6)
    assert fit.fwhm == pytest.approx(1.62, rel=1e-6)
    assert fit.amplitude == pytest.approx(1.0, rel=1e-6)
    assert abs(fit.baseline) < 1e-6 and fit.residual_norm < 1e-6


def test_fit_errors():
    f = np.arange(-50, 50, 0.25)
    spec = Spectrum(f, lorentzian(f, 0.0, 1.0, 1.0) + 0j, 0.25, 1)
    with pytest.raises(FitError, match="no peak"):
        fit_lorentzian(spec, (10.0, 20.0))
    with pytest.raises(FitError):
        fit_lorentzian(spec, (-0.3, 0.3))
    assert fit_lorentzian(spec, (-5, 5), mode="magnitude").fwhm == pytest.approx(1.0, rel=1e-6)


cplx = st.tuples(st.floats(-10, 10), st.floats(-10, 10)).map(lambda p: complex(*p))


@given(st.lists(cplx, min_size=2, max_size=64), st.integers(1, 4))
@settings(max_examples=80, deadline=None)
def test_parseval(z, pad):
    z = np.array(z)
    spec = dft(z, TAU, pad)
    lhs = np.sum(np.abs(z) ** 2)
    rhs = np.sum(spec.power) / len(spec)
    assert rhs == pytest.approx(lhs, rel=1e-9, abs=1e-12)


@given(st.lists(cplx, min_size=2, max_size=48), st.lists(cplx, min_size=48, max_size=48),
       st.floats(-5, 5), st.integers(0, 47))
@settings(max_examples=80, deadline=None)
def test_linearity_and_shift(x, y, a, m):
    n = len(x)
    x, y = np.array(x), np.array(y[:n])
    Sx, Sy = dft(x, TAU, 1).complex_values, dft(y, TAU, 1).complex_values
    Sxy = dft(a * x + y, TAU, 1).complex_values
    scale = 1 + np.abs(Sx).max() * (1 + abs(a)) + np.abs(Sy).max()
    assert np.abs(Sxy - (a * Sx + Sy)).max() <= 1e-9 * scale
    spec = dft(x, TAU, 1)
    shifted = dft(np.roll(x, m % n), TAU, 1).complex_values
    k = np.round(spec.frequencies * n * TAU)
    expect = Sx * np.exp(-2j * np.pi * k * (m % n) / n)
    assert np.abs(shifted - expect).max() <= 1e-9 * (1 + np.abs(Sx).max())


def test_matched_filter_broadens_line():
    c, s = _phasor_records(50.0, 3000, decay=0.2)
    z = assemble_complex(c, s)
    plain = fit_lorentzian(dft(z, TAU), (45, 55)).fwhm
    filt = fit_lorentzian(dft(z, TAU, matched_filter=0.2), (45, 55)).fwhm
    assert filt == pytest.approx(2 * plain, rel=0.03)


@pytest.fixture(scope="module")
def ethanol_spectra(ethanol_sample, ethanol_model):
    sched = ProtocolSchedule(1e-3, 40e-6, 1500, 50e3)
    run = AerisRun(ethanol_sample, ethanol_model, sched)
    c, s, _ = simulate_spectrum(run)
    z = assemble_complex(c, s)
    return {pad: dft(z, 1e-3, pad) for pad in (2, 4, 8)}


def test_ethanol_peak_groups(ethanol_spectra):
    spec = ethanol_spectra[4]
    f = np.array([spec.frequencies[i] for i, _ in find_peaks(spec, 5.0)])
    groups = [(f < -300).sum(), ((f > -300) & (f < -200)).sum(), (f > -200).sum()]
    assert groups == [4, 1, 3]


def test_peak_positions_invariant_under_padding(ethanol_spectra):
    pos = {p: np.array([s.frequencies[i] for i, _ in find_peaks(s, 5.0)])
           for p, s in ethanol_spectra.items()}
    fine = ethanol_spectra[8].bin_width
    for p in (2, 4):
        assert len(pos[p]) == len(pos[8])
        assert np.abs(pos[p] - pos[8]).max() <= ethanol_spectra[p].bin_width / 2 + fine


def test_fwhm_never_below_floor(ethanol_spectra, ethanol_sample):
    floor = 1 / (math.pi * ethanol_sample.T2_star)
    for spec in ethanol_spectra.values():
        for i, _ in find_peaks(spec, 5.0):
            c = spec.frequencies[i]
            fit = fit_lorentzian(spec, (c - 2.5, c + 2.5))
            assert fit.fwhm >= floor - spec.bin_width


def test_fwhm_curve_noise_free_and_failed_rows(ethanol_sample, ethanol_model):
    sched = ProtocolSchedule(1e-3, 40e-6, 1500, 50e3)
    run = AerisRun(ethanol_sample, ethanol_model, sched)
    floor = 1 / (math.pi * ethanol_sample.T2_star)
    (row,) = fwhm_vs_noise_curve(run, [0.0], (-237.9, -231.9))
    assert row.failed == ()
    for w in (row.fwhm_standard, row.fwhm_robust):
        assert floor - 0.17 <= w <= floor * 1.1
    (bad,) = fwhm_vs_noise_curve(run, [0.0], (-20.0, -10.0))
    assert set(bad.failed) == {"standard", "robust"}
    assert math.isnan(bad.fwhm_standard) and math.isnan(bad.fwhm_robust)
