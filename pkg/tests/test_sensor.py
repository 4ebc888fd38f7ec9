import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import dblquad, quad

from aeris import (ConvergenceError, GeometryConfig, SensorModel, acquire_phase,
                   geometric_integral, measure_sigma_y, modulation_function)
from aeris.sensor import geometric_sweep

RABI, T_M = 50e3, 40e-6
GRID = np.linspace(0, T_M, 4001)


def test_xy4_pulse_times():
    mod = modulation_function(SensorModel(), T_M, RABI)
    np.testing.assert_allclose(mod.pulse_times * 1e6, [10, 20, 30, 40], atol=1e-9)
    np.testing.assert_allclose(mod.flips * 1e6, [10, 20, 30], atol=1e-9)
    t = np.array([5e-6, 15e-6, 25e-6, 35e-6])
    np.testing.assert_array_equal(mod(t), [1, -1, 1, -1])
    np.testing.assert_array_equal(mod(t), np.sign(np.sin(2 * np.pi * RABI * t)))


def test_double_echo_sign_pattern():
    mod = modulation_function("double_echo", T_M, RABI)
    np.testing.assert_allclose(mod.flips * 1e6, [10, 30], atol=1e-9)
    t = (np.arange(400) + 0.5) * T_M / 400
    signal = np.where(t < T_M / 2, 1, -1) * np.sign(np.sin(2 * np.pi * RABI * t))
    np.testing.assert_array_equal(mod(t), signal)


def test_modulation_rejects_incompatible_timing():
    with pytest.raises(ValueError):
        modulation_function("xy4", 30e-6, RABI)
    with pytest.raises(ValueError):
        modulation_function("xy4", 20e-6, RABI)
    with pytest.raises(ValueError):
        modulation_function("cpmg", T_M, RABI)


@pytest.mark.parametrize("kind", ["xy4", "double_echo"])
def test_matched_rectified_integral(kind):
    mod = modulation_function(kind, T_M, RABI)
    if kind == "xy4":
        sig = lambda t: np.sin(2 * np.pi * RABI * t)
    else:
        sig = lambda t: np.where(t < T_M / 2, 1.0, -1.0) * np.sin(2 * np.pi * RABI * t)
    assert acquire_phase(sig, mod, T_M, 1.0) == pytest.approx(2 / np.pi * T_M, rel=1e-6)


@pytest.mark.parametrize("kind", ["xy4", "double_echo"])
def test_dc_rejection(kind):
    mod = modulation_function(kind, T_M, RABI)
    assert abs(acquire_phase(lambda t: np.full_like(t, 3e-9), mod, T_M, 1.76e11)) < 1e-12
    assert acquire_phase(lambda t: np.zeros_like(t), mod, T_M, 1.76e11) == 0.0


def test_ethanol_first_phase():
    g = SensorModel().gamma_e
    b = 2.558e-9
    mod = modulation_function("xy4", T_M, RABI)
    phi = acquire_phase(lambda t: b * np.sin(2 * np.pi * RABI * t), mod, T_M, g)
    assert phi == pytest.approx(2 / np.pi * g * b * T_M, rel=1e-3)
    assert phi == pytest.approx(0.0115, rel=0.01)


def test_sampled_signal_and_plain_callable_agree():
    mod = modulation_function("xy4", T_M, RABI)
    s = np.cos(2 * np.pi * 3 * RABI * GRID) + GRID * 1e4
    a = acquire_phase(s, mod, T_M, 2.0, times=GRID)
    b = acquire_phase(s, lambda t: np.sign(np.sin(2 * np.pi * RABI * t)), T_M, 2.0, times=GRID)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-18)


coef = st.floats(-1e3, 1e3, allow_nan=False)


@given(coef, st.lists(coef, min_size=4, max_size=4), st.lists(coef, min_size=4, max_size=4))
@settings(max_examples=60, deadline=None)
def test_acquire_phase_linear(a, c1, c2):
    mod = modulation_function("xy4", T_M, RABI)

    def make(c):
        return lambda t: c[0] + c[1] * np.sin(2 * np.pi * RABI * t) + \
            c[2] * np.cos(2 * np.pi * 2 * RABI * t) + c[3] * t / T_M

    s1, s2 = make(c1), make(c2)
    lhs = acquire_phase(lambda t: a * s1(t) + s2(t), mod, T_M, 1.0)
    rhs = a * acquire_phase(s1, mod, T_M, 1.0) + acquire_phase(s2, mod, T_M, 1.0)
    scale = T_M * (1 + abs(a)) * (1 + max(map(abs, c1 + c2)))
    assert abs(lhs - rhs) <= 1e-12 * scale


def test_measure_sigma_y():
    assert measure_sigma_y(0.0) == 0.0
    assert measure_sigma_y(math.pi / 2) == pytest.approx(1.0)
    assert measure_sigma_y(0.3, small_angle=True) == 0.3
    phi = 0.0115
    assert abs(measure_sigma_y(phi) - phi) / phi < 3e-5


def test_sensor_response_sign_and_noise():
    s = SensorModel()
    assert s.readout_axis == "y"
    assert s.respond(0.01) == pytest.approx(-math.sin(0.01))
    noisy = SensorModel(readout_noise=0.1)
    r1 = noisy.respond(np.zeros(1000), rng=np.random.default_rng(0))
    assert 0.08 < np.std(r1) < 0.12
    with pytest.raises(ValueError):
        SensorModel(modulation="bogus")


# geometry

def _frame(n):
    n = np.asarray(n, dtype=float)
    trial = np.array([1.0, 0, 0]) if abs(n[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = trial - n * (trial @ n)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(n, e1), n


def _oracle_nv_centred(R, axis=(0, 0, 1)):
    # radial part integrates to ln(R cos(theta)) between the surface and the sphere
    e1, e2, n = _frame(axis)

    def unit(th, ph):
        return np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])

    def integrand(kind):
        def f(th, ph):
            u = unit(th, ph)
            a = u @ n
            w = np.sin(th) * np.log(R * np.cos(th))
            if kind == "F":
                return (3 * a * a - 1) * w
            return 3 * a * (u @ (e1 if kind == "Gx" else e2)) * w
        return f

    th_max = math.acos(1 / R)
    return [dblquad(integrand(k), 0, 2 * math.pi, 0, th_max, epsabs=1e-10, epsrel=1e-9)[0]
            for k in ("F", "Gx", "Gy")]


def _oracle_surface_centred(R):
    z = lambda s: (R * R - s * s) / (R * R + 2 * s + 1) ** 1.5
    return 2 * math.pi * quad(z, 0, R, epsabs=1e-12, epsrel=1e-10)[0]


@pytest.mark.parametrize("R", [1.5, 2.0, 3.0, 10.0, 50.0])
def test_geometry_matches_angular_oracle(R):
    F, Gx, Gy = geometric_integral(GeometryConfig(1.0, R))
    assert F == pytest.approx(_oracle_nv_centred(R)[0], rel=2e-3)
    assert abs(Gx) < 1e-12 and abs(Gy) < 1e-12


def test_geometry_closed_form_limit():
    F = geometric_integral(GeometryConfig(10e-9, 1e-4), resolution=300)[0]
    assert F == pytest.approx(4 * math.pi / 3, rel=5e-3)


@pytest.mark.parametrize("R", [2.0, 5.0])
def test_geometry_surface_centred(R):
    F = geometric_integral(GeometryConfig(1.0, R, center="surface"))[0]
    assert F == pytest.approx(_oracle_surface_centred(R), rel=2e-3)


@pytest.mark.parametrize("axis", [(1.0, 1.0, 1.0), (0.3, -0.2, 1.0), (1.0, 0.0, 0.0)])
def test_geometry_tilted_axis(axis):
    axis = tuple(np.array(axis) / np.linalg.norm(axis))
    got = geometric_integral(GeometryConfig(1.0, 4.0, axis), resolution=160)
    ref = _oracle_nv_centred(4.0, axis)
    np.testing.assert_allclose(got, ref, atol=2e-3 * np.linalg.norm(ref))


def test_magic_angle_axis_cancels_f():
    axis = tuple(np.array([1.0, 1.0, 1.0]) / math.sqrt(3))
    F, Gx, Gy = geometric_integral(GeometryConfig(1.0, 4.0, axis))
    assert abs(F) < 1e-12 < abs(Gx)


def test_geometry_resolution_convergence():
    g = GeometryConfig(1.0, 30.0)
    f1 = geometric_integral(g, resolution=100)[0]
    f2 = geometric_integral(g, resolution=200)[0]
    assert abs(f2 - f1) < 5e-3 * abs(f2)
    with pytest.raises(ConvergenceError):
        geometric_integral(GeometryConfig(1.0, 1e3), resolution=8, rtol=1e-9)


def test_geometry_scale_invariance_and_sweep():
    a = geometric_integral(GeometryConfig(10e-9, 30e-9))
    b = geometric_integral(GeometryConfig(1.0, 3.0))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)
    rows = geometric_sweep([1.0, 2.0, 3.0])
    assert rows.shape == (3, 4)
    assert rows[0, 1] == 0.0 and np.all(np.diff(rows[:, 1]) > 0)


def test_geometry_config_validation():
    with pytest.raises(ValueError):
        GeometryConfig(0.0, 1.0)
    with pytest.raises(ValueError):
        GeometryConfig(1.0, 1.0, nv_axis=(1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        GeometryConfig(1.0, 1.0, center="elsewhere")
