import math

import numpy as np
import pytest

from qmem.design import (C_MM_PER_S, X01, SurfaceBudget, WaveguideGeometry, cutoff_frequency, energy_suppression,
                         kasa_circle, participation_bound, propagation_constant, quarter_wave_frequency,
                         read_s21_csv, s21_circle_fit, s21_shunt_model, synthetic_trace, write_s21_csv)
from qmem.errors import FitError, InsufficientData, NotEvanescent, ResolutionError


def test_cutoff_and_beta_at_cutoff():
    fc = cutoff_frequency(5.0)
    assert fc == pytest.approx(X01 * 299792458e3 / (2 * math.pi * 5.0), rel=1e-14)
    assert fc == pytest.approx(22.95e9, rel=1e-3)
    assert abs(propagation_constant(fc, 5.0)) < 1e-6


def test_beta_continuous_through_cutoff():
    fc = cutoff_frequency(5.0)
    for eps in (1e-3, 1e-5, 1e-7):
        lo, hi = propagation_constant(fc * (1 - eps), 5.0), propagation_constant(fc * (1 + eps), 5.0)
        assert lo.real == 0 and hi.imag == 0
        # |beta| ~ k_c sqrt(2 eps) on both sides
        bound = X01 / 5.0 * math.sqrt(2 * eps) * 1.01
        assert abs(lo) < bound and abs(hi) < bound


def test_beta_free_space_limit():
    k = 2 * math.pi * 4.25e9 / C_MM_PER_S
    assert propagation_constant(4.25e9, 1e7).real == pytest.approx(k, rel=1e-9)


def test_device_decay_length_and_suppression():
    beta = propagation_constant(4.25e9, 5.0)
    assert beta.real == 0
    assert 1 / abs(beta) == pytest.approx(2.12, abs=0.005)
    s = energy_suppression(23.0, beta)
    assert s == pytest.approx(math.exp(-2 * 23.0 * abs(beta)), rel=1e-14)
    assert s < 1e-9
    assert WaveguideGeometry().suppression(4.25e9) == s
    assert energy_suppression(0.0, beta) == 1.0
    assert energy_suppression(10 / abs(beta), beta) == pytest.approx(2.06e-9, rel=0.01)


def test_not_evanescent():
    with pytest.raises(NotEvanescent):
        energy_suppression(23.0, propagation_constant(30e9, 5.0))


def test_quarter_wave():
    assert quarter_wave_frequency(17.6) == pytest.approx(4.25e9, rel=0.005)
    assert quarter_wave_frequency(20.0) == pytest.approx(3.75e9, rel=0.002)
    assert quarter_wave_frequency(40.0) == pytest.approx(quarter_wave_frequency(20.0) / 2, rel=1e-14)


def test_participation():
    assert participation_bound(7e7, 2e-7) == pytest.approx(14.0)
    assert participation_bound(7e7, 4e-5) == pytest.approx(2800.0)
    assert participation_bound(7e7, 1.0) == 7e7
    b = SurfaceBudget()
    assert (b.Q_diel, b.Q_mag) == (pytest.approx(14.0), pytest.approx(2800.0))
    with pytest.raises(ValueError):
        SurfaceBudget(p_diel=1.5)
    for bad in ((0.0, 0.1), (1e6, -1.0)):
        with pytest.raises(ValueError):
            participation_bound(*bad)


def test_geometry_validation():
    with pytest.raises(ValueError):
        WaveguideGeometry(a=0.0)
    for fn, arg in ((cutoff_frequency, 0.0), (quarter_wave_frequency, -1.0)):
        with pytest.raises(ValueError):
            fn(arg)


def test_shunt_model_limits():
    f = np.linspace(4.2e9, 4.3e9, 11)
    assert np.all(s21_shunt_model(f, 4.25e9, 1e6, math.inf) == 1)
    # half-power points of the dip sit at f0 +- f0 / (2 Q_tot)
    f0, qi, qe = 4.25e9, 2e5, 3e5
    qt = 1 / (1 / qi + 1 / qe)
    depth = lambda f: abs(1 - s21_shunt_model(f, f0, qi, qe))
    assert depth(f0 + f0 / (2 * qt)) ** 2 == pytest.approx(0.5 * depth(f0) ** 2, rel=1e-9)


def test_kasa_circle_exact():
    t = np.linspace(0, 2 * np.pi, 30)
    z = 0.3 - 0.2j + 0.7 * np.exp(1j * t)
    c, r = kasa_circle(z)
    assert c == pytest.approx(0.3 - 0.2j, abs=1e-12)
    assert r == pytest.approx(0.7, rel=1e-12)
    with pytest.raises(FitError):
        kasa_circle(np.linspace(0, 1, 20) * (1 + 1j))


def test_device_trace_recovery():
    f, s = synthetic_trace(4.25e9, 7e7, 1e9, phi=0.05)
    fit = s21_circle_fit(f, s)
    assert fit["Q_int"] == pytest.approx(7e7, rel=1e-6)
    assert fit["Q_ext"] == pytest.approx(1e9, rel=1e-6)
    assert fit["f0_hz"] == pytest.approx(4.25e9, rel=1e-12)


def test_circle_fit_round_trip_grid():
    qs = np.geomspace(1e5, 1e9, 10)
    worst = 0.0
    for qi in qs:
        for qe in qs:
            f, s = synthetic_trace(4.25e9, qi, qe, phi=0.1)
            fit = s21_circle_fit(f, s)
            worst = max(worst, abs(fit["Q_int"] / qi - 1), abs(fit["Q_ext"] / qe - 1),
                        abs(fit["f0_hz"] / 4.25e9 - 1))
    assert worst < 1e-3


@pytest.mark.parametrize("seed", range(5))
def test_noisy_trace_within_one_percent(seed):
    f, s = synthetic_trace(4.25e9, 7e5, 1e6, phi=0.1, snr_db=40, seed=seed)
    fit = s21_circle_fit(f, s)
    assert fit["Q_int"] == pytest.approx(7e5, rel=0.01)
    assert fit["Q_ext"] == pytest.approx(1e6, rel=0.01)


def test_circle_fit_guards():
    f, s = synthetic_trace(4.25e9, 1e6, 1e6, n_points=40)
    with pytest.raises(InsufficientData):
        s21_circle_fit(f, s)
    f, s = synthetic_trace(4.25e9, 1e6, 1e6, span_linewidths=1.0)
    with pytest.raises(ResolutionError):
        s21_circle_fit(f, s)
    with pytest.raises(FitError):
        s21_circle_fit(np.linspace(4e9, 5e9, 100), np.linspace(0, 1, 100) * (1 + 1j))


def test_csv_round_trip(tmp_path):
    f, s = synthetic_trace(4.25e9, 1e6, 2e6, snr_db=50, seed=2)
    p = tmp_path / "trace.csv"
    write_s21_csv(p, f, s)
    f2, s2 = read_s21_csv(p)
    assert np.array_equal(f, f2) and np.array_equal(s, s2)
    (tmp_path / "bad.csv").write_text("freq,re\n1,2\n")
    with pytest.raises(InsufficientData):
        read_s21_csv(tmp_path / "bad.csv")
