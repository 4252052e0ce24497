import numpy as np
import pytest

from dkrotor.model import SystemParams, init_state
from dkrotor.spectroscopy import (
    ResonanceScan,
    WidthError,
    cusp_test,
    diffusion_constant,
    fit_lineshape,
    lineshape_model_p0,
    lineshape_model_p2,
    measure_width,
    resonance_scan,
)


def synthetic_scan(r_grid, p0, p2, N=100):
    r_grid = np.asarray(r_grid, dtype=float)
    return ResonanceScan(
        r_grid=r_grid,
        p0=np.asarray(p0, dtype=float),
        p2=np.asarray(p2, dtype=float),
        p0_sigma=np.zeros(r_grid.size),
        p2_sigma=np.zeros(r_grid.size),
        N=N,
        params=SystemParams(M=8),
        lambda0_values=(0.5,),
        errors=[""] * r_grid.size,
    )


def triangular_peak(r_grid, fwhm, peak=1.0, base=0.1):
    x = np.abs(np.asarray(r_grid) - 1.0)
    return np.maximum(peak - (peak - base) * x / fwhm, base)


def test_measure_width_triangular_peak():
    r = 1 + np.linspace(-0.01, 0.01, 201)
    scan = synthetic_scan(r, triangular_peak(r, 0.004), np.ones(201), N=100)
    report = measure_width(scan)
    assert report.fwhm_r == pytest.approx(0.004, abs=1e-4)
    assert report.fourier_width == pytest.approx(0.01)
    assert report.sub_fourier_factor == pytest.approx(0.01 / report.fwhm_r, rel=1e-12)
    assert report.delta_lambda == pytest.approx(100 * report.fwhm_r / 2, rel=1e-12)


def test_measure_width_rescaling_invariance():
    r = 1 + np.linspace(-0.01, 0.01, 201)
    p0 = triangular_peak(r, 0.004)
    w1 = measure_width(synthetic_scan(r, p0, np.ones(201)))
    w2 = measure_width(synthetic_scan(r, 37.5 * p0, np.ones(201)))
    assert w1.fwhm_r == pytest.approx(w2.fwhm_r, rel=1e-12)


def test_measure_width_needs_crossings():
    # peak at the grid edge: no crossing on one side
    r = 1 + np.linspace(-0.004, 0.001, 11)
    scan = synthetic_scan(r, np.linspace(0.1, 1.0, 11), np.ones(11))
    with pytest.raises(WidthError):
        measure_width(scan)


def test_lineshape_fit_noise_free_recovery():
    truth = dict(p2_dl=25.0, d_cl=100.0, lambda_scale=5e-4)
    N = 100
    r = 1 + np.linspace(-0.005, 0.005, 41)
    x = np.abs(r - 1)
    p2 = lineshape_model_p2(x, truth["p2_dl"], truth["d_cl"], truth["lambda_scale"], N)
    p0 = lineshape_model_p0(x, truth["p2_dl"], truth["d_cl"], truth["lambda_scale"], 1.0, N)
    fit = fit_lineshape(synthetic_scan(r, p0, p2, N=N))
    assert fit.converged
    assert fit.p2_dl == pytest.approx(truth["p2_dl"], rel=1e-4)
    assert fit.d_cl == pytest.approx(truth["d_cl"], rel=1e-4)
    assert fit.lambda_scale == pytest.approx(truth["lambda_scale"], rel=1e-4)
    assert fit.amplitude == pytest.approx(1.0, rel=1e-4)
    assert fit.residual_rms < 1e-8


def test_lineshape_fit_noisy_recovery():
    truth = dict(p2_dl=25.0, d_cl=100.0, lambda_scale=5e-4)
    N = 100
    rng = np.random.default_rng(21)
    r = 1 + np.linspace(-0.005, 0.005, 41)
    x = np.abs(r - 1)
    p2 = lineshape_model_p2(x, truth["p2_dl"], truth["d_cl"], truth["lambda_scale"], N)
    p0 = lineshape_model_p0(x, truth["p2_dl"], truth["d_cl"], truth["lambda_scale"], 1.0, N)
    p0 = p0 * (1 + 0.01 * rng.standard_normal(p0.size))
    p2 = p2 * (1 + 0.01 * rng.standard_normal(p2.size))
    fit = fit_lineshape(synthetic_scan(r, p0, p2, N=N))
    assert fit.converged
    assert fit.p2_dl == pytest.approx(truth["p2_dl"], rel=0.05)
    assert fit.d_cl == pytest.approx(truth["d_cl"], rel=0.05)
    assert fit.lambda_scale == pytest.approx(truth["lambda_scale"], rel=0.05)


def test_lineshape_fit_flat_scan_reports_nonconvergence():
    r = 1 + np.linspace(-0.01, 0.01, 41)
    fit = fit_lineshape(synthetic_scan(r, np.ones(41), np.ones(41)))
    assert not fit.converged
    assert "flat" in fit.message


def test_lineshape_fit_needs_enough_points():
    r = 1 + np.linspace(-0.01, 0.01, 10)
    fit = fit_lineshape(synthetic_scan(r, np.linspace(1, 2, 10), np.ones(10)))
    assert not fit.converged


def test_diffusion_constant_exact_linear_series():
    n = np.arange(1, 101)
    report = diffusion_constant(3.0 * n, n_break_hint=8)
    assert report.d_quantum == pytest.approx(3.0, rel=1e-12)
    assert not report.flagged


def test_diffusion_constant_short_series_rejected():
    with pytest.raises(ValueError):
        diffusion_constant(np.arange(10), n_break_hint=8)


def test_diffusion_constant_negative_slope_clipped():
    n = np.arange(1, 101)
    series = 100.0 - 0.5 * n
    report = diffusion_constant(series, n_break_hint=8)
    assert report.d_quantum == 0.0
    assert report.flagged


def test_diffusion_constant_break_estimate():
    # ballistic rise to a plateau at n ~ 10, then flat
    n = np.arange(1, 201)
    series = np.minimum(10.0 * n, 100.0)
    report = diffusion_constant(series, n_break_hint=25)
    assert 5 <= report.n_break <= 15
    assert report.d_quantum == pytest.approx(0.0, abs=1e-10)


def test_cusp_prefers_triangular_on_triangular_data():
    r = 1 + np.linspace(-0.004, 0.004, 33)
    y = 1.0 - 50.0 * np.abs(r - 1)
    report = cusp_test(r, y, center=1.0, half_width=0.002)
    assert report.preferred == "triangular"
    assert report.residual_ratio > 3.0


def test_cusp_prefers_parabola_on_parabolic_data():
    r = 1 + np.linspace(-0.004, 0.004, 33)
    y = 1.0 - 5e4 * (r - 1) ** 2
    report = cusp_test(r, y, center=1.0, half_width=0.002)
    assert report.preferred == "parabolic"


def test_cusp_works_on_minima():
    r = 1 + np.linspace(-0.003, 0.003, 25)
    y = 0.1 + 30.0 * np.abs(r - 1)
    report = cusp_test(r, y)
    assert report.preferred == "triangular"
    assert report.center == pytest.approx(1.0, abs=1e-9)


def test_cusp_needs_points():
    r = 1 + np.linspace(-0.004, 0.004, 9)
    y = 1.0 - 50.0 * np.abs(r - 1)
    with pytest.raises(ValueError):
        cusp_test(r, y, center=1.0, half_width=1e-4)


def test_resonance_scan_flat_without_kicks():
    params = SystemParams(M=8, K=0.0)
    psi0 = init_state(params, "delta")
    scan = resonance_scan(
        1 + np.linspace(-0.01, 0.01, 5), params, psi0, N=3, lambda0_values=(0.3,)
    )
    assert np.allclose(scan.p0, 1.0, atol=1e-12)
    assert np.allclose(scan.p2, 0.0, atol=1e-12)


def test_resonance_scan_grid_must_bracket_unity():
    params = SystemParams(M=8, K=0.0)
    with pytest.raises(ValueError):
        resonance_scan(np.linspace(1.001, 1.01, 5), params, N=2)


def test_resonance_scan_records_point_failures():
    # M too small for K=10: every point hits the truncation guard
    params = SystemParams(M=8, K=10.0)
    psi0 = init_state(params, "delta")
    scan = resonance_scan(
        1 + np.linspace(-0.01, 0.01, 3), params, psi0, N=5, lambda0_values=(0.5,)
    )
    assert all(err for err in scan.errors)
    assert np.all(np.isnan(scan.p0))
