import numpy as np
import pytest

from tripod_eit import analysis
from tripod_eit.analysis import (FIT_TOLERANCE, FitResult, central_dip_contrast, feature_fwhm,
                                 find_extrema, fit_model, incoherent_excess, maxima, minima,
                                 model_function, separation_slope)
from tripod_eit.analytic import (Config1Params, Config2Params, im_chi_config1_lorentzian,
                                 im_chi_config2, params_for)
from tripod_eit.model import Config, TripodModel, zeeman_shift
from tripod_eit.spectra import SweepSpec, run_sweep

X = np.linspace(-3e5, 3e5, 2001)


def sweep(cfg, powers, fields, points=2001):
    return run_sweep(SweepSpec(cfg, powers_mW=powers, b_fields_mG=fields, points=points)).spectra()


def one(cfg, power, field):
    return sweep(cfg, (power,), (field,))[0]


def lorentzian(x, center, fwhm):
    hw = fwhm / 2
    return hw * hw / ((x - center) ** 2 + hw * hw)


def test_single_peak_center_within_half_step():
    y = lorentzian(X, 1234.5, 4e4)
    feats = find_extrema(X, y)
    assert [f.kind for f in feats] == ["maximum"]
    assert abs(feats[0].center_hz - 1234.5) < (X[1] - X[0]) / 2
    assert feats[0].prominence > 0


def test_extrema_input_validation():
    with pytest.raises(ValueError):
        find_extrema([0.0, 1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        find_extrema(X, lorentzian(X, 0, 1e4), min_prominence=0.0)
    with pytest.raises(ValueError):
        find_extrema(np.array([0.0, 1.0, 3.0, 4.0]), np.zeros(4))


def test_equal_extrema_ordered_by_prominence_then_left():
    y = lorentzian(X, -5e4, 2e4) + lorentzian(X, 5e4, 2e4)
    peaks = maxima(find_extrema(X, y))
    assert len(peaks) == 2
    assert peaks[0].center_hz < peaks[1].center_hz


def test_config1_low_power_peaks_at_zeeman_shifts():
    s = one(Config.PERP, 1.0, 30.0)
    peaks = sorted(f.center_hz for f in maxima(find_extrema(s.delta_hz, s.transmission)))
    z = zeeman_shift(30.0)
    assert z == pytest.approx(84e3, rel=2e-3)
    assert peaks == pytest.approx([-z, z], abs=2e3)


def test_config2_peaks_and_central_minimum():
    s = one(Config.PARA, 22.0, 10.0)
    feats = find_extrema(s.delta_hz, s.transmission)
    peaks = sorted(f.center_hz for f in maxima(feats))
    assert len(peaks) == 2
    assert peaks == pytest.approx([-28e3, 28e3], abs=5e3)
    dips = minima(feats)
    assert len(dips) == 1 and abs(dips[0].center_hz) < 1.0


def test_fwhm_of_synthetic_lorentzian():
    y = lorentzian(X, 0.0, 4e4)
    feat = maxima(find_extrema(X, y))[0]
    assert feature_fwhm(X, y, feat) == pytest.approx(4e4, rel=5e-3)


def test_fwhm_crossing_outside_grid():
    y = lorentzian(X, 0.0, 2e6)
    feat = analysis.SpectralFeature("maximum", 0.0, 1.0, 0.5, 1000)
    with pytest.raises(ValueError, match="wider sweep"):
        feature_fwhm(X, y, feat)


def test_config1_transparency_width_is_two_lambda():
    s = one(Config.PERP, 1.0, 30.0)
    lam_hz = params_for(TripodModel.from_lab(Config.PERP, 1.0, 30.0)).lam * 1e9
    for dip in minima(find_extrema(s.delta_hz, s.im_chi)):
        assert feature_fwhm(s.delta_hz, s.im_chi, dip) == pytest.approx(2 * lam_hz, rel=0.02)


def test_config2_dip_narrows_with_power():
    widths = []
    for s in sweep(Config.PARA, (1.0, 10.0, 22.0), (10.0,)):
        dip = min(minima(find_extrema(s.delta_hz, s.transmission)), key=lambda f: abs(f.center_hz))
        widths.append(feature_fwhm(s.delta_hz, s.transmission, dip))
    assert widths[0] > widths[1] > widths[2]
    assert all(5e3 < w < 1e5 for w in widths)


def test_round_trip_double_lorentzian_from_lorentzian_form():
    z = 28.02e-6
    p = Config1Params(X * 1e-9, z, 1.8e-3, 1.5915e-6)
    y = im_chi_config1_lorentzian(p) / (3 / np.sqrt(2))
    fit = fit_model(X, y, "double-lorentzian")
    assert fit.converged
    assert fit.parameters["zeeman_khz"] == pytest.approx(z * 1e6, rel=1e-6)
    assert fit.parameters["halfwidth_khz"] == pytest.approx(p.lam * 1e6, rel=1e-6)
    assert fit.parameters["depth"] == pytest.approx(3 * 1.8e-3 ** 2 / (4 * p.lam), rel=1e-6)
    assert fit.parameters["baseline"] == pytest.approx(1.0, rel=1e-9)


def test_round_trip_interacting_model():
    p = Config2Params(X * 1e-9, 28.02e-6, 8.6e-3, 1.5915e-6)
    y = im_chi_config2(p) / 1.5
    fit = fit_model(X, y, "interacting-double-dark")
    assert fit.converged
    assert fit.residual_rms < 1e-10
    assert fit.parameters["zeeman_khz"] == pytest.approx(28.02, rel=1e-6)
    assert fit.parameters["omega_c_milli"] == pytest.approx(8.6, rel=1e-6)
    assert fit.parameters["gamma_r_khz"] == pytest.approx(1.5915, rel=1e-6)


def test_round_trip_single_eit():
    truth = [0.9, 3.0, 12.0, 0.4]
    y = model_function("single-EIT")(X, truth)
    fit = fit_model(X, y, "single-EIT")
    assert fit.converged
    assert fit.values() == pytest.approx(truth, rel=1e-6)
    assert fit.metrics["fwhm_hz"] == pytest.approx(24e3, rel=1e-6)


def test_flat_spectrum_fits_with_zero_depth():
    fit = fit_model(X, np.full_like(X, 0.7), "single-EIT")
    assert fit.converged
    assert fit.parameters["baseline"] == pytest.approx(0.7)
    assert abs(fit.parameters["depth"]) < 1e-9
    assert fit.residual_rms >= 0


def test_fit_reports_non_convergence_instead_of_raising():
    p = Config2Params(X * 1e-9, 28.02e-6, 8.6e-3, 1.5915e-6)
    fit = fit_model(X, im_chi_config2(p) / 1.5, "interacting-double-dark", max_nfev=2)
    assert not fit.converged
    assert set(fit.parameters) == set(analysis.model_parameter_names("interacting-double-dark"))


def test_fit_needs_enough_points():
    with pytest.raises(ValueError, match="at least"):
        fit_model(X[:19], np.ones(19), "single-EIT")
    with pytest.raises(ValueError):
        fit_model(X, np.ones_like(X), "voigt")


def test_fit_is_deterministic_and_serializable():
    s = one(Config.PARA, 10.0, 10.0)
    a = fit_model(s.delta_hz, s.im_chi, "interacting-double-dark")
    b = fit_model(s.delta_hz, s.im_chi, "interacting-double-dark")
    assert a == b
    assert FitResult.from_dict(a.to_dict()) == a


def test_explicit_initial_guess():
    truth = [1.0, -2.0, 8.0, 0.3]
    y = model_function("single-EIT")(X, truth)
    fit = fit_model(X, y, "single-EIT", initial_guess_strategy=[1.0, 0.0, 10.0, 0.2])
    assert fit.values() == pytest.approx(truth, rel=1e-6)
    with pytest.raises(ValueError):
        fit_model(X, y, "single-EIT", initial_guess_strategy=[1.0, 0.0])


def test_incoherent_excess_examples():
    assert incoherent_excess(one(Config.PARA, 22.0, 10.0)) > 0
    assert abs(incoherent_excess(one(Config.PERP, 22.0, 10.0))) < FIT_TOLERANCE
    assert abs(incoherent_excess(one(Config.PARA, 22.0, 0.0))) < FIT_TOLERANCE


def test_incoherent_excess_signs_over_grid():
    positive = {(10.0, 10.0), (22.0, 10.0), (22.0, 30.0)}
    for cfg in Config:
        for s in sweep(cfg, (1.0, 10.0, 22.0), (0.0, 10.0, 30.0)):
            excess = incoherent_excess(s)
            assert excess >= -FIT_TOLERANCE
            if cfg is Config.PERP:
                assert abs(excess) < FIT_TOLERANCE
            elif (s.power_mW, s.b_mG) in positive:
                assert excess > FIT_TOLERANCE


def test_separation_slope_both_configurations():
    fields = (5.0, 10.0, 20.0, 30.0)
    expected = 2 * zeeman_shift(1.0)
    slopes = [separation_slope(sweep(cfg, (1.0,), fields)) for cfg in Config]
    for slope in slopes:
        assert slope == pytest.approx(5.6e3, rel=0.05)
        assert slope == pytest.approx(expected, rel=0.05)
    assert slopes[0] == pytest.approx(slopes[1], rel=0.05)


def test_separation_slope_needs_two_fields():
    with pytest.raises(ValueError):
        separation_slope(sweep(Config.PARA, (1.0,), (10.0,)))


def test_central_dip_contrast_limits():
    separated = one(Config.PERP, 1.0, 30.0)
    merged = one(Config.PERP, 22.0, 0.0)
    assert central_dip_contrast(separated) == pytest.approx(1.0, abs=0.02)
    assert central_dip_contrast(merged) == 0.0
