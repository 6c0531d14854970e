import math

import pytest
from hypothesis import given, strategies as st

from tripod_eit.model import (ANGULAR_SCALE, DEFAULT_RATES, Config, DriveField,
                              MediumGeometry, PhysicalConstants, RelaxationRates,
                              TripodModel, ZeemanField, power_to_rabi_scaled,
                              scale_frequency, scale_rate, unscale_frequency,
                              zeeman_shift)


def test_zeeman_one_milligauss_is_2p8_khz():
    assert zeeman_shift(1.0) == pytest.approx(2.8e3, rel=2e-3)


def test_zeeman_zero_and_ten():
    assert zeeman_shift(0.0) == 0.0
    # hand evaluation: 9.274e-24 J/T * 2.002 * 1e-6 T / 6.62607015e-34 J s
    hand = 9.274e-24 * 2.002 * 1e-6 / 6.62607015e-34
    assert zeeman_shift(10.0) == pytest.approx(hand, rel=1e-14)
    assert zeeman_shift(10.0) == pytest.approx(28.0e3, rel=2e-3)


def test_zeeman_negative_field_allowed():
    assert zeeman_shift(-10.0) == -zeeman_shift(10.0)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_zeeman_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        zeeman_shift(bad)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_zeeman_linear(a, b):
    assert zeeman_shift(a * b) == pytest.approx(a * zeeman_shift(b), rel=1e-12, abs=1e-9)


def test_rabi_calibration():
    assert power_to_rabi_scaled(22.0) == pytest.approx(8.6e-3, rel=1e-15)
    assert power_to_rabi_scaled(0.0) == 0.0
    assert power_to_rabi_scaled(10.0) == pytest.approx(5.80e-3, rel=2e-3)
    assert power_to_rabi_scaled(10.0) == pytest.approx(5.7e-3, rel=0.02)


def test_rabi_lab_power_triplet_within_three_percent():
    for p, expected in zip((1.0, 10.0, 22.0), (1.8e-3, 5.7e-3, 8.6e-3)):
        assert power_to_rabi_scaled(p) == pytest.approx(expected, rel=0.03)


def test_rabi_rejects_negative_power():
    with pytest.raises(ValueError):
        power_to_rabi_scaled(-1.0)


@given(st.floats(0, 1e4))
def test_rabi_square_root_law(p):
    assert power_to_rabi_scaled(4 * p) == pytest.approx(2 * power_to_rabi_scaled(p),
                                                         rel=1e-14, abs=1e-300)


def test_scale_frequency_examples():
    assert scale_frequency(28e3) == pytest.approx(2.8e-5, rel=1e-15)
    assert scale_frequency(0.0) == 0.0
    assert scale_frequency(1e9) == 1.0


@given(st.floats(-1e12, 1e12))
def test_scale_round_trip(f):
    assert unscale_frequency(scale_frequency(f)) == pytest.approx(f, rel=1e-15, abs=1e-300)


def test_rate_scalings():
    assert scale_rate(1e4) == pytest.approx(1.5915494e-6, rel=1e-7)
    assert scale_rate(1e4, angular=False) == pytest.approx(1e-5)
    assert DEFAULT_RATES.gammaR_bar == pytest.approx(1e4 / ANGULAR_SCALE)
    lin = RelaxationRates.from_lab(angular=False)
    assert lin.gammaR_bar == pytest.approx(1e-5)


def test_rates_validation():
    with pytest.raises(ValueError):
        RelaxationRates(1e-3, 1e-5, 1e-6)  # Raman decay below transit
    with pytest.raises(ValueError):
        RelaxationRates(-1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        RelaxationRates(1.0, 0.0, 0.0)  # radiative floor exceeds the optical decay


def test_constants_validation():
    assert PhysicalConstants().lande_g == 2.002
    with pytest.raises(ValueError):
        PhysicalConstants(lande_g=0.0)


def test_zeeman_field_invariant_exact():
    z = ZeemanField(10.0)
    assert z.delta_z_bar == scale_frequency(zeeman_shift(10.0))


def test_drive_and_geometry_validation():
    with pytest.raises(ValueError):
        DriveField("probe", -1.0)
    with pytest.raises(ValueError):
        DriveField("pump", 1.0)
    with pytest.raises(ValueError):
        MediumGeometry(optical_depth=-0.1)
    assert MediumGeometry().length_cm == 6.0


def test_tripod_model_needs_one_probe_one_coupling():
    with pytest.raises(ValueError):
        TripodModel(Config.PERP, DriveField("coupling", 0.0), DriveField("coupling", 0.0))


def test_raman_detuning_is_difference():
    m = TripodModel.from_lab("config2", 10.0, 10.0, delta_hz=5e3, coupling_detuning_hz=2e3)
    assert m.coupling.optical_detuning_bar == pytest.approx(2e-6)
    assert m.raman_detuning_bar == pytest.approx(5e-6, rel=1e-12)
    shifted = m.with_raman_detuning(-3e-6)
    assert shifted.raman_detuning_bar == pytest.approx(-3e-6, rel=1e-12)
    assert shifted.coupling == m.coupling


def test_from_lab_probe_ratio_and_perturbative_flag():
    m = TripodModel.from_lab(Config.PERP, 22.0, 0.0, probe_ratio=1e-3)
    assert m.probe.rabi_bar == pytest.approx(8.6e-6)
    assert m.perturbative
    assert not TripodModel.from_lab(Config.PERP, 22.0, 0.0).perturbative


def test_config_aliases():
    assert Config.parse("1") is Config.PERP
    assert Config.parse("para") is Config.PARA
    assert Config.parse(Config.PARA) is Config.PARA
    with pytest.raises(ValueError):
        Config.parse("config3")
