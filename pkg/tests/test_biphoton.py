import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import trapezoid

from utils.biphoton import (
    BiphotonSpec,
    BrightnessInputs,
    SampledCurve,
    bandwidth_to_fwhm,
    bin_average,
    blur,
    blurred_binned_model,
    calibrate_contrast,
    comb_kernel,
    excess_density_grid,
    fwhm_to_bandwidth,
    g2_model,
    half_max_width,
    is_nonclassical_value,
    pair_rate_for_contrast,
    sample_curve,
    spectral_brightness,
)
from utils.errors import BiphotonError, SamplingError

T_RT = 0.94


@pytest.mark.parametrize('fwhm_ns, bandwidth_mhz', [(19.4, 11.4), (10.6, 20.8)])
def test_fwhm_to_bandwidth_matches_quoted_pairs(fwhm_ns, bandwidth_mhz):
    assert fwhm_to_bandwidth(fwhm_ns) == pytest.approx(bandwidth_mhz, abs=0.05)


def test_conversions_are_inverse():
    assert fwhm_to_bandwidth(bandwidth_to_fwhm(11.4)) == pytest.approx(11.4, rel=1e-12)


def test_conversion_rejects_non_positive():
    with pytest.raises(BiphotonError):
        fwhm_to_bandwidth(0.0)


def test_single_mode_model_values(envelope_spec):
    assert g2_model(0.0, envelope_spec) == pytest.approx(7.2)
    assert g2_model(1e4, envelope_spec) == pytest.approx(1.0)
    tau = np.linspace(-50, 50, 101)
    np.testing.assert_allclose(g2_model(tau, envelope_spec), g2_model(-tau, envelope_spec))


def test_model_half_width_matches_fwhm(envelope_spec):
    curve = sample_curve(envelope_spec, 60.0, 0.001)
    width = half_max_width(curve.tau_ns, curve.g2)
    assert width == pytest.approx(bandwidth_to_fwhm(11.4), rel=1e-3)


def test_comb_teeth_at_round_trip_multiples():
    spec = BiphotonSpec(bandwidth_mhz=11.4, contrast=1.0, mode_count=100, round_trip_ns=T_RT)
    for k in range(-3, 4):
        tau = k * T_RT
        assert g2_model(tau, spec) == pytest.approx(1.0 + math.exp(-spec.decay_rate_per_ns * abs(tau)), rel=1e-9)
    assert g2_model(T_RT / 2, spec) == pytest.approx(1.0, abs=1e-9)


def test_sinc2_profile_comb_is_peak_normalized():
    tau = np.array([0.0, T_RT, 2 * T_RT])
    d = comb_kernel(tau, 51, T_RT, 'sinc2')
    np.testing.assert_allclose(d, 1.0, rtol=1e-9)
    assert comb_kernel(np.array([T_RT / 2]), 51, T_RT, 'sinc2')[0] < 0.01


def test_distant_teeth_of_a_wide_comb_stay_at_unity():
    teeth = np.arange(101) * T_RT
    np.testing.assert_allclose(comb_kernel(teeth, 1500, T_RT), 1.0, atol=1e-9)
    np.testing.assert_allclose(comb_kernel(-teeth, 2100, T_RT), 1.0, atol=1e-9)


def test_wide_comb_never_exceeds_its_peak():
    tau = np.linspace(-100.0, 100.0, 400_001)
    assert comb_kernel(tau, 1500, T_RT).max() <= 1.0


def test_comb_is_periodic_in_round_trip():
    tau = np.linspace(-T_RT, T_RT, 2001)
    np.testing.assert_allclose(comb_kernel(tau + 42 * T_RT, 1500, T_RT), comb_kernel(tau, 1500, T_RT), atol=1e-6)


def test_uniform_comb_matches_direct_mode_sum():
    n = 7
    m = np.arange(n) - (n - 1) / 2.0
    tau = np.array([0.013, 0.21, 0.47, 1.3, 2.9])
    direct = np.abs(np.exp(2j * np.pi * np.outer(tau, m) / T_RT).sum(axis=1)) ** 2 / n ** 2
    np.testing.assert_allclose(comb_kernel(tau, n, T_RT), direct, rtol=1e-9, atol=1e-12)


def test_model_at_distant_tooth_is_bounded_by_envelope():
    spec = BiphotonSpec(bandwidth_mhz=11.4, contrast=6.2, mode_count=1500, round_trip_ns=T_RT)
    tau = 42 * T_RT
    envelope = math.exp(-spec.decay_rate_per_ns * tau)
    assert g2_model(tau, spec) <= 1.0 + spec.contrast * envelope + 1e-9
    assert g2_model(tau, spec) == pytest.approx(1.0 + spec.contrast * envelope, rel=1e-9)


@pytest.mark.parametrize('spec', [
    BiphotonSpec(bandwidth_mhz=0.0, contrast=1.0),
    BiphotonSpec(bandwidth_mhz=11.4, contrast=-1.0),
    BiphotonSpec(bandwidth_mhz=11.4, contrast=1.0, mode_count=0),
    BiphotonSpec(bandwidth_mhz=2000.0, contrast=1.0, round_trip_ns=T_RT),
    BiphotonSpec(bandwidth_mhz=11.4, contrast=1.0, mode_profile='gaussian'),
])
def test_invalid_specs_rejected(spec):
    with pytest.raises(BiphotonError):
        spec.validate()


def test_zero_sigma_blur_is_identity(envelope_spec):
    curve = sample_curve(envelope_spec, 20.0, 0.05)
    blurred = blur(curve, 0.0)
    np.testing.assert_array_equal(blurred.g2, curve.g2)


def test_blur_requires_fine_sampling(envelope_spec):
    curve = sample_curve(envelope_spec, 20.0, 0.2)
    with pytest.raises(SamplingError):
        blur(curve, 400.0)


def test_blur_preserves_excess_area(envelope_spec):
    curve = sample_curve(envelope_spec, 200.0, 0.05)
    blurred = blur(curve, 1000.0)
    before = trapezoid(curve.g2 - 1.0, curve.tau_ns)
    after = trapezoid(blurred.g2 - 1.0, blurred.tau_ns)
    assert after == pytest.approx(before, rel=1e-6)


def test_comb_washes_out_under_detector_jitter():
    comb = BiphotonSpec(bandwidth_mhz=11.4, contrast=100.0, mode_count=100, round_trip_ns=T_RT)
    smooth = BiphotonSpec(bandwidth_mhz=11.4, contrast=1.0)
    centers = np.arange(-12, 13) * 0.8
    binned_comb = blurred_binned_model(comb, centers, 0.8, 400.0) - 1.0
    binned_smooth = blurred_binned_model(smooth, centers, 0.8, 400.0) - 1.0
    ripple = np.max(np.abs(binned_comb / binned_smooth - 1.0))
    assert ripple < 0.1


def test_bin_average_of_constant_curve():
    tau = np.linspace(-10, 10, 2001)
    curve = SampledCurve(tau, np.full_like(tau, 3.0))
    np.testing.assert_allclose(bin_average(curve, [-2.0, 0.0, 2.0], 0.8), 3.0)
    with pytest.raises(SamplingError):
        bin_average(curve, [9.9], 0.8)


@pytest.mark.parametrize('rate, bandwidth, expected', [(10.94, 11.4, 16.0), (5.49, 20.8, 4.4)])
def test_spectral_brightness_reproduces_quoted_values(rate, bandwidth, expected):
    inputs = BrightnessInputs(corrected_pair_rate_per_s=rate, duration_s=600.0,
                              bandwidth_mhz=bandwidth, pump_power_mw=0.06)
    assert spectral_brightness(inputs) == pytest.approx(expected, abs=0.1)


def test_brightness_rejects_zero_power():
    with pytest.raises(BiphotonError):
        spectral_brightness(BrightnessInputs(10.0, 600.0, 11.4, 0.0))


@pytest.mark.parametrize('mode_count', [1, 100])
def test_calibrated_contrast_hits_target_in_central_bin(mode_count):
    skeleton = BiphotonSpec(bandwidth_mhz=11.4, contrast=1.0, mode_count=mode_count, round_trip_ns=T_RT)
    spec = calibrate_contrast(7.2, 1e4, 1e4, 0.8, 566.0, skeleton)
    assert blurred_binned_model(spec, [0.0], 0.8, 566.0)[0] == pytest.approx(7.2, rel=1e-9)
    assert spec.contrast > 6.2


def test_calibration_rejects_unreachable_target(envelope_spec):
    with pytest.raises(BiphotonError):
        calibrate_contrast(1.0, None, None, 0.8, 566.0, envelope_spec)


def test_pair_rate_matches_analytic_area(envelope_spec):
    tau_c_s = 1.0 / (2 * math.pi * 11.4e6)
    assert pair_rate_for_contrast(envelope_spec) == pytest.approx(1.0 / (6.2 * 2 * tau_c_s), rel=1e-3)


def test_comb_density_area_is_reduced_by_mode_count():
    single = BiphotonSpec(bandwidth_mhz=11.4, contrast=1.0)
    comb = replace(single, mode_count=50, round_trip_ns=T_RT)
    _, _, area_single = excess_density_grid(single)
    _, _, area_comb = excess_density_grid(comb)
    assert area_comb == pytest.approx(area_single / 50, rel=0.02)


def test_zero_contrast_has_no_pair_rate(envelope_spec):
    with pytest.raises(BiphotonError):
        pair_rate_for_contrast(replace(envelope_spec, contrast=0.0))


def test_classical_bound_is_two():
    assert is_nonclassical_value(2.01)
    assert not is_nonclassical_value(2.0)


def test_calibrated_contrast_grows_with_target(envelope_spec):
    targets = np.linspace(1.5, 12.0, 10)
    contrasts = [calibrate_contrast(t, None, None, 0.8, 566.0, envelope_spec).contrast for t in targets]
    assert np.all(np.diff(contrasts) > 0)


def test_calibrated_contrast_vanishes_as_target_approaches_one(envelope_spec):
    spec = calibrate_contrast(1.0 + 1e-9, None, None, 0.8, 566.0, envelope_spec)
    assert 0.0 < spec.contrast < 1e-8
