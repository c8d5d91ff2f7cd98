import sys
import os
import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
from sic_tool import dsp, impairments
from sic_tool.dsp import ComplexSignal
from sic_tool.exceptions import ConfigurationError, InvalidArgumentError, PreconditionError, SmallAngleWarning
from sic_tool.impairments import ImpairmentConfig, NonlinearityCoefficients


def random_complex(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def ofdm_block(rng, n_fft=64, n_symbols=1):
    """Unit-power QPSK OFDM symbols at symbol rate, CP stripped and concatenated."""
    bits = rng.integers(0, 2, size=(2, n_symbols, n_fft))
    symbols = ((1 - 2 * bits[0]) + 1j * (1 - 2 * bits[1])) / np.sqrt(2)
    return dsp.idft(symbols).ravel()


def reference_distortion_tx_only(x, taps, alpha, oversampling=4):
    """Band-limited cube of one periodic block through a circular channel, written out with plain numpy."""
    n_fft = x.size
    half = n_fft // 2
    spectrum = np.fft.fft(x)
    padded = np.zeros(n_fft * oversampling, dtype=complex)
    padded[:half] = spectrum[:half]
    padded[-half:] = spectrum[half:]
    upsampled = np.fft.ifft(padded) * oversampling
    cubed = np.fft.fft(upsampled**3) / oversampling
    in_band = np.fft.ifft(np.concatenate([cubed[:half], cubed[-half:]]))
    linear = np.convolve(in_band, taps)
    wrapped = linear[:n_fft].copy()
    wrapped[: linear.size - n_fft] += linear[n_fft:]
    return alpha * wrapped


@pytest.fixture
def oversampled_signal():
    rng = np.random.default_rng(21)
    return ComplexSignal(dsp.upsample_blocks(ofdm_block(rng)[np.newaxis, :], 4).ravel(), oversampling_factor=4)


def test_impairment_config_defaults_and_disabled_components():
    config = ImpairmentConfig()
    assert config.quantizer_bits == 14
    assert config.cubic_form == "inband"
    ImpairmentConfig(distortion_tx_db=float("-inf"), phase_noise_db=float("-inf"), awgn_db=float("-inf"))


@pytest.mark.parametrize(
    "overrides",
    [
        {"phase_noise_db": float("nan")},
        {"awgn_db": float("inf")},
        {"quantizer_bits": 3},
        {"quantizer_bits": 17},
        {"phase_noise_bandwidth": 0.0},
        {"distortion_rx_db": 0.0},
        {"cubic_form": "quintic"},
        {"loading_factor": -1.0},
    ],
)
def test_impairment_config_rejects_invalid_values(overrides):
    with pytest.raises(ConfigurationError):
        ImpairmentConfig(**overrides)


def test_cross_term_is_derived():
    coeffs = NonlinearityCoefficients(0.02, -0.01j)
    assert coeffs.cross_term == pytest.approx(3 * 0.02 * -0.01j)
    assert NonlinearityCoefficients().is_zero()


def test_zero_alpha_is_identity(oversampled_signal):
    assert np.array_equal(impairments.apply_cubic(oversampled_signal, 0.0).samples, oversampled_signal.samples)


@pytest.mark.parametrize("form", impairments.CUBIC_FORMS)
def test_cubic_device_is_odd(oversampled_signal, form):
    negated = oversampled_signal.with_samples(-oversampled_signal.samples)
    positive = impairments.apply_cubic(oversampled_signal, 0.05 - 0.02j, form).samples
    negative = impairments.apply_cubic(negated, 0.05 - 0.02j, form).samples
    assert np.allclose(negative, -positive)


def test_cubic_device_requires_oversampling():
    with pytest.raises(PreconditionError):
        impairments.apply_cubic(ComplexSignal(np.ones(64), oversampling_factor=2), 0.1)


def test_single_tone_literal_cube_lands_on_third_harmonic():
    """For A exp(j w n) the literal cube is A^3 exp(3 j w n): distortion-to-signal ratio |alpha|^2 |A|^4."""
    n = np.arange(256)
    amplitude, alpha = 0.7, 0.03
    tone = ComplexSignal(amplitude * np.exp(2j * np.pi * 5 * n / 256), oversampling_factor=4)
    distortion = impairments.apply_cubic(tone, alpha).samples - tone.samples
    assert np.allclose(distortion, alpha * amplitude**3 * np.exp(2j * np.pi * 15 * n / 256))
    ratio = dsp.mean_power(distortion) / dsp.mean_power(tone)
    assert ratio == pytest.approx(alpha**2 * amplitude**4)


def test_single_tone_inband_cube_is_a_gain():
    n = np.arange(256)
    amplitude, alpha = 0.7, -0.03
    tone = ComplexSignal(amplitude * np.exp(2j * np.pi * 5 * n / 256), oversampling_factor=4)
    output = impairments.apply_cubic(tone, alpha, form="inband").samples
    assert np.allclose(output, (1 + alpha * amplitude**2) * tone.samples)


@pytest.mark.parametrize("target_db", [-30.0, -45.0, -60.0])
def test_calibration_hits_target_power(oversampled_signal, target_db):
    alpha = impairments.calibrate_alpha3(oversampled_signal, target_db)
    distortion = alpha * impairments.cubic(oversampled_signal.samples)
    measured = dsp.power_db(distortion) - dsp.power_db(oversampled_signal)
    assert measured == pytest.approx(target_db, abs=0.1)


def test_in_band_calibration_measures_symbol_rate_distortion(oversampled_signal):
    alpha = impairments.calibrate_alpha3(oversampled_signal, -45.0, in_band=True, block_len=256)
    blocks = oversampled_signal.samples[np.newaxis, :]
    in_band = dsp.downsample_blocks(alpha * impairments.cubic(blocks), 4)
    signal_power = dsp.power_db(dsp.downsample_blocks(blocks, 4).ravel())
    assert dsp.power_db(in_band.ravel()) - signal_power == pytest.approx(-45.0, abs=0.1)


def test_in_band_calibration_needs_oversampled_reference():
    with pytest.raises(PreconditionError):
        impairments.calibrate_alpha3(ComplexSignal(np.ones(64)), -40.0, in_band=True)


def test_halving_alpha_lowers_distortion_by_six_db(oversampled_signal):
    alpha = impairments.calibrate_alpha3(oversampled_signal, -40.0)
    full = dsp.power_db(alpha * impairments.cubic(oversampled_signal.samples))
    half = dsp.power_db(0.5 * alpha * impairments.cubic(oversampled_signal.samples))
    assert full - half == pytest.approx(6.02, abs=0.01)


def test_calibration_edge_targets(oversampled_signal):
    assert impairments.calibrate_alpha3(oversampled_signal, float("-inf")) == 0.0
    with pytest.raises(InvalidArgumentError):
        impairments.calibrate_alpha3(oversampled_signal, 0.0)
    with pytest.raises(InvalidArgumentError):
        impairments.calibrate_alpha3(ComplexSignal(np.zeros(64), 4), -40.0)


def test_zero_coefficients_give_zero_distortion():
    x = ofdm_block(np.random.default_rng(22))
    d = impairments.synthesize_distortion(x, [1.0, 0.3], NonlinearityCoefficients())
    assert not np.any(d.samples)
    assert d.oversampling_factor == 1


def test_tx_only_impulse_channel_is_band_limited_cube():
    rng = np.random.default_rng(23)
    x = ofdm_block(rng)
    d = impairments.synthesize_distortion(x, [1.0], NonlinearityCoefficients(0.04, 0.0))
    up = dsp.upsample_blocks(x[np.newaxis, :], 4)
    expected = 0.04 * dsp.downsample_blocks(impairments.cubic(up), 4).ravel()
    assert np.allclose(d.samples, expected, atol=1e-12)


def test_tx_only_distortion_matches_numpy_reference():
    """Independent check of the TX term through a multi-tap channel."""
    rng = np.random.default_rng(24)
    x = ofdm_block(rng)
    taps = random_complex(rng, 6)
    d = impairments.synthesize_distortion(x, taps, NonlinearityCoefficients(0.02 + 0.01j, 0.0))
    assert np.allclose(d.samples, reference_distortion_tx_only(x, taps, 0.02 + 0.01j), atol=1e-12)


def test_full_model_equals_three_term_model_for_tx_only():
    rng = np.random.default_rng(25)
    x = ofdm_block(rng, n_symbols=3)
    taps = random_complex(rng, 8)
    coeffs = NonlinearityCoefficients(0.03, 0.0)
    simplified = impairments.synthesize_distortion(x, taps, coeffs, block_len=64).samples
    full = impairments.synthesize_distortion_full(x, taps, coeffs, block_len=64).samples
    assert np.allclose(full, simplified, atol=1e-12)


def test_dropped_higher_order_terms_are_negligible_in_weak_regime():
    """The unsimplified composite differs from the three-term model by far less than the distortion."""
    rng = np.random.default_rng(26)
    x = ofdm_block(rng, n_symbols=4)
    taps = random_complex(rng, 8) / 2
    reference = ComplexSignal(dsp.upsample_blocks(x.reshape(4, 64), 4).ravel(), 4)
    alpha_tx = impairments.calibrate_alpha3(reference, -45.0, in_band=True, block_len=256)
    alpha_rx = impairments.calibrate_alpha3(reference, -45.0, in_band=True, block_len=256)
    coeffs = NonlinearityCoefficients(alpha_tx, alpha_rx)
    simplified = impairments.synthesize_distortion(x, taps, coeffs, block_len=64).samples
    full = impairments.synthesize_distortion_full(x, taps, coeffs, block_len=64).samples
    assert dsp.power_db(simplified) - dsp.power_db(full - simplified) >= 30.0


def test_full_model_needs_higher_oversampling():
    with pytest.raises(PreconditionError):
        impairments.synthesize_distortion_full(np.ones(64), [1.0], NonlinearityCoefficients(0.1, 0.1), oversampling=4)


@pytest.mark.parametrize("coeffs", [NonlinearityCoefficients(0.02, 0.0), NonlinearityCoefficients(0.0, 0.02)])
def test_single_device_distortion_scales_with_cube_of_amplitude(coeffs):
    rng = np.random.default_rng(27)
    x = ofdm_block(rng)
    taps = random_complex(rng, 4)
    base = impairments.synthesize_distortion(x, taps, coeffs).samples
    doubled = impairments.synthesize_distortion(2.0 * x, taps, coeffs).samples
    assert np.allclose(doubled, 8.0 * base, atol=1e-12)


def test_basis_terms_reduce_to_cubes_for_impulse_channel():
    rng = np.random.default_rng(28)
    x = ofdm_block(rng)
    a_term, b_term, c_term = impairments.basis_terms(x, [1.0])
    up = dsp.upsample_blocks(x[np.newaxis, :], 4)
    assert np.allclose(a_term, b_term, atol=1e-12)
    assert np.allclose(c_term, dsp.downsample_blocks(up**5, 4), atol=1e-12)


def test_basis_terms_reject_symbol_rate_without_enough_oversampling():
    with pytest.raises(PreconditionError):
        impairments.basis_terms(np.ones(64), [1.0], oversampling=2)


def test_phase_noise_off_is_identity_and_leaves_rng_untouched():
    x = ComplexSignal(np.exp(1j * np.linspace(0, 3, 100)))
    rng = np.random.default_rng(29)
    out, track = impairments.apply_phase_noise(x, ImpairmentConfig(phase_noise_db=float("-inf")), rng)
    assert np.array_equal(out.samples, x.samples)
    assert not np.any(track)
    assert rng.random() == np.random.default_rng(29).random()


def test_phase_noise_power_matches_configuration():
    rng = np.random.default_rng(30)
    x = ComplexSignal(np.exp(2j * np.pi * rng.random(200_000)))
    out, track = impairments.apply_phase_noise(x, ImpairmentConfig(phase_noise_db=-30.0), rng)
    assert dsp.power_db(out.samples - x.samples) == pytest.approx(-30.0, abs=0.3)
    assert np.allclose(out.samples - x.samples, 1j * track * x.samples)


def test_phase_noise_track_is_correlated():
    """A narrow 3-dB bandwidth gives a slowly varying phase."""
    track = impairments.phase_noise_track(50_000, -40.0, 0.01, np.random.default_rng(31))
    lag_one = np.corrcoef(track[:-1], track[1:])[0, 1]
    assert lag_one == pytest.approx(np.exp(-2 * np.pi * 0.01), abs=0.02)


def test_large_phase_noise_warns():
    x = ComplexSignal(np.ones(128))
    with pytest.warns(SmallAngleWarning):
        impairments.apply_phase_noise(x, ImpairmentConfig(phase_noise_db=-10.0), np.random.default_rng(32))


def test_phase_noise_power_orders_with_setting():
    x = ComplexSignal(np.ones(20_000))
    weak, _ = impairments.apply_phase_noise(x, ImpairmentConfig(phase_noise_db=-95.0), np.random.default_rng(33))
    strong, _ = impairments.apply_phase_noise(x, ImpairmentConfig(phase_noise_db=-70.0), np.random.default_rng(33))
    assert dsp.power_db(strong.samples - x.samples) > dsp.power_db(weak.samples - x.samples) + 20


def test_quantizer_sqnr_matches_closed_form_at_12_bits():
    rng = np.random.default_rng(34)
    x = ComplexSignal(random_complex(rng, 100_000))
    quantized = impairments.quantize(x, 12)
    sqnr = dsp.power_db(x) - dsp.power_db(quantized.samples - x.samples)
    assert impairments.quantizer_sqnr_db(12) == pytest.approx(61.97, abs=0.01)
    assert sqnr == pytest.approx(impairments.quantizer_sqnr_db(12), abs=1.5)


def test_quantizer_high_resolution_limit():
    rng = np.random.default_rng(35)
    x = ComplexSignal(np.exp(2j * np.pi * rng.random(50_000)))
    quantized = impairments.quantize(x, 16, full_scale=1.0)
    assert dsp.power_db(x) - dsp.power_db(quantized.samples - x.samples) >= 90.0


def test_quantizer_is_idempotent_with_fixed_full_scale():
    rng = np.random.default_rng(36)
    x = ComplexSignal(random_complex(rng, 4096))
    once = impairments.quantize(x, 10, full_scale=3.0)
    twice = impairments.quantize(once, 10, full_scale=3.0)
    assert np.array_equal(once.samples, twice.samples)


def test_quantizer_clips_to_full_scale():
    x = ComplexSignal(np.array([10.0 - 10.0j, 0.1 + 0.0j]))
    quantized = impairments.quantize(x, 4, full_scale=1.0).samples
    step = 2.0 / 16
    assert quantized[0].real == pytest.approx(1.0 - step / 2)
    assert quantized[0].imag == pytest.approx(-(1.0 - step / 2))


@pytest.mark.parametrize("bits", [3, 17])
def test_quantizer_rejects_resolution_out_of_range(bits):
    with pytest.raises(InvalidArgumentError):
        impairments.quantize(ComplexSignal(np.ones(8)), bits)


def test_quantizer_passes_silence_through():
    quantized = impairments.quantize(ComplexSignal(np.zeros(16)), 8)
    assert not np.any(quantized.samples)


def test_awgn_power_and_determinism():
    noise = impairments.awgn(100_000, -20.0, np.random.default_rng(37))
    assert dsp.power_db(noise) == pytest.approx(-20.0, abs=0.1)
    assert np.array_equal(noise, impairments.awgn(100_000, -20.0, np.random.default_rng(37)))
    assert not np.any(impairments.awgn(16, float("-inf"), np.random.default_rng(37)))


def test_add_awgn_keeps_rate_tag():
    x = ComplexSignal(np.zeros(32), oversampling_factor=4)
    y = impairments.add_awgn(x, -10.0, np.random.default_rng(38))
    assert y.oversampling_factor == 4
    assert dsp.power_db(y) < 0.0
