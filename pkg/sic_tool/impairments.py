"""Transceiver impairments: third-order nonlinearity, phase noise, ADC quantization, receiver noise.

Distortion model. TX power amplifier and RX LNA are memoryless cubic devices
y = x + alpha3 * cubic(x). With x the SI waveform, h the SI channel,
s = x * h and t = cubic(x) * h, the received distortion is

    d = alpha3_tx * t + alpha3_rx * cubic(s + alpha3_tx * t)

`synthesize_distortion_full` evaluates that composite as is. The production
model `synthesize_distortion` keeps the first-order part of the RX term:

    d = alpha3_tx * A + alpha3_rx * B + 3 * alpha3_tx * alpha3_rx * C
    A = t,  B = cubic(s),  C = cross_basis(s, t)

Cubic forms: "literal" is the complex cube u**3 (C = s**2 t); "inband" is
|u|**2 u (C = (2|s|**2 t + s**2 conj(t)) / 3, exact for real alpha3_tx).
All cubic products are formed on per-symbol periodic blocks oversampled by
P >= 3 and brought back to symbol rate by keeping the in-band spectrum.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from . import dsp
from .dsp import ComplexSignal
from .exceptions import ConfigurationError, InvalidArgumentError, PreconditionError, SmallAngleWarning

logger = logging.getLogger("SicToolLogger")

CUBIC_FORMS = ("literal", "inband")
MIN_OVERSAMPLING = 3
# The composite device reaches 9th order; in-band terms stay alias-free for P > 5.
MIN_FULL_OVERSAMPLING = 6
SMALL_ANGLE_LIMIT_DB = -20.0


@dataclass(frozen=True)
class NonlinearityCoefficients:
    """TX and RX third-order coefficients; the cross term is always 3 * tx * rx."""

    alpha3_tx: complex = 0j
    alpha3_rx: complex = 0j
    cross_term: complex = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha3_tx", complex(self.alpha3_tx))
        object.__setattr__(self, "alpha3_rx", complex(self.alpha3_rx))
        object.__setattr__(self, "cross_term", 3.0 * self.alpha3_tx * self.alpha3_rx)

    def is_zero(self):
        return self.alpha3_tx == 0 and self.alpha3_rx == 0

    def to_dict(self):
        return {
            "alpha3_tx": [self.alpha3_tx.real, self.alpha3_tx.imag],
            "alpha3_rx": [self.alpha3_rx.real, self.alpha3_rx.imag],
        }


@dataclass(frozen=True)
class ImpairmentConfig:
    """Impairment powers and models of one scenario.

    Powers are in dB. distortion_*_db and phase_noise_db are relative to the
    received SI power; awgn_db is absolute (normalized to unit variance).
    -inf switches a component off; NaN and +inf are rejected.
    """

    distortion_tx_db: float = -45.0
    distortion_rx_db: float = -45.0
    phase_noise_db: float = -70.0
    phase_noise_bandwidth: float = 0.01
    quantizer_bits: int = 14
    loading_factor: float = 4.0
    awgn_db: float = -90.0
    cubic_form: str = "inband"

    def __post_init__(self):
        errors = []
        for name in ("distortion_tx_db", "distortion_rx_db", "phase_noise_db", "awgn_db"):
            value = float(getattr(self, name))
            if np.isnan(value) or np.isposinf(value):
                errors.append(f"{name} must be finite or -inf, got {value}")
        if not 4 <= int(self.quantizer_bits) <= 16:
            errors.append(f"quantizer_bits must be in [4, 16], got {self.quantizer_bits}")
        if not 0.0 < float(self.phase_noise_bandwidth) <= 0.5:
            errors.append(f"phase_noise_bandwidth must be in (0, 0.5], got {self.phase_noise_bandwidth}")
        if float(self.loading_factor) <= 0:
            errors.append(f"loading_factor must be positive, got {self.loading_factor}")
        if self.cubic_form not in CUBIC_FORMS:
            errors.append(f"cubic_form must be one of {CUBIC_FORMS}, got '{self.cubic_form}'")
        for name in ("distortion_tx_db", "distortion_rx_db"):
            if float(getattr(self, name)) >= 0:
                errors.append(f"{name} must be below 0 dB (weak nonlinearity), got {getattr(self, name)}")
        if errors:
            raise ConfigurationError("; ".join(errors))


def cubic(u, form="literal"):
    """Third-order term of a memoryless device: u**3 ("literal") or |u|**2 u ("inband")."""
    u = np.asarray(u, dtype=np.complex128)
    if form == "literal":
        return u * u * u
    if form == "inband":
        return (np.abs(u) ** 2) * u
    raise InvalidArgumentError(f"Unknown cubic form '{form}'")


def cross_basis(s, t, form="literal"):
    """First-order change of cubic(s + eps * t) per unit eps, divided by 3."""
    s = np.asarray(s, dtype=np.complex128)
    t = np.asarray(t, dtype=np.complex128)
    if form == "literal":
        return s * s * t
    if form == "inband":
        return (2.0 * np.abs(s) ** 2 * t + s * s * np.conj(t)) / 3.0
    raise InvalidArgumentError(f"Unknown cubic form '{form}'")


def apply_cubic(x, alpha3, form="literal"):
    """Memoryless third-order device with unity linear gain: y = x + alpha3 * cubic(x).

    Args:
        x (ComplexSignal): Input, oversampled by at least 3.
        alpha3 (complex): Third-order coefficient; 0 gives the identity.
        form (str, optional): "literal" or "inband".

    Returns:
        ComplexSignal: Device output at the input rate.

    Raises:
        PreconditionError: If x is oversampled by less than 3 (the cubic
            products would alias into the signal band).
    """
    if x.oversampling_factor < MIN_OVERSAMPLING:
        raise PreconditionError(
            f"Cubic evaluation needs oversampling >= {MIN_OVERSAMPLING}, signal has {x.oversampling_factor}"
        )
    return x.with_samples(x.samples + complex(alpha3) * cubic(x.samples, form))


def calibrate_alpha3(x_reference, target_distortion_db, form="literal", in_band=False, block_len=None):
    """Finds the real alpha3 whose distortion sits target_distortion_db below the reference power.

    Args:
        x_reference (ComplexSignal): Reference waveform.
        target_distortion_db (float): Distortion-to-signal power ratio in dB,
            below 0; -inf returns 0.
        form (str, optional): Cubic form.
        in_band (bool, optional): Measure only the in-band part of the cubic
            (the reference must be oversampled by >= 3); the signal power is
            then measured at symbol rate too.
        block_len (int, optional): Periodic block length of the reference at
            its own rate, for the in-band measurement.

    Returns:
        float: The coefficient.

    Raises:
        InvalidArgumentError: For a target >= 0 dB or an all-zero reference.
        PreconditionError: For in_band with insufficient oversampling.
    """
    target = float(target_distortion_db)
    if np.isneginf(target):
        return 0.0
    if target >= 0:
        raise InvalidArgumentError(f"Target distortion {target} dB is outside the weak-nonlinearity regime")

    samples = dsp.as_samples(x_reference)
    distortion = cubic(samples, form)
    if in_band:
        rate = getattr(x_reference, "oversampling_factor", 1)
        if rate < MIN_OVERSAMPLING:
            raise PreconditionError(f"In-band calibration needs oversampling >= {MIN_OVERSAMPLING}, got {rate}")
        block_len = samples.size if block_len is None else int(block_len)
        samples = dsp.downsample_blocks(samples.reshape(-1, block_len), rate)
        distortion = dsp.downsample_blocks(distortion.reshape(-1, block_len), rate)

    signal_power = float(np.mean(np.abs(samples) ** 2))
    distortion_power = float(np.mean(np.abs(distortion) ** 2))
    if signal_power == 0.0 or distortion_power == 0.0:
        raise InvalidArgumentError("Reference signal is degenerate (zero power)")
    return float(np.sqrt(10.0 ** (target / 10.0) * signal_power / distortion_power))


def _oversampled_blocks(x, oversampling, block_len, minimum):
    """Splits x into periodic blocks at an oversampled rate; returns (blocks, P)."""
    samples = dsp.as_samples(x)
    rate = getattr(x, "oversampling_factor", 1)
    if rate == 1:
        if oversampling < minimum:
            raise PreconditionError(f"Oversampling factor {oversampling} is below the required {minimum}")
        block_len = samples.size if block_len is None else int(block_len)
        if samples.size % block_len:
            raise InvalidArgumentError(f"Signal of {samples.size} samples does not split into blocks of {block_len}")
        return dsp.upsample_blocks(samples.reshape(-1, block_len), oversampling), oversampling
    if rate < minimum:
        raise PreconditionError(f"Signal oversampled by {rate}, at least {minimum} is required")
    block_len = samples.size if block_len is None else int(block_len) * rate
    return samples.reshape(-1, block_len), rate


def basis_terms(x, h, oversampling=4, form="literal", block_len=None):
    """Distortion basis (A, B, C) of a symbol-rate SI waveform through channel h.

    A = cubic(x) * h, B = cubic(x * h), C = cross_basis(x * h, cubic(x) * h),
    each computed per periodic block at the oversampled rate and returned at
    symbol rate.

    Args:
        x (ComplexSignal | array-like): SI waveform, either at symbol rate
            (upsampled here by `oversampling`) or already oversampled by >= 3.
        h (ChannelRealization | array-like): Symbol-spaced channel taps.
        oversampling (int, optional): Factor used for symbol-rate input.
        form (str, optional): Cubic form.
        block_len (int, optional): Symbol-rate block length (one OFDM symbol
            without CP); defaults to the whole signal.

    Returns:
        tuple[np.ndarray, np.ndarray, np.ndarray]: A, B, C as (blocks, N) arrays.
    """
    blocks, rate = _oversampled_blocks(x, oversampling, block_len, MIN_OVERSAMPLING)
    s = dsp.circular_convolve(blocks, h, rate)
    t = dsp.circular_convolve(cubic(blocks, form), h, rate)
    a_term = dsp.downsample_blocks(t, rate)
    b_term = dsp.downsample_blocks(cubic(s, form), rate)
    c_term = dsp.downsample_blocks(cross_basis(s, t, form), rate)
    return a_term, b_term, c_term


def combine_basis(coeffs, a_term, b_term, c_term):
    """alpha3_tx * A + alpha3_rx * B + 3 * alpha3_tx * alpha3_rx * C."""
    return coeffs.alpha3_tx * a_term + coeffs.alpha3_rx * b_term + coeffs.cross_term * c_term


def synthesize_distortion(x_I, h, c, oversampling=4, form="literal", block_len=None):
    """Three-term distortion model evaluated term by term, returned at symbol rate.

    Args:
        x_I (ComplexSignal | array-like): SI waveform (CP-stripped symbols
            concatenated when block_len is given).
        h (ChannelRealization | array-like): SI channel.
        c (NonlinearityCoefficients): Coefficients; zero gives zero output.
        oversampling (int, optional): Factor for symbol-rate input (>= 3).
        form (str, optional): Cubic form.
        block_len (int, optional): Symbol-rate block length.

    Returns:
        ComplexSignal: Distortion at symbol rate.
    """
    a_term, b_term, c_term = basis_terms(x_I, h, oversampling, form, block_len)
    return ComplexSignal(combine_basis(c, a_term, b_term, c_term).ravel(), 1)


def synthesize_distortion_full(x_I, h, c, oversampling=8, form="literal", block_len=None):
    """Unsimplified composite distortion, including the 7th and 9th order terms.

    Evaluates d = alpha3_tx * t + alpha3_rx * cubic(s + alpha3_tx * t) at an
    oversampling of at least 6. Used as the reference for the three-term model
    and for the noise budget.
    """
    blocks, rate = _oversampled_blocks(x_I, oversampling, block_len, MIN_FULL_OVERSAMPLING)
    s = dsp.circular_convolve(blocks, h, rate)
    t = dsp.circular_convolve(cubic(blocks, form), h, rate)
    rx_input = s + c.alpha3_tx * t
    distortion = c.alpha3_tx * t + c.alpha3_rx * cubic(rx_input, form)
    return ComplexSignal(dsp.downsample_blocks(distortion, rate).ravel(), 1)


def phase_noise_track(n_samples, total_power_db, bandwidth, rng):
    """Total phase process phi_n = phi_tx + phi_rx, each a stationary first-order (OU) process.

    Each oscillator carries half of the total power. The pole is
    exp(-2 pi bandwidth), bandwidth being the 3-dB corner as a fraction of
    the sample rate; the process starts in its stationary distribution.
    """
    total = 10.0 ** (float(total_power_db) / 10.0)
    pole = float(np.exp(-2.0 * np.pi * float(bandwidth)))
    track = np.zeros(n_samples)
    for _ in ("tx", "rx"):
        variance = total / 2.0
        innovations = rng.standard_normal(n_samples) * np.sqrt(variance * (1.0 - pole**2))
        innovations[0] = rng.standard_normal() * np.sqrt(variance)
        track += signal.lfilter([1.0], [1.0, -pole], innovations)
    return track


def apply_phase_noise(x, config, rng):
    """Adds the small-angle phase-noise term j * phi_n * x_n.

    Args:
        x (ComplexSignal): Signal the oscillators act on (received SI).
        config (ImpairmentConfig): Supplies phase_noise_db (total power of
            phi, i.e. power of the added term relative to x) and
            phase_noise_bandwidth.
        rng (np.random.Generator): Source of randomness.

    Returns:
        tuple[ComplexSignal, np.ndarray]: The impaired signal and the phase
        track phi_n.

    Warns:
        SmallAngleWarning: If phase_noise_db is above -20 dB.
    """
    power_db = float(config.phase_noise_db)
    if np.isneginf(power_db):
        return x.with_samples(x.samples), np.zeros(len(x))
    if power_db > SMALL_ANGLE_LIMIT_DB:
        warnings.warn(
            f"Phase-noise power {power_db} dB violates the small-angle assumption (limit {SMALL_ANGLE_LIMIT_DB} dB)",
            SmallAngleWarning,
            stacklevel=2,
        )
    track = phase_noise_track(len(x), power_db, config.phase_noise_bandwidth, rng)
    return x.with_samples(x.samples + 1j * track * x.samples), track


def quantizer_sqnr_db(bits, loading_factor=4.0):
    """Closed-form SQNR of `quantize` for a full scale of loading_factor times the complex RMS.

    6.02 * b + 4.77 - 20 * log10(loading_factor * sqrt(2)): each rail carries
    half the power, so its full scale sits at loading_factor * sqrt(2) rail
    standard deviations.
    """
    rail_loading = loading_factor * np.sqrt(2.0)
    return 20.0 * np.log10(2.0) * bits + 10.0 * np.log10(3.0) - 20.0 * np.log10(rail_loading)


def quantize(x, bits, full_scale=None, loading_factor=4.0):
    """Uniform mid-rise quantization of I and Q.

    Args:
        x (ComplexSignal): ADC input.
        bits (int): Resolution per rail, in [4, 16].
        full_scale (float, optional): Clipping level per rail. None uses the
            adaptive policy loading_factor * rms of this block, rms being the
            complex RMS amplitude.
        loading_factor (float, optional): Loading factor of the adaptive
            policy. Defaults to 4.

    Returns:
        ComplexSignal: Quantized signal.

    Raises:
        InvalidArgumentError: For bits outside [4, 16] or a non-positive full scale.
    """
    if not 4 <= int(bits) <= 16:
        raise InvalidArgumentError(f"Quantizer resolution must be in [4, 16] bits, got {bits}")
    samples = x.samples
    if full_scale is None:
        rms = np.sqrt(np.mean(np.abs(samples) ** 2))
        full_scale = loading_factor * rms
        if full_scale == 0.0:
            return x.with_samples(samples)
    if full_scale <= 0:
        raise InvalidArgumentError(f"Full scale must be positive, got {full_scale}")

    step = 2.0 * full_scale / 2 ** int(bits)
    top = full_scale - step / 2.0

    def _rail(values):
        return np.clip(step * (np.floor(values / step) + 0.5), -top, top)

    return x.with_samples(_rail(samples.real) + 1j * _rail(samples.imag))


def awgn(n_samples, noise_db, rng):
    """Circular complex Gaussian noise samples of power 10**(noise_db/10)."""
    if np.isneginf(float(noise_db)):
        return np.zeros(n_samples, dtype=np.complex128)
    sigma = np.sqrt(10.0 ** (float(noise_db) / 10.0) / 2.0)
    return sigma * (rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples))


def add_awgn(x, noise_db, rng):
    """Adds receiver Gaussian noise at the given absolute normalized power."""
    return x.with_samples(x.samples + awgn(len(x), noise_db, rng))
