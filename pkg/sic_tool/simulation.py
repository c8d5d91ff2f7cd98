"""One Monte Carlo trial of a full-duplex frame.

Frame: one training symbol (SI only, unit-modulus random-phase subcarriers)
followed by `n_data_symbols` data symbols carrying QPSK on both the SI and
the signal-of-interest (SoI) paths. The received stream is

    r = x_I * h_I + x_S * h_S + d + j*phi*(x_I * h_I) + z,  then ADC quantization

with d the three-term distortion of the SI path. Random draws happen in a
fixed order (SI channel, SoI channel, training phases, SI data, SoI data,
phase noise, receiver noise) so every baseline mode sees the same draws.

Every trial also evaluates the linear system (d = 0) on the same draws.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import channel, dsp, estimation, impairments, metrics
from .dsp import ComplexSignal, OfdmGrid
from .estimation import EstimationReport
from .utils import db_to_linear

logger = logging.getLogger("SicToolLogger")


@dataclass(eq=False)
class TrialResult:
    """Metrics of one trial.

    Attributes:
        ridn (RidnReport): RIDN of the selected baseline mode.
        ridn_linear (RidnReport): RIDN of the linear system on the same draws.
        ridn_per_iteration (list[float]): Total RIDN (dB) after each outer
            iteration; only filled in "proposed" mode.
        report (EstimationReport | None): Joint-estimator report ("proposed" only).
        soi_gain (np.ndarray): |H_S|^2 per subcarrier.
        soi_power (float): Transmitted SoI power (linear).
    """

    ridn: metrics.RidnReport
    ridn_linear: metrics.RidnReport
    ridn_per_iteration: list = field(default_factory=list)
    report: EstimationReport | None = None
    soi_gain: np.ndarray | None = None
    soi_power: float = 0.0


@dataclass(frozen=True, eq=False)
class Frame:
    """Everything drawn for one trial, before the receiver runs."""

    si_grid: OfdmGrid
    h_si: channel.ChannelRealization
    h_soi: channel.ChannelRealization
    received: np.ndarray
    received_linear: np.ndarray
    truth: metrics.ComponentSpectra
    truth_linear: metrics.ComponentSpectra
    soi_power: float


def training_symbol(n_subcarriers, rng):
    """Unit-modulus training row with uniformly random phases."""
    return np.exp(2j * np.pi * rng.random(n_subcarriers))


def _spectra(stream, geometry):
    return dsp.dft(dsp.strip_cyclic_prefix(stream, geometry))


def generate_frame(cell, coeffs, rng):
    """Draws and propagates one frame.

    Args:
        cell (ScenarioConfig): The cell's scenario.
        coeffs (NonlinearityCoefficients): True TX/RX coefficients.
        rng (np.random.Generator): Trial randomness.

    Returns:
        Frame: Received spectra (with and without distortion) and the truth.
    """
    geometry = cell.ofdm.geometry
    n_fft, cp_len = geometry.n_subcarriers, geometry.cp_len
    n_data = cell.ofdm.n_data_symbols
    imp = cell.impairments
    pdp = channel.exponential_pdp(cell.channel.n_taps, cell.channel.pdp_decay)

    h_si = channel.generate_channel(cell.channel.n_taps, cell.channel.si_k_db, pdp, rng)
    h_soi = channel.generate_channel(cell.channel.n_taps, cell.channel.soi_k_db, pdp, rng)
    training = training_symbol(n_fft, rng)
    si_data = metrics.qpsk_symbols((n_data, n_fft), rng)
    soi_data = metrics.qpsk_symbols((n_data, n_fft), rng)

    si_amplitude = np.sqrt(db_to_linear(cell.link.si_power_db))
    soi_power = db_to_linear(cell.link.snr_db + imp.awgn_db)
    si_grid = OfdmGrid(si_amplitude * np.vstack([training, si_data]), cp_len)
    soi_grid = OfdmGrid(np.sqrt(soi_power) * np.vstack([np.zeros(n_fft), soi_data]), cp_len)

    si_stream = channel.apply_channel(dsp.modulate_ofdm(si_grid), h_si, cp_len)
    soi_stream = channel.apply_channel(dsp.modulate_ofdm(soi_grid), h_soi, cp_len).samples

    si_blocks = dsp.idft(si_grid.symbols)
    distortion_blocks = impairments.synthesize_distortion(
        si_blocks.ravel(), h_si, coeffs, cell.ofdm.oversampling, imp.cubic_form, block_len=n_fft
    ).samples.reshape(si_blocks.shape)
    distortion_stream = dsp.add_cyclic_prefix(distortion_blocks, cp_len)

    with_phase_noise, _ = impairments.apply_phase_noise(si_stream, imp, rng)
    phase_stream = with_phase_noise.samples - si_stream.samples
    noise_stream = impairments.awgn(len(si_stream), imp.awgn_db, rng)

    linear_analog = si_stream.samples + soi_stream + phase_stream + noise_stream
    analog = linear_analog + distortion_stream

    def _adc(samples):
        quantized = impairments.quantize(ComplexSignal(samples), imp.quantizer_bits, None, imp.loading_factor)
        return quantized.samples, quantized.samples - samples

    received, quantization = _adc(analog)
    received_linear, quantization_linear = _adc(linear_analog)

    h_response = h_si.frequency_response(n_fft)
    data = slice(1, None)
    phase_spectra = _spectra(phase_stream, geometry)[data]
    noise_spectra = _spectra(noise_stream, geometry)[data]
    truth = metrics.ComponentSpectra(
        x_si=si_grid.symbols[data],
        h_si=h_response,
        distortion=_spectra(distortion_stream, geometry)[data],
        phase_noise=phase_spectra,
        quantization=_spectra(quantization, geometry)[data],
        awgn=noise_spectra,
    )
    truth_linear = metrics.ComponentSpectra(
        x_si=si_grid.symbols[data],
        h_si=h_response,
        distortion=np.zeros_like(truth.distortion),
        phase_noise=phase_spectra,
        quantization=_spectra(quantization_linear, geometry)[data],
        awgn=noise_spectra,
    )
    return Frame(
        si_grid=si_grid,
        h_si=h_si,
        h_soi=h_soi,
        received=_spectra(received, geometry),
        received_linear=_spectra(received_linear, geometry),
        truth=truth,
        truth_linear=truth_linear,
        soi_power=soi_power,
    )


def _linear_channel_estimate(received, si_grid, denoise_taps):
    return estimation.denoise_cir(estimation.estimate_channel_ls(received[0], si_grid.symbols[0]), denoise_taps)


def _distortion_estimate(si_data_blocks, h_response, coeffs, cell):
    """Reconstructed distortion spectrum of the data symbols."""
    if coeffs.is_zero():
        return np.zeros_like(si_data_blocks)
    taps = dsp.cir_from_response(h_response)[: cell.estimation.denoise_taps]
    basis = estimation.build_basis(
        si_data_blocks.ravel(),
        taps,
        cell.ofdm.oversampling,
        cell.impairments.cubic_form,
        block_len=si_data_blocks.shape[1],
    )
    return dsp.dft(basis.combine(coeffs).reshape(si_data_blocks.shape))


def run_trial(cell, coeffs, rng):
    """Runs one trial of the cell's baseline mode and the linear reference.

    Args:
        cell (ScenarioConfig): The cell's scenario (no sweep).
        coeffs (NonlinearityCoefficients): True coefficients, calibrated for the cell.
        rng (np.random.Generator): Trial randomness.

    Returns:
        TrialResult: The trial's metrics.
    """
    frame = generate_frame(cell, coeffs, rng)
    taps_kept = cell.estimation.denoise_taps or cell.ofdm.n_subcarriers
    soi_gain = np.abs(frame.h_soi.frequency_response(cell.ofdm.n_subcarriers)) ** 2

    h_linear = _linear_channel_estimate(frame.received_linear, frame.si_grid, taps_kept)
    ridn_linear = metrics.compute_ridn(frame.truth_linear, h_linear)
    result = TrialResult(ridn=ridn_linear, ridn_linear=ridn_linear, soi_gain=soi_gain, soi_power=frame.soi_power)

    if cell.baseline_mode == "linear":
        return result

    if cell.baseline_mode == "no_suppression":
        h_plain = _linear_channel_estimate(frame.received, frame.si_grid, taps_kept)
        result.ridn = metrics.compute_ridn(frame.truth, h_plain)
        return result

    y_train = dsp.idft(frame.received[0])
    x_train = dsp.idft(frame.si_grid.symbols[0])
    report = estimation.joint_iterative_estimate(y_train, x_train, cell.estimation)
    si_data_blocks = dsp.idft(frame.si_grid.symbols[1:])
    for h_response, estimate in report.history:
        d_hat = _distortion_estimate(si_data_blocks, h_response, estimate, cell)
        result.ridn = metrics.compute_ridn(frame.truth, h_response, d_hat)
        result.ridn_per_iteration.append(result.ridn.total_ridn_db)
    result.report = report
    return result
