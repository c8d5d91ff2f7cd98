"""Digital cancellation on data symbols and the evaluation metrics built on it.

RIDN (residual interference plus distortion plus noise) of a data symbol is

    X^I_k (H^I_k - H_hat_k) + (D_k - D_hat_k) + Phi_k + Q_k + Z_k

evaluated per subcarrier from simulator truth. Powers are mean |.|^2 over
every (symbol, subcarrier) cell of a unitary grid, so they equal the
time-domain mean power per sample.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import channel, dsp, impairments
from .exceptions import InvalidArgumentError
from .utils import db_to_linear, linear_to_db

logger = logging.getLogger("SicToolLogger")

RIDN_COMPONENTS = ("residual_interference", "residual_distortion", "phase_noise", "quantization", "awgn")
# Fixed reference for coefficient calibration, independent of the scenario seed.
CALIBRATION_SEED = 0x51C
CALIBRATION_SYMBOLS = 64


def _grid_array(grid):
    symbols = getattr(grid, "symbols", grid)
    return np.atleast_2d(np.asarray(symbols, dtype=np.complex128))


def cancel(Y, X_I, H_hat, D_hat=None):
    """Subtracts the reconstructed SI and distortion from received data symbols.

    Args:
        Y (OfdmGrid): Received data symbols.
        X_I (OfdmGrid): Transmitted SI data symbols.
        H_hat (array-like): Estimated SI channel response (length N).
        D_hat (OfdmGrid | array-like, optional): Reconstructed distortion
            spectrum; None subtracts nothing.

    Returns:
        OfdmGrid: Y_k - X_k * H_hat_k - D_hat_k.

    Raises:
        InvalidArgumentError: On incompatible dimensions.
    """
    received = _grid_array(Y)
    transmitted = _grid_array(X_I)
    response = np.asarray(H_hat, dtype=np.complex128).ravel()
    if received.shape != transmitted.shape:
        raise InvalidArgumentError(f"Received grid {received.shape} and SI grid {transmitted.shape} differ")
    if response.size != received.shape[1]:
        raise InvalidArgumentError(f"Channel response has {response.size} bins for {received.shape[1]} subcarriers")
    residual = received - transmitted * response
    if D_hat is not None:
        distortion = _grid_array(D_hat)
        if distortion.shape != received.shape:
            raise InvalidArgumentError(f"Distortion grid {distortion.shape} does not match {received.shape}")
        residual = residual - distortion
    return dsp.OfdmGrid(residual, Y.cp_len)


@dataclass(frozen=True, eq=False)
class ComponentSpectra:
    """Simulator truth on the data symbols, each a (symbols, N) unitary spectrum.

    `distortion`, `phase_noise`, `quantization` and `awgn` are the actual
    additive components of the received signal; `x_si` and `h_si` are the
    transmitted SI symbols and the true SI channel response.
    """

    x_si: np.ndarray
    h_si: np.ndarray
    distortion: np.ndarray
    phase_noise: np.ndarray
    quantization: np.ndarray
    awgn: np.ndarray


@dataclass(frozen=True, eq=False)
class RidnReport:
    """Powers (dB) of the RIDN components and of their sum.

    -inf marks an absent component. `per_subcarrier_ridn` holds the linear
    RIDN power per subcarrier, averaged over the data symbols.
    """

    residual_interference_db: float
    residual_distortion_db: float
    phase_noise_db: float
    quantization_db: float
    awgn_db: float
    total_ridn_db: float
    per_subcarrier_ridn: np.ndarray = field(repr=False)

    def component_sum_db(self):
        """Power sum of the components, in dB."""
        return linear_to_db(sum(db_to_linear(getattr(self, f"{name}_db")) for name in RIDN_COMPONENTS))

    def to_row(self, prefix="ridn_"):
        row = {f"{prefix}{name}_db": getattr(self, f"{name}_db") for name in RIDN_COMPONENTS}
        row[f"{prefix}total_db"] = self.total_ridn_db
        return row


def _power(values):
    return float(np.mean(np.abs(values) ** 2))


def compute_ridn(truth, h_hat, d_hat=None):
    """Evaluates the RIDN of the data symbols term by term.

    Args:
        truth (ComponentSpectra): True signals and channel.
        h_hat (array-like): Estimated SI channel response.
        d_hat (array-like, optional): Reconstructed distortion spectrum; None
            means no distortion suppression.

    Returns:
        RidnReport: Component and total powers plus the per-subcarrier RIDN.
    """
    h_hat = np.asarray(h_hat, dtype=np.complex128).ravel()
    interference = truth.x_si * (truth.h_si - h_hat)
    distortion = truth.distortion if d_hat is None else truth.distortion - np.asarray(d_hat)
    total = interference + distortion + truth.phase_noise + truth.quantization + truth.awgn
    return RidnReport(
        residual_interference_db=linear_to_db(_power(interference)),
        residual_distortion_db=linear_to_db(_power(distortion)),
        phase_noise_db=linear_to_db(_power(truth.phase_noise)),
        quantization_db=linear_to_db(_power(truth.quantization)),
        awgn_db=linear_to_db(_power(truth.awgn)),
        total_ridn_db=linear_to_db(_power(total)),
        per_subcarrier_ridn=np.mean(np.abs(total) ** 2, axis=0),
    )


def achievable_rate(signal_power_per_subcarrier, ridn_per_subcarrier):
    """Mean over subcarriers of log2(1 + S_k / RIDN_k), in bits/s/Hz.

    The residual is treated as Gaussian noise. An infinite RIDN contributes 0.

    Raises:
        InvalidArgumentError: If any RIDN value is not positive.
    """
    signal_power = np.asarray(signal_power_per_subcarrier, dtype=float)
    ridn = np.asarray(ridn_per_subcarrier, dtype=float)
    if np.any(ridn <= 0) or np.any(np.isnan(ridn)):
        raise InvalidArgumentError("RIDN must be positive on every subcarrier")
    signal_power, ridn = np.broadcast_arrays(signal_power, ridn)
    return float(np.mean(np.log2(1.0 + signal_power / ridn)))


def full_duplex_rate(signal_power_per_subcarrier, ridn_per_subcarrier, n_directions=2):
    """Sum rate of a symmetric full-duplex link: both directions transmit all the time."""
    return n_directions * achievable_rate(signal_power_per_subcarrier, ridn_per_subcarrier)


def half_duplex_rate(snr_db, n_directions=2, channel_gain=None):
    """Time-shared link: each direction gets half the time at SNR = S / N0."""
    gain = np.ones(1) if channel_gain is None else np.asarray(channel_gain, dtype=float)
    snr = db_to_linear(snr_db) * gain
    return float(n_directions * 0.5 * np.mean(np.log2(1.0 + snr)))


def crossover_snr(table):
    """First SNR at which the full-duplex rate exceeds the half-duplex rate, or None.

    Args:
        table (pd.DataFrame): Columns snr_db, rate_fd and rate_hd, sorted by SNR.
    """
    winners = table.loc[table["rate_fd"] > table["rate_hd"], "snr_db"]
    return float(winners.iloc[0]) if not winners.empty else None


def _slope(si_db, values_db):
    finite = np.isfinite(si_db) & np.isfinite(values_db)
    if finite.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.asarray(si_db)[finite], np.asarray(values_db)[finite], 1)[0])


def noise_budget(config, si_power_sweep_db=None, n_symbols=16, rng=None):
    """Per-component received noise powers as the SI power is swept.

    One set of random draws (SI symbols, SI channel, phase track, receiver
    noise) is reused at every SI level, so the power laws show exactly:
    distortion grows 3 dB/dB, phase noise 1 dB/dB, AWGN stays flat.
    Coefficients are calibrated once, at `config.link.si_power_db`.

    Args:
        config (ScenarioConfig): Scenario (geometry, channel, impairments, seed).
        si_power_sweep_db (list[float], optional): SI powers in dB; defaults
            to `config.budget.si_power_sweep_db`.
        n_symbols (int, optional): OFDM symbols per draw.
        rng (np.random.Generator, optional): Defaults to one seeded with
            `config.rng_seed`.

    Returns:
        pd.DataFrame: One row per SI power with columns si_power_db,
        distortion_db, distortion_simplified_db, phase_noise_db,
        quantization_db, awgn_db. Fitted slopes (dB/dB) are in
        `attrs["slopes"]`.
    """
    sweep = list(config.budget.si_power_sweep_db if si_power_sweep_db is None else si_power_sweep_db)
    if not sweep:
        raise InvalidArgumentError("The SI power sweep is empty")
    rng = rng if rng is not None else np.random.default_rng(config.rng_seed)
    imp = config.impairments
    n_fft = config.ofdm.n_subcarriers
    oversampling = config.ofdm.oversampling
    logger.info(f"--- Starting Noise Budget: {len(sweep)} SI levels ---")

    symbols = qpsk_symbols((n_symbols, n_fft), rng)
    blocks = dsp.idft(symbols)
    h_si = channel.generate_channel(
        config.channel.n_taps,
        config.channel.si_k_db,
        channel.exponential_pdp(config.channel.n_taps, config.channel.pdp_decay),
        rng,
    )
    coeffs = calibrated_coefficients(config, config.link.si_power_db)
    track = impairments.phase_noise_track(blocks.size, imp.phase_noise_db, imp.phase_noise_bandwidth, rng)
    noise = impairments.awgn(blocks.size, imp.awgn_db, rng)

    rows = []
    for si_db in sweep:
        si_db = float(si_db)
        scale = np.sqrt(db_to_linear(si_db))
        x = (scale * blocks).ravel()
        if scale == 0.0:
            si = np.zeros_like(x)
            distortion = np.zeros_like(x)
            simplified = np.zeros_like(x)
        else:
            si = dsp.circular_convolve(scale * blocks, h_si).ravel()
            full_oversampling = max(2 * oversampling, impairments.MIN_FULL_OVERSAMPLING)
            distortion = impairments.synthesize_distortion_full(
                x, h_si, coeffs, full_oversampling, imp.cubic_form, block_len=n_fft
            ).samples
            simplified = impairments.synthesize_distortion(x, h_si, coeffs, oversampling, imp.cubic_form, n_fft).samples
        phase = 1j * track * si
        analog = si + distortion + phase + noise
        if np.any(analog):
            quantized = impairments.quantize(dsp.ComplexSignal(analog), imp.quantizer_bits, None, imp.loading_factor)
            quantization = quantized.samples - analog
        else:
            quantization = np.zeros_like(analog)
        rows.append(
            {
                "si_power_db": si_db,
                "distortion_db": linear_to_db(_power(distortion)),
                "distortion_simplified_db": linear_to_db(_power(simplified)),
                "phase_noise_db": linear_to_db(_power(phase)),
                "quantization_db": linear_to_db(_power(quantization)),
                "awgn_db": linear_to_db(_power(noise)),
            }
        )
        logger.info(f"SI {si_db:.1f} dB: distortion {rows[-1]['distortion_db']:.1f} dB")

    table = pd.DataFrame(rows)
    si_values = table["si_power_db"].to_numpy()
    table.attrs["slopes"] = {
        column: _slope(si_values, table[column].to_numpy())
        for column in ("distortion_db", "phase_noise_db", "quantization_db", "awgn_db")
    }
    return table


def qpsk_symbols(shape, rng):
    """Unit-power QPSK symbols."""
    bits = rng.integers(0, 2, size=(2,) + tuple(np.atleast_1d(shape)))
    return ((1 - 2 * bits[0]) + 1j * (1 - 2 * bits[1])) / np.sqrt(2.0)


def calibrated_coefficients(config, si_power_db):
    """TX/RX coefficients giving the configured distortion levels at the given SI power.

    Calibration runs on a fixed long QPSK OFDM reference (independent of the
    scenario seed), oversampled and scaled to the SI power, measuring only the
    in-band distortion.
    """
    imp = config.impairments
    n_fft = config.ofdm.n_subcarriers
    oversampling = config.ofdm.oversampling
    if np.isneginf(float(si_power_db)):
        return impairments.NonlinearityCoefficients()
    reference_rng = np.random.default_rng(CALIBRATION_SEED)
    reference = dsp.idft(qpsk_symbols((CALIBRATION_SYMBOLS, n_fft), reference_rng))
    reference = np.sqrt(db_to_linear(si_power_db)) * dsp.upsample_blocks(reference, oversampling)
    reference_signal = dsp.ComplexSignal(reference.ravel(), oversampling)
    alpha_tx = impairments.calibrate_alpha3(
        reference_signal, imp.distortion_tx_db, imp.cubic_form, in_band=True, block_len=n_fft * oversampling
    )
    alpha_rx = impairments.calibrate_alpha3(
        reference_signal, imp.distortion_rx_db, imp.cubic_form, in_band=True, block_len=n_fft * oversampling
    )
    return impairments.NonlinearityCoefficients(alpha_tx, alpha_rx)
