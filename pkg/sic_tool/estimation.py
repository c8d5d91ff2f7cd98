"""Joint estimation of the self-interference channel and the TX/RX nonlinearity coefficients.

The received training symbol (SI only) is modelled as

    y = x * h + alpha3_tx * A + alpha3_rx * B + 3 * alpha3_tx * alpha3_rx * C + noise

with the basis signals A, B, C of `impairments.basis_terms`. Each outer
iteration of `joint_iterative_estimate`:

1. estimates the channel by LS on the distortion-cleaned training spectrum
   and denoises it by truncating the impulse response to L taps,
2. rebuilds the basis with the new channel and estimates the coefficients
   (`successive_from_basis`) on the part of the residual the channel
   estimate cannot absorb,
3. reconstructs the distortion,
4. subtracts it from the received training signal for the next iteration.

With an L-tap denoiser the channel step absorbs the component of any
training-block signal s that lies in the span of X_k times an L-tap
response, i.e. X * P_L(S / X). Fitting the coefficients on the basis with
that component removed keeps them unbiased from the first iteration on.
For the in-band cubic form this also removes the part of A and B that is
proportional to the linear SI.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import dsp, impairments
from .dsp import ComplexSignal
from .exceptions import ConfigurationError, InvalidArgumentError, InvalidTrainingError, NumericalGuardError
from .impairments import NonlinearityCoefficients
from .utils import linear_to_db

logger = logging.getLogger("SicToolLogger")

TRAINING_MAGNITUDE_FLOOR = 1e-6
RATIO_GUARD = 1e-6
ESTIMATOR_VARIANTS = ("projection", "ratio")
INNER_UPDATES = ("literal", "consistent", "joint")
START_TX = "tx"
START_RX = "rx"
# Slack before a rising residual is reported as non-convergence.
RESIDUAL_SLACK_DB = 0.2
# Singular values below this fraction of the largest count as zero in the LS oracle.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class EstimationConfig:
    """Settings of the joint estimator.

    Attributes:
        n_outer (int): Outer (channel + coefficients) iterations.
        n_inner (int): Successive coefficient iterations per outer iteration.
        denoise_taps (int | None): Impulse-response length L kept by the
            denoiser; None keeps all N taps (no denoising). Scenario files
            map null to the cyclic-prefix length.
        estimator_variant (str): "projection" (LS fit) or "ratio" (per-sample
            ratio average).
        inner_update (str): "joint" solves both coefficients together in
            every inner iteration; "literal" and "consistent" update them one
            at a time (see `successive_from_basis`).
        project_basis (bool): Fit the coefficients on the basis with the
            component the channel estimate absorbs removed.
        oversampling (int): Rate at which the basis is built.
        cubic_form (str): Cubic form of the basis, same as the impairments.
    """

    n_outer: int = 4
    n_inner: int = 3
    denoise_taps: int | None = None
    estimator_variant: str = "projection"
    inner_update: str = "joint"
    project_basis: bool = True
    oversampling: int = 4
    cubic_form: str = "inband"

    def __post_init__(self):
        errors = []
        if int(self.n_outer) < 1:
            errors.append(f"n_outer must be >= 1, got {self.n_outer}")
        if int(self.n_inner) < 1:
            errors.append(f"n_inner must be >= 1, got {self.n_inner}")
        if self.denoise_taps is not None and int(self.denoise_taps) < 1:
            errors.append(f"denoise_taps must be >= 1, got {self.denoise_taps}")
        if self.estimator_variant not in ESTIMATOR_VARIANTS:
            errors.append(f"estimator_variant must be one of {ESTIMATOR_VARIANTS}, got '{self.estimator_variant}'")
        if self.inner_update not in INNER_UPDATES:
            errors.append(f"inner_update must be one of {INNER_UPDATES}, got '{self.inner_update}'")
        elif self.inner_update == "joint" and self.estimator_variant == "ratio":
            errors.append("the ratio estimator fits one coefficient at a time; inner_update must not be joint")
        if not isinstance(self.project_basis, bool):
            errors.append(f"project_basis must be true or false, got {self.project_basis!r}")
        if int(self.oversampling) < impairments.MIN_OVERSAMPLING:
            errors.append(f"oversampling must be >= {impairments.MIN_OVERSAMPLING}, got {self.oversampling}")
        if self.cubic_form not in impairments.CUBIC_FORMS:
            errors.append(f"cubic_form must be one of {impairments.CUBIC_FORMS}, got '{self.cubic_form}'")
        if errors:
            raise ConfigurationError("; ".join(errors))


@dataclass(frozen=True, eq=False)
class BasisSignals:
    """Basis signals A, B, C at symbol rate, built from the SI waveform and a channel estimate."""

    A: ComplexSignal
    B: ComplexSignal
    C: ComplexSignal

    def __post_init__(self):
        if not len(self.A) == len(self.B) == len(self.C):
            raise InvalidArgumentError("Basis signals must have equal lengths")

    def matrix(self):
        """(n_samples, 3) matrix with A, B, C as columns."""
        return np.column_stack([self.A.samples, self.B.samples, self.C.samples])

    def combine(self, coeffs):
        """alpha3_tx * A + alpha3_rx * B + 3 * alpha3_tx * alpha3_rx * C as a plain array."""
        return impairments.combine_basis(coeffs, self.A.samples, self.B.samples, self.C.samples)


@dataclass(frozen=True, eq=False)
class LsOracleResult:
    """Least-squares solution of the stacked basis system with a free cross term."""

    alpha3_tx: complex
    alpha3_rx: complex
    cross_term: complex
    condition_number: float
    rank: int

    @property
    def coefficients(self):
        return NonlinearityCoefficients(self.alpha3_tx, self.alpha3_rx)


@dataclass(eq=False)
class EstimationReport:
    """Outcome of the joint iterative estimator.

    Attributes:
        h_hat (np.ndarray): Final channel frequency response on N subcarriers.
        coeffs (NonlinearityCoefficients): Final coefficients.
        residual_db (list[float]): Power of the training residual after each
            outer iteration, one entry per iteration.
        start_coeff (str): Start coefficient chosen in the last iteration.
        history (list[tuple[np.ndarray, NonlinearityCoefficients]]): Channel
            response and coefficients after every outer iteration.
        converged (bool): False when the residual rose by more than the slack.
    """

    h_hat: np.ndarray
    coeffs: NonlinearityCoefficients
    residual_db: list = field(default_factory=list)
    start_coeff: str = START_TX
    history: list = field(default_factory=list)
    converged: bool = True

    def to_dict(self):
        return {
            "h_hat": [[float(v.real), float(v.imag)] for v in np.asarray(self.h_hat)],
            "alpha3_tx": [self.coeffs.alpha3_tx.real, self.coeffs.alpha3_tx.imag],
            "alpha3_rx": [self.coeffs.alpha3_rx.real, self.coeffs.alpha3_rx.imag],
            "residual_db": [float(v) for v in self.residual_db],
            "start_coeff": self.start_coeff,
        }


def _spectrum(x):
    """Unitary spectrum of an OfdmGrid row, a ComplexSignal block or a plain array."""
    symbols = getattr(x, "symbols", None)
    if symbols is not None:
        return np.asarray(symbols).ravel()
    if isinstance(x, ComplexSignal):
        return dsp.dft(x)
    return np.asarray(x, dtype=np.complex128).ravel()


def estimate_channel_ls(Y, X):
    """Per-subcarrier least-squares channel estimate H_k = Y_k / X_k.

    Args:
        Y (OfdmGrid | array-like): Received training spectrum (one symbol).
        X (OfdmGrid | array-like): Transmitted training spectrum.

    Returns:
        np.ndarray: The LS frequency response.

    Raises:
        InvalidTrainingError: If any |X_k| is below 1e-6.
        InvalidArgumentError: If Y and X differ in length.
    """
    Y = _spectrum(Y)
    X = _spectrum(X)
    if Y.shape != X.shape:
        raise InvalidArgumentError(f"Received ({Y.size}) and training ({X.size}) spectra differ in length")
    if np.any(np.abs(X) < TRAINING_MAGNITUDE_FLOOR):
        weak = int(np.sum(np.abs(X) < TRAINING_MAGNITUDE_FLOOR))
        raise InvalidTrainingError(f"Training symbol has {weak} subcarrier(s) below {TRAINING_MAGNITUDE_FLOOR}")
    return Y / X


def denoise_cir(H_ls, L):
    """Keeps the first L taps of the impulse response behind H_ls and zeros the rest.

    For a channel confined to L taps the estimation-noise power drops by L/N.
    A channel with energy beyond tap L-1 is biased by the truncation.

    Args:
        H_ls (array-like): LS frequency response on N subcarriers.
        L (int): Taps to keep, 1 <= L <= N.

    Returns:
        np.ndarray: Denoised frequency response.
    """
    H_ls = np.asarray(H_ls, dtype=np.complex128)
    n_fft = H_ls.shape[-1]
    if not 1 <= int(L) <= n_fft:
        raise InvalidArgumentError(f"Denoising length L must be in [1, {n_fft}], got {L}")
    cir = dsp.cir_from_response(H_ls)
    cir[..., int(L):] = 0.0
    return np.fft.fft(cir, axis=-1)


def build_basis(x_I, h_hat, oversampling=4, form="literal", block_len=None):
    """Builds the basis A, B, C from the SI waveform and an estimated channel.

    The products are formed per block at `oversampling` times the symbol
    rate and decimated back to symbol rate.

    Args:
        x_I (ComplexSignal | array-like): CP-stripped SI waveform at symbol rate.
        h_hat (ChannelRealization | array-like): Channel taps.
        oversampling (int, optional): Oversampling factor (>= 3).
        form (str, optional): Cubic form.
        block_len (int, optional): Symbol-rate block length.

    Returns:
        BasisSignals: The basis at symbol rate.
    """
    a_term, b_term, c_term = impairments.basis_terms(x_I, h_hat, oversampling, form, block_len)
    return BasisSignals(
        ComplexSignal(a_term.ravel(), 1), ComplexSignal(b_term.ravel(), 1), ComplexSignal(c_term.ravel(), 1)
    )


def _projection_residual(y_bar, column):
    energy = np.vdot(column, column).real
    if energy == 0.0:
        return float(np.vdot(y_bar, y_bar).real)
    fitted = (np.vdot(column, y_bar) / energy) * column
    return float(np.sum(np.abs(y_bar - fitted) ** 2))


def select_start_coefficient(y_bar, basis):
    """Chooses which coefficient the successive estimator starts with.

    Each coefficient is fitted alone (projection of y_bar onto A, then onto
    B); the one leaving the smaller residual power wins. Ties go to tx.

    Returns:
        str: "tx" or "rx".
    """
    y_bar = dsp.as_samples(y_bar)
    residual_tx = _projection_residual(y_bar, basis.A.samples)
    residual_rx = _projection_residual(y_bar, basis.B.samples)
    return START_RX if residual_rx < residual_tx else START_TX


def estimate_coefficient(y_bar, basis_column, variant="projection", guard=RATIO_GUARD):
    """Fits a single coefficient a in y_bar ~= a * basis_column.

    Args:
        y_bar (ComplexSignal | array-like): Signal holding the distortion.
        basis_column (ComplexSignal | array-like): Basis signal.
        variant (str, optional): "projection" gives <col, y>/<col, col>;
            "ratio" gives the average of y_n / col_n.
        guard (float, optional): Ratio mode refuses samples with |col_n|
            below guard times the column RMS.

    Returns:
        complex: The coefficient; 0 for an all-zero column in projection mode.

    Raises:
        NumericalGuardError: In ratio mode, when a basis sample is too small.
    """
    y_bar = dsp.as_samples(y_bar)
    column = dsp.as_samples(basis_column)
    if variant == "projection":
        energy = np.vdot(column, column).real
        if energy == 0.0:
            return 0j
        return complex(np.vdot(column, y_bar) / energy)
    if variant == "ratio":
        rms = np.sqrt(np.mean(np.abs(column) ** 2))
        threshold = guard * rms
        if rms == 0.0 or np.any(np.abs(column) <= threshold):
            raise NumericalGuardError(
                f"Basis sample below the ratio guard ({threshold:.3e}); use the projection variant"
            )
        return complex(np.mean(y_bar / column))
    raise InvalidArgumentError(f"Unknown estimator variant '{variant}'")


def _joint_update(y0, first_col, second_col, c_col, first, second):
    """One Gauss-Newton step of the bilinear fit y0 ~= a*first_col + b*second_col + 3ab*c_col around (first, second)."""
    jacobian = np.column_stack([first_col + 3.0 * second * c_col, second_col + 3.0 * first * c_col])
    target = y0 + 3.0 * first * second * c_col
    solution, _, rank, _ = scipy.linalg.lstsq(jacobian, target, cond=RANK_RTOL)
    if rank < 2:
        logger.debug(f"Joint coefficient update on a rank-{rank} basis; keeping the minimum-norm solution")
    return complex(solution[0]), complex(solution[1])


def successive_from_basis(y_bar, basis, n_inner=3, variant="projection", reading="joint"):
    """Iterative estimation of both coefficients on a prepared basis.

    Under a line-of-sight dominated channel A and B are nearly collinear, so
    one-coefficient-at-a-time updates settle slowly on the split between
    them. The "joint" reading fits both coefficients in every inner
    iteration, linearizing the cross term around the previous estimate.

    Args:
        y_bar (ComplexSignal | array-like): Training residual after the linear
            SI estimate is removed.
        basis (BasisSignals): Basis built with the same channel estimate.
        n_inner (int, optional): Iterations.
        variant (str, optional): Single-coefficient estimator of the
            one-at-a-time readings; "joint" always fits by least squares.
        reading (str, optional): "joint" solves both coefficients together;
            "literal" re-estimates the second coefficient with only the first
            coefficient's own term removed; "consistent" fits each coefficient
            against its column plus its share of the cross term.

    Returns:
        tuple[NonlinearityCoefficients, str]: Coefficients and the start coefficient.
    """
    if int(n_inner) < 1:
        raise InvalidArgumentError(f"n_inner must be >= 1, got {n_inner}")
    if reading not in INNER_UPDATES:
        raise InvalidArgumentError(f"Unknown inner update '{reading}'")
    y0 = dsp.as_samples(y_bar)
    start = select_start_coefficient(y0, basis)
    a_col, b_col, c_col = basis.A.samples, basis.B.samples, basis.C.samples
    first_col, second_col = (a_col, b_col) if start == START_TX else (b_col, a_col)

    first, second = 0j, 0j
    for _ in range(int(n_inner)):
        if reading == "joint":
            first, second = _joint_update(y0, first_col, second_col, c_col, first, second)
        elif reading == "literal":
            first = estimate_coefficient(y0 - second * second_col - 3.0 * first * second * c_col, first_col, variant)
            second = estimate_coefficient(y0 - first * first_col, second_col, variant)
        else:
            first = estimate_coefficient(y0 - second * second_col, first_col + 3.0 * second * c_col, variant)
            second = estimate_coefficient(y0 - first * first_col, second_col + 3.0 * first * c_col, variant)

    if start == START_TX:
        coeffs = NonlinearityCoefficients(first, second)
    else:
        coeffs = NonlinearityCoefficients(second, first)
    logger.debug(f"Successive estimate (start={start}): tx={coeffs.alpha3_tx:.4e}, rx={coeffs.alpha3_rx:.4e}")
    return coeffs, start


def estimate_coefficients_successive(
    y, x_I, h_hat, n_inner=3, variant="projection", reading="joint", oversampling=4, form="literal"
):
    """Estimates both coefficients from a received SI-only block and a channel estimate.

    Forms y_bar = y - x_I * h_hat (circularly, as seen after CP removal),
    builds the basis with h_hat and runs `successive_from_basis`.

    Args:
        y (ComplexSignal | array-like): Received CP-stripped training block.
        x_I (ComplexSignal | array-like): Transmitted CP-stripped SI block.
        h_hat (ChannelRealization | array-like): Channel taps estimate.
        n_inner (int, optional): Successive iterations.
        variant (str, optional): Single-coefficient estimator.
        reading (str, optional): Cross-term handling, see `successive_from_basis`.
        oversampling (int, optional): Basis oversampling.
        form (str, optional): Cubic form.

    Returns:
        NonlinearityCoefficients: The estimate.
    """
    x_samples = dsp.as_samples(x_I)
    y_bar = dsp.as_samples(y) - dsp.circular_convolve(x_samples, h_hat)
    basis = build_basis(x_samples, h_hat, oversampling, form)
    coeffs, _ = successive_from_basis(y_bar, basis, n_inner, variant, reading)
    return coeffs


def ls_oracle_solve(y_bar, basis):
    """Minimum-norm least-squares fit of y_bar on [A, B, C] with the cross term left free.

    Rank deficiency does not raise: it is logged, warned and reported in the
    result together with the condition number of the basis matrix.

    Returns:
        LsOracleResult: Coefficients, free cross term, condition number, rank.
    """
    y_bar = dsp.as_samples(y_bar)
    matrix = basis.matrix()
    if matrix.shape[0] < 3:
        raise InvalidArgumentError(f"The stacked system needs at least 3 rows, got {matrix.shape[0]}")
    solution, _, rank, singular_values = scipy.linalg.lstsq(matrix, y_bar, cond=RANK_RTOL)
    if singular_values.size and singular_values[-1] > 0:
        condition = float(singular_values[0] / singular_values[-1])
    else:
        condition = float("inf")
    logger.debug(f"LS oracle: rank {rank}, condition number {condition:.3e}")
    if rank < 3:
        logger.warning(f"LS oracle system is rank deficient (rank {rank}); returning the minimum-norm solution")
        warnings.warn(f"Rank-deficient basis matrix (rank {rank})", RuntimeWarning, stacklevel=2)
    return LsOracleResult(complex(solution[0]), complex(solution[1]), complex(solution[2]), condition, int(rank))


def channel_absorbed(signal, X, L):
    """Component of a training-block signal that an L-tap channel estimate absorbs.

    This is X * P_L(S / X): the LS channel estimate of the signal's spectrum
    S, denoised to L taps, applied to the training spectrum X.

    Args:
        signal (ComplexSignal | array-like): Signal over one training block.
        X (array-like): Unitary training spectrum.
        L (int): Denoiser length.

    Returns:
        np.ndarray: The absorbed component in the time domain.
    """
    spectrum = dsp.dft(dsp.as_samples(signal))
    return dsp.idft(X * denoise_cir(estimate_channel_ls(spectrum, X), L))


def project_out_channel(basis, X, L):
    """Basis with the channel-absorbed component of every signal removed."""
    return BasisSignals(
        *(ComplexSignal(column.samples - channel_absorbed(column, X, L), 1) for column in (basis.A, basis.B, basis.C))
    )


def joint_iterative_estimate(y_train, x_I_train, config=None):
    """Iterative joint channel and nonlinearity estimation on one training symbol.

    The training symbol carries self-interference only. The channel is
    re-estimated in every outer iteration on the received spectrum minus the
    current distortion estimate.

    Args:
        y_train (ComplexSignal | array-like): Received CP-stripped training
            block (N samples, symbol rate).
        x_I_train (ComplexSignal | array-like): Transmitted SI training block.
        config (EstimationConfig, optional): Estimator settings.

    Returns:
        EstimationReport: Final estimates, per-iteration residual powers and history.
    """
    config = config or EstimationConfig()
    y = dsp.as_samples(y_train)
    x = dsp.as_samples(x_I_train)
    if y.shape != x.shape or y.ndim != 1:
        raise InvalidArgumentError(f"Training blocks must be 1-D and of equal length, got {y.shape} and {x.shape}")
    n_fft = y.size
    taps_kept = n_fft if config.denoise_taps is None else int(config.denoise_taps)

    Y = dsp.dft(y)
    X = dsp.dft(x)
    d_hat = np.zeros(n_fft, dtype=np.complex128)
    report = EstimationReport(h_hat=np.zeros(n_fft, dtype=np.complex128), coeffs=NonlinearityCoefficients())

    for iteration in range(1, int(config.n_outer) + 1):
        h_response = denoise_cir(estimate_channel_ls(Y - dsp.dft(d_hat), X), taps_kept)
        taps = dsp.cir_from_response(h_response)[: min(taps_kept, n_fft)]
        linear_si = dsp.idft(X * h_response)
        y_bar = y - linear_si

        basis = build_basis(x, taps, config.oversampling, config.cubic_form)
        if config.project_basis:
            # y_bar - absorbed(d_hat) equals y - absorbed(y)
            fit_target = y_bar - channel_absorbed(d_hat, X, taps_kept)
            fit_basis = project_out_channel(basis, X, taps_kept)
        else:
            fit_target, fit_basis = y_bar, basis
        coeffs, start = successive_from_basis(
            fit_target, fit_basis, config.n_inner, config.estimator_variant, config.inner_update
        )
        d_hat = basis.combine(coeffs)

        residual_db = linear_to_db(np.mean(np.abs(y_bar - d_hat) ** 2))
        if report.residual_db and residual_db > report.residual_db[-1] + RESIDUAL_SLACK_DB:
            report.converged = False
            logger.warning(
                f"Joint estimation residual rose from {report.residual_db[-1]:.2f} to {residual_db:.2f} dB "
                f"at iteration {iteration}"
            )
        logger.debug(f"Outer iteration {iteration}: residual {residual_db:.2f} dB, start coefficient {start}")

        report.residual_db.append(residual_db)
        report.history.append((h_response, coeffs))
        report.h_hat = h_response
        report.coeffs = coeffs
        report.start_coeff = start

    return report
