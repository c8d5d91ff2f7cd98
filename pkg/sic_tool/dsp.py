"""Deterministic signal-processing primitives shared by the whole simulator.

Conventions used everywhere in `sic_tool`:

- Symbol transforms are unitary: `dft`/`idft` scale by 1/sqrt(N) in both
  directions, so the power of a block is the same in time and frequency.
- Channel frequency responses are NOT unitary: `frequency_response(h, N)` is
  the plain sum over taps, so that a CP-protected symbol obeys
  Y_k = X_k * H_k with unitary X and Y.
- Oversampling is done per periodic block by zero-padding the spectrum.
  Channel taps are always symbol spaced; at an oversampled rate they sit on
  every P-th sample.

All functions are pure and accept either a `ComplexSignal` or a plain
array-like of complex samples.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import FramingError, InvalidArgumentError
from .utils import linear_to_db

logger = logging.getLogger("SicToolLogger")


@dataclass(frozen=True, eq=False)
class ComplexSignal:
    """A block of complex baseband samples tagged with its oversampling factor.

    Attributes:
        samples (np.ndarray): One-dimensional, read-only complex128 array.
        oversampling_factor (int): 1 for symbol rate, P for P times the
            symbol rate.
    """

    samples: np.ndarray
    oversampling_factor: int = 1

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.complex128, copy=True)
        if samples.ndim != 1:
            raise InvalidArgumentError(f"ComplexSignal needs a 1-D sample array, got shape {samples.shape}")
        if samples.size == 0:
            raise InvalidArgumentError("ComplexSignal cannot be empty")
        if not np.all(np.isfinite(samples)):
            raise InvalidArgumentError("ComplexSignal samples must be finite (no NaN/Inf)")
        if int(self.oversampling_factor) < 1:
            raise InvalidArgumentError(f"oversampling_factor must be >= 1, got {self.oversampling_factor}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "oversampling_factor", int(self.oversampling_factor))

    def __len__(self):
        return self.samples.size

    def with_samples(self, samples):
        """Returns a new signal with the same rate tag and different samples."""
        return ComplexSignal(samples, self.oversampling_factor)


@dataclass(frozen=True)
class OfdmGeometry:
    """Number of subcarriers and cyclic-prefix length of an OFDM symbol."""

    n_subcarriers: int = 64
    cp_len: int = 16

    def __post_init__(self):
        if not 0 < int(self.cp_len) < int(self.n_subcarriers):
            raise InvalidArgumentError(
                f"Need 0 < cp_len < n_subcarriers, got cp_len={self.cp_len}, n_subcarriers={self.n_subcarriers}"
            )

    @property
    def symbol_len(self):
        return self.n_subcarriers + self.cp_len


@dataclass(frozen=True, eq=False)
class OfdmGrid:
    """Frequency-domain symbols indexed (ofdm_symbol, subcarrier).

    A 1-D input is treated as a single OFDM symbol.
    """

    symbols: np.ndarray
    cp_len: int

    def __post_init__(self):
        symbols = np.array(self.symbols, dtype=np.complex128, copy=True)
        if symbols.ndim == 1:
            symbols = symbols[np.newaxis, :]
        if symbols.ndim != 2 or symbols.shape[0] == 0:
            raise InvalidArgumentError(f"OfdmGrid needs a (symbols, subcarriers) matrix, got shape {symbols.shape}")
        OfdmGeometry(symbols.shape[1], int(self.cp_len))
        symbols.setflags(write=False)
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "cp_len", int(self.cp_len))

    @property
    def n_subcarriers(self):
        return self.symbols.shape[1]

    @property
    def n_symbols(self):
        return self.symbols.shape[0]

    @property
    def geometry(self):
        return OfdmGeometry(self.n_subcarriers, self.cp_len)

    def rows(self, selection):
        """Returns a new grid holding only the selected OFDM symbols."""
        return OfdmGrid(self.symbols[selection], self.cp_len)


def as_samples(x):
    """Returns the sample array behind a ComplexSignal, or the array-like itself as complex128."""
    if isinstance(x, ComplexSignal):
        return x.samples
    return np.asarray(x, dtype=np.complex128)


def _rate_of(x):
    return x.oversampling_factor if isinstance(x, ComplexSignal) else 1


def _taps_of(h):
    return np.atleast_1d(np.asarray(getattr(h, "taps", h), dtype=np.complex128))


def _is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


def dft(x, n_fft=None, require_power_of_two=False):
    """Unitary forward DFT along the last axis.

    Args:
        x (ComplexSignal | array-like): One block, or a stack of blocks in the
            rows of a 2-D array.
        n_fft (int, optional): Expected block length. A mismatch is an error.
        require_power_of_two (bool, optional): Reject block lengths that are
            not a power of two.

    Returns:
        np.ndarray: The spectrum, same shape as the input.

    Raises:
        InvalidArgumentError: On a length mismatch or a non power-of-two length
            when one is required.
    """
    arr = as_samples(x)
    _check_block_length(arr, n_fft, require_power_of_two)
    return np.fft.fft(arr, axis=-1, norm="ortho")


def idft(X, n_fft=None, require_power_of_two=False):
    """Unitary inverse DFT along the last axis (inverse of `dft`)."""
    arr = np.asarray(X, dtype=np.complex128)
    _check_block_length(arr, n_fft, require_power_of_two)
    return np.fft.ifft(arr, axis=-1, norm="ortho")


def _check_block_length(arr, n_fft, require_power_of_two):
    length = arr.shape[-1] if arr.ndim else 0
    if n_fft is not None and length != n_fft:
        raise InvalidArgumentError(f"Block length {length} does not match the transform size {n_fft}")
    if require_power_of_two and not _is_power_of_two(length):
        raise InvalidArgumentError(f"Transform size {length} is not a power of two")


def frequency_response(h, n_fft):
    """Channel response H_k = sum_n h_n exp(-j 2 pi k n / N) on N subcarriers.

    Args:
        h (ChannelRealization | array-like): Symbol-spaced taps.
        n_fft (int): Number of subcarriers.

    Returns:
        np.ndarray: Complex response of length n_fft.
    """
    taps = _taps_of(h)
    if taps.size > n_fft:
        raise InvalidArgumentError(f"{taps.size} taps do not fit in a {n_fft}-point response")
    return np.fft.fft(taps, n_fft)


def cir_from_response(H):
    """Impulse response (all N taps) of a channel response from `frequency_response`."""
    return np.fft.ifft(np.asarray(H, dtype=np.complex128), axis=-1)


def _spread_taps(taps, oversampling):
    if oversampling == 1:
        return taps
    spread = np.zeros((taps.size - 1) * oversampling + 1, dtype=np.complex128)
    spread[::oversampling] = taps
    return spread


def convolve(x, h, truncate=False, cp_len=None):
    """Linear convolution of a signal with a symbol-spaced channel.

    When `x` is oversampled by P, the taps are placed every P samples so the
    channel keeps its symbol-spaced delays.

    Args:
        x (ComplexSignal | array-like): Input signal.
        h (ChannelRealization | array-like): Channel taps.
        truncate (bool, optional): Trim the output to the input length (the
            convolution tail is dropped). Defaults to False (full length
            len(x) + P*(taps-1)).
        cp_len (int, optional): Cyclic-prefix length of the frame in use; a
            longer channel is rejected.

    Returns:
        ComplexSignal: The convolved signal at the input's rate.

    Raises:
        InvalidArgumentError: For an empty channel or one longer than cp_len.
    """
    taps = _taps_of(h)
    if taps.size == 0:
        raise InvalidArgumentError("Channel has no taps")
    if cp_len is not None and taps.size > cp_len:
        raise InvalidArgumentError(f"Channel with {taps.size} taps exceeds the cyclic prefix ({cp_len})")
    arr = as_samples(x)
    rate = _rate_of(x)
    y = np.convolve(arr, _spread_taps(taps, rate))
    if truncate:
        y = y[: arr.size]
    return ComplexSignal(y, rate)


def circular_convolve(blocks, h, oversampling=1):
    """Circular convolution of each periodic block (rows) with a symbol-spaced channel.

    This is what a CP-protected OFDM symbol sees after CP removal.
    """
    blocks = np.asarray(blocks, dtype=np.complex128)
    taps = _spread_taps(_taps_of(h), oversampling)
    block_len = blocks.shape[-1]
    if taps.size > block_len:
        raise InvalidArgumentError(f"Channel spans {taps.size} samples, longer than the {block_len}-sample block")
    response = np.fft.fft(taps, block_len)
    return np.fft.ifft(np.fft.fft(blocks, axis=-1) * response, axis=-1)


def add_cyclic_prefix(blocks, cp_len):
    """Prepends the last cp_len samples of every block (rows) and flattens the result."""
    blocks = np.atleast_2d(np.asarray(blocks, dtype=np.complex128))
    if cp_len == 0:
        return blocks.ravel()
    return np.concatenate([blocks[:, -cp_len:], blocks], axis=1).ravel()


def strip_cyclic_prefix(x, geometry):
    """Splits a CP-carrying stream into (symbols, N) blocks with the prefixes removed.

    Raises:
        FramingError: If the stream is not a whole number of symbols.
    """
    arr = as_samples(x)
    symbol_len = geometry.symbol_len
    if arr.size == 0 or arr.size % symbol_len:
        raise FramingError(f"Stream of {arr.size} samples is not a whole number of {symbol_len}-sample OFDM symbols")
    return arr.reshape(-1, symbol_len)[:, geometry.cp_len:]


def modulate_ofdm(grid):
    """OFDM modulation: unitary IDFT per symbol, cyclic prefix, concatenation.

    Args:
        grid (OfdmGrid): Frequency-domain symbols.

    Returns:
        ComplexSignal: Symbol-rate stream of n_symbols * (cp_len + N) samples.
    """
    time_blocks = idft(grid.symbols)
    return ComplexSignal(add_cyclic_prefix(time_blocks, grid.cp_len), 1)


def demodulate_ofdm(x, geometry):
    """OFDM demodulation: CP removal and unitary DFT per symbol.

    Args:
        x (ComplexSignal | array-like): Symbol-rate stream.
        geometry (OfdmGeometry): Subcarrier count and CP length.

    Returns:
        OfdmGrid: The received frequency-domain symbols.

    Raises:
        FramingError: If the stream length is not a whole number of symbols.
    """
    blocks = strip_cyclic_prefix(x, geometry)
    return OfdmGrid(dft(blocks), geometry.cp_len)


def upsample_blocks(blocks, factor):
    """Band-limited interpolation of periodic blocks (rows) by zero-padding the spectrum."""
    blocks = np.asarray(blocks, dtype=np.complex128)
    if factor == 1:
        return blocks.copy()
    block_len = blocks.shape[-1]
    spectrum = np.fft.fft(blocks, axis=-1, norm="ortho")
    padded = np.zeros(blocks.shape[:-1] + (block_len * factor,), dtype=np.complex128)
    n_pos = (block_len + 1) // 2
    padded[..., :n_pos] = spectrum[..., :n_pos]
    if block_len - n_pos:
        padded[..., -(block_len - n_pos):] = spectrum[..., n_pos:]
    return np.fft.ifft(padded, axis=-1, norm="ortho") * np.sqrt(factor)


def downsample_blocks(blocks, factor):
    """Keeps the in-band spectrum of oversampled periodic blocks (inverse of `upsample_blocks`)."""
    blocks = np.asarray(blocks, dtype=np.complex128)
    if factor == 1:
        return blocks.copy()
    long_len = blocks.shape[-1]
    if long_len % factor:
        raise InvalidArgumentError(f"Block of {long_len} samples cannot be decimated by {factor}")
    block_len = long_len // factor
    spectrum = np.fft.fft(blocks, axis=-1, norm="ortho")
    n_pos = (block_len + 1) // 2
    kept = np.concatenate([spectrum[..., :n_pos], spectrum[..., long_len - (block_len - n_pos):]], axis=-1)
    return np.fft.ifft(kept, axis=-1, norm="ortho") / np.sqrt(factor)


def resample(x, factor, direction="up", block_len=None):
    """Changes the oversampling factor of a signal by an integer factor.

    Each block of `block_len` samples (default: the whole signal) is treated
    as one period of a band-limited signal, which is exact for CP-stripped
    OFDM symbols.

    Args:
        x (ComplexSignal): Signal to resample.
        factor (int): Integer factor >= 1.
        direction (str, optional): "up" or "down". Defaults to "up".
        block_len (int, optional): Periodic block length at the current rate.

    Returns:
        ComplexSignal: The resampled signal with the updated rate tag.

    Raises:
        InvalidArgumentError: For factor < 1, an unknown direction, a length
            that does not split into blocks, or a down factor that does not
            divide the current oversampling factor.
    """
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise InvalidArgumentError(f"Resampling factor must be an integer >= 1, got {factor}")
    if direction not in ("up", "down"):
        raise InvalidArgumentError(f"Unknown resampling direction '{direction}'")
    arr = as_samples(x)
    rate = _rate_of(x)
    if factor == 1:
        return ComplexSignal(arr, rate)

    block_len = arr.size if block_len is None else int(block_len)
    if block_len < 1 or arr.size % block_len:
        raise InvalidArgumentError(f"Signal of {arr.size} samples does not split into blocks of {block_len}")
    blocks = arr.reshape(-1, block_len)
    if direction == "up":
        return ComplexSignal(upsample_blocks(blocks, factor).ravel(), rate * factor)

    if rate % factor:
        raise InvalidArgumentError(f"Cannot down-sample by {factor} a signal oversampled by {rate}")
    return ComplexSignal(downsample_blocks(blocks, factor).ravel(), rate // factor)


def mean_power(x):
    """Mean |x|^2 of a signal (linear)."""
    arr = as_samples(x)
    if arr.size == 0:
        raise InvalidArgumentError("Cannot measure the power of an empty signal")
    return float(np.mean(np.abs(arr) ** 2))


def power_db(x):
    """Mean power in dB relative to unit variance: 10*log10(mean |x|^2).

    An all-zero signal returns -inf rather than raising.
    """
    return linear_to_db(mean_power(x))
