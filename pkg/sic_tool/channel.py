"""Rician tapped-delay-line channels for the self-interference and signal-of-interest links.

A realization has a deterministic line-of-sight component on tap 0 and
complex-Gaussian diffuse components on every tap, shaped by a power delay
profile (PDP). Total mean power is normalized to 1:

    tap_0 = sqrt(K / (K + 1)) + sqrt(p_0 / (K + 1)) * g_0
    tap_n = sqrt(p_n / (K + 1)) * g_n,   n >= 1

with K the linear Rician factor and g_n ~ CN(0, 1). K = +inf gives a pure
LOS unit tap, K = -inf dB gives Rayleigh taps. The LOS phase is fixed at 0.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import dsp
from .exceptions import ConfigurationError, InvalidArgumentError

logger = logging.getLogger("SicToolLogger")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Symbol-spaced complex channel taps and where they came from.

    Attributes:
        taps (np.ndarray): Complex gains, at least one.
        rician_k_db (float): Rician factor the taps were drawn with.
        rng_seed (int | None): Seed that regenerates these exact taps with
            the same n_taps, K and PDP.
    """

    taps: np.ndarray
    rician_k_db: float = float("inf")
    rng_seed: int | None = None

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.complex128, copy=True).ravel()
        if taps.size < 1:
            raise InvalidArgumentError("A channel needs at least one tap")
        if not np.all(np.isfinite(taps)):
            raise InvalidArgumentError("Channel taps must be finite")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def n_taps(self):
        return self.taps.size

    def frequency_response(self, n_fft):
        """H_k on n_fft subcarriers (see `dsp.frequency_response`)."""
        return dsp.frequency_response(self.taps, n_fft)

    @classmethod
    def identity(cls):
        """A single unit tap."""
        return cls(np.array([1.0 + 0.0j]))


def exponential_pdp(n_taps, decay=3.0):
    """Exponential power delay profile p_n proportional to exp(-n / decay), summing to 1.

    Args:
        n_taps (int): Number of taps (>= 1).
        decay (float, optional): Decay constant in samples. Defaults to 3.0.

    Returns:
        np.ndarray: Non-negative profile of length n_taps.
    """
    if n_taps < 1:
        raise InvalidArgumentError(f"n_taps must be >= 1, got {n_taps}")
    if decay <= 0:
        raise InvalidArgumentError(f"PDP decay must be positive, got {decay}")
    profile = np.exp(-np.arange(n_taps) / float(decay))
    return profile / profile.sum()


def _validate_pdp(pdp, n_taps):
    pdp = np.asarray(pdp, dtype=float).ravel()
    if pdp.size != n_taps:
        raise InvalidArgumentError(f"PDP has {pdp.size} entries for {n_taps} taps")
    if np.any(pdp < 0) or not np.all(np.isfinite(pdp)):
        raise InvalidArgumentError("PDP entries must be finite and non-negative")
    if abs(pdp.sum() - 1.0) > 1e-9:
        raise InvalidArgumentError(f"PDP must sum to 1, sums to {pdp.sum():.6f}")
    return pdp


def generate_channel(n_taps, k_factor_db, power_delay_profile, rng):
    """Draws one Rician tapped-delay-line realization.

    A child seed is drawn from `rng` first and the taps are generated from
    it, so the realization records a seed that reproduces it on its own.

    Args:
        n_taps (int): Number of taps (>= 1).
        k_factor_db (float): Rician factor in dB; +inf for pure LOS, -inf for
            Rayleigh.
        power_delay_profile (array-like | None): Non-negative profile summing
            to 1; None uses `exponential_pdp(n_taps)`.
        rng (np.random.Generator): Source of randomness.

    Returns:
        ChannelRealization: Taps with unit mean total power.

    Raises:
        InvalidArgumentError: For n_taps < 1 or an invalid PDP.
    """
    if n_taps < 1:
        raise InvalidArgumentError(f"n_taps must be >= 1, got {n_taps}")
    pdp = exponential_pdp(n_taps) if power_delay_profile is None else _validate_pdp(power_delay_profile, n_taps)

    seed = int(rng.integers(0, 2**63 - 1))
    child = np.random.default_rng(seed)
    diffuse = (child.standard_normal(n_taps) + 1j * child.standard_normal(n_taps)) / np.sqrt(2.0)

    k_db = float(k_factor_db)
    if np.isposinf(k_db):
        los_power, diffuse_power = 1.0, 0.0
    else:
        k_lin = 10.0 ** (k_db / 10.0)
        los_power, diffuse_power = k_lin / (k_lin + 1.0), 1.0 / (k_lin + 1.0)

    taps = np.sqrt(diffuse_power * pdp) * diffuse
    taps[0] += np.sqrt(los_power)
    return ChannelRealization(taps, rician_k_db=k_db, rng_seed=seed)


def apply_channel(x, h, cp_len=None):
    """Passes a stream through a channel, keeping the input length.

    The convolution tail is dropped; inside a CP-protected frame the
    transient only touches the cyclic prefixes.

    Args:
        x (ComplexSignal): Transmitted stream.
        h (ChannelRealization): Channel to apply.
        cp_len (int, optional): Cyclic-prefix length of the frame; a longer
            channel is a configuration error.

    Returns:
        ComplexSignal: Received stream, same length and rate as `x`.

    Raises:
        ConfigurationError: If the channel is longer than the cyclic prefix.
    """
    if cp_len is not None and h.n_taps > cp_len:
        raise ConfigurationError(f"Channel has {h.n_taps} taps but the cyclic prefix is only {cp_len} samples")
    return dsp.convolve(x, h, truncate=True)


def estimate_k_factor_db(realizations):
    """Empirical Rician factor of a set of realizations: LOS power / mean diffuse power.

    The LOS component is the mean of tap 0 over the set; diffuse power is the
    mean total power left after removing it.
    """
    taps = np.array([r.taps for r in realizations])
    mean_taps = taps.mean(axis=0)
    los_power = float(np.abs(mean_taps[0]) ** 2)
    diffuse_power = float(np.mean(np.sum(np.abs(taps - mean_taps) ** 2, axis=1)))
    if diffuse_power == 0.0:
        return float("inf")
    return float(10.0 * np.log10(los_power / diffuse_power)) if los_power > 0 else float("-inf")
