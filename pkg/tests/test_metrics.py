import sys
import os
import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
from sic_tool import dsp, impairments, metrics
from sic_tool.config import scenario_from_dict
from sic_tool.dsp import OfdmGrid
from sic_tool.exceptions import InvalidArgumentError
from sic_tool.metrics import ComponentSpectra


def random_complex(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def make_truth(rng, shape=(20, 64), distortion_db=None, phase_db=None, quantization_db=None, awgn_db=None):
    """Random truth spectra; a component is absent (zeros) when its power is None."""

    def component(power_db):
        if power_db is None:
            return np.zeros(shape, dtype=complex)
        return np.sqrt(10 ** (power_db / 10)) * random_complex(rng, shape)

    return ComponentSpectra(
        x_si=metrics.qpsk_symbols(shape, rng),
        h_si=random_complex(rng, shape[1]),
        distortion=component(distortion_db),
        phase_noise=component(phase_db),
        quantization=component(quantization_db),
        awgn=component(awgn_db),
    )


@pytest.fixture
def scenario():
    return scenario_from_dict({})


def test_cancel_removes_linear_si_and_distortion():
    rng = np.random.default_rng(61)
    X = metrics.qpsk_symbols((4, 64), rng)
    H = random_complex(rng, 64)
    D = 1e-3 * random_complex(rng, (4, 64))
    residual = metrics.cancel(OfdmGrid(X * H + D, 16), OfdmGrid(X, 16), H, D)
    assert np.allclose(residual.symbols, 0.0)
    assert residual.cp_len == 16
    linear_only = metrics.cancel(OfdmGrid(X * H + D, 16), OfdmGrid(X, 16), H)
    assert np.allclose(linear_only.symbols, D)


def test_cancel_rejects_incompatible_dimensions():
    grid = OfdmGrid(np.ones((2, 64)), 16)
    with pytest.raises(InvalidArgumentError):
        metrics.cancel(grid, OfdmGrid(np.ones((3, 64)), 16), np.ones(64))
    with pytest.raises(InvalidArgumentError):
        metrics.cancel(grid, grid, np.ones(32))
    with pytest.raises(InvalidArgumentError):
        metrics.cancel(grid, grid, np.ones(64), np.ones((1, 64)))


def test_ridn_of_single_component_equals_that_component():
    rng = np.random.default_rng(62)
    truth = make_truth(rng, awgn_db=-90.0)
    report = metrics.compute_ridn(truth, truth.h_si, np.zeros_like(truth.distortion))
    assert report.total_ridn_db == pytest.approx(report.awgn_db)
    assert report.awgn_db == pytest.approx(-90.0, abs=0.5)
    assert report.residual_interference_db == float("-inf")
    assert report.residual_distortion_db == float("-inf")
    assert report.quantization_db == float("-inf")


def test_ridn_components_add_up_for_independent_terms():
    rng = np.random.default_rng(63)
    truth = make_truth(rng, shape=(200, 64), distortion_db=-60.0, phase_db=-70.0, quantization_db=-75.0, awgn_db=-65.0)
    h_hat = truth.h_si + 1e-3 * random_complex(rng, 64)
    report = metrics.compute_ridn(truth, h_hat)
    assert report.component_sum_db() == pytest.approx(report.total_ridn_db, abs=0.2)
    assert report.per_subcarrier_ridn.shape == (64,)
    assert 10 * np.log10(report.per_subcarrier_ridn.mean()) == pytest.approx(report.total_ridn_db, abs=1e-9)


def test_exact_distortion_reconstruction_removes_residual_distortion():
    rng = np.random.default_rng(64)
    truth = make_truth(rng, distortion_db=-50.0, awgn_db=-90.0)
    unsuppressed = metrics.compute_ridn(truth, truth.h_si)
    suppressed = metrics.compute_ridn(truth, truth.h_si, truth.distortion)
    assert unsuppressed.residual_distortion_db == pytest.approx(-50.0, abs=0.5)
    assert suppressed.residual_distortion_db == float("-inf")
    assert suppressed.total_ridn_db < unsuppressed.total_ridn_db - 30


def test_ridn_row_has_prefixed_columns():
    rng = np.random.default_rng(65)
    row = metrics.compute_ridn(make_truth(rng, awgn_db=-90.0), np.zeros(64)).to_row()
    assert set(row) == {f"ridn_{name}_db" for name in metrics.RIDN_COMPONENTS} | {"ridn_total_db"}


def test_achievable_rate_basics():
    assert metrics.achievable_rate(np.ones(64), np.ones(64)) == pytest.approx(1.0)
    assert metrics.achievable_rate(3.0, np.ones(8)) == pytest.approx(2.0)
    assert metrics.achievable_rate(1.0, np.full(4, np.inf)) == 0.0
    with pytest.raises(InvalidArgumentError):
        metrics.achievable_rate(1.0, np.array([1.0, 0.0]))
    with pytest.raises(InvalidArgumentError):
        metrics.achievable_rate(1.0, np.array([1.0, np.nan]))


def test_full_and_half_duplex_rates():
    assert metrics.full_duplex_rate(np.ones(64), np.ones(64)) == pytest.approx(2.0)
    assert metrics.half_duplex_rate(0.0) == pytest.approx(1.0)
    assert metrics.half_duplex_rate(10 * np.log10(3.0), channel_gain=np.ones(4)) == pytest.approx(2.0)


def rate_sweep(snr_sweep_db, ridn, awgn_db=-90.0):
    rows = []
    for snr_db in snr_sweep_db:
        signal_power = np.full(ridn.shape, 10 ** ((snr_db + awgn_db) / 10))
        rows.append(
            {
                "snr_db": float(snr_db),
                "rate_fd": metrics.full_duplex_rate(signal_power, ridn),
                "rate_hd": metrics.half_duplex_rate(snr_db),
            }
        )
    return pd.DataFrame(rows)


def test_crossover_for_residual_above_noise():
    """With RIDN = 33 N0 full duplex needs (1 + s/33)^2 > 1 + s, i.e. SNR above about 30.1 dB."""
    table = rate_sweep(list(range(0, 45, 5)), np.full(64, 33 * 1e-9))
    assert metrics.crossover_snr(table) == 35.0
    assert (table["rate_fd"].diff().dropna() > 0).all()


def test_full_duplex_wins_at_noise_floor():
    table = rate_sweep([-10.0, 0.0, 10.0], np.full(64, 1e-9))
    assert metrics.crossover_snr(table) == -10.0
    assert (table["rate_fd"] > table["rate_hd"]).all()


def test_crossover_none_when_full_duplex_never_wins():
    table = pd.DataFrame({"snr_db": [0.0, 10.0], "rate_fd": [0.1, 0.2], "rate_hd": [1.0, 3.0]})
    assert metrics.crossover_snr(table) is None


def test_qpsk_symbols_are_unit_power_constellation():
    symbols = metrics.qpsk_symbols((10, 64), np.random.default_rng(66))
    assert symbols.shape == (10, 64)
    assert np.allclose(np.abs(symbols), 1.0)
    assert set(np.round(symbols.real * np.sqrt(2)).astype(int).ravel()) == {-1, 1}


def test_calibrated_coefficients_set_distortion_level(scenario):
    coeffs = metrics.calibrated_coefficients(scenario, 0.0)
    assert coeffs.alpha3_tx.real > 0 and coeffs.alpha3_tx.imag == 0
    assert coeffs.alpha3_tx == coeffs.alpha3_rx
    rng = np.random.default_rng(67)
    x = dsp.idft(metrics.qpsk_symbols((200, 64), rng)).ravel()
    tx_only = impairments.NonlinearityCoefficients(coeffs.alpha3_tx, 0.0)
    distortion = impairments.synthesize_distortion(
        x, [1.0], tx_only, form=scenario.impairments.cubic_form, block_len=64
    ).samples
    assert dsp.power_db(distortion) - dsp.power_db(x) == pytest.approx(-45.0, abs=0.3)


def test_calibrated_coefficients_track_si_power(scenario):
    strong = metrics.calibrated_coefficients(scenario, 0.0)
    weak = metrics.calibrated_coefficients(scenario, -10.0)
    assert weak.alpha3_tx.real == pytest.approx(10.0 * strong.alpha3_tx.real, rel=1e-9)
    assert metrics.calibrated_coefficients(scenario, float("-inf")).is_zero()


def test_noise_budget_power_laws(scenario):
    table = metrics.noise_budget(scenario)
    assert list(table.columns) == [
        "si_power_db",
        "distortion_db",
        "distortion_simplified_db",
        "phase_noise_db",
        "quantization_db",
        "awgn_db",
    ]
    assert len(table) == len(scenario.budget.si_power_sweep_db)
    slopes = table.attrs["slopes"]
    assert slopes["distortion_db"] == pytest.approx(3.0, abs=0.1)
    assert slopes["phase_noise_db"] == pytest.approx(1.0, abs=0.05)
    assert slopes["awgn_db"] == pytest.approx(0.0, abs=1e-9)


def test_noise_budget_ordering_at_full_si_power(scenario):
    top = metrics.noise_budget(scenario, [0.0]).iloc[0]
    assert top["distortion_db"] > top["phase_noise_db"] > top["awgn_db"]
    assert top["distortion_db"] == pytest.approx(top["distortion_simplified_db"], abs=0.1)


def test_noise_budget_handles_absent_si_and_empty_sweep(scenario):
    table = metrics.noise_budget(scenario, [float("-inf"), 0.0])
    assert table.loc[0, "distortion_db"] == float("-inf")
    assert table.loc[0, "phase_noise_db"] == float("-inf")
    with pytest.raises(InvalidArgumentError):
        metrics.noise_budget(scenario, [])
