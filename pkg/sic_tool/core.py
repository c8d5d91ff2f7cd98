import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np
import pandas as pd

from . import __version__, metrics, reports, simulation
from .config import load_scenario, with_overrides
from .exceptions import ConfigurationError, SicToolError
from .reports import SweepResult
from .utils import db_to_linear, derive_cell_seed, linear_to_db, resolve_config_path

logger = logging.getLogger("SicToolLogger")

SCHEMA_VERSION = 1
# A cell has reached the floor once its RIDN is within this margin of the linear system.
FLOOR_MARGIN_DB = 1.0
BASE_COLUMNS = [
    "cell_index",
    "baseline_mode",
    "si_power_db",
    "snr_db",
    "distortion_tx_db",
    "distortion_rx_db",
    "phase_noise_db",
    "iteration",
    "ridn_total_db",
    "ridn_total_se_db",
    "ridn_residual_interference_db",
    "ridn_residual_distortion_db",
    "ridn_phase_noise_db",
    "ridn_quantization_db",
    "ridn_awgn_db",
    "ridn_linear_db",
    "gap_to_linear_db",
    "iterations_to_floor",
    "rate_fd",
    "rate_hd",
    "alpha3_tx",
    "alpha3_rx",
    "n_trials",
    "cell_seed",
    "schema_version",
]


@dataclass(eq=False)
class CellResult:
    """Averaged outcome of one sweep cell.

    Attributes:
        ridn (RidnReport): Mean RIDN (component powers averaged linearly).
        rates (dict): Mean rate_fd and rate_hd in bits/s/Hz.
        estimation (EstimationReport | None): Report of the last trial.
        row (dict): Flat table row of the cell.
    """

    ridn: metrics.RidnReport
    rates: dict
    estimation: object = None
    row: dict = field(default_factory=dict)


def _mean_db(values):
    return linear_to_db(float(np.mean([db_to_linear(v) for v in values])))


def _standard_error_db(values_db):
    """Standard error of the mean power, in dB (delta method)."""
    linear = np.array([db_to_linear(v) for v in values_db])
    if linear.size < 2 or linear.mean() == 0.0:
        return 0.0
    return float(10.0 / np.log(10.0) * linear.std(ddof=1) / (np.sqrt(linear.size) * linear.mean()))


def _mean_report(reports_):
    per_subcarrier = np.mean([r.per_subcarrier_ridn for r in reports_], axis=0)
    fields = {
        name: _mean_db([getattr(r, name) for r in reports_])
        for name in (
            "residual_interference_db",
            "residual_distortion_db",
            "phase_noise_db",
            "quantization_db",
            "awgn_db",
            "total_ridn_db",
        )
    }
    return metrics.RidnReport(per_subcarrier_ridn=per_subcarrier, **fields)


def _trial_rates(cell, trial):
    """FD and HD rates of one trial with the SoI channel gains of that trial."""
    ridn = trial.ridn.per_subcarrier_ridn
    if np.any(ridn <= 0):
        rate_fd = float("inf")
    else:
        rate_fd = metrics.full_duplex_rate(trial.soi_power * trial.soi_gain, ridn)
    rate_hd = metrics.half_duplex_rate(cell.link.snr_db, channel_gain=trial.soi_gain)
    return rate_fd, rate_hd


def iterations_to_floor(ridn_per_iteration_db, ridn_linear_db, margin_db=FLOOR_MARGIN_DB):
    """First outer iteration (1-based) within margin_db of the linear system; len + 1 if none."""
    for iteration, value in enumerate(ridn_per_iteration_db, start=1):
        if value <= ridn_linear_db + margin_db:
            return iteration
    return len(ridn_per_iteration_db) + 1


def run_cell(cell, rng, cell_index=0, cell_seed=None):
    """Runs the Monte Carlo trials of one cell and averages their metrics.

    Args:
        cell (ScenarioConfig): Scenario of the cell (its sweep is ignored).
        rng (np.random.Generator): Randomness for all trials of the cell.
        cell_index (int, optional): Index written to the row.
        cell_seed (int, optional): Seed written to the row.

    Returns:
        CellResult: Mean RIDN report, mean rates, last estimation report and the row.
    """
    coeffs = metrics.calibrated_coefficients(cell, cell.link.si_power_db)
    logger.debug(f"Cell {cell_index}: alpha3_tx={coeffs.alpha3_tx.real:.4e}, alpha3_rx={coeffs.alpha3_rx.real:.4e}")

    trials = [simulation.run_trial(cell, coeffs, rng) for _ in range(cell.n_monte_carlo)]

    ridn = _mean_report([t.ridn for t in trials])
    ridn_linear_db = _mean_db([t.ridn_linear.total_ridn_db for t in trials])
    rates = [_trial_rates(cell, t) for t in trials]
    rate_fd = float(np.mean([r[0] for r in rates]))
    rate_hd = float(np.mean([r[1] for r in rates]))

    per_iteration = []
    if trials[0].ridn_per_iteration:
        per_iteration = [_mean_db(values) for values in zip(*[t.ridn_per_iteration for t in trials])]

    row = {
        "cell_index": int(cell_index),
        "baseline_mode": cell.baseline_mode,
        "si_power_db": cell.link.si_power_db,
        "snr_db": cell.link.snr_db,
        "distortion_tx_db": cell.impairments.distortion_tx_db,
        "distortion_rx_db": cell.impairments.distortion_rx_db,
        "phase_noise_db": cell.impairments.phase_noise_db,
        "iteration": len(per_iteration),
        "ridn_total_se_db": _standard_error_db([t.ridn.total_ridn_db for t in trials]),
        "ridn_linear_db": ridn_linear_db,
        "gap_to_linear_db": ridn.total_ridn_db - ridn_linear_db,
        "iterations_to_floor": iterations_to_floor(per_iteration, ridn_linear_db) if per_iteration else 0,
        "rate_fd": rate_fd,
        "rate_hd": rate_hd,
        "alpha3_tx": coeffs.alpha3_tx.real,
        "alpha3_rx": coeffs.alpha3_rx.real,
        "n_trials": cell.n_monte_carlo,
        "cell_seed": cell_seed,
        "schema_version": SCHEMA_VERSION,
    }
    row.update(ridn.to_row())
    for iteration, value in enumerate(per_iteration, start=1):
        row[f"ridn_iter_{iteration}_db"] = value

    logger.info(
        f"Cell {cell_index} ({cell.baseline_mode}): RIDN {ridn.total_ridn_db:.2f} dB, "
        f"linear {ridn_linear_db:.2f} dB, gap {row['gap_to_linear_db']:.2f} dB"
    )
    return CellResult(
        ridn=ridn,
        rates={"rate_fd": rate_fd, "rate_hd": rate_hd},
        estimation=trials[-1].report,
        row=row,
    )


def _run_cell_job(job):
    """Process-pool entry: (index, assignments, cell, seed) -> row."""
    index, assignments, cell, seed = job
    row = run_cell(cell, np.random.default_rng(seed), cell_index=index, cell_seed=seed).row
    for path, value in assignments.items():
        row.setdefault(path, value)
    return index, row


def run_sweep(config, progress_callback=None):
    """Runs every cell of the scenario's sweep.

    Each cell gets its own generator seeded with
    `derive_cell_seed(config.rng_seed, cell_index)`, so rows do not depend on
    execution order. With `config.workers` > 1 cells run in a process pool;
    rows are always ordered by cell index.

    Args:
        config (ScenarioConfig): The scenario.
        progress_callback (callable, optional): Called as (done, total) after
            each cell.

    Returns:
        SweepResult: One row per cell plus metadata.
    """
    logger.info("--- Starting Sweep ---")
    cells = config.cells()
    logger.info(f"Step 1: Expanded sweep into {len(cells)} cell(s), {config.n_monte_carlo} trial(s) each.")
    jobs = [(index, assignments, cell, derive_cell_seed(config.rng_seed, index)) for index, assignments, cell in cells]

    logger.info(f"Step 2: Running cells with {config.workers} worker(s)...")
    results = {}
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for index, row in pool.map(_run_cell_job, jobs):
                results[index] = row
                if progress_callback:
                    progress_callback(len(results), len(jobs))
    else:
        for job in jobs:
            index, row = _run_cell_job(job)
            results[index] = row
            if progress_callback:
                progress_callback(len(results), len(jobs))

    rows = [results[index] for index in sorted(results)]
    frame = pd.DataFrame(rows) if rows else pd.DataFrame(columns=BASE_COLUMNS)
    ordered = [c for c in BASE_COLUMNS if c in frame.columns]
    frame = frame[ordered + [c for c in frame.columns if c not in ordered]]
    metadata = build_metadata(config)
    crossover = crossover_by_receiver(frame)
    if crossover:
        metadata["crossover_snr_db"] = crossover
        logger.info(f"Full-duplex rate overtakes half-duplex at: {crossover}")
    logger.info("Sweep complete.")
    return SweepResult(rows=frame, metadata=metadata)


def crossover_by_receiver(rows):
    """First swept SNR at which full duplex beats half duplex, per receiver.

    Rates of cells sharing a receiver and an SNR are averaged. Sweeps that do
    not vary the SNR give an empty dict.

    Returns:
        dict[str, float | None]: Receiver to crossover SNR (None if full
        duplex never wins).
    """
    if rows.empty or rows["snr_db"].nunique() < 2:
        return {}
    crossover = {}
    for mode, group in rows.groupby("baseline_mode", sort=False):
        rates = group.groupby("snr_db", as_index=False)[["rate_fd", "rate_hd"]].mean().sort_values("snr_db")
        crossover[mode] = metrics.crossover_snr(rates)
    return crossover


def build_metadata(config):
    return {
        "seed": config.rng_seed,
        "version": __version__,
        "timestamp": datetime.now().isoformat(timespec="seconds"),
        "schema_version": SCHEMA_VERSION,
        "n_cells": config.n_cells,
        "scenario": config.to_dict(),
    }


def run_budget(config, si_power_sweep_db=None):
    """Noise-budget table of the scenario, wrapped as a SweepResult."""
    table = metrics.noise_budget(config, si_power_sweep_db)
    metadata = build_metadata(config)
    metadata["slopes"] = dict(table.attrs.get("slopes", {}))
    table.attrs = {}
    return SweepResult(rows=table, metadata=metadata)


def run_scenario_file(config_path, command="sweep", output_path=None, output_format="csv", overrides=None):
    """Orchestrates a whole run from a scenario file to a result file.

    Steps:
    1. Resolves the preset name or path and loads the scenario.
    2. Applies command-line overrides.
    3. Runs the requested command ("run": the first cell only, "sweep": every
       cell, "budget": the noise-budget table).
    4. Writes the result in the requested format when an output path is given.

    Args:
        config_path (str): Scenario file path or preset name.
        command (str, optional): "run", "sweep" or "budget".
        output_path (str, optional): Where to write the result.
        output_format (str, optional): "csv", "json" or "xlsx".
        overrides (dict, optional): Dotted-key overrides.

    Returns:
        tuple[bool, str, SweepResult | None]:
            - bool: True for success, False for failure.
            - str: On success the output path (or a summary when nothing was
              written); on failure the error message.
            - SweepResult | None: The result when successful.
    """
    logger.info(f"--- Starting '{command}' for {config_path} ---")
    try:
        logger.info("Step 1: Loading scenario...")
        config = load_scenario(resolve_config_path(config_path))
        if overrides:
            logger.info(f"Step 2: Applying overrides {overrides}")
            config = with_overrides(config, overrides)

        logger.info("Step 3: Running simulation...")
        if command == "budget":
            result = run_budget(config)
        elif command == "run":
            result = run_sweep(with_overrides(config, {"sweep": []}))
        elif command == "sweep":
            result = run_sweep(config)
        else:
            raise ConfigurationError(f"Unknown command '{command}'")
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return False, str(e), None
    except SicToolError as e:
        logger.error(f"Simulation failed: {e}", exc_info=True)
        return False, str(e), None

    if output_path is None:
        return True, f"{len(result)} row(s) computed.", result

    logger.info(f"Step 4: Writing {output_format} output...")
    success, message = reports.create_report(result, output_format, output_path)
    if not success:
        return False, message, None
    return True, output_path, result
