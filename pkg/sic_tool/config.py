"""Scenario configuration: JSON loading, validation, overrides and sweep expansion.

A scenario file has the sections `ofdm`, `channel`, `impairments`,
`estimation`, `link`, `sweep` and `budget` plus a few top-level keys. Missing
keys take the defaults below. dB values may be numbers, "-inf"/"inf", or null
(an absent component, -inf).
"""

import copy
import itertools
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .dsp import OfdmGeometry
from .estimation import ESTIMATOR_VARIANTS, INNER_UPDATES, EstimationConfig
from .exceptions import ConfigurationError
from .impairments import CUBIC_FORMS, MIN_OVERSAMPLING, ImpairmentConfig
from .utils import parse_db

logger = logging.getLogger("SicToolLogger")

BASELINE_MODES = ("proposed", "no_suppression", "linear")

DEFAULT_SCENARIO = {
    "ofdm": {"n_subcarriers": 64, "cp_len": 16, "oversampling": 4, "n_data_symbols": 10},
    "channel": {"n_taps": 8, "pdp_decay": 3.0, "si_k_db": 30.0, "soi_k_db": 3.0},
    "impairments": {
        "distortion_tx_db": -45.0,
        "distortion_rx_db": -45.0,
        "phase_noise_db": -70.0,
        "phase_noise_bandwidth": 0.01,
        "quantizer_bits": 14,
        "loading_factor": 4.0,
        "awgn_db": -90.0,
        "cubic_form": "inband",
    },
    "estimation": {
        "n_outer": 4,
        "n_inner": 3,
        "denoise_taps": None,
        "estimator_variant": "projection",
        "inner_update": "joint",
        "project_basis": True,
    },
    "link": {"si_power_db": 0.0, "snr_db": 20.0},
    "sweep": [],
    "budget": {"si_power_sweep_db": [-40.0, -35.0, -30.0, -25.0, -20.0, -15.0, -10.0, -5.0, 0.0]},
    "n_monte_carlo": 200,
    "rng_seed": 2024,
    "baseline_mode": "proposed",
    "workers": 1,
}

DB_KEYS = {
    "channel": ("si_k_db", "soi_k_db"),
    "impairments": ("distortion_tx_db", "distortion_rx_db", "phase_noise_db", "awgn_db"),
    "link": ("si_power_db", "snr_db"),
}
SECTIONS = ("ofdm", "channel", "impairments", "estimation", "link", "budget")


@dataclass(frozen=True)
class OfdmConfig:
    n_subcarriers: int = 64
    cp_len: int = 16
    oversampling: int = 4
    n_data_symbols: int = 10

    @property
    def geometry(self):
        return OfdmGeometry(self.n_subcarriers, self.cp_len)


@dataclass(frozen=True)
class ChannelConfig:
    n_taps: int = 8
    pdp_decay: float = 3.0
    si_k_db: float = 30.0
    soi_k_db: float = 3.0


@dataclass(frozen=True)
class LinkConfig:
    """Received SI power and SNR of the signal of interest, both in dB."""

    si_power_db: float = 0.0
    snr_db: float = 20.0


@dataclass(frozen=True)
class SweepAxis:
    """One sweep axis: every value is applied to all listed dotted fields.

    A value may also be a list with one entry per field.
    """

    name: str
    fields: tuple
    values: tuple

    def assignments(self, value):
        if isinstance(value, (list, tuple)):
            return dict(zip(self.fields, value))
        return {name: value for name in self.fields}


@dataclass(frozen=True)
class BudgetConfig:
    si_power_sweep_db: tuple = ()


@dataclass(frozen=True)
class ScenarioConfig:
    """A complete, validated scenario (one file, possibly several sweep cells)."""

    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    impairments: ImpairmentConfig = field(default_factory=ImpairmentConfig)
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    sweep: tuple = ()
    budget: BudgetConfig = field(default_factory=BudgetConfig)
    n_monte_carlo: int = 200
    rng_seed: int = 2024
    baseline_mode: str = "proposed"
    workers: int = 1
    # True when estimation.denoise_taps was null and resolved to cp_len.
    denoise_follows_cp: bool = False

    @property
    def n_cells(self):
        return int(np.prod([len(axis.values) for axis in self.sweep])) if self.sweep else 1

    def to_dict(self):
        """The scenario in its file representation (JSON-compatible apart from infinities)."""
        estimation = {key: getattr(self.estimation, key) for key in DEFAULT_SCENARIO["estimation"]}
        if self.denoise_follows_cp:
            estimation["denoise_taps"] = None
        return {
            "ofdm": vars(self.ofdm).copy(),
            "channel": vars(self.channel).copy(),
            "impairments": vars(self.impairments).copy(),
            "estimation": estimation,
            "link": vars(self.link).copy(),
            "sweep": [{"name": a.name, "fields": list(a.fields), "values": _listify(a.values)} for a in self.sweep],
            "budget": {"si_power_sweep_db": list(self.budget.si_power_sweep_db)},
            "n_monte_carlo": self.n_monte_carlo,
            "rng_seed": self.rng_seed,
            "baseline_mode": self.baseline_mode,
            "workers": self.workers,
        }

    def cells(self):
        """Expands the sweep into cells in row-major order of the axes.

        Returns:
            list[tuple[int, dict, ScenarioConfig]]: (cell index, the field
            assignments of the cell, the cell's scenario without a sweep).
        """
        base = self.to_dict()
        base["sweep"] = []
        if not self.sweep:
            return [(0, {}, scenario_from_dict(base))]
        cells = []
        for index, combination in enumerate(itertools.product(*[axis.values for axis in self.sweep])):
            assignments = {}
            for axis, value in zip(self.sweep, combination):
                assignments.update(axis.assignments(value))
            cells.append((index, assignments, with_overrides(scenario_from_dict(base), assignments)))
        return cells


def _listify(values):
    return [list(v) if isinstance(v, (list, tuple)) else v for v in values]


def _merge_defaults(raw):
    merged = copy.deepcopy(DEFAULT_SCENARIO)
    for key, value in raw.items():
        if key in SECTIONS and isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key].update(value)
        else:
            merged[key] = value
    return merged


def _as_db(value, label, errors):
    try:
        return parse_db(value)
    except (TypeError, ValueError):
        errors.append(f"{label} must be a dB value (number, '-inf', 'inf' or null), got {value!r}")
        return None


def _is_int(value):
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


def _resolve_field(path, errors):
    section, _, key = path.partition(".")
    if key:
        if section not in SECTIONS or key not in DEFAULT_SCENARIO[section]:
            errors.append(f"Unknown sweep field '{path}'")
            return False
        return True
    if section not in DEFAULT_SCENARIO or section in SECTIONS or section == "sweep":
        errors.append(f"Unknown sweep field '{path}'")
        return False
    return True


def validate_scenario_dict(raw):
    """Checks a raw scenario dictionary and collects every problem found.

    Args:
        raw (dict): Parsed JSON, defaults not yet applied.

    Returns:
        list[str]: Error messages; empty when the scenario is valid.
    """
    if not isinstance(raw, dict):
        return [f"Scenario must be a JSON object, got {type(raw).__name__}"]
    errors = []
    for key in raw:
        if key not in DEFAULT_SCENARIO:
            errors.append(f"Unknown top-level key '{key}'")
    merged = _merge_defaults(raw)
    for section in SECTIONS:
        if not isinstance(merged[section], dict):
            errors.append(f"Section '{section}' must be an object")
            return errors
        for key in merged[section]:
            if key not in DEFAULT_SCENARIO[section]:
                errors.append(f"Unknown key '{section}.{key}'")

    for section, keys in DB_KEYS.items():
        for key in keys:
            _as_db(merged[section][key], f"{section}.{key}", errors)

    ofdm = merged["ofdm"]
    for key in ofdm:
        if not _is_int(ofdm[key]):
            errors.append(f"ofdm.{key} must be an integer, got {ofdm[key]!r}")
    if all(_is_int(v) for v in ofdm.values()):
        n_fft, cp_len = ofdm["n_subcarriers"], ofdm["cp_len"]
        if n_fft < 2 or n_fft & (n_fft - 1):
            errors.append(f"ofdm.n_subcarriers must be a power of two, got {n_fft}")
        if not 0 < cp_len < n_fft:
            errors.append(f"ofdm.cp_len must satisfy 0 < cp_len < n_subcarriers, got {cp_len}")
        if ofdm["oversampling"] < MIN_OVERSAMPLING:
            errors.append(f"ofdm.oversampling must be >= {MIN_OVERSAMPLING}, got {ofdm['oversampling']}")
        if ofdm["n_data_symbols"] < 1:
            errors.append(f"ofdm.n_data_symbols must be >= 1, got {ofdm['n_data_symbols']}")
        n_taps = merged["channel"]["n_taps"]
        if not _is_int(n_taps) or not 1 <= n_taps <= cp_len:
            errors.append(f"channel.n_taps must be an integer in [1, cp_len={cp_len}], got {n_taps!r}")
        denoise = merged["estimation"]["denoise_taps"]
        if denoise is not None and (not _is_int(denoise) or not 1 <= denoise <= n_fft):
            errors.append(f"estimation.denoise_taps must be null or an integer in [1, {n_fft}], got {denoise!r}")

    if not isinstance(merged["channel"]["pdp_decay"], (int, float)) or merged["channel"]["pdp_decay"] <= 0:
        errors.append(f"channel.pdp_decay must be a positive number, got {merged['channel']['pdp_decay']!r}")

    imp = merged["impairments"]
    if not _is_int(imp["quantizer_bits"]) or not 4 <= imp["quantizer_bits"] <= 16:
        errors.append(f"impairments.quantizer_bits must be an integer in [4, 16], got {imp['quantizer_bits']!r}")
    if imp["cubic_form"] not in CUBIC_FORMS:
        errors.append(f"impairments.cubic_form must be one of {CUBIC_FORMS}, got {imp['cubic_form']!r}")
    for key in ("distortion_tx_db", "distortion_rx_db"):
        value = _as_db(imp[key], f"impairments.{key}", [])
        if value is not None and value >= 0:
            errors.append(f"impairments.{key} must be below 0 dB, got {imp[key]!r}")

    est = merged["estimation"]
    for key in ("n_outer", "n_inner"):
        if not _is_int(est[key]) or est[key] < 1:
            errors.append(f"estimation.{key} must be an integer >= 1, got {est[key]!r}")
    if est["estimator_variant"] not in ESTIMATOR_VARIANTS:
        errors.append(f"estimation.estimator_variant must be one of {ESTIMATOR_VARIANTS}")
    if est["inner_update"] not in INNER_UPDATES:
        errors.append(f"estimation.inner_update must be one of {INNER_UPDATES}")
    elif est["inner_update"] == "joint" and est["estimator_variant"] == "ratio":
        errors.append("estimation.estimator_variant 'ratio' needs inner_update 'literal' or 'consistent'")
    if not isinstance(est["project_basis"], bool):
        errors.append(f"estimation.project_basis must be true or false, got {est['project_basis']!r}")

    for key in ("si_power_db", "snr_db"):
        value = _as_db(merged["link"][key], f"link.{key}", [])
        if value is not None and not np.isfinite(value):
            errors.append(f"link.{key} must be finite, got {merged['link'][key]!r}")

    if not _is_int(merged["n_monte_carlo"]) or merged["n_monte_carlo"] < 1:
        errors.append(f"n_monte_carlo must be an integer >= 1, got {merged['n_monte_carlo']!r}")
    if not _is_int(merged["rng_seed"]) or merged["rng_seed"] < 0:
        errors.append(f"rng_seed must be a non-negative integer, got {merged['rng_seed']!r}")
    if not _is_int(merged["workers"]) or merged["workers"] < 1:
        errors.append(f"workers must be an integer >= 1, got {merged['workers']!r}")
    if normalize_baseline_mode(merged["baseline_mode"]) not in BASELINE_MODES:
        errors.append(f"baseline_mode must be one of {BASELINE_MODES}, got {merged['baseline_mode']!r}")

    budget = merged["budget"]["si_power_sweep_db"]
    if not isinstance(budget, list):
        errors.append("budget.si_power_sweep_db must be a list")
    else:
        for value in budget:
            _as_db(value, "budget.si_power_sweep_db entry", errors)

    sweep = merged["sweep"]
    if not isinstance(sweep, list):
        errors.append("sweep must be a list of axes")
        return errors
    for position, axis in enumerate(sweep):
        label = f"sweep[{position}]"
        if not isinstance(axis, dict) or not {"fields", "values"} <= set(axis):
            errors.append(f"{label} needs 'fields' and 'values'")
            continue
        fields = axis["fields"]
        values = axis["values"]
        if not isinstance(fields, list) or not fields or not all(isinstance(f, str) for f in fields):
            errors.append(f"{label}.fields must be a non-empty list of dotted keys")
            continue
        if not all(_resolve_field(path, errors) for path in fields):
            continue
        if not isinstance(values, list) or not values:
            errors.append(f"{label}.values must be a non-empty list")
            continue
        for value in values:
            if isinstance(value, list) and len(value) != len(fields):
                errors.append(f"{label}: value {value} has {len(value)} entries for {len(fields)} fields")
    return errors


def normalize_baseline_mode(mode):
    """Maps the CLI spelling "no-suppression" onto "no_suppression"."""
    return mode.replace("-", "_") if isinstance(mode, str) else mode


def scenario_from_dict(raw):
    """Validates a raw dictionary and builds the typed scenario.

    Raises:
        ConfigurationError: Listing every validation problem.
    """
    errors = validate_scenario_dict(raw)
    if errors:
        raise ConfigurationError("Invalid scenario: " + "; ".join(errors))
    merged = _merge_defaults(raw)
    for section, keys in DB_KEYS.items():
        for key in keys:
            merged[section][key] = parse_db(merged[section][key])

    ofdm = OfdmConfig(**merged["ofdm"])
    impairments = ImpairmentConfig(**merged["impairments"])
    est = dict(merged["estimation"])
    denoise_follows_cp = est["denoise_taps"] is None
    if denoise_follows_cp:
        est["denoise_taps"] = ofdm.cp_len
    estimation = EstimationConfig(**est, oversampling=ofdm.oversampling, cubic_form=impairments.cubic_form)

    sweep = tuple(
        SweepAxis(
            name=axis.get("name", "+".join(axis["fields"])),
            fields=tuple(axis["fields"]),
            values=tuple(tuple(v) if isinstance(v, list) else v for v in axis["values"]),
        )
        for axis in merged["sweep"]
    )
    return ScenarioConfig(
        ofdm=ofdm,
        channel=ChannelConfig(**{k: float(v) if k != "n_taps" else v for k, v in merged["channel"].items()}),
        impairments=impairments,
        estimation=estimation,
        link=LinkConfig(**merged["link"]),
        sweep=sweep,
        budget=BudgetConfig(tuple(parse_db(v) for v in merged["budget"]["si_power_sweep_db"])),
        n_monte_carlo=merged["n_monte_carlo"],
        rng_seed=merged["rng_seed"],
        baseline_mode=normalize_baseline_mode(merged["baseline_mode"]),
        workers=merged["workers"],
        denoise_follows_cp=denoise_follows_cp,
    )


def load_scenario(path):
    """Loads and validates a JSON scenario file.

    Raises:
        ConfigurationError: If the file is missing, not valid JSON, or invalid.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise ConfigurationError(f"Scenario file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Scenario file {path} is not valid JSON: {e}") from e
    logger.info(f"Loaded scenario from {path}")
    return scenario_from_dict(raw)


def with_overrides(config, overrides):
    """Returns a copy of the scenario with dotted-key overrides applied.

    Args:
        config (ScenarioConfig): Base scenario.
        overrides (dict): E.g. {"impairments.phase_noise_db": -60, "rng_seed": 7}.

    Returns:
        ScenarioConfig: The validated new scenario.
    """
    raw = config.to_dict()
    for path, value in overrides.items():
        section, _, key = path.partition(".")
        if key:
            if section not in raw or not isinstance(raw[section], dict):
                raise ConfigurationError(f"Unknown override field '{path}'")
            raw[section][key] = value
        else:
            raw[section] = value
    return scenario_from_dict(raw)
