import os
import zlib
import logging

import numpy as np

logger = logging.getLogger("SicToolLogger")

PRESET_DIR = "presets"


def db_to_linear(value_db):
    """Converts a power in dB to a linear power ratio (-inf maps to 0)."""
    return float(10.0 ** (float(value_db) / 10.0))


def linear_to_db(value):
    """Converts a linear power ratio to dB.

    Zero power maps to the -inf sentinel instead of raising or warning.
    """
    value = float(value)
    if value <= 0.0:
        return float("-inf")
    return float(10.0 * np.log10(value))


def parse_db(value):
    """Normalizes a dB value read from a config file.

    Args:
        value (float | int | str | None): A number, the strings "-inf"/"inf",
            or None. None stands for an absent component and maps to -inf.

    Returns:
        float: The value as a float.

    Raises:
        ValueError: If the value is a string that is not a number.
    """
    if value is None:
        return float("-inf")
    if isinstance(value, str):
        return float(value.strip().lower().replace("infinity", "inf"))
    return float(value)


def derive_cell_seed(master_seed, cell_index):
    """Derives the RNG seed of one sweep cell from the master seed.

    The derivation is `master_seed XOR crc32(cell_index)`, with the index
    packed as 8 little-endian bytes. It does not depend on execution order,
    so cells can run in any order or in parallel.

    Args:
        master_seed (int): The scenario's rng_seed.
        cell_index (int): Position of the cell in the sweep.

    Returns:
        int: A non-negative 64-bit seed.
    """
    cell_hash = zlib.crc32(int(cell_index).to_bytes(8, "little", signed=False))
    return (int(master_seed) ^ cell_hash) & 0xFFFFFFFFFFFFFFFF


def resource_path(relative_path):
    """Gets the absolute path to a resource shipped next to the package.

    Resources (the default config.json and the presets/ directory) live in
    the project root, one level above `sic_tool/`.

    Args:
        relative_path (str): Path relative to the project root
            (e.g., "presets/distortion_levels.json").

    Returns:
        str: The absolute path to the resource.
    """
    base_path = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
    return os.path.join(base_path, relative_path)


def resolve_config_path(name_or_path):
    """Resolves a preset name (e.g. "distortion_levels") or a file path to a config file path.

    Args:
        name_or_path (str): A path to a JSON scenario file, or the bare name
            of a shipped preset.

    Returns:
        str: The path to use. Returned unchanged if it already exists or does
        not name a preset.
    """
    if os.path.exists(name_or_path):
        return name_or_path
    preset = resource_path(os.path.join(PRESET_DIR, f"{name_or_path}.json"))
    if os.path.exists(preset):
        logger.info(f"Using shipped preset '{name_or_path}' from {preset}")
        return preset
    return name_or_path
