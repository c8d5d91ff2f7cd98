import sys
import os
import zlib
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
from sic_tool import utils


@pytest.mark.parametrize("value_db,expected", [(0.0, 1.0), (10.0, 10.0), (-30.0, 1e-3), (float("-inf"), 0.0)])
def test_db_to_linear(value_db, expected):
    assert utils.db_to_linear(value_db) == pytest.approx(expected)


def test_linear_to_db_maps_zero_to_minus_infinity():
    assert utils.linear_to_db(0.0) == float("-inf")
    assert utils.linear_to_db(100.0) == pytest.approx(20.0)
    assert utils.linear_to_db(utils.db_to_linear(-73.5)) == pytest.approx(-73.5)


@pytest.mark.parametrize(
    "raw,expected",
    [(None, float("-inf")), ("-inf", float("-inf")), ("-Infinity", float("-inf")), ("inf", float("inf")), (-45, -45.0)],
)
def test_parse_db(raw, expected):
    assert utils.parse_db(raw) == expected


def test_parse_db_rejects_text():
    with pytest.raises(ValueError):
        utils.parse_db("loud")


def test_derive_cell_seed_formula():
    expected = 2024 ^ zlib.crc32((5).to_bytes(8, "little"))
    assert utils.derive_cell_seed(2024, 5) == expected
    seeds = {utils.derive_cell_seed(2024, index) for index in range(100)}
    assert len(seeds) == 100
    assert utils.derive_cell_seed(2024, 5) != utils.derive_cell_seed(2025, 5)


def test_resource_path_points_at_project_root():
    path = utils.resource_path("config.json")
    assert os.path.isabs(path)
    assert os.path.exists(path)


def test_resolve_config_path_prefers_existing_files(tmp_path):
    scenario = tmp_path / "distortion_levels.json"
    scenario.write_text("{}", encoding="utf-8")
    assert utils.resolve_config_path(str(scenario)) == str(scenario)
    assert utils.resolve_config_path("distortion_levels").endswith(os.path.join("presets", "distortion_levels.json"))
    assert utils.resolve_config_path("no-such-preset") == "no-such-preset"


def test_setup_logging_replaces_handlers(tmp_path):
    from sic_tool.logger_config import setup_logging

    logger = setup_logging(log_dir=str(tmp_path / "logs"))
    logger = setup_logging(log_dir=str(tmp_path / "logs"))
    assert len(logger.handlers) == 2
    logger.info("probe")
    assert (tmp_path / "logs" / "sim_history.log").exists()
