import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np
import pandas as pd

from .exceptions import InvalidArgumentError, ReportWriteError

logger = logging.getLogger("SicToolLogger")

FORMATS = ("csv", "json", "xlsx")
RESULTS_SHEET = "sweep_results"


@dataclass(eq=False)
class SweepResult:
    """Rows of a sweep (one per cell, ordered by cell index) plus run metadata."""

    rows: pd.DataFrame
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)


def _to_python(value):
    """Converts numpy scalars and containers to plain Python values for JSON."""
    if isinstance(value, dict):
        return {str(k): _to_python(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_python(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_to_python(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_csv(result, path):
    """Writes the rows as CSV; an empty sweep gives a header-only file."""
    result.rows.to_csv(path, index=False)


def write_json(result, path):
    """Writes metadata, column order and rows. Infinities are kept as -Infinity/Infinity."""
    payload = {
        "metadata": _to_python(result.metadata),
        "columns": [str(c) for c in result.rows.columns],
        "rows": [_to_python(list(row)) for row in result.rows.itertuples(index=False, name=None)],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)


def write_xlsx(result, path):
    """Writes the rows to an Excel workbook with a "Report Info" sheet holding the metadata."""
    rows = result.rows.replace([np.inf, -np.inf], [1e308, -1e308]) if not result.rows.empty else result.rows
    with pd.ExcelWriter(path, engine="xlsxwriter") as writer:
        rows.to_excel(writer, sheet_name=RESULTS_SHEET, index=False)
        workbook = writer.book
        worksheet = writer.sheets[RESULTS_SHEET]
        header_format = workbook.add_format({"bold": True, "bg_color": "#F2F2F2", "border": 1})
        for col_num, name in enumerate(rows.columns):
            worksheet.write(0, col_num, str(name), header_format)
            values = rows[name].astype(str).map(len)
            max_len = max(values.max() if not values.empty else 0, len(str(name))) + 2
            worksheet.set_column(col_num, col_num, min(max_len, 40))

        info_sheet = workbook.add_worksheet("Report Info")
        info_sheet.write("A1", "Report Generated On:")
        info_sheet.write("B1", datetime.now().strftime("%Y-%m-%d %H:%M:%S"))
        for row_num, (key, value) in enumerate(result.metadata.items(), start=1):
            info_sheet.write(row_num, 0, str(key))
            info_sheet.write(row_num, 1, json.dumps(_to_python(value)) if isinstance(value, dict) else str(value))
        info_sheet.set_column("A:B", 25)


WRITERS = {"csv": write_csv, "json": write_json, "xlsx": write_xlsx}


def emit(result, output_format, path):
    """Serializes a sweep result.

    Args:
        result (SweepResult): What to write.
        output_format (str): "csv", "json" or "xlsx".
        path (str): Output file path.

    Raises:
        InvalidArgumentError: For an unknown format.
        ReportWriteError: If the file cannot be written; the message names the path.
    """
    if output_format not in WRITERS:
        raise InvalidArgumentError(f"Unknown output format '{output_format}', expected one of {FORMATS}")
    try:
        WRITERS[output_format](result, path)
    except (OSError, ValueError) as e:
        raise ReportWriteError(f"Could not write {output_format} results to '{path}': {e}") from e
    logger.info(f"Results written to '{path}' ({len(result)} row(s), {output_format})")


def load_sweep_result(path):
    """Reads a result written by `emit` in JSON or CSV form (CSV carries no metadata).

    Raises:
        ReportWriteError: If the file cannot be read or parsed.
    """
    try:
        if os.path.splitext(path)[1].lower() == ".csv":
            return SweepResult(rows=pd.read_csv(path), metadata={})
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        rows = pd.DataFrame(payload["rows"], columns=payload["columns"])
        return SweepResult(rows=rows, metadata=payload.get("metadata", {}))
    except (OSError, ValueError, KeyError) as e:
        raise ReportWriteError(f"Could not read results from '{path}': {e}") from e


def create_report(result, output_format, path):
    """Writes a result file and reports the outcome instead of raising.

    Returns:
        tuple[bool, str]: Success flag and a message (the path, or the error).
    """
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        emit(result, output_format, path)
        return True, f"Results written to '{path}'."
    except InvalidArgumentError as e:
        logger.error(f"Invalid report request: {e}")
        return False, str(e)
    except ReportWriteError as e:
        logger.error(f"Report write failed: {e}", exc_info=True)
        return False, str(e)
    except PermissionError:
        logger.error(f"Permission error creating report at '{path}'", exc_info=True)
        return False, f"Permission denied. Could not write results to '{path}'."
