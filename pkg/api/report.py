""" Report emission: a plot-ready CSV and a JSON mirror with full provenance. """
import json
import logging
import math
import os

import pandas as pd

from api.runner import ReportRow

logger = logging.getLogger(__name__)

CSV_COLUMNS = ['t', 'a', 'kind', 'measured', 'certificate', 'ratio']
FLOAT_FORMAT = '%.12g'
NUMERIC_COLUMNS = ('t', 'a', 'measured', 'certificate', 'ratio')


class ReportError(OSError):
    """Raised when a report file cannot be written; carries the path."""

    def __init__(self, path, reason):
        super().__init__(f"Cannot write report {path}: {reason}")
        self.path = path


def rows_to_frame(rows):
    return pd.DataFrame([{column: getattr(row, column) for column in CSV_COLUMNS} for row in rows],
                        columns=CSV_COLUMNS)


def _write(path, writer):
    try:
        os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
        writer(path)
    except OSError as e:
        raise ReportError(path, e.strerror or str(e)) from e


def write_csv(rows, path):
    """Fixed column order, 12 significant digits, LF line endings."""
    frame = rows_to_frame(rows)
    _write(path, lambda p: frame.to_csv(p, index=False, float_format=FLOAT_FORMAT, lineterminator='\n'))
    return path


def _json_safe(value):
    """Non-finite floats become the strings 'inf', '-inf' and 'nan'; JSON has no token for them."""
    if isinstance(value, float) and not math.isfinite(value):
        return str(float(value))
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    return value


def write_json(rows, path):
    document = _json_safe({'columns': CSV_COLUMNS, 'rows': [row.read() for row in rows]})

    def dump(p):
        with open(p, 'w', encoding='utf-8', newline='\n') as handle:
            json.dump(document, handle, indent=2, allow_nan=False)
            handle.write('\n')

    _write(path, dump)
    return path


def read_json_report(path):
    with open(path, encoding='utf-8') as handle:
        document = json.load(handle)
    rows = []
    for record in document['rows']:
        record.update({column: float(record[column]) for column in NUMERIC_COLUMNS})
        rows.append(ReportRow(**record))
    return rows


def emit_report(rows, out_dir, stem, fmt='both'):
    """Writes <stem>.csv and/or <stem>.json under out_dir; returns the written paths."""
    if fmt not in ('csv', 'json', 'both'):
        raise ValueError(f"Unknown report format '{fmt}', expected csv, json or both")
    paths = []
    if fmt in ('csv', 'both'):
        paths.append(write_csv(rows, os.path.join(out_dir, f"{stem}.csv")))
    if fmt in ('json', 'both'):
        paths.append(write_json(rows, os.path.join(out_dir, f"{stem}.json")))
    logger.info(f"Wrote {len(rows)} rows to {', '.join(paths)}")
    return paths
