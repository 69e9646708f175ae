"""
Module for writing experiment results and evaluating golden expectations.
"""

import csv
import io
import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np


def _to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    return value


def _format_cell(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return ' '.join(_format_cell(v) for v in value)
    return str(value)


class ResultWriter:
    """
    Writes result tables as CSV and result bundles as JSON, atomically.
    """

    def __init__(self, output_dir: str, prefix: str):
        """
        Initialize the writer.

        Args:
            output_dir: Directory receiving every file (created when missing)
            prefix: File name prefix for this run
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.prefix = prefix
        self.logger = logging.getLogger(__name__)

    def path_for(self, name: str, suffix: str) -> Path:
        return self.output_dir / f"{self.prefix}_{name}.{suffix}"

    def _atomic_write(self, path: Path, text: str) -> None:
        fd, temp_name = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.", suffix='.tmp')
        try:
            with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
                f.write(text)
            os.replace(temp_name, path)
        except BaseException:
            if os.path.exists(temp_name):
                os.unlink(temp_name)
            raise

    def write_csv(self, name: str, rows: Sequence[Dict[str, Any]], columns: Optional[List[str]] = None) -> Path:
        """
        Write rows with a header line; columns default to the keys of the first row.

        Args:
            name: Table name
            rows: Row dictionaries
            columns: Column order

        Returns:
            Path of the written file
        """
        path = self.path_for(name, 'csv')
        if columns is None:
            columns = list(rows[0].keys()) if rows else []
            for row in rows[1:]:
                columns.extend(k for k in row if k not in columns)

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\r\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(c)) for c in columns])
        self._atomic_write(path, buffer.getvalue())
        self.logger.info(f"Table '{name}' ({len(rows)} rows) saved to {path}")
        return path

    def write_text(self, name: str, suffix: str, text: str) -> Path:
        path = self.path_for(name, suffix)
        self._atomic_write(path, text)
        self.logger.info(f"Saved {name} to {path}")
        return path

    def write_json(self, name: str, data: Dict[str, Any]) -> Path:
        """
        Save a result bundle as pretty-printed JSON with sorted keys.
        """
        path = self.path_for(name, 'json')
        self.logger.info(f"Saving results to: {path}")
        text = json.dumps(_to_jsonable(data), indent=2, sort_keys=True, ensure_ascii=False) + '\n'
        self._atomic_write(path, text)
        self.logger.info(f"Data saved successfully to {path}")
        return path


def evaluate_expectations(metrics: Dict[str, Any], expectations: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """
    Compare metrics against golden expectations.

    Args:
        metrics: Flat metric name -> number (booleans count as 0/1)
        expectations: Items with 'metric' and either 'target' + 'tolerance' or 'min' / 'max'

    Returns:
        One outcome per expectation with 'value' and 'passed'; unknown metrics fail
    """
    logger = logging.getLogger(__name__)
    outcomes = []
    for expectation in expectations:
        name = expectation['metric']
        outcome = dict(expectation)
        if name not in metrics or metrics[name] is None:
            outcome.update(value=None, passed=False, reason='metric not produced')
            logger.warning(f"Expectation on {name}: metric not produced")
            outcomes.append(outcome)
            continue
        value = float(metrics[name])
        passed = not math.isnan(value)
        if 'target' in expectation:
            passed = passed and abs(value - expectation['target']) <= expectation.get('tolerance', 0.0)
        if 'min' in expectation:
            passed = passed and value >= expectation['min']
        if 'max' in expectation:
            passed = passed and value <= expectation['max']
        outcome.update(value=value, passed=passed)
        if passed:
            logger.info(f"Expectation on {name}: {value:.6g} passed")
        else:
            logger.warning(f"Expectation on {name}: {value:.6g} failed ({expectation.get('provenance', 'no provenance')})")
        outcomes.append(outcome)
    return outcomes
