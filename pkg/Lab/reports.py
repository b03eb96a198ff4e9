"""
Check reports for CLI runs.

A run produces a list of CheckReport objects. They are written as one sorted
JSON document, or as CSV tables (a summary plus one file per tabular check).
runtime_ms is kept on the objects but only written with --timings, so two runs
with the same config and seed give byte-identical files.
"""

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd


@dataclass
class CheckReport:
    name: str
    values: Dict[str, Any]
    error: Optional[float]
    tolerance: Optional[float]
    passed: bool
    runtime_ms: int = 0
    table: Optional[List[dict]] = field(default=None, repr=False)

    def to_dict(self, timings: bool = False) -> dict:
        out = {
            "name": self.name,
            "values": self.values,
            "error": self.error,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }
        if self.table is not None:
            out["table"] = self.table
        if timings:
            out["runtime_ms"] = self.runtime_ms
        return out


def plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars and arrays become Python values, inf and nan become None."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def run_check(
    name: str,
    run: Callable[[], dict],
    tolerance: Optional[float] = None,
    error_key: str = "max_error",
    table_key: Optional[str] = None,
) -> CheckReport:
    """Run one check function and grade it.

    The check passes when values.get("ok", True) is true and, given a tolerance,
    values[error_key] <= tolerance.
    """
    start = time.perf_counter()
    values = run()
    runtime_ms = int(round(1000.0 * (time.perf_counter() - start)))
    values = plain(values)
    table = values.pop(table_key, None) if table_key else None
    error = values.get(error_key) if tolerance is not None else None
    passed = bool(values.get("ok", True))
    if tolerance is not None:
        passed = passed and error is not None and error <= tolerance
    return CheckReport(name, values, error, tolerance, passed, runtime_ms, table)


def all_passed(reports: List[CheckReport]) -> bool:
    return all(r.passed for r in reports)


def write_json(reports: List[CheckReport], resolved_config: dict, path: Path, timings: bool = False) -> Path:
    document = {
        "config": plain(resolved_config),
        "checks": [plain(r.to_dict(timings)) for r in reports],
        "pass": all_passed(reports),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n")
    return path


def write_csv(reports: List[CheckReport], resolved_config: dict, path: Path, timings: bool = False) -> Path:
    """Summary CSV at path plus <stem>_<check>.csv for every check carrying a table."""
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for r in reports:
        row = {"name": r.name, "error": plain(r.error), "tolerance": r.tolerance, "pass": r.passed}
        row.update({k: v for k, v in sorted(r.values.items()) if not isinstance(v, (dict, list))})
        if timings:
            row["runtime_ms"] = r.runtime_ms
        rows.append(row)
    pd.DataFrame(rows).to_csv(path, index=False)
    for r in reports:
        if r.table:
            pd.DataFrame(r.table).to_csv(path.with_name(f"{path.stem}_{r.name}.csv"), index=False)
    path.with_name(f"{path.stem}_config.json").write_text(
        json.dumps(plain(resolved_config), sort_keys=True, indent=2) + "\n"
    )
    return path


def write_reports(
    reports: List[CheckReport], resolved_config: dict, path: Path, fmt: str = "json", timings: bool = False
) -> Path:
    if fmt == "csv":
        return write_csv(reports, resolved_config, path, timings)
    return write_json(reports, resolved_config, path, timings)
