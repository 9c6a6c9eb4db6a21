"""
Readers for traces, threshold schedules, pilot summaries, removal data and the
Gaussian observations. Every reader validates its input and reports the file line of
the first problem.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np
import polars as pl

from src.contracts.schemas import (
    COMMENT_PREFIX,
    GAUSSIAN_DATA_PATH,
    GAUSSIAN_DATA_SEED,
    GAUSSIAN_OBS_SCHEMA,
    trace_schema,
)
from src.models.epidemic import RemovalData
from src.samplers.pmmh import PilotSummary
from src.samplers.re_smc import ThresholdSchedule


def _data_lines(path: Path) -> list[tuple[int, str]]:
    """(line number, stripped text) for every non-blank, non-comment line."""
    if not path.exists():
        raise FileNotFoundError(f"{path} not found")
    out = []
    for number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = raw.strip()
        if text and not text.startswith(COMMENT_PREFIX):
            out.append((number, text))
    return out


def _leading_comments(path: Path) -> int:
    count = 0
    for raw in path.read_text(encoding="utf-8").splitlines():
        if not raw.startswith(COMMENT_PREFIX):
            break
        count += 1
    return count


# ---------------------------------------------------------------------------
# Trace CSV
# ---------------------------------------------------------------------------

def _validate_trace(df: pl.DataFrame, path: Path) -> pl.DataFrame:
    """Cast the all-string frame to trace_schema; raise on the first malformed row."""
    dim = sum(1 for col in df.columns if col.startswith("theta_"))
    if dim == 0:
        raise ValueError(f"{path}: trace has no theta_ columns")
    schema = trace_schema(dim)
    for col in schema:
        if col not in df.columns:
            raise ValueError(f"{path}: missing required column: {col}")
    extra = [col for col in df.columns if col not in schema]
    if extra:
        raise ValueError(f"{path}: unexpected columns: {extra}")

    first_data_line = _leading_comments(path) + 2
    columns = {}
    for col, dtype in schema.items():
        raw = df[col]
        if dtype == pl.Boolean:
            lowered = raw.str.to_lowercase()
            ok = lowered.is_in(["true", "false"])
            converted = lowered == "true"
        else:
            converted = raw.cast(dtype, strict=False)
            ok = converted.is_not_null()
        bad = (~ok.fill_null(False)).arg_true()
        if bad.len() > 0:
            row = int(bad[0])
            raise ValueError(
                f"{path}: malformed trace row {row + 1} (line {first_data_line + row}): "
                f"column '{col}' has value {raw[row]!r}"
            )
        columns[col] = converted.alias(col)
    return pl.DataFrame(columns)


def read_trace(path) -> pl.DataFrame:
    """Load a trace CSV written by export.write_trace into a frame typed by trace_schema."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{path} not found")
    try:
        df = pl.read_csv(path, comment_prefix=COMMENT_PREFIX, infer_schema=False)
    except pl.exceptions.PolarsError as exc:
        raise ValueError(f"{path}: unreadable trace CSV: {exc}") from exc
    df = _validate_trace(df, path)
    print(f"[ingest] {df.height:,} trace rows from {path}")
    return df


# ---------------------------------------------------------------------------
# Schedules and pilot summaries
# ---------------------------------------------------------------------------

def read_schedule(path) -> ThresholdSchedule:
    """One threshold per line, strictly decreasing; '#' lines are ignored."""
    path = Path(path)
    values = []
    for number, text in _data_lines(path):
        try:
            values.append(float(text))
        except ValueError as exc:
            raise ValueError(f"{path}:{number}: not a number: {text!r}") from exc
    if not values:
        raise ValueError(f"{path}: schedule file has no thresholds")
    try:
        return ThresholdSchedule(tuple(values))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def _floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")], dtype=float)


def read_pilot(path) -> tuple[PilotSummary, dict[str, Any]]:
    """Pilot summary written by the pilot command, plus its particles/epsilon/schedule entries."""
    path = Path(path)
    values: dict[str, tuple[int, str]] = {}
    for number, text in _data_lines(path):
        key, sep, value = text.partition(":")
        if not sep:
            raise ValueError(f"{path}:{number}: expected 'key: value', got {text!r}")
        values[key.strip()] = (number, value.strip())
    for key in ("mean", "covariance", "dim"):
        if key not in values:
            raise ValueError(f"{path}: pilot file has no '{key}' entry")
    try:
        dim = int(values["dim"][1])
        mean = _floats(values["mean"][1])
        covariance = _floats(values["covariance"][1]).reshape(dim, dim)
    except ValueError as exc:
        raise ValueError(f"{path}: malformed pilot summary: {exc}") from exc

    extra: dict[str, Any] = {}
    if "particles" in values:
        extra["particles"] = int(values["particles"][1])
    if "epsilon" in values:
        extra["epsilon"] = float(values["epsilon"][1])
    if "schedule" in values:
        schedule = Path(values["schedule"][1])
        extra["schedule"] = schedule if schedule.is_absolute() else path.parent / schedule
    return PilotSummary(mean=mean, covariance=covariance), extra


# ---------------------------------------------------------------------------
# Observed data
# ---------------------------------------------------------------------------

def read_removal_data(path) -> RemovalData:
    """Population size on the first data line, inter-removal times (days) on the following ones."""
    path = Path(path)
    lines = _data_lines(path)
    if len(lines) < 1:
        raise ValueError(f"{path}: removal data file is empty")
    number, text = lines[0]
    try:
        population = int(text)
    except ValueError as exc:
        raise ValueError(f"{path}:{number}: population must be an integer, got {text!r}") from exc
    gaps = []
    for number, text in lines[1:]:
        try:
            gap = float(text)
        except ValueError as exc:
            raise ValueError(f"{path}:{number}: inter-removal time is not a number: {text!r}") from exc
        if gap < 0 or not np.isfinite(gap):
            raise ValueError(f"{path}:{number}: inter-removal time must be finite and nonnegative, got {gap}")
        gaps.append(gap)
    data = RemovalData.from_inter_removal_times(population, gaps)
    print(f"[ingest] {data.removed} removals in a population of {data.population} from {path}")
    return data


def load_gaussian_observations(path=GAUSSIAN_DATA_PATH) -> np.ndarray:
    """Shipped Gaussian dataset; `python -m src.main generate` rewrites it from its seed."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run `generate` to write it from seed {GAUSSIAN_DATA_SEED}")
    df = pl.read_csv(path, comment_prefix=COMMENT_PREFIX, schema=GAUSSIAN_OBS_SCHEMA)
    if df["y"].null_count():
        raise ValueError(f"{path}: missing observations")
    return df["y"].to_numpy()
