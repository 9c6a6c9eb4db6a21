"""
Writers for every artifact the engine produces.

Each file opens with '#' comment lines recording the engine version, the seed and a
hash of the run configuration; CSV floats are written in scientific notation with
17 significant digits so a trace reloads bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional

import numpy as np
import polars as pl

from src.contracts.schemas import (
    COMMENT_PREFIX,
    COST_SCAN_SCHEMA,
    FLOAT_PRECISION,
    GAUSSIAN_OBS_SCHEMA,
    VERSION,
    rejection_schema,
    theta_columns,
)


def config_hash(config: Mapping[str, Any]) -> str:
    payload = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def header_lines(config: Mapping[str, Any], seed: Optional[int], extra: Iterable[str] = ()) -> list[str]:
    lines = [
        f"{COMMENT_PREFIX} re-abc {VERSION}",
        f"{COMMENT_PREFIX} seed: {seed if seed is not None else 'none'}",
        f"{COMMENT_PREFIX} config_sha256: {config_hash(config)}",
    ]
    lines.extend(f"{COMMENT_PREFIX} {line}" for line in extra)
    return lines


def format_float(value: float) -> str:
    return f"{float(value):.17g}"


def _write_text(path: Path, header: list[str], body: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(header) + "\n" + body, encoding="utf-8")
    return path


def write_csv(df: pl.DataFrame, path, header: list[str]) -> Path:
    body = df.write_csv(float_scientific=True, float_precision=FLOAT_PRECISION)
    return _write_text(Path(path), header, body)


def write_key_values(values: Mapping[str, Any], path, header: list[str]) -> Path:
    """Plain-text `key: value` report; sequences are comma-joined, floats in full precision."""
    lines = []
    for key, value in values.items():
        lines.append(f"{key}: {_render(value)}")
    return _write_text(Path(path), header, "\n".join(lines) + "\n")


def _render(value: Any) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, np.ndarray):
        return ",".join(_render(v) for v in value.reshape(-1).tolist())
    if isinstance(value, (list, tuple)):
        return ",".join(_render(v) for v in value)
    return str(value)


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------

def write_trace(trace, path, config: Mapping[str, Any], record_timing: bool = True) -> Path:
    header = header_lines(config, trace.seed, [
        f"method: {trace.config.get('method', 'unknown')}",
        f"initial_log_like: {format_float(trace.initial_log_like)}",
    ])
    path = write_csv(trace.to_frame(record_timing=record_timing), path, header)
    print(f"[export] {len(trace.records):,} iterations -> {path}")
    return path


def write_rejection(result, path, sidecar_path, config: Mapping[str, Any], seed: int, record_timing: bool = True) -> Path:
    dim = result.accepted_params.shape[1]
    data = {col: result.accepted_params[:, j].tolist() for j, col in enumerate(theta_columns(dim))}
    df = pl.DataFrame(data, schema=rejection_schema(dim))
    header = header_lines(config, seed)
    path = write_csv(df, path, header)
    meta = {
        "epsilon": result.epsilon,
        "accepts": result.accepts,
        "attempts": result.attempts,
        "acceptance_rate": result.acceptance_rate,
        "wall_time_s": result.wall_time if record_timing else 0.0,
        "diagnostic": result.diagnostic or "none",
    }
    write_key_values(meta, sidecar_path, header)
    print(f"[export] {result.accepts:,} accepted draws ({result.attempts:,} attempts) -> {path}")
    return path


def write_schedule(schedule, path, header: Optional[list[str]] = None) -> Path:
    body = "".join(f"{format_float(eps)}\n" for eps in schedule.epsilons)
    path = _write_text(Path(path), header or [f"{COMMENT_PREFIX} re-abc {VERSION}"], body)
    print(f"[export] schedule with {len(schedule)} thresholds -> {path}")
    return path


def write_pilot(pilot, particles: int, epsilon: float, schedule_path, path, header: list[str]) -> Path:
    values = {
        "mean": pilot.mean,
        "covariance": pilot.covariance,
        "dim": int(np.asarray(pilot.mean).size),
        "particles": particles,
        "epsilon": epsilon,
        "schedule": str(schedule_path),
    }
    return write_key_values(values, path, header)


def write_cost_scan(df: pl.DataFrame, path, header: list[str]) -> Path:
    path = write_csv(df.select(list(COST_SCAN_SCHEMA)), path, header)
    print(f"[export] {df.height} cost-scan rows -> {path}")
    return path


def write_gaussian_observations(y, path, seed: int) -> Path:
    df = pl.DataFrame({"y": np.asarray(y, dtype=float).tolist()}, schema=GAUSSIAN_OBS_SCHEMA)
    header = [
        f"{COMMENT_PREFIX} re-abc {VERSION}",
        f"{COMMENT_PREFIX} seed: {seed}",
        f"{COMMENT_PREFIX} IID N(0, sigma^2) observations drawn with sigma = 3",
    ]
    return write_csv(df, path, header)
