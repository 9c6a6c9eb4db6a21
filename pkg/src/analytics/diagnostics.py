"""
Chain and estimator diagnostics: effective sample size, RMSE, QQ data for replicate
log-likelihood estimates and the per-trace summary report.

ESS uses Geyer's initial monotone sequence: autocorrelations are summed in adjacent
pairs, the pair sums are cut at the first negative one and forced nonincreasing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional, Sequence, Union

import numpy as np
import polars as pl
from scipy import signal, stats

from src.contracts.schemas import ESS_MIN_LENGTH, QQ_MIN_FINITE, theta_columns


@dataclass(frozen=True)
class EssReport:
    ess: float
    length: int
    autocorrelation_sum: float       # sum of rho_k over k >= 1 actually used
    pairs_used: int
    degenerate: bool = False


@dataclass(frozen=True)
class QQResult:
    theoretical: np.ndarray
    empirical: np.ndarray
    zero_count: int
    correlation: float


# ---------------------------------------------------------------------------
# Effective sample size
# ---------------------------------------------------------------------------

def autocorrelation(chain) -> np.ndarray:
    """Biased sample autocorrelation rho_0..rho_{M-1} via FFT."""
    x = np.asarray(chain, dtype=float)
    centred = x - x.mean()
    acov = signal.correlate(centred, centred, mode="full", method="fft")[x.size - 1:] / x.size
    return acov / acov[0]


def ess_imse(chain) -> EssReport:
    """
    ESS = M / (1 + 2 sum rho_k) with Geyer's initial monotone sequence truncation.

    A constant chain returns ESS 1 with degenerate=True. The result never exceeds M.
    """
    x = np.asarray(chain, dtype=float).reshape(-1)
    m = x.size
    if m < ESS_MIN_LENGTH:
        raise ValueError(f"ESS needs a chain of at least {ESS_MIN_LENGTH} values, got {m}")
    if not np.all(np.isfinite(x)):
        raise ValueError("chain contains non-finite values")
    if np.ptp(x) == 0.0:
        return EssReport(ess=1.0, length=m, autocorrelation_sum=0.0, pairs_used=0, degenerate=True)

    rho = autocorrelation(x)
    n_pairs = m // 2
    pairs = rho[: 2 * n_pairs].reshape(n_pairs, 2).sum(axis=1)

    negative = np.flatnonzero(pairs < 0)
    kept = pairs[: negative[0]] if negative.size else pairs
    kept = np.minimum.accumulate(kept)

    # sum_{k>=0} Gamma_j = rho_0 + sum_{k>=1} rho_k, with rho_0 = 1
    rho_sum = float(kept.sum() - 1.0) if kept.size else 0.0
    tau = 1.0 + 2.0 * rho_sum
    ess = m / tau if tau > 0 else float(m)
    return EssReport(ess=float(min(max(ess, 1.0), m)), length=m, autocorrelation_sum=rho_sum, pairs_used=int(kept.size))


# ---------------------------------------------------------------------------
# Accuracy and normality
# ---------------------------------------------------------------------------

def rmse(samples, truth: float) -> float:
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if samples.size == 0:
        raise ValueError("rmse of an empty sample")
    return float(np.sqrt(np.mean((samples - truth) ** 2)))


def loglik_qq(log_estimates) -> QQResult:
    """
    Standardised finite log-estimates against standard-normal quantiles.

    Zero estimates (log = -inf) are counted and left out.
    """
    values = np.asarray(log_estimates, dtype=float).reshape(-1)
    finite = values[np.isfinite(values)]
    zero_count = int(np.sum(values == -np.inf))
    if finite.size < QQ_MIN_FINITE:
        raise ValueError(f"QQ needs at least {QQ_MIN_FINITE} finite log-estimates, got {finite.size}")
    sd = finite.std(ddof=1)
    standardised = (finite - finite.mean()) / sd if sd > 0 else finite - finite.mean()
    (theoretical, empirical), (_slope, _intercept, r) = stats.probplot(standardised, dist="norm")
    return QQResult(
        theoretical=np.asarray(theoretical),
        empirical=np.asarray(empirical),
        zero_count=zero_count,
        correlation=float(r) if sd > 0 else 0.0,
    )


# ---------------------------------------------------------------------------
# Trace report
# ---------------------------------------------------------------------------

Truth = Union[float, Sequence[float], None]


def _truth_vector(truth: Truth, dim: int) -> Optional[np.ndarray]:
    if truth is None:
        return None
    values = np.atleast_1d(np.asarray(truth, dtype=float))
    if values.size != dim:
        raise ValueError(f"truth has {values.size} values, trace has {dim} parameters")
    return values


def summarize_trace(
    frame: pl.DataFrame,
    truth: Truth = None,
    burn_in: int = 0,
    zero_estimate_fraction: Optional[float] = None,
) -> dict[str, Any]:
    """Posterior means/sds, ESS, acceptance rate and cost per effective sample of one trace."""
    dim = sum(1 for col in frame.columns if col.startswith("theta_"))
    if burn_in < 0 or burn_in >= frame.height:
        raise ValueError(f"burn_in must lie in [0, {frame.height}), got {burn_in}")
    kept = frame.slice(burn_in)
    truth_values = _truth_vector(truth, dim)

    report: dict[str, Any] = {
        "iterations": frame.height,
        "burn_in": burn_in,
        "retained": kept.height,
        "acceptance_rate": float(kept["accepted"].cast(pl.Float64).mean()),
    }
    ess_values = []
    for j, col in enumerate(theta_columns(dim)):
        values = kept[col].to_numpy()
        ess = ess_imse(values)
        ess_values.append(ess.ess)
        report[f"{col}_mean"] = float(values.mean())
        report[f"{col}_sd"] = float(values.std(ddof=1))
        report[f"{col}_ess"] = ess.ess
        if ess.degenerate:
            report[f"{col}_ess_flag"] = "constant chain"
        if truth_values is not None:
            report[f"{col}_rmse"] = rmse(values, truth_values[j])

    min_ess = min(ess_values)
    smc_time = float(kept["smc_time_s"].sum())
    calls = int(kept["sim_calls"].sum())
    ran = kept.filter(pl.col("smc_stages") > 0)
    report.update({
        "min_ess": min_ess,
        "smc_time_s": smc_time,
        "time_per_ess_s": smc_time / min_ess,
        "simulator_calls": calls,
        "calls_per_ess": calls / min_ess,
        "mean_smc_stages": float(ran["smc_stages"].mean()) if ran.height else 0.0,
        "early_termination_fraction": float(kept["terminated_early"].cast(pl.Float64).mean()),
    })
    if zero_estimate_fraction is not None:
        report["zero_estimate_fraction"] = zero_estimate_fraction
    return report


def run(trace_path, truth: Truth = None, burn_in: int = 0) -> dict[str, Any]:
    """Load a trace CSV and summarise it."""
    from src.pipeline.ingest import read_trace

    frame = read_trace(trace_path)
    report = summarize_trace(frame, truth=truth, burn_in=burn_in)
    print(
        f"[diagnostics] acceptance {report['acceptance_rate']:.3f}, "
        f"min ESS {report['min_ess']:.1f} of {report['retained']}"
    )
    return report
