"""
Data contracts for the RE-ABC engine.

These constants and schemas are the SINGLE SOURCE OF TRUTH for every module.
Samplers, experiments, the pipeline readers/writers and the CLI all import from here.

Layer flow: model -> RE-SMC likelihood estimates -> PMMH traces -> diagnostics / cost scans
"""

import polars as pl

VERSION = "0.3.0"


# =============================================================================
# ALGORITHM CONSTANTS
# =============================================================================

# Slice sampler
SLICE_MAX_ITERATIONS = 1000        # hard failure beyond this, the kernel terminates w.p. 1
SLICE_MIN_WIDTH = 1e-6             # floor applied by adapt_width
SLICE_INITIAL_WIDTH = 1.0          # width used in the first SMC iteration

# Quantile clamps for unbounded supports
QUANTILE_U_MIN = 1e-300
QUANTILE_U_MAX = 1.0 - 1e-16

# RE-SMC
ADAPT_MAX_STAGES = 10_000
ADAPT_ACCEPT_FRACTION = 0.5        # default N_acc = N / 2

# PMMH
PROPOSAL_SCALE = 2.562             # proposal covariance (2.562^2 / dim) * Sigma
INITIAL_LIKELIHOOD_RETRIES = 10
TARGET_LOG_LIKELIHOOD_VARIANCE = 1.0
MAX_ZERO_ESTIMATE_FRACTION = 0.5

# Particle tuning defaults
TUNE_INITIAL_PARTICLES = 25
TUNE_MAX_PARTICLES = 3200
TUNE_REPLICATES = 20

# Rejection ABC attempts are drawn in fixed-size batches, one rng stream per batch
REJECTION_BATCH_SIZE = 1000
START_SEARCH_ATTEMPTS = 1_000_000  # ABC-MCMC initial-state search by rejection

# Diagnostics
ESS_MIN_LENGTH = 10
QQ_MIN_FINITE = 30


# =============================================================================
# MODEL CONSTANTS
# =============================================================================

# Gaussian study
GAUSSIAN_N_OBS = 25
GAUSSIAN_TRUE_SIGMA = 3.0
GAUSSIAN_PRIOR_UPPER = 10.0
GAUSSIAN_DATA_SEED = 20_190_305
GAUSSIAN_DISTANCES = ("raw-euclidean", "sorted-euclidean")

# Epidemic study
SIR_PENALTY_K = 1000.0
SIR_PRIOR_RATE = 0.1               # independent Exponential(0.1) priors on lambda, gamma, k
SIR_BIN_WIDTH = 5.0
EPIDEMIC_VARIANTS = ("markov", "gamma-infectious", "weibull-pressure", "binned-markov")
EPIDEMIC_PARAMS = {
    "markov":           ("lambda", "gamma"),
    "binned-markov":    ("lambda", "gamma"),
    "gamma-infectious": ("lambda", "gamma", "k"),
    "weibull-pressure": ("lambda", "gamma", "k"),
}


# =============================================================================
# CLI / RUN CONSTANTS
# =============================================================================

METHODS = ("rejection", "abc-mcmc", "re-abc-fixed", "re-abc-adapt")
COST_SCAN_METHODS = ("abc-reject", "abc-mcmc", "re-abc")
MODELS = ("gaussian", "epidemic")

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_FAILURE = 3


# =============================================================================
# DATA PATHS
# =============================================================================

GAUSSIAN_DATA_PATH = "data/gaussian_obs.csv"
ABAKALIKI_DATA_PATH = "data/abakaliki.txt"

TRACE_FILENAME = "trace.csv"
SUMMARY_FILENAME = "summary.txt"
REJECTION_FILENAME = "rejection.csv"
REJECTION_SIDECAR_FILENAME = "rejection_meta.txt"
SCHEDULE_FILENAME = "schedule.txt"
PILOT_FILENAME = "pilot.txt"
COST_SCAN_FILENAME = "cost_scan.csv"
COST_SCAN_FIT_FILENAME = "cost_scan_fit.txt"

COMMENT_PREFIX = "#"
FLOAT_PRECISION = 16               # scientific notation -> 17 significant digits


# =============================================================================
# TABLE SCHEMAS
# =============================================================================

def theta_columns(dim: int) -> list[str]:
    return [f"theta_{i + 1}" for i in range(dim)]


def trace_schema(dim: int) -> dict[str, pl.DataType]:
    """Trace CSV: one row per PMMH / ABC-MCMC iteration."""
    schema: dict[str, pl.DataType] = {"iter": pl.Int64}
    schema.update({col: pl.Float64 for col in theta_columns(dim)})
    schema.update({
        "log_like": pl.Float64,            # -inf never appears for retained states
        "accepted": pl.Boolean,
        "smc_stages": pl.Int64,
        "smc_time_s": pl.Float64,
        "terminated_early": pl.Boolean,
        "sim_calls": pl.Int64,
    })
    return schema


def rejection_schema(dim: int) -> dict[str, pl.DataType]:
    """Rejection ABC output: accepted parameters only; attempts/time go to the sidecar."""
    return {col: pl.Float64 for col in theta_columns(dim)}


COST_SCAN_SCHEMA = {
    "epsilon": pl.Float64,
    "dim": pl.Int64,
    "method": pl.Utf8,                     # abc-reject, abc-mcmc, re-abc
    "simulator_calls": pl.Int64,
    "wall_time": pl.Float64,
    "effective_samples": pl.Float64,       # ESS for chains, accept count for rejection
    "time_per_effective_sample": pl.Float64,
    "calls_per_effective_sample": pl.Float64,
    "mean_stages": pl.Float64,             # RE-SMC stage count T at fixed theta (re-abc only)
    "flagged": pl.Boolean,                 # zero effective samples, excluded from fits
}

GAUSSIAN_OBS_SCHEMA = {"y": pl.Float64}
