"""
Run configuration: INI files with one section per module, parsed into frozen dataclasses.

    [run]       model, method, epsilon, seed, workers, out, timing, burn_in
    [model]     data, distance, prior_upper, dim (gaussian); variant, data, k_penalty (epidemic)
    [smc]       particles, n_accept, slice_repeats, adaptive_width, max_stages, schedule
    [pmmh]      iterations, initial_theta, proposal_cov, pilot, early_termination
    [pilot]     method, draws, epsilon, max_attempts, chain_iterations, proposal_cov,
                time_budget, target_variance, adapt_particles, initial_particles,
                max_particles, replicates
    [rejection] accepts, max_attempts
    [cost_scan] epsilons, dims, methods, theta, iterations, particles, accepts,
                max_attempts, stage_replicates

Every validation error names the file and the line of the offending key.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from src.contracts.errors import ConfigError
from src.contracts.schemas import (
    ABAKALIKI_DATA_PATH,
    COST_SCAN_METHODS,
    EPIDEMIC_PARAMS,
    EPIDEMIC_VARIANTS,
    GAUSSIAN_DATA_PATH,
    GAUSSIAN_DISTANCES,
    GAUSSIAN_PRIOR_UPPER,
    METHODS,
    MODELS,
    SIR_PENALTY_K,
    TARGET_LOG_LIKELIHOOD_VARIANCE,
    TUNE_INITIAL_PARTICLES,
    TUNE_MAX_PARTICLES,
    TUNE_REPLICATES,
)

TIMING_MODES = ("wall", "off")
PILOT_METHODS = ("rejection", "chain")

_SECTIONS: dict[str, tuple[str, ...]] = {
    "run": ("model", "method", "epsilon", "seed", "workers", "out", "timing", "burn_in"),
    "model": ("data", "distance", "prior_upper", "dim", "variant", "k_penalty"),
    "smc": ("particles", "n_accept", "slice_repeats", "adaptive_width", "max_stages", "schedule"),
    "pmmh": ("iterations", "initial_theta", "proposal_cov", "pilot", "early_termination"),
    "pilot": (
        "method", "draws", "epsilon", "max_attempts", "chain_iterations", "proposal_cov",
        "time_budget", "target_variance", "adapt_particles", "initial_particles",
        "max_particles", "replicates",
    ),
    "rejection": ("accepts", "max_attempts"),
    "cost_scan": (
        "epsilons", "dims", "methods", "theta", "iterations", "particles", "accepts",
        "max_attempts", "stage_replicates",
    ),
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^#;\s\[][^=:]*?)\s*[=:]")


# ---------------------------------------------------------------------------
# Dataclasses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    kind: str
    data: Optional[Path] = None
    distance: str = "raw-euclidean"
    prior_upper: float = GAUSSIAN_PRIOR_UPPER
    dim: Optional[int] = None
    variant: Optional[str] = None
    k_penalty: float = SIR_PENALTY_K

    @property
    def param_dim(self) -> int:
        return 1 if self.kind == "gaussian" else len(EPIDEMIC_PARAMS[self.variant])


@dataclass(frozen=True)
class SmcSettings:
    particles: Optional[int] = None
    n_accept: Optional[int] = None
    slice_repeats: int = 1
    adaptive_width: bool = True
    max_stages: Optional[int] = None
    schedule: Optional[Path] = None


@dataclass(frozen=True)
class PmmhSettings:
    iterations: Optional[int] = None
    initial_theta: Optional[tuple[float, ...]] = None
    proposal_cov: Optional[tuple[float, ...]] = None
    pilot: Optional[Path] = None
    early_termination: bool = True


@dataclass(frozen=True)
class PilotSettings:
    method: str = "rejection"
    draws: int = 200
    epsilon: Optional[float] = None
    max_attempts: Optional[int] = None
    chain_iterations: int = 500
    proposal_cov: Optional[tuple[float, ...]] = None
    time_budget: Optional[float] = None
    target_variance: float = TARGET_LOG_LIKELIHOOD_VARIANCE
    adapt_particles: int = 200
    initial_particles: int = TUNE_INITIAL_PARTICLES
    max_particles: int = TUNE_MAX_PARTICLES
    replicates: int = TUNE_REPLICATES


@dataclass(frozen=True)
class RejectionSettings:
    accepts: Optional[int] = None
    max_attempts: Optional[int] = None


@dataclass(frozen=True)
class CostScanSettings:
    epsilons: tuple[float, ...] = ()
    dims: tuple[int, ...] = ()
    methods: tuple[str, ...] = COST_SCAN_METHODS
    theta: Optional[tuple[float, ...]] = None
    iterations: int = 200
    particles: int = 50
    accepts: int = 50
    max_attempts: Optional[int] = None
    stage_replicates: int = 5


@dataclass(frozen=True)
class RunConfig:
    path: Path
    model: ModelConfig
    method: str
    seed: int
    epsilon: Optional[float] = None
    workers: int = 1
    out: Path = Path("runs/default")
    timing: str = "wall"
    burn_in: int = 0
    smc: SmcSettings = field(default_factory=SmcSettings)
    pmmh: PmmhSettings = field(default_factory=PmmhSettings)
    pilot: PilotSettings = field(default_factory=PilotSettings)
    rejection: RejectionSettings = field(default_factory=RejectionSettings)
    cost_scan: CostScanSettings = field(default_factory=CostScanSettings)

    @property
    def record_timing(self) -> bool:
        return self.timing == "wall"

    def with_overrides(
        self,
        seed: Optional[int] = None,
        workers: Optional[int] = None,
        out: Optional[str] = None,
    ) -> "RunConfig":
        changes: dict[str, Any] = {}
        if seed is not None:
            if seed < 0:
                raise ConfigError(f"--seed must be nonnegative, got {seed}")
            changes["seed"] = seed
        if workers is not None:
            if workers < 1:
                raise ConfigError(f"--workers must be at least 1, got {workers}")
            changes["workers"] = workers
        if out is not None:
            changes["out"] = Path(out)
        return replace(self, **changes) if changes else self

    def snapshot(self) -> dict[str, Any]:
        """Everything that determines the outputs; hashed into every file header."""
        data = asdict(self)
        data.pop("path")
        data.pop("out")
        data.pop("workers")
        return data


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _key_lines(text: str) -> dict[tuple[str, Optional[str]], int]:
    lines: dict[tuple[str, Optional[str]], int] = {}
    section = ""
    for number, raw in enumerate(text.splitlines(), start=1):
        match = _SECTION_RE.match(raw)
        if match:
            section = match.group(1).strip().lower()
            lines.setdefault((section, None), number)
            continue
        match = _KEY_RE.match(raw)
        if match and section:
            lines[(section, match.group(1).strip().lower())] = number
    return lines


class _Reader:
    """Typed access to the parsed file with line-referenced errors."""

    def __init__(self, parser: configparser.ConfigParser, lines, path: Path) -> None:
        self.parser = parser
        self.lines = lines
        self.path = path

    def error(self, section: str, key: Optional[str], message: str) -> ConfigError:
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        label = f"[{section}] {key}" if key else f"[{section}]"
        return ConfigError(f"{label}: {message}", path=str(self.path), line=line)

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def raw(self, section: str, key: str, required: bool = False) -> Optional[str]:
        if not self.has(section, key):
            if required:
                raise self.error(section, None, f"missing required key '{key}'")
            return None
        value = self.parser.get(section, key).strip()
        if not value:
            raise self.error(section, key, "empty value")
        return value

    def string(self, section: str, key: str, default=None, choices=None, required=False):
        value = self.raw(section, key, required)
        if value is None:
            return default
        if choices is not None and value not in choices:
            raise self.error(section, key, f"'{value}' is not one of {list(choices)}")
        return value

    def integer(self, section: str, key: str, default=None, minimum: Optional[int] = None, required=False):
        value = self.raw(section, key, required)
        if value is None:
            return default
        try:
            number = int(value)
        except ValueError:
            raise self.error(section, key, f"expected an integer, got '{value}'") from None
        if minimum is not None and number < minimum:
            raise self.error(section, key, f"must be at least {minimum}, got {number}")
        return number

    def real(self, section: str, key: str, default=None, positive=False, nonnegative=False, required=False):
        value = self.raw(section, key, required)
        if value is None:
            return default
        try:
            number = float(value)
        except ValueError:
            raise self.error(section, key, f"expected a number, got '{value}'") from None
        if number != number:
            raise self.error(section, key, "NaN is not allowed")
        if positive and not number > 0:
            raise self.error(section, key, f"must be positive, got {number}")
        if nonnegative and number < 0:
            raise self.error(section, key, f"must be nonnegative, got {number}")
        return number

    def boolean(self, section: str, key: str, default: bool) -> bool:
        if not self.has(section, key):
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            raise self.error(section, key, f"expected true/false, got '{self.parser.get(section, key)}'") from None

    def reals(self, section: str, key: str, length: Optional[int] = None) -> Optional[tuple[float, ...]]:
        value = self.raw(section, key)
        if value is None:
            return None
        try:
            numbers = tuple(float(v) for v in value.split(","))
        except ValueError:
            raise self.error(section, key, f"expected comma-separated numbers, got '{value}'") from None
        if length is not None and len(numbers) != length:
            raise self.error(section, key, f"expected {length} values, got {len(numbers)}")
        return numbers

    def file(self, section: str, key: str, default: Optional[str] = None) -> Optional[Path]:
        value = self.raw(section, key)
        if value is None:
            return Path(default) if default is not None else None
        path = Path(value)
        if not path.is_absolute():
            path = self.path.parent / path
        if not path.exists():
            raise self.error(section, key, f"file not found: {path}")
        return path


def _model(reader: _Reader, kind: str) -> ModelConfig:
    if kind == "gaussian":
        data = reader.file("model", "data")
        return ModelConfig(
            kind=kind,
            data=data or Path(GAUSSIAN_DATA_PATH),
            distance=reader.string("model", "distance", "raw-euclidean", choices=GAUSSIAN_DISTANCES),
            prior_upper=reader.real("model", "prior_upper", GAUSSIAN_PRIOR_UPPER, positive=True),
            dim=reader.integer("model", "dim", None, minimum=1),
        )
    variant = reader.string("model", "variant", "markov", choices=EPIDEMIC_VARIANTS)
    data = reader.file("model", "data")
    if data is None:
        data = Path(ABAKALIKI_DATA_PATH)
        if not data.exists():
            raise reader.error("model", None, f"no 'data' key and default {data} does not exist")
    return ModelConfig(
        kind=kind,
        data=data,
        variant=variant,
        k_penalty=reader.real("model", "k_penalty", SIR_PENALTY_K, nonnegative=True),
    )


COMMANDS = ("run", "pilot", "cost-scan")


def load_config(path, command: str = "run") -> RunConfig:
    """Parse and validate a configuration file for one of COMMANDS."""
    if command not in COMMANDS:
        raise ValueError(f"Unknown command '{command}', expected one of {COMMANDS}")
    path = Path(path)
    if not path.exists():
        raise ConfigError("config file not found", path=str(path))
    text = path.read_text(encoding="utf-8")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"cannot parse config: {exc.message}", path=str(path), line=line) from None

    reader = _Reader(parser, _key_lines(text), path)
    for section in parser.sections():
        if section not in _SECTIONS:
            raise reader.error(section, None, f"unknown section, expected one of {list(_SECTIONS)}")
        for key in parser.options(section):
            if key not in _SECTIONS[section]:
                raise reader.error(section, key, "unknown key")
    if not parser.has_section("run"):
        raise ConfigError("missing [run] section", path=str(path))

    kind = reader.string("run", "model", choices=MODELS, required=True)
    model = _model(reader, kind)
    method = reader.string("run", "method", "re-abc-fixed", choices=METHODS)
    dim = model.param_dim

    config = RunConfig(
        path=path,
        model=model,
        method=method,
        seed=reader.integer("run", "seed", minimum=0, required=True),
        epsilon=reader.real("run", "epsilon", None, nonnegative=True),
        workers=reader.integer("run", "workers", 1, minimum=1),
        out=Path(reader.string("run", "out", "runs/default")),
        timing=reader.string("run", "timing", "wall", choices=TIMING_MODES),
        burn_in=reader.integer("run", "burn_in", 0, minimum=0),
        smc=SmcSettings(
            particles=reader.integer("smc", "particles", None, minimum=1),
            n_accept=reader.integer("smc", "n_accept", None, minimum=1),
            slice_repeats=reader.integer("smc", "slice_repeats", 1, minimum=1),
            adaptive_width=reader.boolean("smc", "adaptive_width", True),
            max_stages=reader.integer("smc", "max_stages", None, minimum=1),
            schedule=reader.file("smc", "schedule"),
        ),
        pmmh=PmmhSettings(
            iterations=reader.integer("pmmh", "iterations", None, minimum=1),
            initial_theta=reader.reals("pmmh", "initial_theta", dim),
            proposal_cov=reader.reals("pmmh", "proposal_cov", dim * dim),
            pilot=reader.file("pmmh", "pilot"),
            early_termination=reader.boolean("pmmh", "early_termination", True),
        ),
        pilot=PilotSettings(
            method=reader.string("pilot", "method", "rejection", choices=PILOT_METHODS),
            draws=reader.integer("pilot", "draws", 200, minimum=2),
            epsilon=reader.real("pilot", "epsilon", None, nonnegative=True),
            max_attempts=reader.integer("pilot", "max_attempts", None, minimum=1),
            chain_iterations=reader.integer("pilot", "chain_iterations", 500, minimum=2),
            proposal_cov=reader.reals("pilot", "proposal_cov", dim * dim),
            time_budget=reader.real("pilot", "time_budget", None, positive=True),
            target_variance=reader.real("pilot", "target_variance", TARGET_LOG_LIKELIHOOD_VARIANCE, positive=True),
            adapt_particles=reader.integer("pilot", "adapt_particles", 200, minimum=2),
            initial_particles=reader.integer("pilot", "initial_particles", TUNE_INITIAL_PARTICLES, minimum=1),
            max_particles=reader.integer("pilot", "max_particles", TUNE_MAX_PARTICLES, minimum=1),
            replicates=reader.integer("pilot", "replicates", TUNE_REPLICATES, minimum=2),
        ),
        rejection=RejectionSettings(
            accepts=reader.integer("rejection", "accepts", None, minimum=1),
            max_attempts=reader.integer("rejection", "max_attempts", None, minimum=1),
        ),
        cost_scan=_cost_scan(reader),
    )
    smc = config.smc
    if smc.n_accept is not None and smc.particles is not None and smc.n_accept > smc.particles:
        raise reader.error("smc", "n_accept", f"n_accept {smc.n_accept} exceeds particles {smc.particles}")
    if command == "run":
        _validate_method(reader, config)
    return config


def _cost_scan(reader: _Reader) -> CostScanSettings:
    epsilons = reader.reals("cost_scan", "epsilons") or ()
    if any(e <= 0 for e in epsilons):
        raise reader.error("cost_scan", "epsilons", "thresholds must be positive")
    dims_raw = reader.reals("cost_scan", "dims") or ()
    if any(d != int(d) or d < 1 for d in dims_raw):
        raise reader.error("cost_scan", "dims", "dimensions must be positive integers")
    methods = tuple(m.strip() for m in (reader.raw("cost_scan", "methods") or ",".join(COST_SCAN_METHODS)).split(","))
    unknown = [m for m in methods if m not in COST_SCAN_METHODS]
    if unknown:
        raise reader.error("cost_scan", "methods", f"unknown methods {unknown}, expected {list(COST_SCAN_METHODS)}")
    return CostScanSettings(
        epsilons=epsilons,
        dims=tuple(int(d) for d in dims_raw),
        methods=methods,
        theta=reader.reals("cost_scan", "theta"),
        iterations=reader.integer("cost_scan", "iterations", 200, minimum=10),
        particles=reader.integer("cost_scan", "particles", 50, minimum=2),
        accepts=reader.integer("cost_scan", "accepts", 50, minimum=1),
        max_attempts=reader.integer("cost_scan", "max_attempts", None, minimum=1),
        stage_replicates=reader.integer("cost_scan", "stage_replicates", 5, minimum=1),
    )


def _validate_method(reader: _Reader, config: RunConfig) -> None:
    """Cross-key checks for the `run` command; pilot and cost-scan validate their own needs."""
    method = config.method
    if method == "rejection":
        return
    if method == "re-abc-fixed" and config.smc.schedule is None and config.pmmh.pilot is None:
        raise reader.error("smc", None, "method re-abc-fixed needs a 'schedule' file or a [pmmh] pilot file")
    if config.pmmh.proposal_cov is None and config.pmmh.pilot is None:
        raise reader.error("pmmh", None, f"method {method} needs 'proposal_cov' or a 'pilot' file")


def require(config: RunConfig, section: str, key: str, value: Any) -> Any:
    """Return value, or raise a ConfigError pointing at the section when it is missing."""
    if value is None:
        lines = _key_lines(config.path.read_text(encoding="utf-8")) if config.path.exists() else {}
        raise ConfigError(
            f"[{section}]: missing required key '{key}' for this command",
            path=str(config.path),
            line=lines.get((section, None)),
        )
    return value
