from click.testing import CliRunner

from src.contracts.schemas import EXIT_CONFIG_ERROR, EXIT_RUNTIME_FAILURE
from src.main import cli


def _invoke(*args):
    return CliRunner().invoke(cli, list(args))


def _adapt_run(gaussian_ini, **run):
    return gaussian_ini({
        "run": {"model": "gaussian", "method": "re-abc-adapt", "epsilon": 2.0, "seed": 3, "timing": "off", **run},
        "model": {"data": "obs.csv", "dim": 3},
        "smc": {"particles": 20},
        "pmmh": {"iterations": 30, "initial_theta": 2.5, "proposal_cov": 0.3},
    })


def test_rejection_run_writes_sample_and_summary(gaussian_ini, tmp_path):
    path = gaussian_ini({
        "run": {"model": "gaussian", "method": "rejection", "epsilon": 6.0, "seed": 1},
        "rejection": {"accepts": 20},
    })
    result = _invoke("run", "--config", str(path), "--out", str(tmp_path / "out"))
    assert result.exit_code == 0, result.output
    assert (tmp_path / "out" / "rejection.csv").exists()
    assert (tmp_path / "out" / "rejection_meta.txt").exists()
    assert "accepts: 20" in (tmp_path / "out" / "summary.txt").read_text()


def test_runs_without_timing_are_byte_identical(gaussian_ini, tmp_path):
    path = _adapt_run(gaussian_ini)
    for name in ("a", "b"):
        result = _invoke("run", "--config", str(path), "--out", str(tmp_path / name))
        assert result.exit_code == 0, result.output
    for artifact in ("trace.csv", "summary.txt"):
        assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()


def test_worker_count_does_not_change_the_trace(gaussian_ini, tmp_path):
    path = _adapt_run(gaussian_ini)
    assert _invoke("run", "--config", str(path), "--out", str(tmp_path / "one")).exit_code == 0
    assert _invoke("run", "--config", str(path), "--workers", "3", "--out", str(tmp_path / "three")).exit_code == 0
    assert (tmp_path / "one" / "trace.csv").read_bytes() == (tmp_path / "three" / "trace.csv").read_bytes()


def test_seed_override_changes_the_trace(gaussian_ini, tmp_path):
    path = _adapt_run(gaussian_ini)
    _invoke("run", "--config", str(path), "--out", str(tmp_path / "a"))
    _invoke("run", "--config", str(path), "--seed", "4", "--out", str(tmp_path / "b"))
    assert (tmp_path / "a" / "trace.csv").read_bytes() != (tmp_path / "b" / "trace.csv").read_bytes()


def test_diagnose_a_written_trace(gaussian_ini, tmp_path):
    path = _adapt_run(gaussian_ini)
    _invoke("run", "--config", str(path), "--out", str(tmp_path / "run"))
    result = _invoke(
        "diagnose", "--trace", str(tmp_path / "run" / "trace.csv"), "--truth", "3.0",
        "--burn-in", "5", "--out", str(tmp_path / "diag"),
    )
    assert result.exit_code == 0, result.output
    report = (tmp_path / "diag" / "summary.txt").read_text()
    assert "theta_1_rmse" in report
    assert "retained: 25" in report


def test_configuration_errors_exit_with_code_2(gaussian_ini, tmp_path):
    bad = gaussian_ini({"run": {"model": "gaussian", "seed": 1, "method": "bogus"}})
    assert _invoke("run", "--config", str(bad)).exit_code == EXIT_CONFIG_ERROR
    assert _invoke("run", "--config", str(tmp_path / "absent.ini")).exit_code == EXIT_CONFIG_ERROR
    burn = _adapt_run(gaussian_ini, burn_in=30)
    assert _invoke("run", "--config", str(burn), "--out", str(tmp_path / "x")).exit_code == EXIT_CONFIG_ERROR
    assert _invoke("diagnose", "--trace", str(tmp_path / "absent.csv")).exit_code == EXIT_CONFIG_ERROR


def test_algorithm_failures_exit_with_code_3(gaussian_ini, tmp_path):
    path = gaussian_ini({
        "run": {"model": "gaussian", "method": "re-abc-adapt", "epsilon": 0.0, "seed": 3},
        "smc": {"particles": 10, "max_stages": 3},
        "pmmh": {"iterations": 5, "initial_theta": 2.5, "proposal_cov": 0.3},
    })
    result = _invoke("run", "--config", str(path), "--out", str(tmp_path / "out"))
    assert result.exit_code == EXIT_RUNTIME_FAILURE
    assert "StageLimitError" in result.output


def test_pilot_then_fixed_run(gaussian_ini, tmp_path):
    pilot = gaussian_ini({
        "run": {"model": "gaussian", "epsilon": 2.0, "seed": 5, "timing": "off"},
        "model": {"data": "obs.csv", "dim": 3},
        "pilot": {
            "method": "rejection", "draws": 50, "epsilon": 4.0, "adapt_particles": 40,
            "initial_particles": 10, "max_particles": 40, "replicates": 5,
        },
    }, name="pilot.ini")
    result = _invoke("pilot", "--config", str(pilot), "--out", str(tmp_path / "pilot"))
    assert result.exit_code == 0, result.output
    assert (tmp_path / "pilot" / "schedule.txt").exists()

    fixed = gaussian_ini({
        "run": {"model": "gaussian", "method": "re-abc-fixed", "seed": 6, "timing": "off"},
        "model": {"data": "obs.csv", "dim": 3},
        "pmmh": {"iterations": 20, "pilot": "pilot/pilot.txt"},
    }, name="fixed.ini")
    result = _invoke("run", "--config", str(fixed), "--out", str(tmp_path / "fixed"))
    assert result.exit_code == 0, result.output
    assert "method: re-abc-fixed" in (tmp_path / "fixed" / "summary.txt").read_text()


def test_generate_writes_the_dataset(tmp_path):
    result = _invoke("generate", "--out", str(tmp_path / "obs.csv"))
    assert result.exit_code == 0, result.output
    lines = [line for line in (tmp_path / "obs.csv").read_text().splitlines() if not line.startswith("#")]
    assert lines[0] == "y"
    assert len(lines) == 26
