# tests/test_utils.py
import argparse
import json
import logging
import os

import numpy as np
import pytest

import src.config as config
from src.core import run_config, tasks
from src.services import monitoring
from src.utils import error_handler, files
from src.utils import logging as logging_utils
from src.utils.error_handler import (
    BlowUpError, BracketError, ConfigurationError, McKVError, UncontrollableModeError,
)
from utilities import clean_slate


# --- files ---

def test_key_value_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\n\nsigma = 0.6\nn-list=1,2\nformula=a=b\n", encoding="utf-8")
    assert files.load_key_value_file(str(path)) == {"sigma": "0.6", "n_list": "1,2", "formula": "a=b"}


def test_key_value_file_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        files.load_key_value_file(str(tmp_path / "missing.cfg"))
    bad = tmp_path / "bad.cfg"
    bad.write_text("sigma 0.6\n", encoding="utf-8")
    with pytest.raises(ConfigurationError, match="bad.cfg:1"):
        files.load_key_value_file(str(bad))


def test_dumps_precise():
    text = files.dumps_precise({"a": 0.1, "b": [1, True, None, float("nan")], "c": np.float64(2.5), "d": "x"})
    assert text == '{"a": 0.10000000000000001, "b": [1, true, null, null], "c": 2.5, "d": "x"}'
    assert json.loads(text)["a"] == 0.1
    with pytest.raises(TypeError):
        files.dumps_precise({"a": object()})


def test_json_round_trip(tmp_path):
    path = str(tmp_path / "nested" / "result.json")
    assert files.save_json(path, {"sigma": 0.7, "values": np.array([1.0, 2.0])})
    assert files.load_json(path) == {"sigma": 0.7, "values": [1, 2]}
    assert files.load_json(str(tmp_path / "absent.json")) == {}
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    assert files.load_json(str(broken), default={"x": 1}) == {"x": 1}


def test_csv_round_trip(tmp_path):
    path = files.write_csv(str(tmp_path / "out" / "table.csv"), ("t", "m"), [(0.0, 1 / 3), (0.5, 2)])
    raw = open(path, encoding="utf-8").read()
    assert raw == "t,m\n0,0.33333333333333331\n0.5,2\n"
    columns = files.read_csv_columns(path)
    np.testing.assert_array_equal(columns["t"], [0.0, 0.5])
    assert columns["m"][0] == 1 / 3


def test_read_csv_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        files.read_csv_columns(str(tmp_path / "absent.csv"))
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        files.read_csv_columns(str(empty))
    text = tmp_path / "text.csv"
    text.write_text("a\nhello\n", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        files.read_csv_columns(str(text))


# --- error handling ---

@pytest.mark.parametrize("error,code", [
    (ConfigurationError("bad"), 2),
    (BlowUpError(0.5), 3),
    (BracketError("none"), 3),
    (UncontrollableModeError("dead"), 3),
    (KeyError("x"), 1),
])
def test_exit_codes(error, code):
    assert error_handler.exit_code_for(error) == code


def test_error_hierarchy():
    assert issubclass(ConfigurationError, ValueError)
    assert issubclass(BlowUpError, McKVError)
    assert "t=0.25" in str(BlowUpError(0.25))


def test_handle_error_writes_rate_limited_report(tmp_path, monkeypatch):
    monkeypatch.setattr(config, "LOGS_DIR", str(tmp_path))
    monkeypatch.setattr(error_handler, "LAST_ERROR_REPORT_TIME", 0.0)
    try:
        raise BlowUpError(1.5)
    except BlowUpError as e:
        assert error_handler.handle_error(e, "pde") == 3
    reports = os.listdir(tmp_path)
    assert len(reports) == 1
    report = files.load_json(str(tmp_path / reports[0]))
    assert report["blow_up_time"] == 1.5
    assert report["command"] == "pde"
    assert "Traceback" in report["traceback"]
    # inside the cooldown nothing new is written
    assert error_handler.handle_error(RuntimeError("again"), "pde") == 1
    assert len(os.listdir(tmp_path)) == 1


def test_configuration_errors_write_no_report(tmp_path, monkeypatch):
    monkeypatch.setattr(config, "LOGS_DIR", str(tmp_path))
    monkeypatch.setattr(error_handler, "LAST_ERROR_REPORT_TIME", 0.0)
    assert error_handler.handle_error(ConfigurationError("nope"), "sigma-c") == 2
    assert os.listdir(tmp_path) == []


# --- run configuration ---

def test_split_list():
    assert run_config.split_list("a, b,,c") == ["a", "b", "c"]
    assert run_config.split_list([1, 2]) == [1, 2]
    assert run_config.split_list(None) is None


def test_resolve_merges_file_and_flags(tmp_path):
    preset = tmp_path / "sim.cfg"
    preset.write_text("sigma=0.5\nT=2\n", encoding="utf-8")
    parser = argparse.ArgumentParser(prog="mckv test")
    args = argparse.Namespace(config=str(preset), T=3.0, handler=None, model=None, command="x", parser=None)
    cfg = run_config.resolve(run_config.SimulationConfig, args, parser)
    assert cfg.sigma == 0.5
    assert cfg.T == 3.0
    assert cfg.K == config.PDE_MODES


def test_resolve_reports_usage(tmp_path):
    parser = argparse.ArgumentParser(prog="mckv test")
    with pytest.raises(ConfigurationError, match="usage: mckv test") as info:
        run_config.resolve(run_config.SimulationConfig, argparse.Namespace(T=-1.0), parser)
    assert "sigma" in str(info.value)
    assert "T" in str(info.value)


def test_load_config_file_reuses_json_config_block(tmp_path):
    path = tmp_path / "result.json"
    path.write_text(json.dumps({"count": 1, "config": {"sigma": 0.9}}), encoding="utf-8")
    assert run_config.load_config_file(str(path)) == {"sigma": 0.9}
    with pytest.raises(ConfigurationError):
        run_config.load_config_file(str(tmp_path / "absent.json"))


def test_pde_config_and_covariance():
    cfg = run_config.NoiseConfig(sigma=0.8, K=8, T=0.5, dt=0.01)
    solver_cfg = run_config.pde_config(cfg, "run-1", output_interval=0.25)
    assert solver_cfg.K == 8
    assert solver_cfg.M >= 25
    assert solver_cfg.output_interval == 0.25
    assert solver_cfg.run_id == "run-1"
    assert not run_config.covariance(cfg).is_zero
    assert run_config.covariance(cfg, no_noise=True).is_zero
    assert run_config.covariance(cfg.model_copy(update={"c": 0.0})).is_zero


def test_output_path_defaults_to_output_dir(monkeypatch):
    monkeypatch.setattr(config, "OUTPUT_DIR", "somewhere")
    assert run_config.output_path(run_config.RunConfig(), "pde", "csv") == os.path.join("somewhere", "pde.csv")
    assert run_config.output_path(run_config.RunConfig(out="x.csv"), "pde", "csv") == "x.csv"


def test_emit_json(tmp_path, capsys):
    out = tmp_path / "r.json"
    payload = run_config.emit_json({"value": 0.5}, run_config.RunConfig(out=str(out)))
    printed = json.loads(capsys.readouterr().out)
    assert printed == payload == {"value": 0.5, "config": {"format": "json", "out": str(out)}}
    assert files.load_json(str(out)) == printed


# --- tasks and monitoring ---

def _square(x):
    return x * x


def test_run_parallel_serial_preserves_order():
    assert tasks.run_parallel(_square, [3, 1, 2], workers=1) == [9, 1, 4]
    assert tasks.run_parallel(_square, []) == []
    assert tasks.parallel_mapper(1)(_square, range(4)) == [0, 1, 4, 9]


def test_run_parallel_with_processes():
    assert tasks.run_parallel(_square, range(6), workers=2) == [0, 1, 4, 9, 16, 25]


def test_performance_report_task(tmp_path, monkeypatch):
    monkeypatch.setattr(config, "PERFORMANCE_REPORTING_ENABLED", False)
    assert tasks.performance_report_task() is None
    monkeypatch.setattr(config, "PERFORMANCE_REPORTING_ENABLED", True)
    monkeypatch.setattr(config, "LOGS_DIR", str(tmp_path))
    path = tasks.performance_report_task()
    data = json.loads(open(path, encoding="utf-8").read())
    assert set(data) == {"stats", "system", "runs"}


def test_performance_monitor_tracks_runs():
    monitor = monitoring._PerformanceMonitor()
    run_id = monitor.start_run("sigma-c")
    assert run_id.startswith("sigma-c_")
    metrics = monitor.end_run(run_id, 0)
    assert metrics.success
    assert metrics.duration >= 0
    assert monitor.end_run(run_id, 0) is None
    failed = monitor.end_run(monitor.start_run("pde"), 3)
    assert not failed.success
    assert monitor.get_overall_stats()["success_rate"] == 0.5


def test_system_metrics():
    metrics = monitoring.get_system_metrics()
    assert metrics["rss_mb"] > 0
    assert metrics["cpu_count"] >= 1


# --- logging ---

def test_run_logger_disabled_falls_back_to_package_logger(monkeypatch):
    monkeypatch.setattr(config, "RUN_LOGGING_ENABLED", False)
    assert logging_utils.get_run_logger("abc").name == "src.runs.abc"


def test_run_logger_writes_its_own_file(tmp_path, monkeypatch):
    monkeypatch.setattr(config, "RUN_LOGGING_ENABLED", True)
    monkeypatch.setattr(config, "RUN_LOGS_DIR", str(tmp_path))
    run_logger = logging_utils.get_run_logger("pde/run 7")
    assert logging_utils.get_run_logger("pde/run 7") is run_logger
    run_logger.info("density dipped")
    for handler in run_logger.handlers:
        handler.flush()
    assert "density dipped" in (tmp_path / "pderun7.log").read_text(encoding="utf-8")
    for handler in run_logger.handlers[:]:
        run_logger.removeHandler(handler)
        handler.close()
    logging_utils._run_loggers.pop("pde/run 7")


def test_setup_logging_installs_console_and_file(tmp_path, monkeypatch):
    monkeypatch.setattr(config, "LOGS_DIR", str(tmp_path))
    root = logging.getLogger()
    before = root.handlers[:]
    try:
        logging_utils.setup_logging()
        kinds = {type(h).__name__ for h in root.handlers}
        assert {"StreamHandler", "RotatingFileHandler"} <= kinds
        assert (tmp_path / "mckv_runs.log").exists()
    finally:
        for handler in root.handlers[:]:
            root.removeHandler(handler)
            if isinstance(handler, logging.FileHandler):
                handler.close()
        for handler in before:
            root.addHandler(handler)


# --- clean slate ---

def test_clean_slate_removes_caches_and_data(tmp_path):
    (tmp_path / "src" / "__pycache__").mkdir(parents=True)
    (tmp_path / "src" / "keep.py").write_text("", encoding="utf-8")
    (tmp_path / "data" / "logs").mkdir(parents=True)
    removed = clean_slate.clean(str(tmp_path), data_dir="data")
    assert len(removed) == 2
    assert not (tmp_path / "src" / "__pycache__").exists()
    assert not (tmp_path / "data").exists()
    assert (tmp_path / "src" / "keep.py").exists()
    assert clean_slate.clean(str(tmp_path), data_dir="data") == []
