import json

import pandas as pd
import pytest

import main
from database import Database
from experiments import ExperimentConfig, PRESETS, config_to_dict, dump_config
from flows import convergence_flow, experiment_flow
from phsystem import SolverConfig


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def _doc(**kwargs):
    defaults = dict(model="rigid_body", solver=SolverConfig(k=2), mode="converge", taus=(0.5, 0.25, 0.125),
                    t_end=1.0, tau_ref=1e-2, label="rb", max_workers=2)
    defaults.update(kwargs)
    return config_to_dict(ExperimentConfig(**defaults))


def test_convergence_flow_orders_rows(prefect_harness):
    frame = convergence_flow(_doc(taus=(0.125, 0.5, 0.25)))
    assert frame["tau"].tolist() == [0.5, 0.25, 0.125]
    assert pd.isna(frame["eoc_inf"].iloc[0])


def test_experiment_flow_writes_and_records(prefect_harness, workdir):
    db_url = f"sqlite:///{workdir / 'ledger.db'}"
    out = workdir / "rb.csv"
    frame = experiment_flow(_doc(), out_path=str(out), record=True, db_url=db_url)
    assert out.exists()
    assert pd.read_csv(out)["tau"].tolist() == frame["tau"].tolist()
    runs = Database(db_url).get_runs()
    assert len(runs) == 1 and len(runs[0]["convergence"]) == 3


def test_list_presets(capsys, workdir):
    assert main.main(["list-presets"]) == main.EXIT_OK
    printed = capsys.readouterr().out.split()
    assert printed == sorted(PRESETS)


def test_check_command(capsys, workdir):
    assert main.main(["check", "--model", "rigid_body", "--probes", "20"]) == main.EXIT_OK
    assert "PASSED" in capsys.readouterr().out


def test_energy_command(prefect_harness, workdir):
    out = workdir / "energy.json"
    code = main.main(["energy", "--model", "rigid_body", "--k", "2", "--tau", "0.25", "--T", "1",
                      "--format", "json", "--out", str(out)])
    assert code == main.EXIT_OK
    doc = json.loads(out.read_text())
    assert len(doc["rows"]) == 4
    assert max(row["E"] for row in doc["rows"]) <= 1e-12


def test_converge_command_from_config_file(prefect_harness, workdir):
    config_path = workdir / "cfg.json"
    cfg = ExperimentConfig(model="toda", solver=SolverConfig(k=1), taus=(0.5, 0.25), t_end=1.0, tau_ref=1e-2,
                           label="toda_small", output_path=str(workdir / "toda.csv"))
    dump_config(cfg, str(config_path))
    assert main.main(["converge-nodal", "--config", str(config_path)]) == main.EXIT_OK
    frame = pd.read_csv(workdir / "toda.csv")
    assert frame["err_inf"].isna().all()


def test_preset_writes_one_file_per_series(prefect_harness, workdir):
    out_dir = workdir / "fig"
    code = main.main(["energy", "--preset", "rigid_body_energybalance", "--T", "0.1", "--out", str(out_dir)])
    assert code == main.EXIT_OK
    assert len(list(out_dir.glob("*.csv"))) == 4


def test_config_errors_exit_with_one(workdir):
    assert main.main(["converge"]) == main.EXIT_CONFIG
    assert main.main(["converge", "--model", "pendulum"]) == main.EXIT_CONFIG
    assert main.main(["converge", "--model", "wave", "--control", "sin2t"]) == main.EXIT_CONFIG
    assert main.main(["converge", "--preset", "toda_energybalance"]) == main.EXIT_CONFIG
    broken = workdir / "broken.json"
    broken.write_text("{")
    assert main.main(["converge", "--config", str(broken)]) == main.EXIT_CONFIG


def test_newton_failure_exits_with_two(prefect_harness, workdir):
    code = main.main(["run", "--model", "toda", "--k", "2", "--tau", "0.5", "--T", "1", "--newton-max-iter", "1"])
    assert code == main.EXIT_NUMERICAL
