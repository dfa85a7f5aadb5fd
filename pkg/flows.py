from typing import Optional

import pandas as pd
from loguru import logger
from prefect import flow, task

from database import Database
from experiments import (config_from_dict, config_to_dict, convergence_frame, run_energy, run_trajectory,
                         solve_manufactured, write_table)


@task
def solve_tau(config_doc: dict, tau: float) -> dict:
    cfg = config_from_dict(config_doc)
    return solve_manufactured(cfg, tau)


@task
def energy_audit(config_doc: dict) -> pd.DataFrame:
    return run_energy(config_from_dict(config_doc))


@task
def trajectory(config_doc: dict) -> pd.DataFrame:
    return run_trajectory(config_from_dict(config_doc))


@task
def save_table(config_doc: dict, frame: pd.DataFrame, path: Optional[str] = None) -> str:
    return str(write_table(frame, config_from_dict(config_doc), path))


@task
def record_run(config_doc: dict, frame: pd.DataFrame, output: str, db_url: Optional[str] = None) -> str:
    db = Database(db_url) if db_url else Database()
    return db.save_run(config_doc, frame, output)


@flow(name="convergence-sweep")
def convergence_flow(config_doc: dict) -> pd.DataFrame:
    """Solve every tau of the sweep, at most max_workers at a time."""
    cfg = config_from_dict(config_doc)
    results = []
    for start in range(0, len(cfg.taus), cfg.max_workers):
        futures = [solve_tau.submit(config_doc, tau) for tau in cfg.taus[start:start + cfg.max_workers]]
        results.extend(future.result() for future in futures)
    return convergence_frame(results)


@flow(name="cpg-experiment")
def experiment_flow(config_doc: dict, out_path: Optional[str] = None, record: bool = False,
                    db_url: Optional[str] = None) -> pd.DataFrame:
    cfg = config_from_dict(config_doc)
    # normalised document, so recorded runs replay to the same bytes
    config_doc = config_to_dict(cfg)
    logger.info(f"Running {cfg.label} ({cfg.model}, mode={cfg.mode}, k={cfg.solver.k})")

    if cfg.mode in ("converge", "converge_nodal"):
        frame = convergence_flow(config_doc)
    elif cfg.mode == "energy":
        frame = energy_audit(config_doc)
    else:
        frame = trajectory(config_doc)

    output = save_table(config_doc, frame, out_path)
    if record:
        run_id = record_run(config_doc, frame, output, db_url)
        logger.info(f"Recorded run {run_id}")
    return frame
