import json
import math
import uuid
from contextlib import contextmanager
from typing import Dict, List, Optional

import pandas as pd
from loguru import logger
from sqlalchemy import create_engine
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import Session, sessionmaker

from config import DB_PATH
from db_model import Base, ConvergenceRow, EnergyRow, ExperimentRun


def _float_or_none(value) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def _rate_to_text(value) -> Optional[str]:
    if value is None or isinstance(value, str):
        return value
    value = float(value)
    return repr(value) if math.isfinite(value) else None


def _rate_from_text(text: Optional[str]):
    if text is None:
        return None
    try:
        return float(text)
    except ValueError:
        return text


class Database:
    """SQLite ledger of finished experiment runs."""

    def __init__(self, url: Optional[str] = None):
        self.engine = create_engine(url or f'sqlite:///{DB_PATH}')
        Base.metadata.create_all(self.engine)
        self.SessionLocal = sessionmaker(bind=self.engine)

    @contextmanager
    def get_session(self) -> Session:
        session = self.SessionLocal()
        try:
            yield session
            session.commit()
        except Exception:
            session.rollback()
            raise
        finally:
            session.close()

    def save_run(self, config_doc: Dict, frame: pd.DataFrame, output_path: Optional[str] = None,
                 status: int = 0) -> str:
        """Store one run and its table rows; returns the run id."""
        experiment = config_doc.get('experiment', {})
        run = ExperimentRun(
            id=str(uuid.uuid4()),
            label=config_doc.get('label', 'experiment'),
            mode=experiment.get('mode', 'converge'),
            model=config_doc['model']['name'],
            config_json=json.dumps(config_doc, sort_keys=True),
            output_path=output_path,
            status=status,
        )
        records = frame.to_dict(orient='records')
        if run.mode in ('converge', 'converge_nodal'):
            for position, row in enumerate(records):
                run.convergence_rows.append(ConvergenceRow(
                    position=position,
                    tau=float(row['tau']),
                    err_inf=_float_or_none(row.get('err_inf')),
                    eoc_inf=_rate_to_text(row.get('eoc_inf')),
                    err_nodal=_float_or_none(row.get('err_nodal')),
                    eoc_nodal=_rate_to_text(row.get('eoc_nodal')),
                ))
        elif run.mode == 'energy':
            for row in records:
                run.energy_rows.append(EnergyRow(
                    step=int(row['i']),
                    t=float(row['t_i']),
                    hamiltonian=_float_or_none(row['H']),
                    dissipation=_float_or_none(row['dissipation']),
                    supply=_float_or_none(row['supply']),
                    balance_error=_float_or_none(row['E']),
                ))

        with self.get_session() as session:
            try:
                session.add(run)
                run_id = run.id
            except SQLAlchemyError as e:
                logger.error(f"Error saving run {run.label}: {str(e)}")
                raise
        return run_id

    def get_runs(self, limit: Optional[int] = None) -> List[Dict]:
        with self.get_session() as session:
            query = session.query(ExperimentRun).order_by(ExperimentRun.created.desc())
            if limit:
                query = query.limit(limit)
            return [self._run_to_dict(run) for run in query.all()]

    def get_run_by_id(self, run_id: str) -> Optional[Dict]:
        with self.get_session() as session:
            run = session.query(ExperimentRun).filter(ExperimentRun.id == run_id).first()
            if run:
                return self._run_to_dict(run)
            return None

    def get_runs_by_model(self, model: str) -> List[Dict]:
        with self.get_session() as session:
            runs = session.query(ExperimentRun).filter(ExperimentRun.model == model).all()
            return [self._run_to_dict(run) for run in runs]

    def delete_run(self, run_id: str) -> bool:
        with self.get_session() as session:
            run = session.query(ExperimentRun).filter(ExperimentRun.id == run_id).first()
            if run:
                session.delete(run)
                return True
            return False

    def _run_to_dict(self, run: ExperimentRun) -> Dict:
        return {
            'id': run.id,
            'label': run.label,
            'mode': run.mode,
            'model': run.model,
            'config': json.loads(run.config_json),
            'output_path': run.output_path,
            'status': run.status,
            'created': run.created.isoformat() if run.created else None,
            'convergence': [
                {'tau': r.tau, 'err_inf': r.err_inf, 'eoc_inf': _rate_from_text(r.eoc_inf),
                 'err_nodal': r.err_nodal, 'eoc_nodal': _rate_from_text(r.eoc_nodal)}
                for r in run.convergence_rows
            ],
            'energy': [
                {'i': r.step, 't_i': r.t, 'H': r.hamiltonian, 'dissipation': r.dissipation,
                 'supply': r.supply, 'E': r.balance_error}
                for r in run.energy_rows
            ],
        }
