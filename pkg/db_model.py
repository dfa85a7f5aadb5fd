from datetime import datetime

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class ExperimentRun(Base):
    __tablename__ = 'experiment_runs'

    id = Column(String, primary_key=True)
    label = Column(String, nullable=False)
    mode = Column(String, nullable=False)
    model = Column(String, nullable=False)
    config_json = Column(Text, nullable=False)
    output_path = Column(String)
    status = Column(Integer, nullable=False, default=0)
    created = Column(DateTime, default=datetime.utcnow)

    # Relationships
    convergence_rows = relationship("ConvergenceRow", back_populates="run", cascade="all, delete-orphan",
                                    order_by="ConvergenceRow.position")
    energy_rows = relationship("EnergyRow", back_populates="run", cascade="all, delete-orphan",
                               order_by="EnergyRow.step")


class ConvergenceRow(Base):
    __tablename__ = 'convergence_rows'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String, ForeignKey('experiment_runs.id'))
    position = Column(Integer, nullable=False)
    tau = Column(Float, nullable=False)
    err_inf = Column(Float)
    eoc_inf = Column(String)
    err_nodal = Column(Float)
    eoc_nodal = Column(String)

    run = relationship("ExperimentRun", back_populates="convergence_rows")


class EnergyRow(Base):
    __tablename__ = 'energy_rows'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String, ForeignKey('experiment_runs.id'))
    step = Column(Integer, nullable=False)
    t = Column(Float, nullable=False)
    hamiltonian = Column(Float)
    dissipation = Column(Float)
    supply = Column(Float)
    balance_error = Column(Float)

    run = relationship("ExperimentRun", back_populates="energy_rows")
