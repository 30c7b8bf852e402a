"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Database models module that defines the SQLAlchemy ORM models of the         ║
║   results ledger: one Experiment row per invocation and one Result row per     ║
║   (run, fraction, method).                                                     ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

from sqlalchemy import create_engine, Column, Integer, String, Float, DateTime, Text, ForeignKey
from sqlalchemy.orm import declarative_base, relationship, sessionmaker
from datetime import datetime
import json
import logging
import math
import os

logger = logging.getLogger(__name__)

Base = declarative_base()


class Experiment(Base):
    __tablename__ = 'experiments'

    id = Column(Integer, primary_key=True)
    kind = Column(String, nullable=False)
    family = Column(String, nullable=False)
    seed = Column(Integer)
    n_runs = Column(Integer)
    methods = Column(String)   # Comma-separated method keys
    config_json = Column(Text)

    # Metadata
    created_at = Column(DateTime, default=datetime.now)

    # Relationships
    results = relationship("Result", back_populates="experiment", cascade="all, delete-orphan")

    def __repr__(self):
        return f"<Experiment(kind='{self.kind}', seed={self.seed})>"


class Result(Base):
    __tablename__ = 'results'

    id = Column(Integer, primary_key=True)
    experiment_id = Column(Integer, ForeignKey('experiments.id'), nullable=False)

    run = Column(Integer, nullable=False)
    seed = Column(Integer)
    fraction = Column(Float)
    method = Column(String, nullable=False)

    # Metrics (NULL where a metric does not apply)
    wmse = Column(Float)
    cvar_wmse = Column(Float)
    ccr = Column(Float)
    logloss = Column(Float)
    cvar_logloss = Column(Float)
    mpd = Column(Float)
    bound = Column(Float)

    # Selected hyperparameters
    epsilon = Column(Float)
    lam = Column('lambda', Float)
    n_components = Column(Integer)

    error = Column(Text)

    # Relationships
    experiment = relationship("Experiment", back_populates="results")


def init_db(db_path):
    """Initialize the database and create tables if they don't exist"""
    db_exists = os.path.exists(db_path)

    parent = os.path.dirname(db_path)
    if parent:
        os.makedirs(parent, exist_ok=True)

    engine = create_engine(f"sqlite:///{db_path}")
    Base.metadata.create_all(engine)

    if db_exists:
        logger.info(f"Using existing results database at {db_path}")
    else:
        logger.info(f"Created new results database at {db_path}")

    return engine


def _nullable(value):
    if value is None:
        return None
    value = float(value)
    return None if math.isnan(value) else value


def save_results(db_path, cfg, results):
    """
    Append one experiment and its result rows to the ledger

    Args:
        db_path: SQLite database path
        cfg: ExperimentConfig that produced the rows
        results: DataFrame with the results CSV columns

    Returns:
        int: Id of the new experiment row
    """
    engine = init_db(db_path)
    Session = sessionmaker(bind=engine)
    session = Session()
    try:
        experiment = Experiment(
            kind=cfg.kind,
            family=cfg.family,
            seed=cfg.seed,
            n_runs=cfg.n_runs,
            methods=','.join(cfg.methods),
            config_json=json.dumps(cfg.to_dict()),
        )
        for row in results.to_dict(orient='records'):
            n_components = _nullable(row['n_components'])
            experiment.results.append(Result(
                run=int(row['run']),
                seed=int(row['seed']),
                fraction=_nullable(row['fraction']),
                method=row['method'],
                wmse=_nullable(row['wmse']),
                cvar_wmse=_nullable(row['cvar_wmse']),
                ccr=_nullable(row['ccr']),
                logloss=_nullable(row['logloss']),
                cvar_logloss=_nullable(row['cvar_logloss']),
                mpd=_nullable(row['mpd']),
                bound=_nullable(row['bound']),
                epsilon=_nullable(row['epsilon']),
                lam=_nullable(row['lambda']),
                n_components=None if n_components is None else int(n_components),
                error=row['error'] or None,
            ))
        session.add(experiment)
        session.commit()
        logger.info(f"Stored {len(results)} result rows as experiment {experiment.id} in {db_path}")
        return experiment.id
    except Exception as e:
        session.rollback()
        logger.error(f"Error saving results to {db_path}: {str(e)}")
        raise
    finally:
        session.close()
