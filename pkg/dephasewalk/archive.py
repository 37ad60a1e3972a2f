from typing import Any, Dict, List, Optional
import logging
import math
import uuid
from datetime import datetime

from sqlalchemy import delete
from sqlmodel import Field, Session, SQLModel, select

from dephasewalk import __version__
from dephasewalk import database
from dephasewalk.errors import ConfigError

logger = logging.getLogger("dephasewalk.archive")


class RunRecord(SQLModel, table=True):
    run_id: str = Field(primary_key=True, max_length=36)
    command: str
    version: str
    config_json: str
    manifest_sha256: Optional[str] = Field(default=None, nullable=True)
    n_points: int = Field(default=0)
    started_at: Optional[datetime] = Field(default=None, nullable=True)
    finished_at: Optional[datetime] = Field(default=None, nullable=True)


class SweepPointRecord(SQLModel, table=True):
    """
    Un punto de barrido por fila.
    Clave primaria compuesta: (run_id, idx)
    """
    run_id: str = Field(primary_key=True, max_length=36)
    idx: int = Field(primary_key=True)
    beta: float
    re_lambda2: Optional[float] = Field(default=None, nullable=True)
    im_lambda2: Optional[float] = Field(default=None, nullable=True)
    re_lambda3: Optional[float] = Field(default=None, nullable=True)
    im_lambda3: Optional[float] = Field(default=None, nullable=True)
    g: Optional[float] = Field(default=None, nullable=True)
    db_residual: Optional[float] = Field(default=None, nullable=True)
    failed: bool = Field(default=False)


def _num(x: float) -> Optional[float]:
    x = float(x)
    return x if math.isfinite(x) else None


def _ts(value: Optional[str]) -> Optional[datetime]:
    return datetime.fromisoformat(value) if value else None


def archive_run(
    command: str,
    config_json: str,
    started_at: Optional[str] = None,
    finished_at: Optional[str] = None,
    manifest_sha256: Optional[str] = None,
    table=None,
) -> str:
    """
    Guarda un RunRecord y, si hay barrido, un SweepPointRecord por punto.
    Devuelve el run_id.
    """
    database.init_db()
    session: Session = database.SessionLocal()
    try:
        run_id = str(uuid.uuid4())
        records = list(table.records) if table is not None else []
        session.add(RunRecord(
            run_id=run_id,
            command=command,
            version=__version__,
            config_json=config_json,
            manifest_sha256=manifest_sha256,
            n_points=len(records),
            started_at=_ts(started_at),
            finished_at=_ts(finished_at),
        ))
        for i, r in enumerate(records):
            session.add(SweepPointRecord(
                run_id=run_id,
                idx=i,
                beta=float(r.beta),
                re_lambda2=_num(r.lambda2.real),
                im_lambda2=_num(r.lambda2.imag),
                re_lambda3=_num(r.lambda3.real),
                im_lambda3=_num(r.lambda3.imag),
                g=_num(r.g),
                db_residual=_num(r.db_residual),
                failed=bool(r.failed),
            ))
        session.commit()
        logger.info("Archived run %s (%s, %d sweep points)", run_id, command, len(records))
        return run_id

    except Exception:
        try:
            session.rollback()
        except Exception:
            logger.exception("rollback failed")
        logger.exception("archive_run failed")
        raise
    finally:
        session.close()


def list_runs() -> List[Dict[str, Any]]:
    database.init_db()
    session: Session = database.SessionLocal()
    try:
        rows = session.exec(select(RunRecord)).all()
        runs = [
            {
                "run_id": r.run_id,
                "command": r.command,
                "version": r.version,
                "n_points": r.n_points,
                "started_at": r.started_at.isoformat() if r.started_at else None,
                "finished_at": r.finished_at.isoformat() if r.finished_at else None,
                "manifest_sha256": r.manifest_sha256,
            }
            for r in rows
        ]
        runs.sort(key=lambda x: (x["started_at"] or "", x["run_id"]), reverse=True)
        return runs
    finally:
        session.close()


def show_run(run_id: str) -> Dict[str, Any]:
    database.init_db()
    session: Session = database.SessionLocal()
    try:
        run = session.get(RunRecord, run_id)
        if run is None:
            raise ConfigError(f"run not found: {run_id}")
        points = session.exec(
            select(SweepPointRecord).where(SweepPointRecord.run_id == run_id).order_by(SweepPointRecord.idx)
        ).all()
        return {
            "run_id": run.run_id,
            "command": run.command,
            "version": run.version,
            "config": run.config_json,
            "manifest_sha256": run.manifest_sha256,
            "points": [p.model_dump(exclude={"run_id"}) for p in points],
        }
    finally:
        session.close()


def purge(confirm: bool = False) -> int:
    """Borra todo el archivo. Requiere confirm=True para evitar borrados accidentales."""
    if not confirm:
        raise ConfigError("purge deletes every archived run: pass --confirm")
    database.init_db()
    session: Session = database.SessionLocal()
    try:
        n = len(session.exec(select(RunRecord)).all())
        session.execute(delete(SweepPointRecord))
        session.execute(delete(RunRecord))
        session.commit()
        logger.info("Purged %d archived runs", n)
        return n
    except Exception:
        session.rollback()
        logger.exception("purge failed")
        raise
    finally:
        session.close()
