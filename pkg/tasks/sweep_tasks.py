"""
Celery tasks for singlab rate sweeps.
Each task runs one (n, rep) cell; seeds travel inside the payload so a
cell gives the same result on any worker.
"""

from typing import Any, Dict

import structlog

from services.harness import run_cell
from services.logging_setup import ensure_logging
from tasks.celery_app import celery_app

logger = structlog.get_logger(__name__)


@celery_app.task(bind=True, name="tasks.sweep_tasks.run_sweep_cell_task")
def run_sweep_cell_task(self, payload: Dict[str, Any]) -> Dict[str, Any]:
    ensure_logging()
    structlog.contextvars.bind_contextvars(task_id=self.request.id)
    try:
        logger.info("sweep_task_started", estimator=payload["estimator"], n=payload["n"], rep=payload["rep"])
        return run_cell(payload)
    finally:
        structlog.contextvars.clear_contextvars()
