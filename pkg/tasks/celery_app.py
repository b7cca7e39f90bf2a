"""
Celery application configuration for singlab.
Runs rate-sweep cells on remote workers with Redis as broker and result
backend; only used with `--backend celery`.
"""

import os

from celery import Celery

celery_app = Celery(
    "singlab",
    broker=os.getenv("REDIS_URL", "redis://localhost:6379/0"),
    backend=os.getenv("REDIS_URL", "redis://localhost:6379/0"),
    include=["tasks.sweep_tasks"],
)

celery_app.conf.update(
    # Cell payloads and results are plain JSON
    task_serializer="json",
    accept_content=["json"],
    result_serializer="json",

    timezone="UTC",
    enable_utc=True,

    task_routes={
        "tasks.sweep_tasks.run_sweep_cell_task": {"queue": "sweeps"},
    },

    worker_concurrency=int(os.getenv("SINGLAB_WORKERS", "4")),
    worker_prefetch_multiplier=1,

    task_acks_late=True,

    result_expires=3600,
    result_persistent=True,
)
