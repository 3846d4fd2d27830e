"""
Celery tasks for convergence sweep cells.
"""

import logging
from typing import Any, Dict

from celery import Task
from kombu.exceptions import OperationalError

from ..celery_app import celery_app
from ..services.experiments import run_cell

logger = logging.getLogger(__name__)


class SweepTask(Task):
    """Base class for sweep tasks; only transport errors are retried."""

    autoretry_for = (OperationalError, ConnectionError)
    retry_kwargs = {"max_retries": 3, "countdown": 30}
    retry_backoff = True
    retry_jitter = True

    def on_failure(self, exc, task_id, args, kwargs, einfo):
        logger.error(
            f"Task {self.name} failed: {exc}",
            extra={
                "task_id": task_id,
                "task_args": args,
                "exception": str(exc),
            },
        )

    def on_retry(self, exc, task_id, args, kwargs, einfo):
        logger.warning(
            f"Task {self.name} retrying: {exc}",
            extra={"task_id": task_id, "retry_count": self.request.retries},
        )

    def on_success(self, retval, task_id, args, kwargs):
        logger.info(
            f"Task {self.name} completed successfully",
            extra={
                "task_id": task_id,
                "result": str(retval)[:100],
            },
        )


@celery_app.task(bind=True, base=SweepTask, name="fracwave.tasks.run_cell")
def run_cell_task(self, config: Dict[str, Any], alpha: float, N: int, M: int) -> Dict[str, Any]:
    """
    Solve one (alpha, N, M) cell of a sweep.

    Args:
        config: ExperimentConfig dumped in JSON mode
        alpha: fractional order
        N: number of time steps
        M: number of space intervals

    Returns:
        Row dict with alpha, N, M, scheme, E and seconds
    """
    if getattr(self.request, "id", None) and not getattr(self.request, "is_eager", False):
        self.update_state(state="PROGRESS", meta={"alpha": alpha, "N": N, "M": M})
    return run_cell(config, alpha, N, M)
