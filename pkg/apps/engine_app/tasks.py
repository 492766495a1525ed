import logging

from celery import shared_task
from django.db import DatabaseError
from django.utils import timezone

from apps.cuts_app.services import policy_to_data
from apps.engine_app.domain import EngineConfig, StopReason
from apps.engine_app.models import SolveRun
from apps.engine_app.services import SddpEngine
from apps.instance_app.services import instance_from_data
from core.exceptions import PfsddpError

logger = logging.getLogger(__name__)

_STATUS_BY_REASON = {
    StopReason.GAP_AND_FEAS_STABLE: SolveRun.Status.CONVERGED,
    StopReason.CUTS_STABLE: SolveRun.Status.CUTS_STABLE,
    StopReason.MAX_ITERS: SolveRun.Status.MAX_ITERS,
    StopReason.STRUCTURAL_INFEASIBILITY: SolveRun.Status.STRUCTURAL_INFEASIBILITY,
}


def _mark_failed(run: SolveRun, exc: Exception):
    try:
        run.status = SolveRun.Status.FAILED
        run.last_error = str(exc)
        run.finished_at = timezone.now()
        run.save(update_fields=["status", "last_error", "finished_at"])
    except DatabaseError as e:
        logger.exception("Failed to record error for run %s: %s", run.id, e)


@shared_task
def run_solve_task(run_id: int):
    logger.debug("run_solve_task started: %s", run_id)
    try:
        run = SolveRun.objects.get(id=run_id)
    except SolveRun.DoesNotExist:
        logger.warning("SolveRun %s does not exist, abort run_solve_task", run_id)
        return
    except DatabaseError as exc:
        logger.exception("DB error loading run %s: %s", run_id, exc)
        return

    run.status = SolveRun.Status.RUNNING
    run.started_at = timezone.now()
    run.save(update_fields=["status", "started_at"])

    try:
        instance = instance_from_data(run.instance_document)
        config = EngineConfig.from_settings(mode=run.mode, **(run.overrides or {}))
        report = SddpEngine(instance, config).run()
    except PfsddpError as exc:
        logger.exception("Run %s failed: %s", run_id, exc)
        _mark_failed(run, exc)
        return

    run.status = _STATUS_BY_REASON[StopReason(report.reason)]
    run.report = report.to_dict()
    run.policy = policy_to_data(report.policy)
    run.last_error = report.message or None
    run.finished_at = timezone.now()
    try:
        run.save(update_fields=["status", "report", "policy", "last_error", "finished_at"])
    except DatabaseError as exc:
        logger.exception("Failed to store report of run %s: %s", run_id, exc)
        return
    logger.info("Run %s finished with status %s", run_id, run.status)
