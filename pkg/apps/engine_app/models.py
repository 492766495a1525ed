from django.db import models

from apps.engine_app.domain import EngineMode


class SolveRun(models.Model):
    class Status(models.TextChoices):
        PENDING = "pending", "Pending"
        RUNNING = "running", "Running"
        CONVERGED = "converged", "Converged"
        CUTS_STABLE = "cuts_stable", "Stalled without new cuts"
        MAX_ITERS = "max_iters", "Iteration limit"
        STRUCTURAL_INFEASIBILITY = "structural_infeasibility", "Structural infeasibility"
        FAILED = "failed", "Failed"

    id = models.AutoField(primary_key=True)
    name = models.CharField(max_length=255, blank=True, default="")
    instance_document = models.JSONField()
    mode = models.CharField(max_length=20, choices=EngineMode.choices, default=EngineMode.PENALTY_FREE)
    overrides = models.JSONField(default=dict, blank=True)
    status = models.CharField(max_length=32, choices=Status.choices, default=Status.PENDING)
    report = models.JSONField(null=True, blank=True)
    policy = models.JSONField(null=True, blank=True)
    last_error = models.TextField(null=True, blank=True)
    celery_task_id = models.CharField(max_length=255, null=True, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    started_at = models.DateTimeField(null=True, blank=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ["-created_at"]

    def __str__(self):
        return f"SolveRun({self.id}, {self.name or 'unnamed'}, {self.status})"
