from django.contrib import admin
from apps.engine_app.models import SolveRun

@admin.register(SolveRun)
class SolveRunAdmin(admin.ModelAdmin):
    list_display = ("id", "name", "mode", "status", "created_at", "finished_at")
    search_fields = ("name", "last_error")
    list_filter = ("mode", "status")
    readonly_fields = ("report", "policy", "last_error", "celery_task_id", "started_at", "finished_at")
