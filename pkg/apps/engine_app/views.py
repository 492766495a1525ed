import logging

from drf_yasg import openapi
from drf_yasg.utils import swagger_auto_schema
from rest_framework.exceptions import NotFound
from rest_framework.response import Response
from rest_framework.views import APIView

from apps.engine_app.models import SolveRun
from apps.engine_app.serializers import PaginatedSolveRunsSerializer, RunCreateSerializer, SolveRunSerializer
from apps.engine_app.tasks import run_solve_task
from core.mixins import ErrorResponseMixin
from core.pagination import RunPagination
from core.serializers import ErrorResponseSerializer

logger = logging.getLogger(__name__)


def _get_run(run_id: int) -> SolveRun:
    try:
        return SolveRun.objects.get(id=run_id)
    except SolveRun.DoesNotExist:
        raise NotFound("Run not found")


class RunListCreateView(ErrorResponseMixin, APIView):
    pagination_class = RunPagination

    @swagger_auto_schema(
        tags=["Runs"],
        operation_summary="List solver runs",
        manual_parameters=[
            openapi.Parameter('page', openapi.IN_QUERY, description="Page number", type=openapi.TYPE_INTEGER, default=1),
            openapi.Parameter('page_size', openapi.IN_QUERY, description="Items per page", type=openapi.TYPE_INTEGER, default=10),
        ],
        responses={
            200: openapi.Response(description="Runs, newest first", schema=PaginatedSolveRunsSerializer),
            500: openapi.Response(description="Internal server error", schema=ErrorResponseSerializer),
        },
    )
    def get(self, request):
        runs = SolveRun.objects.all().order_by("-created_at", "-id")
        paginator = self.pagination_class()
        page = paginator.paginate_queryset(runs, request)
        serializer = SolveRunSerializer(page, many=True)
        return paginator.get_paginated_response(serializer.data)

    @swagger_auto_schema(
        tags=["Runs"],
        operation_summary="Submit an instance for solving",
        request_body=RunCreateSerializer,
        responses={
            202: openapi.Response(description="Run accepted", schema=SolveRunSerializer),
            400: openapi.Response(description="Invalid instance or options", schema=ErrorResponseSerializer),
            500: openapi.Response(description="Internal server error", schema=ErrorResponseSerializer),
        },
    )
    def post(self, request):
        serializer = RunCreateSerializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        run = serializer.save()

        result = run_solve_task.delay(run.id)
        task_id = getattr(result, "id", None)
        if task_id:
            run.celery_task_id = task_id
            run.save(update_fields=["celery_task_id"])
        run.refresh_from_db()
        logger.info("Queued run %s for '%s' in %s mode", run.id, run.name, run.mode)
        return Response(SolveRunSerializer(run).data, status=202)


class RunDetailView(ErrorResponseMixin, APIView):
    @swagger_auto_schema(
        tags=["Runs"],
        operation_summary="Run status and report",
        responses={
            200: openapi.Response(description="Run", schema=SolveRunSerializer),
            404: openapi.Response(description="Run not found", schema=ErrorResponseSerializer),
            500: openapi.Response(description="Internal server error", schema=ErrorResponseSerializer),
        },
    )
    def get(self, request, run_id):
        return Response(SolveRunSerializer(_get_run(run_id)).data)


class RunPolicyView(ErrorResponseMixin, APIView):
    @swagger_auto_schema(
        tags=["Runs"],
        operation_summary="Trained cut policy of a run",
        responses={
            200: openapi.Response(description="Policy document"),
            404: openapi.Response(description="Run or policy not found", schema=ErrorResponseSerializer),
            500: openapi.Response(description="Internal server error", schema=ErrorResponseSerializer),
        },
    )
    def get(self, request, run_id):
        run = _get_run(run_id)
        if run.policy is None:
            return self.format_error(
                request,
                404,
                "Not Found",
                "This run has no trained policy yet."
            )
        return Response(run.policy)
