from dataclasses import dataclass
from typing import List, Optional, Sequence

from rest_framework import status
from rest_framework.exceptions import NotFound, ValidationError, APIException

from core.mixins import ErrorResponseMixin


@dataclass(frozen=True)
class Issue:
    stage: Optional[int]
    row: Optional[int]
    message: str

    def __str__(self):
        locus = []
        if self.stage is not None:
            locus.append(f"stage {self.stage}")
        if self.row is not None:
            locus.append(f"row {self.row}")
        prefix = f"[{', '.join(locus)}] " if locus else ""
        return f"{prefix}{self.message}"


class PfsddpError(Exception):
    """Base class of every error raised by the solver stack."""

    http_status = status.HTTP_500_INTERNAL_SERVER_ERROR
    title = "Solver Error"

    def details(self) -> dict:
        return {}


class ParseError(PfsddpError):
    http_status = status.HTTP_400_BAD_REQUEST
    title = "Bad Request"

    def __init__(self, message: str, errors=None):
        self.errors = errors
        super().__init__(message)

    def details(self) -> dict:
        return {"errors": self.errors} if self.errors else {}


class InstanceValidationError(PfsddpError):
    http_status = status.HTTP_400_BAD_REQUEST
    title = "Bad Request"

    def __init__(self, issues: Sequence[Issue]):
        self.issues: List[Issue] = list(issues)
        super().__init__("; ".join(str(issue) for issue in self.issues) or "Invalid instance")

    def details(self) -> dict:
        return {
            "issues": [
                {"stage": issue.stage, "row": issue.row, "message": issue.message}
                for issue in self.issues
            ]
        }


class ConfigurationError(PfsddpError):
    http_status = status.HTTP_400_BAD_REQUEST
    title = "Bad Request"


class DimensionMismatch(PfsddpError):
    pass


class MixedKind(PfsddpError):
    pass


class TopologyError(PfsddpError):
    http_status = status.HTTP_400_BAD_REQUEST
    title = "Bad Request"

    def __init__(self, cycle: Sequence[int]):
        self.cycle = list(cycle)
        super().__init__(f"Cascade topology contains a cycle through reservoirs {self.cycle}")

    def details(self) -> dict:
        return {"cycle": self.cycle}


class LpError(PfsddpError):
    pass


class NumericalFailure(LpError):
    pass


class TreeTooLarge(PfsddpError):
    http_status = status.HTTP_422_UNPROCESSABLE_ENTITY
    title = "Unprocessable Entity"

    def __init__(self, nodes: int, limit: int):
        self.nodes = nodes
        self.limit = limit
        super().__init__(f"Scenario tree has {nodes} nodes, limit is {limit}")

    def details(self) -> dict:
        return {"nodes": self.nodes, "limit": self.limit}


class StructuralInfeasibility(PfsddpError):
    """Non-relaxable rows are inconsistent even with every relaxable slack free."""

    http_status = status.HTTP_422_UNPROCESSABLE_ENTITY
    title = "Unprocessable Entity"

    def __init__(self, stage: Optional[int], realization: Optional[int], row_label: Optional[str] = None):
        self.stage = stage
        self.realization = realization
        self.row_label = row_label
        hint = f", last violated row '{row_label}'" if row_label else ""
        super().__init__(f"Structural infeasibility at stage {stage}, realization {realization}{hint}")

    def details(self) -> dict:
        return {"stage": self.stage, "realization": self.realization, "row_label": self.row_label}


class DefensiveInfeasible(PfsddpError):
    def __init__(self, stage: int, realization: int):
        self.stage = stage
        self.realization = realization
        super().__init__(f"Optimality problem unexpectedly infeasible at stage {stage}, realization {realization}")

    def details(self) -> dict:
        return {"stage": self.stage, "realization": self.realization}


def custom_exception_handler(exc, context):
    request = context.get('request')

    if isinstance(exc, PfsddpError):
        return ErrorResponseMixin.format_error(
            request,
            exc.http_status,
            exc.title,
            str(exc),
            exc.details()
        )

    if isinstance(exc, NotFound):
        return ErrorResponseMixin.format_error(
            request,
            status.HTTP_404_NOT_FOUND,
            "Not Found",
            str(exc.detail)
        )

    if isinstance(exc, ValidationError):
        return ErrorResponseMixin.format_error(
            request,
            status.HTTP_400_BAD_REQUEST,
            "Bad Request",
            exc.detail
        )

    if isinstance(exc, APIException):
        return ErrorResponseMixin.format_error(
            request,
            exc.status_code,
            exc.default_detail,
            str(exc.detail)
        )

    return ErrorResponseMixin.format_error(
        request,
        status.HTTP_500_INTERNAL_SERVER_ERROR,
        "Internal Server Error",
        str(exc)
    )
