from typing import Optional

from django.utils import timezone
from rest_framework.response import Response


class ErrorResponseMixin:
    @staticmethod
    def format_error(request, status_code, error, message, details: Optional[dict] = None):
        body = {
            "timestamp": timezone.now().isoformat(),
            "status": status_code,
            "error": error,
            "message": message,
            "path": getattr(request, "path", None),
        }
        if details:
            body["details"] = details
        return Response(body, status=status_code)
