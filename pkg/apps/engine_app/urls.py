from django.urls import path

from apps.engine_app.views import RunDetailView, RunListCreateView, RunPolicyView

urlpatterns = [
    path('', RunListCreateView.as_view(), name="run-list"),
    path("<int:run_id>/", RunDetailView.as_view(), name="run-detail"),
    path("<int:run_id>/policy/", RunPolicyView.as_view(), name="run-policy"),
]
