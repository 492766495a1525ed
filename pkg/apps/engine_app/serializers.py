from rest_framework import serializers

from apps.engine_app.domain import EngineMode
from apps.engine_app.models import SolveRun
from apps.instance_app.services import instance_from_data
from core.exceptions import InstanceValidationError, ParseError


class EngineOverridesSerializer(serializers.Serializer):
    max_iters = serializers.IntegerField(min_value=1, required=False)
    gap_epsilon = serializers.FloatField(min_value=0, required=False)
    feas_tol = serializers.FloatField(min_value=0, required=False)
    opt_tol = serializers.FloatField(min_value=0, required=False)
    n_forward_paths = serializers.IntegerField(min_value=1, required=False)
    seed = serializers.IntegerField(min_value=0, required=False)
    theta_lower_bound = serializers.FloatField(required=False, allow_null=True)
    confidence_z = serializers.FloatField(min_value=0, required=False)
    enumeration_leaf_limit = serializers.IntegerField(min_value=1, required=False)
    threads = serializers.IntegerField(min_value=1, required=False)
    classic_penalty = serializers.FloatField(min_value=0, required=False, allow_null=True)

    def validate_gap_epsilon(self, value):
        if value <= 0:
            raise serializers.ValidationError("Gap must be positive.")
        return value


class RunCreateSerializer(serializers.Serializer):
    name = serializers.CharField(max_length=255, required=False, allow_blank=True, default="")
    instance = serializers.DictField()
    mode = serializers.ChoiceField(choices=EngineMode.choices, default=EngineMode.PENALTY_FREE)
    overrides = EngineOverridesSerializer(required=False, default=dict)

    def validate_instance(self, value):
        try:
            instance_from_data(value)
        except ParseError as exc:
            raise serializers.ValidationError(exc.errors or str(exc))
        except InstanceValidationError as exc:
            raise serializers.ValidationError([str(issue) for issue in exc.issues])
        return value

    def create(self, validated_data) -> SolveRun:
        name = validated_data.get("name") or validated_data["instance"].get("name", "")
        return SolveRun.objects.create(
            name=name,
            instance_document=validated_data["instance"],
            mode=validated_data["mode"],
            overrides=dict(validated_data.get("overrides") or {}),
        )


class SolveRunSerializer(serializers.ModelSerializer):
    class Meta:
        model = SolveRun
        fields = ("id", "name", "mode", "overrides", "status", "report", "last_error",
                  "created_at", "started_at", "finished_at")
        read_only_fields = fields


class PaginatedSolveRunsSerializer(serializers.Serializer):
    count = serializers.IntegerField()
    total_pages = serializers.IntegerField()
    current_page = serializers.IntegerField()
    next = serializers.CharField(allow_null=True)
    previous = serializers.CharField(allow_null=True)
    results = serializers.ListField(child=SolveRunSerializer())
