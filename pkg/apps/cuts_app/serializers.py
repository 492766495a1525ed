from rest_framework import serializers

from apps.cuts_app.config import POLICY_FORMAT, POLICY_VERSION
from apps.cuts_app.domain import AGGREGATED, Cut, CutKind, CutOrigin


class RealizationRefField(serializers.Field):
    """Realization index, or ``"AGGREGATED"`` for expected cuts."""

    def to_internal_value(self, data):
        if data == AGGREGATED:
            return AGGREGATED
        if isinstance(data, bool) or not isinstance(data, int):
            raise serializers.ValidationError(f"Expected an integer or \"{AGGREGATED}\".")
        return data

    def to_representation(self, value):
        return value


class CutOriginSerializer(serializers.Serializer):
    stage = serializers.IntegerField(min_value=1)
    iteration = serializers.IntegerField(min_value=0)
    realization = RealizationRefField()
    trial_state = serializers.IntegerField(min_value=0)

    def create(self, validated_data) -> CutOrigin:
        return CutOrigin(**validated_data)


class CutSerializer(serializers.Serializer):
    intercept = serializers.FloatField()
    gradient = serializers.ListField(child=serializers.FloatField(), allow_empty=True)
    kind = serializers.ChoiceField(choices=CutKind.choices)
    origin = CutOriginSerializer()

    def create(self, validated_data) -> Cut:
        return Cut.create(
            validated_data["intercept"],
            validated_data["gradient"],
            CutKind(validated_data["kind"]),
            CutOrigin(**validated_data["origin"]),
        )


class StagePoolsSerializer(serializers.Serializer):
    stage = serializers.IntegerField(min_value=1)
    fcf = CutSerializer(many=True)
    fff = CutSerializer(many=True)


class PolicySerializer(serializers.Serializer):
    format = serializers.ChoiceField(choices=[POLICY_FORMAT])
    version = serializers.ChoiceField(choices=[POLICY_VERSION])
    m = serializers.IntegerField(min_value=0)
    stages = StagePoolsSerializer(many=True)

    def validate(self, attrs):
        numbers = [stage["stage"] for stage in attrs["stages"]]
        if numbers != list(range(1, len(numbers) + 1)):
            raise serializers.ValidationError({"stages": "Stages must be listed as 1..T in order."})
        for stage in attrs["stages"]:
            for kind, expected in (("fcf", CutKind.OPTIMALITY), ("fff", CutKind.FEASIBILITY)):
                for cut in stage[kind]:
                    if cut["kind"] != expected:
                        raise serializers.ValidationError({"stages": f"Stage {stage['stage']} {kind} pool holds a "
                                                                     f"{cut['kind']} cut."})
                    if len(cut["gradient"]) != attrs["m"]:
                        raise serializers.ValidationError({"stages": f"Stage {stage['stage']} cut gradient has "
                                                                     f"length {len(cut['gradient'])}, expected "
                                                                     f"{attrs['m']}."})
        return attrs
