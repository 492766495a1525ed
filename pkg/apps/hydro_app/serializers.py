from rest_framework import serializers

from apps.hydro_app.config import DEFAULT_HOC_PENALTY, DEFAULT_HOC_WEIGHT
from apps.hydro_app.domain import HydroSystem, InflowScenario, Reservoir, Thermal


class ReservoirSerializer(serializers.Serializer):
    capacity = serializers.FloatField(min_value=0)
    initial_storage = serializers.FloatField(min_value=0)
    max_release = serializers.FloatField(min_value=0)
    min_outflow = serializers.FloatField(min_value=0, default=0.0)
    downstream = serializers.IntegerField(min_value=0, allow_null=True, default=None)
    hoc_weight = serializers.FloatField(min_value=0, default=DEFAULT_HOC_WEIGHT)
    hoc_penalty = serializers.FloatField(min_value=0, default=DEFAULT_HOC_PENALTY)

    def validate(self, attrs):
        if attrs["initial_storage"] > attrs["capacity"]:
            raise serializers.ValidationError({"initial_storage": "Initial storage exceeds capacity."})
        if attrs["min_outflow"] > 0 and (attrs["hoc_weight"] <= 0 or attrs["hoc_penalty"] <= 0):
            raise serializers.ValidationError("Reservoirs with a minimum outflow need positive weights.")
        return attrs


class ThermalSerializer(serializers.Serializer):
    capacity = serializers.FloatField(min_value=0)
    unit_cost = serializers.FloatField(min_value=0)


class InflowScenarioSerializer(serializers.Serializer):
    probability = serializers.FloatField(min_value=0, max_value=1)
    inflows = serializers.ListField(child=serializers.FloatField(min_value=0))


class HydroSystemSerializer(serializers.Serializer):
    name = serializers.CharField(allow_blank=True, default="")
    reservoirs = ReservoirSerializer(many=True, allow_empty=False)
    thermals = ThermalSerializer(many=True)
    demand = serializers.ListField(child=serializers.FloatField(min_value=0), allow_empty=False)
    inflows = serializers.ListField(child=InflowScenarioSerializer(many=True, allow_empty=False))
    hoc_stages = serializers.ListField(child=serializers.IntegerField(min_value=1), allow_null=True,
                                       required=False, default=None)

    def validate(self, attrs):
        stages = len(attrs["demand"])
        if len(attrs["inflows"]) != stages:
            raise serializers.ValidationError({"inflows": f"Expected {stages} stages of inflow scenarios."})
        for t, scenarios in enumerate(attrs["inflows"], start=1):
            if abs(sum(s["probability"] for s in scenarios) - 1.0) > 1e-9:
                raise serializers.ValidationError({"inflows": f"Stage {t} probabilities do not sum to 1."})
            if any(len(s["inflows"]) != len(attrs["reservoirs"]) for s in scenarios):
                raise serializers.ValidationError({"inflows": f"Stage {t} inflow vectors must cover every reservoir."})
        if len(attrs["inflows"][0]) != 1:
            raise serializers.ValidationError({"inflows": "Stage 1 must have a single inflow scenario."})
        return attrs

    def create(self, validated_data) -> HydroSystem:
        hoc_stages = validated_data.get("hoc_stages")
        return HydroSystem(
            name=validated_data["name"],
            reservoirs=tuple(Reservoir(**r) for r in validated_data["reservoirs"]),
            thermals=tuple(Thermal(**t) for t in validated_data["thermals"]),
            demand=tuple(validated_data["demand"]),
            inflows=tuple(
                tuple(InflowScenario(probability=s["probability"], inflows=tuple(s["inflows"])) for s in stage)
                for stage in validated_data["inflows"]
            ),
            hoc_stages=tuple(hoc_stages) if hoc_stages is not None else None,
        )
