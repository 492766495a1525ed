from rest_framework import serializers

from apps.instance_app.domain import Instance, Realization, Row, StageData
from apps.lp_app.domain import Sense


def _as_index(value, label: str) -> int:
    if isinstance(value, bool):
        raise serializers.ValidationError(f"{label} must be an integer.")
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, int):
        raise serializers.ValidationError(f"{label} must be an integer.")
    return value


def _as_number(value, label: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise serializers.ValidationError(f"{label} must be a number.")
    return float(value)


class IndexValueField(serializers.Field):
    """Sparse coefficient encoded as ``[index, value]``."""

    def to_internal_value(self, data):
        if not isinstance(data, (list, tuple)) or len(data) != 2:
            raise serializers.ValidationError("Expected an [index, value] pair.")
        return _as_index(data[0], "index"), _as_number(data[1], "value")

    def to_representation(self, value):
        index, number = value
        return [int(index), float(number)]


class TripletField(serializers.Field):
    """Sparse matrix entry encoded as ``[row, column, value]``."""

    def to_internal_value(self, data):
        if not isinstance(data, (list, tuple)) or len(data) != 3:
            raise serializers.ValidationError("Expected a [row, column, value] triplet.")
        return _as_index(data[0], "row"), _as_index(data[1], "column"), _as_number(data[2], "value")

    def to_representation(self, value):
        row, column, number = value
        return [int(row), int(column), float(number)]


class RowSerializer(serializers.Serializer):
    coeffs = serializers.ListField(child=IndexValueField(), allow_empty=True)
    sense = serializers.ChoiceField(choices=Sense.choices)
    relaxable = serializers.BooleanField(default=False)
    slack_weight = serializers.FloatField(required=False, allow_null=True, default=None)
    penalty_weight = serializers.FloatField(required=False, allow_null=True, default=None)
    label = serializers.CharField(allow_blank=True, default="")


class RealizationSerializer(serializers.Serializer):
    probability = serializers.FloatField()
    rhs = serializers.ListField(child=serializers.FloatField(), allow_empty=True)


class StageSerializer(serializers.Serializer):
    n = serializers.IntegerField(min_value=0)
    cost = serializers.ListField(child=serializers.FloatField(), allow_empty=True)
    state_indices = serializers.ListField(child=serializers.IntegerField(), allow_empty=True)
    var_upper = serializers.ListField(child=serializers.FloatField(), required=False, allow_null=True,
                                      default=None)
    rows = RowSerializer(many=True)
    link = serializers.ListField(child=TripletField(), allow_empty=True, default=list)
    realizations = RealizationSerializer(many=True, allow_empty=True)


class InstanceSerializer(serializers.Serializer):
    name = serializers.CharField(allow_blank=True, default="")
    T = serializers.IntegerField(min_value=0)
    m = serializers.IntegerField(min_value=0)
    initial_state = serializers.ListField(child=serializers.FloatField(), allow_empty=True)
    stages = StageSerializer(many=True)
    theta_lower_bound = serializers.FloatField(default=0.0)

    def create(self, validated_data) -> Instance:
        stages = tuple(self._build_stage(stage) for stage in validated_data["stages"])
        return Instance(
            name=validated_data["name"],
            T=validated_data["T"],
            m=validated_data["m"],
            initial_state=tuple(validated_data["initial_state"]),
            stages=stages,
            theta_lower_bound=validated_data["theta_lower_bound"],
        )

    @staticmethod
    def _build_stage(data) -> StageData:
        rows = tuple(
            Row(
                coeffs=tuple(tuple(pair) for pair in row["coeffs"]),
                sense=Sense(row["sense"]),
                relaxable=row["relaxable"],
                slack_weight=row.get("slack_weight"),
                penalty_weight=row.get("penalty_weight"),
                label=row["label"],
            )
            for row in data["rows"]
        )
        realizations = tuple(
            Realization(probability=r["probability"], rhs=tuple(r["rhs"]))
            for r in data["realizations"]
        )
        var_upper = data.get("var_upper")
        return StageData(
            n=data["n"],
            rows=rows,
            cost=tuple(data["cost"]),
            link=tuple(tuple(entry) for entry in data["link"]),
            state_indices=tuple(data["state_indices"]),
            realizations=realizations,
            var_upper=tuple(var_upper) if var_upper is not None else None,
        )
