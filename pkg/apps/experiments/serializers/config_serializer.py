from typing import Dict, List

from rest_framework import serializers
from rest_framework.settings import api_settings

from apps.common.exceptions import ConfigurationError
from apps.fading.services.constellation_service import get_constellation
from apps.metrics.services.schemes import SCHEMES, validate_pairing

COMMANDS = ("ber", "mi", "diversity", "verify")
OUTPUT_FORMATS = ("csv", "json")


class StrictFieldsMixin:
    """선언되지 않은 키를 오류로 처리

    오타 난 설정 키가 조용히 무시되지 않도록 합니다.
    """

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ["알 수 없는 설정 키입니다."] for key in unknown})
        return super().to_internal_value(data)


class SnrGridSerializer(StrictFieldsMixin, serializers.Serializer):
    """SNR 격자 (dB)"""

    start_db = serializers.FloatField()
    stop_db = serializers.FloatField()
    step_db = serializers.FloatField()

    def validate_step_db(self, value):
        if value <= 0:
            raise serializers.ValidationError("SNR 간격은 0보다 커야 합니다.")
        return value

    def validate(self, attrs):
        """격자가 비어 있지 않은지 검증합니다.

        Raises:
            serializers.ValidationError: stop_db 가 start_db 보다 작은 경우
        """
        if attrs["stop_db"] < attrs["start_db"]:
            raise serializers.ValidationError({"stop_db": "종료 SNR 은 시작 SNR 이상이어야 합니다."})
        return attrs


class TrialPolicySerializer(StrictFieldsMixin, serializers.Serializer):
    """시행 수 정책"""

    max_trials = serializers.IntegerField(min_value=1)
    target_bit_errors = serializers.IntegerField(min_value=1)
    batch_size = serializers.IntegerField(min_value=1)
    mi_trials = serializers.IntegerField(min_value=1)
    gamma_trials = serializers.IntegerField(min_value=1)
    verify_trials = serializers.IntegerField(min_value=1)


class DiversitySerializer(StrictFieldsMixin, serializers.Serializer):
    """다이버시티 추정 구간"""

    ber_window_db = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2)
    eps_start = serializers.FloatField()
    eps_stop = serializers.FloatField()
    eps_points = serializers.IntegerField(min_value=3)
    min_count = serializers.IntegerField(min_value=1)

    def validate(self, attrs):
        """ε 격자와 BER 창을 검증합니다.

        불능 기울기는 ε 격자가 최소 두 자릿수(decade)에 걸쳐야 추정할 수 있습니다.
        """
        low, high = attrs["ber_window_db"]
        if high <= low:
            raise serializers.ValidationError({"ber_window_db": "BER 창의 끝은 시작보다 커야 합니다."})
        if attrs["eps_start"] <= 0:
            raise serializers.ValidationError({"eps_start": "ε 은 0보다 커야 합니다."})
        if attrs["eps_stop"] < 100 * attrs["eps_start"] * (1 - 1e-9):
            raise serializers.ValidationError({"eps_stop": "ε 격자는 최소 두 자릿수를 포함해야 합니다."})
        return attrs


class OutputSerializer(StrictFieldsMixin, serializers.Serializer):
    dir = serializers.CharField()
    format = serializers.ChoiceField(choices=OUTPUT_FORMATS)


class ExperimentConfigSerializer(StrictFieldsMixin, serializers.Serializer):
    """실험 설정 검증용 Serializer

    기본값, 설정 파일, 명령행 플래그를 병합한 dict 를 받아 검증합니다.
    """

    command = serializers.ChoiceField(choices=COMMANDS)
    schemes = serializers.ListField(child=serializers.ChoiceField(choices=sorted(SCHEMES)), allow_empty=False)
    constellation = serializers.CharField()
    snr = SnrGridSerializer()
    trials = TrialPolicySerializer()
    diversity = DiversitySerializer()
    seed = serializers.IntegerField(min_value=0)
    workers = serializers.IntegerField(min_value=1)
    noise_variance = serializers.FloatField(min_value=0.0)
    output = OutputSerializer()

    def validate_constellation(self, value):
        """성상도 이름을 표준 이름으로 바꿉니다.

        Raises:
            serializers.ValidationError: 지원하지 않는 성상도
        """
        try:
            return get_constellation(value).name
        except ConfigurationError as e:
            raise serializers.ValidationError(str(e))

    def validate_schemes(self, value):
        if len(set(value)) != len(value):
            raise serializers.ValidationError("같은 방식이 중복되었습니다.")
        return value

    def validate(self, attrs):
        """방식과 성상도 조합을 검증합니다.

        IBC 방식은 PSK 계열 성상도만 지원합니다.
        """
        for scheme in attrs["schemes"]:
            try:
                validate_pairing(scheme, attrs["constellation"])
            except ConfigurationError as e:
                raise serializers.ValidationError({"constellation": str(e)})
        return attrs


def flatten_errors(detail, prefix: str = "") -> Dict[str, List[str]]:
    """중첩된 serializer 오류를 필드 경로 -> 메시지 목록으로 펼침

    예: {"snr": {"step_db": ["..."]}} -> {"snr.step_db": ["..."]}
    """
    flat: Dict[str, List[str]] = {}

    def add(path, messages):
        flat.setdefault(path, []).extend(messages)

    if isinstance(detail, dict):
        for key, value in detail.items():
            if key == api_settings.NON_FIELD_ERRORS_KEY:
                path = prefix or key
            else:
                path = f"{prefix}.{key}" if prefix else str(key)
            for sub_path, messages in flatten_errors(value, path).items():
                add(sub_path, messages)
    elif isinstance(detail, list):
        for item in detail:
            if isinstance(item, (dict, list)):
                for sub_path, messages in flatten_errors(item, prefix).items():
                    add(sub_path, messages)
            else:
                add(prefix or api_settings.NON_FIELD_ERRORS_KEY, [str(item)])
    else:
        add(prefix or api_settings.NON_FIELD_ERRORS_KEY, [str(detail)])
    return flat


def format_errors(flat: Dict[str, List[str]]) -> str:
    return "; ".join(f"{path}: {message}" for path, messages in flat.items() for message in messages)
