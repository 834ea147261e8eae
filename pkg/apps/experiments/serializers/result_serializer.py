from rest_framework import serializers

CSV_COLUMNS = ("scheme", "constellation", "snr_db", "metric_name", "value", "ci_halfwidth", "trials", "seed")


class ResultRowSerializer(serializers.Serializer):
    """결과 행 출력용 Serializer

    필드 순서가 곧 CSV 열 순서입니다. 열을 바꾸면 SCHEMA_VERSION 을 올려야 합니다.
    """

    scheme = serializers.CharField()
    constellation = serializers.CharField()
    snr_db = serializers.FloatField(allow_null=True)
    metric_name = serializers.CharField()
    value = serializers.FloatField()
    ci_halfwidth = serializers.FloatField(allow_null=True)
    trials = serializers.IntegerField()
    seed = serializers.IntegerField()


class VerificationReportSerializer(serializers.Serializer):
    name = serializers.CharField()
    passed = serializers.BooleanField()
    statistic = serializers.FloatField()
    criterion = serializers.CharField()
    details = serializers.DictField()
