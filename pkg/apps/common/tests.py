import logging

from django.test import SimpleTestCase
from rest_framework import serializers

from apps.common.exceptions import ConfigurationError, SingularMatrix, VerificationFailed
from apps.common.logging import RunContextFilter, get_run_id, set_run_id
from apps.common.responses import EXIT_CONFIG, EXIT_FAILURE, EXIT_IO, EXIT_OK, CommandResult


class CommandResultTestCase(SimpleTestCase):
    """예외 -> 종료 코드 매핑 테스트"""

    def test_success(self):
        """정상 종료는 0"""
        result = CommandResult.success(data={"rows": 3})
        self.assertEqual(result.exit_code, EXIT_OK)
        self.assertTrue(result.ok)

    def test_configuration_error(self):
        """설정 오류는 2, 필드 경로 전달"""
        error = ConfigurationError("snr.step_db: 0보다 커야 합니다.", {"snr.step_db": ["0보다 커야 합니다."]})
        result = CommandResult.from_exception(error, log_error=False)
        self.assertEqual(result.exit_code, EXIT_CONFIG)
        self.assertIn("snr.step_db", result.data["errors"])

    def test_drf_validation_error(self):
        """DRF ValidationError 도 2"""
        result = CommandResult.from_exception(serializers.ValidationError({"seed": ["정수"]}), log_error=False)
        self.assertEqual(result.exit_code, EXIT_CONFIG)
        self.assertIn("seed", result.data)

    def test_io_error(self):
        """OSError 는 3"""
        result = CommandResult.from_exception(PermissionError("denied"), log_error=False)
        self.assertEqual(result.exit_code, EXIT_IO)

    def test_verification_failed(self):
        """검증 실패는 1, 실패 항목 나열"""
        result = CommandResult.from_exception(VerificationFailed(["phi_inverse_determinant"]), log_error=False)
        self.assertEqual(result.exit_code, EXIT_FAILURE)
        self.assertEqual(result.data["failures"], ["phi_inverse_determinant"])
        self.assertIn("phi_inverse_determinant", result.message)

    def test_unexpected_error(self):
        """그 외 예외는 1 이고 로그에 스택 트레이스"""
        with self.assertLogs("apps.common.responses", level="ERROR"):
            result = CommandResult.from_exception(SingularMatrix("det = 0"))
        self.assertEqual(result.exit_code, EXIT_FAILURE)

    def test_handle_decorator(self):
        """데코레이터는 예외를 결과로 변환"""

        @CommandResult.handle
        def broken():
            raise ConfigurationError("잘못된 설정")

        self.assertEqual(broken().exit_code, EXIT_CONFIG)


class RunContextFilterTestCase(SimpleTestCase):
    """로그 필터 테스트"""

    def tearDown(self):
        set_run_id("")

    def _record(self, msg):
        return logging.LogRecord("apps.test", logging.INFO, __file__, 1, msg, None, None)

    def test_stamps_run_id(self):
        """레코드에 현재 실행 ID 부착"""
        set_run_id("ber-0-abc")
        record = self._record("BER point done")
        self.assertTrue(RunContextFilter().filter(record))
        self.assertEqual(record.run_id, "ber-0-abc")

    def test_empty_run_id(self):
        """빈 실행 ID 는 '-'"""
        set_run_id("")
        self.assertEqual(get_run_id(), "-")

    def test_compacts_long_arrays(self):
        """긴 배열 표현은 요약"""
        msg = "gamma=array([" + ", ".join(["0.12345678"] * 40) + "])"
        record = self._record(msg)
        RunContextFilter().filter(record)
        self.assertEqual(record.msg, "gamma=array([...])")
