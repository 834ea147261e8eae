import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from apps.common.exceptions import ConfigurationError, VerificationFailed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_IO = 3


@dataclass(frozen=True)
class CommandResult:
    """관리 명령 실행 결과

    종료 코드와 사용자에게 보여줄 메시지를 함께 담습니다.
    """

    message: str = ""
    data: Dict[str, Any] = field(default_factory=dict)
    exit_code: int = EXIT_OK

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_OK

    @classmethod
    def success(cls, message: str = "실행이 완료되었습니다.", data: Optional[Dict[str, Any]] = None):
        """정상 종료 (0)"""
        return cls(message=message, data=data or {}, exit_code=EXIT_OK)

    @classmethod
    def invalid_config(cls, message: str = "설정이 올바르지 않습니다.", data: Optional[Dict[str, Any]] = None):
        """설정 파싱/검증 실패 (2)"""
        return cls(message=message, data=data or {}, exit_code=EXIT_CONFIG)

    @classmethod
    def io_error(cls, message: str = "파일 입출력에 실패했습니다.", data: Optional[Dict[str, Any]] = None):
        """입출력 실패 (3)"""
        return cls(message=message, data=data or {}, exit_code=EXIT_IO)

    @classmethod
    def verification_failed(cls, message: str = "검증에 실패했습니다.", data: Optional[Dict[str, Any]] = None):
        """검증 항목 실패 (1)"""
        return cls(message=message, data=data or {}, exit_code=EXIT_FAILURE)

    @classmethod
    def server_error(cls, message: str = "예상치 못한 오류가 발생했습니다.", data: Optional[Dict[str, Any]] = None):
        """예상치 못한 오류 (1)"""
        if data is None:
            data = {"error": "An unexpected error occurred"}
        return cls(message=message, data=data, exit_code=EXIT_FAILURE)

    @classmethod
    def from_exception(cls, exception: Exception, message: Optional[str] = None, log_error: bool = True):
        """예외를 받아서 적절한 종료 코드의 결과를 생성

        예상치 못한 예외는 스택 트레이스와 함께 로그로만 자세히 기록합니다.
        """
        # 설정 오류는 필드 경로별 메시지를 그대로 전달
        if isinstance(exception, ConfigurationError):
            if log_error:
                logger.warning(f"Configuration error: {exception} errors={exception.errors}")
            return cls.invalid_config(message=message or str(exception), data={"errors": exception.errors})

        # DRF ValidationError 는 detail 속성을 가짐
        elif exception.__class__.__name__ == "ValidationError":
            error_detail = getattr(exception, "detail", str(exception))
            if log_error:
                logger.warning(f"Validation error: {error_detail}")
            return cls.invalid_config(
                message=message or "설정 검증에 실패했습니다.",
                data=(error_detail if isinstance(error_detail, dict) else {"error": str(error_detail)}),
            )

        elif isinstance(exception, VerificationFailed):
            if log_error:
                logger.warning(f"Verification failed: failures={exception.failures}")
            return cls.verification_failed(message=message or str(exception), data={"failures": exception.failures})

        elif isinstance(exception, OSError):
            if log_error:
                logger.error(f"I/O error: {exception.__class__.__name__}: {exception}")
            return cls.io_error(
                message=message or f"파일 입출력에 실패했습니다: {exception}",
                data={"error": str(exception)},
            )

        if log_error:
            logger.error(
                f"Unexpected error: {exception.__class__.__name__}: {str(exception)}",
                exc_info=True,
            )
        return cls.server_error(message=message or f"예상치 못한 오류가 발생했습니다: {exception.__class__.__name__}")

    @classmethod
    def handle(cls, func):
        """데코레이터로 사용하여 예외를 CommandResult 로 변환"""

        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except Exception as e:
                return cls.from_exception(e)

        return wrapper
