import logging
import re

_run_id = "-"


def set_run_id(run_id: str) -> None:
    """현재 실행 ID 설정 (러너가 실행 시작 시 호출)"""
    global _run_id
    _run_id = run_id or "-"


def get_run_id() -> str:
    return _run_id


class RunContextFilter(logging.Filter):
    """실행 컨텍스트 필터

    모든 로그 레코드에 run_id 속성을 붙이고, 메시지에 섞여 들어온 긴 numpy 배열 표현을
    요약 문자열로 줄입니다.
    """

    ARRAY_PATTERN = re.compile(r"array\(\[[^\]]{80,}\][^)]*\)", re.DOTALL)

    def filter(self, record):
        """로그 레코드 필터링

        Args:
            record: 로그 레코드

        Returns:
            bool: 항상 True (로그를 출력하되 내용만 정리)
        """
        record.run_id = _run_id

        if hasattr(record, "msg") and isinstance(record.msg, str) and "array([" in record.msg:
            record.msg = self.ARRAY_PATTERN.sub("array([...])", record.msg)

        return True
