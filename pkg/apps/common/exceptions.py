"""시뮬레이터 공통 예외

모든 도메인 예외는 ValueError 를 상속합니다. 호출자는 ValueError 로 한 번에 잡을 수 있고,
CommandResult.from_exception 은 타입별로 종료 코드를 구분합니다.
"""


class SingularMatrix(ValueError):
    """역행렬 계산 실패 (조건수 한계 초과 또는 행렬식 0)"""


class DegenerateEigenvalues(ValueError):
    """2x2 행렬의 두 고유값이 사실상 같은 경우"""


class ConditioningError(ValueError):
    """채널 조건 검사를 재샘플링 한도 안에서 통과하지 못한 경우"""


class InsufficientData(ValueError):
    """기울기 추정 등에 필요한 데이터 포인트가 부족한 경우"""


class ConfigurationError(ValueError):
    """실험 설정 파싱/검증 실패

    Attributes:
        errors: 필드 경로 -> 메시지 목록 (예: {"snr.step_db": ["..."]})
    """

    def __init__(self, message: str, errors: dict | None = None):
        super().__init__(message)
        self.errors = errors or {}


class UnknownConstellation(ConfigurationError):
    """지원하지 않는 변조 방식 이름"""


class VerificationFailed(Exception):
    """검증 항목 중 하나 이상이 실패한 경우

    Attributes:
        failures: 실패한 검증 항목 이름 목록
    """

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__(f"검증 실패 {len(self.failures)}건: {', '.join(self.failures)}")
