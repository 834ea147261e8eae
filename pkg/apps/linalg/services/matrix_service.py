"""소형 복소 행렬 연산

모든 함수는 마지막 두 축을 행렬로 보고 앞쪽 축은 배치로 브로드캐스트합니다.
2x2 역행렬과 고유값 분해는 닫힌 형태로 계산합니다.
"""

import logging
from dataclasses import dataclass

import numpy as np

from apps.common.exceptions import DegenerateEigenvalues, SingularMatrix

logger = logging.getLogger(__name__)

COND_LIMIT = 1e12
EIG_GAP = 1e-12


def herm(M: np.ndarray) -> np.ndarray:
    """켤레 전치"""
    return np.conj(np.swapaxes(M, -1, -2))


def frob_norm2(M: np.ndarray) -> np.ndarray:
    """프로베니우스 노름의 제곱"""
    return np.sum(np.abs(M) ** 2, axis=(-2, -1))


def frob_norm(M: np.ndarray) -> np.ndarray:
    return np.sqrt(frob_norm2(M))


def vecm(M: np.ndarray) -> np.ndarray:
    """열 단위로 쌓은 벡터 (vec 연산)"""
    M = np.asarray(M)
    return np.swapaxes(M, -1, -2).reshape(M.shape[:-2] + (-1,))


def kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.kron(A, B)


def kron_eye3(G: np.ndarray) -> np.ndarray:
    """I3 ⊗ G 를 배치 단위로 생성

    Args:
        G: (..., 2, 2) 행렬

    Returns:
        (..., 6, 6) 블록 대각 행렬
    """
    G = np.asarray(G)
    out = np.zeros(G.shape[:-2] + (6, 6), dtype=np.result_type(G, np.complex128))
    for t in range(3):
        out[..., 2 * t : 2 * t + 2, 2 * t : 2 * t + 2] = G
    return out


def apply_per_slot(K: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(I3 ⊗ K) v 를 크로네커 행렬 없이 계산

    Args:
        K: (..., 2, 2)
        v: (..., 6, n)
    """
    blocks = v.reshape(v.shape[:-2] + (3, 2, v.shape[-1]))
    out = K[..., None, :, :] @ blocks
    return out.reshape(out.shape[:-3] + (6, v.shape[-1]))


def det2(M: np.ndarray) -> np.ndarray:
    return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]


def _adjugate2(M: np.ndarray) -> np.ndarray:
    adj = np.empty_like(M, dtype=np.result_type(M, np.complex128))
    adj[..., 0, 0] = M[..., 1, 1]
    adj[..., 0, 1] = -M[..., 0, 1]
    adj[..., 1, 0] = -M[..., 1, 0]
    adj[..., 1, 1] = M[..., 0, 0]
    return adj


def condition2(M: np.ndarray) -> np.ndarray:
    """2x2 조건수 추정값 ‖M‖_F·‖M⁻¹‖_F (특이 행렬은 inf)

    2x2 에서는 ‖M⁻¹‖_F = ‖M‖_F / |det M| 이므로 ‖M‖_F² / |det M| 로 계산합니다.
    """
    det = np.abs(det2(M))
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = frob_norm2(M) / det
    return np.where(np.isfinite(cond), cond, np.inf)


def is_conditioned2(M: np.ndarray, cond_limit: float = COND_LIMIT) -> np.ndarray:
    """역행렬 계산 가능 여부 마스크"""
    return condition2(M) < cond_limit


def inverse2(M: np.ndarray, cond_limit: float = COND_LIMIT, check: bool = True) -> np.ndarray:
    """닫힌 형태의 2x2 역행렬

    Args:
        M: (..., 2, 2) 행렬
        cond_limit: 허용 조건수 상한
        check: False 면 검사 없이 계산 (조건 검사 마스크 계산용)

    Returns:
        (..., 2, 2) 역행렬

    Raises:
        SingularMatrix: 하나라도 조건수 상한을 넘는 경우
    """
    M = np.asarray(M)
    if M.shape[-2:] != (2, 2):
        raise ValueError(f"inverse2 는 2x2 행렬만 지원합니다: shape={M.shape}")

    if not check:
        with np.errstate(divide="ignore", invalid="ignore"):
            return _adjugate2(M) / det2(M)[..., None, None]

    ok = is_conditioned2(M, cond_limit)
    if not np.all(ok):
        bad = int(np.size(ok) - np.count_nonzero(ok))
        logger.debug(f"inverse2 rejected ill-conditioned input: count={bad}")
        raise SingularMatrix(f"조건수가 {cond_limit:g} 이상인 행렬이 {bad}개 있습니다.")

    return _adjugate2(M) / det2(M)[..., None, None]


def svd_smallest(M: np.ndarray) -> np.ndarray:
    """최소 특이값"""
    return np.linalg.svd(M, compute_uv=False)[..., -1]


def null_projector(O: np.ndarray) -> np.ndarray:
    """열공간 span(O) 의 직교 보공간으로의 사영 행렬

    Args:
        O: (..., n, m) 열들이 선형 독립인 행렬

    Returns:
        (..., n, n) 사영 행렬 I - O (O* O)⁻¹ O*
    """
    gram = herm(O) @ O
    coeff = np.linalg.solve(gram, herm(O))
    eye = np.eye(O.shape[-2], dtype=np.complex128)
    return eye - O @ coeff


def quad_form(v: np.ndarray, M: np.ndarray) -> np.ndarray:
    """실수부 v* M v (v 는 (..., n))"""
    return np.real(np.einsum("...i,...ij,...j->...", np.conj(v), M, v))


@dataclass(frozen=True)
class Eig2:
    """2x2 고유값 분해 결과 (|λ1| ≥ |λ2| 정렬, 단위 노름 고유벡터)"""

    lambda1: np.ndarray
    lambda2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray

    @property
    def kappa(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.lambda1 / self.lambda2

    @property
    def u(self) -> np.ndarray:
        """[u1 u2] 를 열로 갖는 (..., 2, 2) 행렬"""
        return np.stack([self.u1, self.u2], axis=-1)


def _comes_first(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    ax, ay = np.abs(x), np.abs(y)
    tie = np.isclose(ax, ay, rtol=1e-12, atol=0.0)
    real_tie = np.isclose(x.real, y.real, rtol=1e-12, atol=1e-15)
    by_real = np.where(real_tie, x.imag >= y.imag, x.real > y.real)
    return np.where(tie, by_real, ax > ay)


def _eigvec(A: np.ndarray, lam: np.ndarray) -> np.ndarray:
    a, b = A[..., 0, 0], A[..., 0, 1]
    c, d = A[..., 1, 0], A[..., 1, 1]
    first = np.stack([b, lam - a], axis=-1)
    second = np.stack([lam - d, c], axis=-1)
    use_first = np.asarray(np.linalg.norm(first, axis=-1) >= np.linalg.norm(second, axis=-1))
    v = np.where(use_first[..., None], first, second)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)

    # 절댓값이 가장 큰 성분을 양의 실수로 맞춤
    pivot = np.take_along_axis(v, np.asarray(np.argmax(np.abs(v), axis=-1))[..., None], axis=-1)
    return v * (np.conj(pivot) / np.abs(pivot))


def eig_gap_ok(A: np.ndarray, gap: float = EIG_GAP) -> np.ndarray:
    """두 고유값이 충분히 떨어져 있는지 여부 마스크"""
    a, d = A[..., 0, 0], A[..., 1, 1]
    disc = np.sqrt((a - d) ** 2 + 4 * A[..., 0, 1] * A[..., 1, 0])
    return np.abs(disc) > gap * frob_norm(A)


def eig2x2(A: np.ndarray, gap: float = EIG_GAP) -> Eig2:
    """닫힌 형태의 2x2 고유값 분해

    정렬 규칙: |λ1| ≥ |λ2|, 크기가 같으면 실수부가 큰 쪽, 그다음 허수부가 큰 쪽이 먼저입니다.

    Args:
        A: (..., 2, 2) 행렬
        gap: |λ1 - λ2| > gap·‖A‖_F 를 요구하는 상대 간격

    Returns:
        Eig2

    Raises:
        DegenerateEigenvalues: 고유값 간격이 너무 작은 경우
    """
    A = np.asarray(A, dtype=np.complex128)
    if A.shape[-2:] != (2, 2):
        raise ValueError(f"eig2x2 는 2x2 행렬만 지원합니다: shape={A.shape}")

    if not np.all(eig_gap_ok(A, gap)):
        raise DegenerateEigenvalues("고유값이 서로 구분되지 않습니다.")

    a, d = A[..., 0, 0], A[..., 1, 1]
    disc = np.sqrt((a - d) ** 2 + 4 * A[..., 0, 1] * A[..., 1, 0])
    plus = (a + d + disc) / 2
    minus = (a + d - disc) / 2
    # 작은 근은 det / 큰 근 으로 계산 (뺄셈 상쇄 방지)
    plus_big = np.abs(plus) >= np.abs(minus)
    with np.errstate(divide="ignore", invalid="ignore"):
        plus = np.where(plus_big, plus, det2(A) / minus)
        minus = np.where(plus_big, det2(A) / plus, minus)

    first = _comes_first(plus, minus)
    lambda1 = np.where(first, plus, minus)
    lambda2 = np.where(first, minus, plus)

    return Eig2(lambda1=lambda1, lambda2=lambda2, u1=_eigvec(A, lambda1), u2=_eigvec(A, lambda2))
