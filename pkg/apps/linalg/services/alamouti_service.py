"""Alamouti 구조 생성자와 판별 함수

Alamouti:         [[a, b], [-b*, a*]]
swapped Alamouti: [[a, b], [ b*, -a*]]  (Alamouti 행렬의 두 열을 바꾼 형태)

Alamouti 행렬 집합은 덧셈과 곱셈에 닫혀 있고, Alamouti 와 swapped Alamouti 의 곱은
swapped Alamouti 입니다. 임의의 2x2 행렬은 두 성분의 합으로 유일하게 분해됩니다.
"""

import numpy as np


def _check_2x2(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim < 2 or M.shape[-2:] != (2, 2):
        raise ValueError(f"2x2 행렬이 필요합니다: shape={M.shape}")
    return M


def alamouti_embed(a, b) -> np.ndarray:
    """[[a, b], [-b*, a*]] 생성 (배치 지원)"""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    top = np.stack(np.broadcast_arrays(a, b), axis=-1)
    bottom = np.stack(np.broadcast_arrays(-np.conj(b), np.conj(a)), axis=-1)
    return np.stack([top, bottom], axis=-2)


def swapped_alamouti_embed(a, b) -> np.ndarray:
    """[[a, b], [b*, -a*]] 생성 (배치 지원)"""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    top = np.stack(np.broadcast_arrays(a, b), axis=-1)
    bottom = np.stack(np.broadcast_arrays(np.conj(b), -np.conj(a)), axis=-1)
    return np.stack([top, bottom], axis=-2)


def alamouti_residual(M: np.ndarray) -> np.ndarray:
    """Alamouti 조건 위반량 max(|M22 - M11*|, |M21 + M12*|)"""
    M = _check_2x2(M)
    return np.maximum(
        np.abs(M[..., 1, 1] - np.conj(M[..., 0, 0])),
        np.abs(M[..., 1, 0] + np.conj(M[..., 0, 1])),
    )


def swapped_alamouti_residual(M: np.ndarray) -> np.ndarray:
    """swapped Alamouti 조건 위반량 max(|M21 - M12*|, |M22 + M11*|)"""
    M = _check_2x2(M)
    return np.maximum(
        np.abs(M[..., 1, 0] - np.conj(M[..., 0, 1])),
        np.abs(M[..., 1, 1] + np.conj(M[..., 0, 0])),
    )


def is_alamouti(M: np.ndarray, tol: float = 1e-10) -> bool:
    """모든 배치 원소가 Alamouti 구조인지 판별

    Raises:
        ValueError: 2x2 가 아닌 입력
    """
    return bool(np.all(alamouti_residual(M) <= tol))


def is_swapped_alamouti(M: np.ndarray, tol: float = 1e-10) -> bool:
    """모든 배치 원소가 swapped Alamouti 구조인지 판별"""
    return bool(np.all(swapped_alamouti_residual(M) <= tol))


def alamouti_part(M: np.ndarray) -> np.ndarray:
    """M 의 Alamouti 성분 (나머지는 swapped Alamouti 성분)"""
    M = _check_2x2(M)
    p = (M[..., 0, 0] + np.conj(M[..., 1, 1])) / 2
    q = (M[..., 0, 1] - np.conj(M[..., 1, 0])) / 2
    return alamouti_embed(p, q)


def alamouti_extract(W: np.ndarray) -> np.ndarray:
    """두 시간 슬롯 창에서 Alamouti 성분을 뽑아내는 결합

    (w11 + w22*, w12 - w21*) 를 반환합니다. swapped Alamouti 창은 0 이 되고
    Alamouti 창 [[p, q], [-q*, p*]] 는 (2p, 2q) 가 됩니다.

    Args:
        W: (..., 2, 2) 수신 창 (행 = 시간 슬롯)

    Returns:
        (..., 2) 결합 결과
    """
    W = _check_2x2(W)
    return np.stack(
        [W[..., 0, 0] + np.conj(W[..., 1, 1]), W[..., 0, 1] - np.conj(W[..., 1, 0])],
        axis=-1,
    )
