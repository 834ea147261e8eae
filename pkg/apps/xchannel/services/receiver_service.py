"""Alamouti 정렬 수신기

수신기 i 의 처리 순서:

1. x_receive_stack: 3x2 블록을 6 벡터 ỹ 로 쌓음 (수신기 1 은 슬롯 순서를 뒤집어 같은 구조로 만듦)
2. x_cancel_aligned: 정렬된 간섭 I_1, I_2 를 두 번의 덧셈/뺄셈으로 제거
3. x_decouple_users: 두 송신기 신호를 분리, 등가 채널은 Alamouti 구조
4. x_ml_decode: 심볼 단위 검출
"""

import logging

import numpy as np

from apps.fading.services.constellation_service import Constellation, demodulate_nearest
from apps.linalg.services.matrix_service import frob_norm2, herm
from apps.xchannel.services.beamforming_service import SCALE, hat_blocks

logger = logging.getLogger(__name__)

# 간섭 제거 후 등가 잡음 공분산
NOISE_DIAG = np.array([1.0, 2.0, 1.0, 2.0])


def x_receive_stack(Y: np.ndarray, i: int) -> np.ndarray:
    """ỹ = (Y[0,0], Y[1,0]*, Y[2,0], Y[0,1], Y[1,1]*, Y[2,1])

    Args:
        Y: (..., 3, 2) 수신 블록
        i: 수신기 인덱스 (1 이면 슬롯 순서를 뒤집어서 적용)

    Returns:
        (..., 6) 쌓은 벡터
    """
    Y = np.asarray(Y, dtype=np.complex128)
    if i == 1:
        Y = Y[..., ::-1, :]
    elif i != 0:
        raise ValueError(f"수신기 인덱스는 0 또는 1 이어야 합니다: {i}")
    return np.stack(
        [Y[..., 0, 0], np.conj(Y[..., 1, 0]), Y[..., 2, 0], Y[..., 0, 1], np.conj(Y[..., 1, 1]), Y[..., 2, 1]],
        axis=-1,
    )


def x_stack_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """ỹ = √(3/4) M (s₀₁, s₀₂, s₁₁, s₁₂, I₁, I₂) 를 만족하는 M

    Args:
        A: (..., 2, 2) 송신기 0 의 등가 채널 H̃[0, i]
        B: (..., 2, 2) 송신기 1 의 등가 채널 H̃[1, i]

    Returns:
        (..., 6, 6) 행렬 (√(3/4) 는 곱하지 않음)
    """
    A = np.asarray(A, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    M = np.zeros(np.broadcast_shapes(A.shape, B.shape)[:-2] + (6, 6), dtype=np.complex128)
    for col, X in ((0, A), (2, B)):
        for n, row in ((0, 0), (1, 3)):
            M[..., row, col] = X[..., 0, n]
            M[..., row, col + 1] = X[..., 1, n]
            M[..., row + 1, col] = np.conj(X[..., 1, n])
            M[..., row + 1, col + 1] = -np.conj(X[..., 0, n])
    M[..., 1, 5] = -1
    M[..., 2, 4] = 1
    M[..., 4, 4] = 1
    M[..., 5, 5] = 1
    return M


def aligned_interference(frame_s: np.ndarray, c: np.ndarray, i: int) -> np.ndarray:
    """수신기 i 에서 정렬된 간섭 심볼 I_k = Σ_j c[j, ī] s[j, ī, k]

    Args:
        frame_s: (N, 2, 2, 2) 심볼
        c: (N, 2, 2) 빔포머 정규화 상수
        i: 수신기 인덱스

    Returns:
        (N, 2)
    """
    other = 1 - i
    return np.sum(c[:, :, other, None] * frame_s[:, :, other, :], axis=1)


def x_cancel_aligned(y_stack: np.ndarray):
    """ŷ1 = (ỹ₀, ỹ₁ + ỹ₅), ŷ2 = (ỹ₃, ỹ₄ - ỹ₂)

    Returns:
        (ŷ1, ŷ2): 각각 (..., 2)
    """
    y_stack = np.asarray(y_stack)
    y1 = np.stack([y_stack[..., 0], y_stack[..., 1] + y_stack[..., 5]], axis=-1)
    y2 = np.stack([y_stack[..., 3], y_stack[..., 4] - y_stack[..., 2]], axis=-1)
    return y1, y2


def x_decouple_users(y1: np.ndarray, y2: np.ndarray, own_hat: np.ndarray, other_hat: np.ndarray):
    """다른 송신기 신호를 제거하고 원하는 송신기만 남김

    ŷ = Ĥ_o0* ŷ1 / n0 - Ĥ_o1* ŷ2 / n1,  n_m = ‖Ĥ_om‖_F²

    Ĥ_om* Ĥ_om / n_m = I/2 이므로 다른 송신기 항은 정확히 상쇄됩니다.

    Args:
        y1, y2: (..., 2) 간섭 제거 결과
        own_hat: (..., 2, 2, 2) 원하는 송신기의 Ĥ 블록
        other_hat: (..., 2, 2, 2) 다른 송신기의 Ĥ 블록

    Returns:
        (ŷ, Ĥ): (..., 2), (..., 2, 2) Alamouti 구조
    """
    n = frob_norm2(other_hat)
    w0 = herm(other_hat[..., 0, :, :]) / n[..., 0, None, None]
    w1 = herm(other_hat[..., 1, :, :]) / n[..., 1, None, None]
    y = np.einsum("...rc,...c->...r", w0, y1) - np.einsum("...rc,...c->...r", w1, y2)
    H = w0 @ own_hat[..., 0, :, :] - w1 @ own_hat[..., 1, :, :]
    return y, H


def x_ml_decode(y: np.ndarray, H: np.ndarray, constellation: Constellation, power: float):
    """심볼 단위 정합 필터 검출

    z_k = ĥ_k* ŷ / (√(3/4) ‖ĥ_k‖²) 에 가장 가까운 성상점을 고릅니다. PSK 에서는
    argmax Re(ĥ_k* ŷ s*) 와 같은 결정입니다.

    Returns:
        (symbols, bits): (..., 2), (..., 2, bits_per_symbol)
    """
    z = np.einsum("...rk,...r->...k", np.conj(H), y)
    gain = np.sum(np.abs(H) ** 2, axis=-2)
    return demodulate_nearest(z / (SCALE * gain), constellation, power)


class XReceiverService:
    """X 채널 수신 파이프라인"""

    @staticmethod
    def decode_receiver(Y_i: np.ndarray, i: int, Ht_i: np.ndarray, constellation: Constellation, power: float):
        """수신기 i 가 두 송신기의 심볼을 모두 검출

        Args:
            Y_i: (N, 3, 2) 수신 블록
            i: 수신기 인덱스
            Ht_i: (N, 2, 2, 2) 수신기 i 에서의 등가 채널 H̃[j, i]

        Returns:
            (symbols, bits): (N, 2, 2) [j, k], (N, 2, 2, bits_per_symbol)
        """
        y1, y2 = x_cancel_aligned(x_receive_stack(Y_i, i))
        hats = hat_blocks(Ht_i)
        symbols, bits = [], []
        for j in range(2):
            y, H = x_decouple_users(y1, y2, hats[:, j], hats[:, 1 - j])
            sym, b = x_ml_decode(y, H, constellation, power)
            symbols.append(sym)
            bits.append(b)
        return np.stack(symbols, axis=1), np.stack(bits, axis=1)

    @staticmethod
    def decode(Y: np.ndarray, Ht: np.ndarray, constellation: Constellation, power: float):
        """두 수신기 모두 검출

        Args:
            Y: (N, 2, 3, 2) 수신 블록
            Ht: (N, 2, 2, 2, 2) 등가 채널

        Returns:
            (symbols, bits): (N, 2, 2, 2) [j, i, k], (N, 2, 2, 2, bits_per_symbol) SymbolFrame 과 같은 축 순서
        """
        symbols, bits = [], []
        for i in range(2):
            sym, b = XReceiverService.decode_receiver(Y[:, i], i, Ht[:, :, i], constellation, power)
            symbols.append(sym)
            bits.append(b)
        return np.stack(symbols, axis=2), np.stack(bits, axis=2)
