"""하향링크 IA 기준 방식 (랜덤 프리코더 + 영강제)

수신 열 형태로 세 슬롯을 쌓은 6차원 공간에서 동작합니다. 두 기지국은 같은 랜덤 프리코더
P ∈ C^{6x4} 로 네 스트림을 보냅니다. 단말 (j, i) 는 (I₃ ⊗ I^{[ji]ᵀ}) P 의 왼쪽 영공간에서
정규직교 행 두 개로 된 u^{[ji]} 를 골라 다른 셀 간섭을 제거하고, 기지국 j 는 4x4 영강제
B^{[j]} 로 셀 내부 간섭을 제거합니다.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from apps.common.exceptions import ConditioningError
from apps.fading.services.channel_service import MAX_RESAMPLES, ChannelSetCell, crandn
from apps.fading.services.constellation_service import Constellation, SymbolFrame, demodulate_nearest
from apps.fading.services.noise_service import add_awgn
from apps.linalg.services.matrix_service import COND_LIMIT, apply_per_slot, herm
from apps.xchannel.services.snr_service import SnrSample

logger = logging.getLogger(__name__)

STREAM_POWER = 3 / 4


@dataclass(frozen=True)
class DownlinkIaPrecoders:
    """기준 방식 송수신 빔포머

    Attributes:
        Prand: (N, 6, 4) 랜덤 프리코더
        B: (N, 2, 4, 4) 기지국별 영강제 프리코더
        u: (N, 2, 2, 2, 6) 단말별 수신 빔포머 (정규직교 행)
        d: (N, 2, 4) 스트림별 진폭 (γ = d²)
    """

    Prand: np.ndarray
    B: np.ndarray
    u: np.ndarray
    d: np.ndarray


def left_null_rows(M: np.ndarray) -> np.ndarray:
    """(..., 6, 4) 열공간에 직교하는 정규직교 행 두 개 (..., 2, 6)"""
    U, _, _ = np.linalg.svd(M, full_matrices=True)
    return herm(U[..., :, 4:])


def left_null_rows_reference(M: np.ndarray) -> np.ndarray:
    """scipy 로 다시 계산한 왼쪽 영공간 (배치마다 반복, 검증용)"""
    return np.stack([herm(null_space(herm(m))) for m in M.reshape((-1,) + M.shape[-2:])]).reshape(
        M.shape[:-2] + (2, 6)
    )


def _interference_columns(ch: ChannelSetCell, Prand: np.ndarray) -> np.ndarray:
    """(N, 2, 2, 6, 4) (I₃ ⊗ I^{[ji]ᵀ}) P"""
    It = np.swapaxes(ch.I, -1, -2)
    return apply_per_slot(It, Prand[:, None, None])


def _effective_matrix(ch: ChannelSetCell, Prand: np.ndarray, u: np.ndarray) -> np.ndarray:
    """(N, 2, 4, 4) E^{[j]} = [u^{[j0]} (I₃⊗H^{[j0]ᵀ}) P; u^{[j1]} (I₃⊗H^{[j1]ᵀ}) P]"""
    Ht = np.swapaxes(ch.H, -1, -2)
    desired = u @ apply_per_slot(Ht, Prand[:, None, None])
    return desired.reshape(desired.shape[:2] + (4, 4))


def precoder_gate(ch: ChannelSetCell, Prand: np.ndarray, cond_limit: float = COND_LIMIT) -> np.ndarray:
    """영강제 단계가 계산 가능한지 검사하는 (N,) 마스크"""
    u = left_null_rows(_interference_columns(ch, Prand))
    E = _effective_matrix(ch, Prand, u)
    return np.all(np.linalg.cond(E) < cond_limit, axis=-1)


def draw_random_precoder(
    rng: np.random.Generator,
    ch: ChannelSetCell,
    cond_limit: float = COND_LIMIT,
    max_resamples: int = MAX_RESAMPLES,
) -> np.ndarray:
    """CN(0, 1) 랜덤 프리코더, 영강제 조건을 만족할 때까지 다시 뽑음

    Raises:
        ConditioningError: 한도 안에서 조건을 만족하지 못한 경우
    """
    Prand = crandn(rng, (ch.size, 6, 4))
    ok = precoder_gate(ch, Prand, cond_limit)
    rounds = 0
    while not np.all(ok):
        if rounds >= max_resamples:
            raise ConditioningError(f"{max_resamples}회 재샘플링 후에도 랜덤 프리코더가 조건을 만족하지 못했습니다.")
        bad = np.flatnonzero(~ok)
        Prand[bad] = crandn(rng, (bad.size, 6, 4))
        sub = ChannelSetCell(H=ch.H[bad], I=ch.I[bad])
        ok[bad] = precoder_gate(sub, Prand[bad], cond_limit)
        rounds += 1
    return Prand


class DownlinkIaService:
    """하향링크 IA 기준 방식 서비스"""

    @staticmethod
    def downlink_ia_precoders(ch: ChannelSetCell, Prand: np.ndarray) -> DownlinkIaPrecoders:
        """수신 빔포머 u, 영강제 B = E⁻¹ diag(d), 스트림 전력 3P/4"""
        u = left_null_rows(_interference_columns(ch, Prand))
        E = _effective_matrix(ch, Prand, u)
        Einv = np.linalg.inv(E)
        directions = Prand[:, None] @ Einv
        d = np.sqrt(STREAM_POWER) / np.linalg.norm(directions, axis=-2)
        return DownlinkIaPrecoders(Prand=Prand, B=Einv * d[..., None, :], u=u, d=d)

    @staticmethod
    def encode(frame: SymbolFrame, pre: DownlinkIaPrecoders) -> np.ndarray:
        """x̄^{[j]} = P B^{[j]} s^{[j]}

        Returns:
            (N, 2, 3, 2) 행 = 슬롯 형태의 송신 블록
        """
        s = frame.s.reshape(frame.size, 2, 4)
        x = np.einsum("nrc,njc->njr", pre.Prand, np.einsum("njab,njb->nja", pre.B, s))
        return x.reshape(frame.size, 2, 3, 2)

    @staticmethod
    def propagate(X: np.ndarray, ch: ChannelSetCell) -> np.ndarray:
        """Y^{[ji]} = X^{[j]} H^{[ji]} + X^{[ĵ]} I^{[ji]}"""
        return X[:, :, None] @ ch.H + X[:, ::-1, None] @ ch.I

    @staticmethod
    def receive(Y: np.ndarray, pre: DownlinkIaPrecoders) -> np.ndarray:
        """z^{[ji]} = u^{[ji]} ȳ^{[ji]} / d

        Returns:
            (N, 2, 2, 2) [j, i, k] 심볼 추정값
        """
        ybar = Y.reshape(Y.shape[:3] + (6,))
        z = np.einsum("njikr,njir->njik", pre.u, ybar)
        return z / pre.d.reshape(z.shape)

    @staticmethod
    def downlink_ia_run(
        frame: SymbolFrame,
        ch: ChannelSetCell,
        rng: np.random.Generator,
        constellation: Constellation,
        noise_variance: float = 1.0,
    ):
        """랜덤 프리코더 생성부터 검출까지 한 배치 실행

        Returns:
            (symbols, bits): SymbolFrame 과 같은 축 순서
        """
        pre = DownlinkIaService.downlink_ia_precoders(ch, draw_random_precoder(rng, ch))
        Y = add_awgn(DownlinkIaService.propagate(DownlinkIaService.encode(frame, pre), ch), rng, noise_variance)
        return demodulate_nearest(DownlinkIaService.receive(Y, pre), constellation, frame.power)


def downlink_ia_gamma(ch: ChannelSetCell, rng: np.random.Generator, stream: tuple = (0, 0, 0)) -> SnrSample:
    """스트림 γ = d²"""
    j, i, k = stream
    pre = DownlinkIaService.downlink_ia_precoders(ch, draw_random_precoder(rng, ch))
    return SnrSample(gamma=pre.d[:, j, 2 * i + k] ** 2, stream=(j, i, k))
