"""Alamouti 정렬 송신기

송신기 j 는 3 슬롯 블록 X^{[j]} (3x2, 행 = 시간 슬롯, 열 = 안테나) 를 보냅니다.
수신기 0 용 Alamouti 블록은 슬롯 (0, 1), 수신기 1 용 블록은 슬롯 (2, 1) 에 실립니다.
각 블록은 교차 링크의 정규화 역행렬 V 로 프리코딩되어, 원하지 않는 수신기에서는 스칼라배된
심볼로 정렬됩니다.

인덱스는 0 부터 시작합니다. 배열 축은 (N, j, i, ...) 순서입니다.
"""

import logging
from dataclasses import dataclass

import numpy as np

from apps.fading.services.channel_service import ChannelSetX
from apps.fading.services.constellation_service import SymbolFrame
from apps.fading.services.noise_service import add_awgn
from apps.linalg.services.alamouti_service import alamouti_embed, swapped_alamouti_embed
from apps.linalg.services.matrix_service import COND_LIMIT, frob_norm, frob_norm2, inverse2, is_conditioned2

logger = logging.getLogger(__name__)

SCALE = np.sqrt(3 / 4)
NORM_FLOOR = 1e-9

# 수신기 i 용 블록이 차지하는 슬롯 (Alamouti 첫 행, 둘째 행)
SLOTS = ((0, 1), (2, 1))


@dataclass(frozen=True)
class AlignmentLinks:
    """정렬 대상 링크 묶음

    Attributes:
        D: (N, 2, 2, 2, 2) D[n, j, i] 는 수신기 i 용 블록이 수신기 i 에 도달하는 링크
        L: (N, 2, 2, 2, 2) L[n, j, i] 는 수신기 i 용 블록이 반대편 수신기로 새는 링크 (프리코더가 역변환)

    X 채널에서는 D[j, i] = H[j, i], L[j, i] = H[j, ī] 입니다.
    """

    D: np.ndarray
    L: np.ndarray

    @classmethod
    def from_x_channel(cls, ch: ChannelSetX) -> "AlignmentLinks":
        return cls(D=ch.H, L=ch.H[:, :, ::-1])

    @property
    def size(self) -> int:
        return self.D.shape[0]


@dataclass(frozen=True)
class XBeamformers:
    """송신 빔포머

    Attributes:
        V: (N, 2, 2, 2, 2) V[n, j, i] = c[n, j, i] · L[n, j, i]⁻¹
        c: (N, 2, 2) 정규화 상수 1/‖L⁻¹‖_F
    """

    V: np.ndarray
    c: np.ndarray


def alignment_gate(links: AlignmentLinks, cond_limit: float = COND_LIMIT, norm_floor: float = NORM_FLOOR) -> np.ndarray:
    """정렬 수신기가 계산 가능한 실현값 마스크

    교차 링크 역행렬의 조건수와 모든 Ĥ 블록 노름을 검사합니다.

    Returns:
        (N,) bool 마스크
    """
    ok = np.all(is_conditioned2(links.L, cond_limit), axis=(1, 2))
    with np.errstate(all="ignore"):
        inv = inverse2(links.L, check=False)
        V = inv / frob_norm(inv)[..., None, None]
        Ht = V @ links.D
        norms = np.sum(np.abs(Ht) ** 2, axis=-2)
    ok &= np.all(np.nan_to_num(norms, nan=0.0) > norm_floor / 2, axis=(1, 2, 3))
    return ok


def x_channel_gate(ch: ChannelSetX, cond_limit: float = COND_LIMIT, norm_floor: float = NORM_FLOOR) -> np.ndarray:
    return alignment_gate(AlignmentLinks.from_x_channel(ch), cond_limit, norm_floor)


class XBeamformingService:
    """X 채널 송신 측 서비스"""

    @staticmethod
    def beamformers(links: AlignmentLinks) -> XBeamformers:
        """교차 링크의 정규화 역행렬

        Raises:
            SingularMatrix: 교차 링크가 역변환 불가능한 경우
        """
        inv = inverse2(links.L)
        c = 1.0 / frob_norm(inv)
        return XBeamformers(V=c[..., None, None] * inv, c=c)

    @staticmethod
    def x_beamformers(ch: ChannelSetX) -> XBeamformers:
        """V^{[ji]} = c^{[ji]} (H^{[jī]})⁻¹, c^{[ji]} = 1/‖(H^{[jī]})⁻¹‖_F"""
        return XBeamformingService.beamformers(AlignmentLinks.from_x_channel(ch))

    @staticmethod
    def equivalent_channels(links: AlignmentLinks, bf: XBeamformers) -> np.ndarray:
        """H̃[j, i] = V[j, i] D[j, i]

        Returns:
            (N, 2, 2, 2, 2) 등가 채널
        """
        return bf.V @ links.D

    @staticmethod
    def x_encode_parts(frame: SymbolFrame, bf: XBeamformers) -> np.ndarray:
        """수신기별 송신 블록 성분

        Returns:
            (N, 2, 2, 3, 2) parts[n, j, i] 는 송신기 j 가 수신기 i 에게 보내는 3x2 성분 (√(3/4) 포함)
        """
        s = frame.s
        coded = SCALE * (alamouti_embed(s[..., 0], s[..., 1]) @ bf.V)
        parts = np.zeros(s.shape[:3] + (3, 2), dtype=np.complex128)
        for i, (first, second) in enumerate(SLOTS):
            parts[:, :, i, first, :] = coded[:, :, i, 0, :]
            parts[:, :, i, second, :] = coded[:, :, i, 1, :]
        return parts

    @staticmethod
    def x_encode(frame: SymbolFrame, bf: XBeamformers) -> np.ndarray:
        """송신 블록 X^{[j]}

        Returns:
            (N, 2, 3, 2) 송신기별 블록, E tr(X X*) = 3P
        """
        return XBeamformingService.x_encode_parts(frame, bf).sum(axis=2)

    @staticmethod
    def propagate(parts: np.ndarray, links: AlignmentLinks) -> np.ndarray:
        """잡음 없는 수신 블록

        Y^{[i]} = Σ_j (parts[j, i] D[j, i] + parts[j, ī] L[j, ī])

        Returns:
            (N, 2, 3, 2) 수신기별 3x2 블록
        """
        own = parts @ links.D
        leaked = parts @ links.L
        return own.sum(axis=1) + leaked.sum(axis=1)[:, ::-1]

    @staticmethod
    def channel_output(
        frame: SymbolFrame,
        links: AlignmentLinks,
        bf: XBeamformers,
        rng: np.random.Generator,
        noise_variance: float = 1.0,
    ) -> np.ndarray:
        """부호화, 전파, 잡음 추가를 한 번에 수행"""
        Y = XBeamformingService.propagate(XBeamformingService.x_encode_parts(frame, bf), links)
        return add_awgn(Y, rng, noise_variance)


def block_power(X: np.ndarray) -> np.ndarray:
    """블록 전력 tr(X X*)"""
    return frob_norm2(X)


def hat_blocks(Ht: np.ndarray) -> np.ndarray:
    """간섭 제거 후 등가 swapped Alamouti 블록

    Ĥ_n = [[H̃[0, n], H̃[1, n]], [H̃[1, n]*, -H̃[0, n]*]]

    Args:
        Ht: (..., 2, 2) 등가 채널

    Returns:
        (..., 2, 2, 2) [..., n] 이 Ĥ_n
    """
    return np.stack([swapped_alamouti_embed(Ht[..., 0, n], Ht[..., 1, n]) for n in range(2)], axis=-3)
