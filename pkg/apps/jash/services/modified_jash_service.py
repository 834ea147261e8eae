"""두 정렬 블록에 Alamouti 내부 부호를 얹은 변형 방식

같은 채널에서 연속된 두 정렬 블록을 보냅니다. 각 (j, i) 쌍의 심볼 (a, b) 는 첫 블록에서
(a, b), 둘째 블록에서 (-b*, a*) 로 전송됩니다. 수신기는 블록마다 영강제로 추정한 뒤
최대비 결합 (MRC) 으로 합칩니다. 6 채널 사용에 쌍당 심볼 2개이므로 전송률은 기준 방식의 절반입니다.
"""

import logging

import numpy as np

from apps.fading.services.channel_service import ChannelSetX
from apps.fading.services.constellation_service import Constellation, SymbolFrame, demodulate_nearest
from apps.jash.services.jash_service import JashBeamformers, JashService
from apps.xchannel.services.snr_service import SnrSample

logger = logging.getLogger(__name__)


def inner_code(s: np.ndarray):
    """(a, b) → 블록 1: (a, b), 블록 2: (-b*, a*)

    Args:
        s: (..., 2) 심볼 쌍

    Returns:
        (first, second): 각각 (..., 2)
    """
    second = np.stack([-np.conj(s[..., 1]), np.conj(s[..., 0])], axis=-1)
    return s, second


def mrc_combine(z_first: np.ndarray, z_second: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """두 블록 추정값의 최대비 결합

    â = (γ0 z0 + γ1 z1'*) / (γ0 + γ1), b̂ = (γ1 z1 - γ0 z0'*) / (γ0 + γ1)

    Args:
        z_first, z_second: (..., 2) 블록별 영강제 추정값
        gamma: (..., 2) 스트림별 γ (두 블록에서 같음)
    """
    g0, g1 = gamma[..., 0], gamma[..., 1]
    total = g0 + g1
    a = (g0 * z_first[..., 0] + g1 * np.conj(z_second[..., 1])) / total
    b = (g1 * z_first[..., 1] - g0 * np.conj(z_second[..., 0])) / total
    return np.stack([a, b], axis=-1)


class ModifiedJashService:
    """변형 방식 서비스"""

    @staticmethod
    def modified_jash_encode(frame: SymbolFrame, bf: JashBeamformers) -> np.ndarray:
        """두 블록을 부호화

        Returns:
            (N, 2, 2, 3, 2) [블록, j] 순서의 송신 블록
        """
        first, second = inner_code(frame.s)
        blocks = [
            JashService.jash_encode(SymbolFrame(s, frame.bits, frame.constellation, frame.power), bf)
            for s in (first, second)
        ]
        return np.stack(blocks, axis=1)

    @staticmethod
    def propagate(X: np.ndarray, ch: ChannelSetX) -> np.ndarray:
        """두 블록 모두 같은 채널로 전파"""
        return np.stack([JashService.propagate(X[:, b], ch) for b in range(2)], axis=1)

    @staticmethod
    def modified_jash_decode(
        Y: np.ndarray, ch: ChannelSetX, bf: JashBeamformers, constellation: Constellation, power: float
    ):
        """블록별 영강제, MRC 결합, 최근접 검출

        Args:
            Y: (N, 2, 2, 3, 2) [블록, i] 순서의 수신 블록

        Returns:
            (symbols, bits): (N, 2, 2, 2), (N, 2, 2, 2, bits_per_symbol)
        """
        z_first, gamma = JashService.zf_estimates(Y[:, 0], ch, bf)
        z_second, _ = JashService.zf_estimates(Y[:, 1], ch, bf)
        return demodulate_nearest(mrc_combine(z_first, z_second, gamma), constellation, power)


def modified_jash_gamma(ch: ChannelSetX, pair: tuple = (0, 0)) -> SnrSample:
    """결합 후 유효 SNR γ_sum = γ_1 + γ_2 (두 스트림 γ 의 합)"""
    j, i = pair
    bf = JashService.jash_beamformers(ch)
    _, gamma = JashService.zero_forcing(JashService.equivalent_matrix(ch, bf)[:, i])
    return SnrSample(gamma=gamma[:, 2 * j] + gamma[:, 2 * j + 1], stream=(j, i, 0))
