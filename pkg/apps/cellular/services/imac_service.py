"""2셀 상향링크 (IMAC) 정렬

셀 i 의 단말 j 는 자기 기지국 i 로 Alamouti 블록 하나를 보냅니다. 반대편 기지국 ī 로 새는 링크
I[j, i] 의 정규화 역행렬을 프리코더로 써서, X 채널 방식과 같은 수신기를 그대로 씁니다.
셀 0 블록은 슬롯 (0, 1), 셀 1 블록은 슬롯 (2, 1) 에 실립니다.

I[j, i] = H[j, ī] 로 두면 X 채널 방식과 비트 단위로 같은 결과를 냅니다.
"""

import logging

import numpy as np

from apps.fading.services.channel_service import ChannelSetCell
from apps.fading.services.constellation_service import SymbolFrame
from apps.linalg.services.matrix_service import COND_LIMIT
from apps.xchannel.services.beamforming_service import NORM_FLOOR, AlignmentLinks, XBeamformingService, alignment_gate
from apps.xchannel.services.receiver_service import XReceiverService
from apps.xchannel.services.snr_service import SnrSample, stream_gamma

logger = logging.getLogger(__name__)


def imac_links(ch: ChannelSetCell) -> AlignmentLinks:
    return AlignmentLinks(D=ch.H, L=ch.I)


def imac_gate(ch: ChannelSetCell, cond_limit: float = COND_LIMIT, norm_floor: float = NORM_FLOOR) -> np.ndarray:
    return alignment_gate(imac_links(ch), cond_limit, norm_floor)


class ImacService:
    """상향링크 정렬 서비스"""

    @staticmethod
    def imac_run(
        frame: SymbolFrame,
        ch: ChannelSetCell,
        rng: np.random.Generator,
        noise_variance: float = 1.0,
    ):
        """부호화부터 검출까지 한 배치 실행

        Returns:
            (symbols, bits): SymbolFrame 과 같은 축 순서

        Raises:
            SingularMatrix: 간섭 링크가 역변환 불가능한 경우
        """
        links = imac_links(ch)
        bf = XBeamformingService.beamformers(links)
        Y = XBeamformingService.channel_output(frame, links, bf, rng, noise_variance)
        Ht = XBeamformingService.equivalent_channels(links, bf)
        return XReceiverService.decode(Y, Ht, frame.constellation, frame.power)


def imac_gamma(ch: ChannelSetCell, stream: tuple = (0, 0, 0)) -> SnrSample:
    """셀 i 단말 j 의 심볼 k 에 대한 γ, γ̄"""
    j, i, k = stream
    links = imac_links(ch)
    Ht = XBeamformingService.equivalent_channels(links, XBeamformingService.beamformers(links))
    gamma, gamma_bar = stream_gamma(Ht[:, :, i], j, k)
    return SnrSample(gamma=gamma, gamma_bar=gamma_bar, stream=(j, i, k))
