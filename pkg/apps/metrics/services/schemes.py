"""시뮬레이션 방식 레지스트리

각 방식은 한 배치의 비트 오류를 세는 simulate_batch 와, 모든 원하는 스트림의 정규화 γ 를
돌려주는 gamma_batch 를 제공합니다. 두 함수 모두 인자로 받은 난수 생성기 하나만 사용하므로
(master_seed, key) 가 같으면 결과도 같습니다.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from apps.cellular.services.downlink_ia_service import DownlinkIaService, draw_random_precoder
from apps.cellular.services.ibc_service import IbcService, ibc_gate
from apps.cellular.services.imac_service import ImacService, imac_gate, imac_links
from apps.common.exceptions import ConfigurationError
from apps.fading.services.channel_service import ChannelService
from apps.fading.services.constellation_service import Constellation, SymbolFrame, get_constellation
from apps.fading.services.noise_service import add_awgn
from apps.jash.services.jash_service import JashService, jash_gate
from apps.jash.services.modified_jash_service import ModifiedJashService
from apps.linalg.services.matrix_service import frob_norm2, inverse2
from apps.xchannel.services.beamforming_service import AlignmentLinks, XBeamformingService, x_channel_gate
from apps.xchannel.services.receiver_service import XReceiverService
from apps.xchannel.services.snr_service import gamma_all_streams, x_equivalent_channels

logger = logging.getLogger(__name__)

STREAMS = 8


@dataclass(frozen=True)
class BatchOutcome:
    """한 배치의 집계값 (정수라서 합산 순서와 무관)"""

    bit_errors: int
    bits: int
    trials: int
    resamples: int = 0

    def __add__(self, other: "BatchOutcome") -> "BatchOutcome":
        return BatchOutcome(
            bit_errors=self.bit_errors + other.bit_errors,
            bits=self.bits + other.bits,
            trials=self.trials + other.trials,
            resamples=self.resamples + other.resamples,
        )


@dataclass(frozen=True)
class Scheme:
    """방식 정의

    Attributes:
        name: 방식 ID
        label: 사람이 읽는 이름
        channel_uses: 한 블록이 차지하는 채널 사용 수
        requires_psk: PSK 계열 성상도만 허용하는지
        simulate_batch: (rng, size, constellation, power, noise_variance) -> BatchOutcome
        gamma_batch: (rng, size) -> (size, 8) 스트림별 정규화 γ
    """

    name: str
    label: str
    channel_uses: int
    requires_psk: bool
    simulate_batch: Callable[[np.random.Generator, int, Constellation, float, float], BatchOutcome]
    gamma_batch: Callable[[np.random.Generator, int], np.ndarray]

    def outage_gamma(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """다이버시티 추정에 쓰는 기준 스트림 (0, 0, 0) 의 γ"""
        return self.gamma_batch(rng, size)[:, 0]


def _outcome(frame: SymbolFrame, bits: np.ndarray, resamples: int) -> BatchOutcome:
    return BatchOutcome(
        bit_errors=frame.count_bit_errors(bits), bits=frame.bit_count, trials=frame.size, resamples=resamples
    )


# X 채널


def _x_simulate(rng, size, constellation, power, noise_variance):
    ch = ChannelService.sample_x_channels(rng, size=size, gate=x_channel_gate)
    frame = SymbolFrame.random(rng, constellation, power, size)
    links = AlignmentLinks.from_x_channel(ch)
    bf = XBeamformingService.beamformers(links)
    Y = XBeamformingService.channel_output(frame, links, bf, rng, noise_variance)
    Ht = XBeamformingService.equivalent_channels(links, bf)
    _, bits = XReceiverService.decode(Y, Ht, constellation, power)
    return _outcome(frame, bits, ch.resamples)


def _x_gamma(rng, size):
    ch = ChannelService.sample_x_channels(rng, size=size, gate=x_channel_gate)
    return gamma_all_streams(x_equivalent_channels(ch)).reshape(size, STREAMS)


# JaSh


def _jash_simulate(rng, size, constellation, power, noise_variance):
    ch = ChannelService.sample_x_channels(rng, size=size, gate=jash_gate)
    frame = SymbolFrame.random(rng, constellation, power, size)
    bf = JashService.jash_beamformers(ch)
    Y = add_awgn(JashService.propagate(JashService.jash_encode(frame, bf), ch), rng, noise_variance)
    _, bits = JashService.jash_decode(Y, ch, bf, constellation, power)
    return _outcome(frame, bits, ch.resamples)


def _jash_stream_gamma(rng, size):
    ch = ChannelService.sample_x_channels(rng, size=size, gate=jash_gate)
    _, gamma = JashService.zero_forcing(JashService.equivalent_matrix(ch, JashService.jash_beamformers(ch)))
    # (N, i, 2j+k)
    return gamma


def _jash_gamma(rng, size):
    return _jash_stream_gamma(rng, size).reshape(size, STREAMS)


def _modified_simulate(rng, size, constellation, power, noise_variance):
    ch = ChannelService.sample_x_channels(rng, size=size, gate=jash_gate)
    frame = SymbolFrame.random(rng, constellation, power, size)
    bf = JashService.jash_beamformers(ch)
    X = ModifiedJashService.modified_jash_encode(frame, bf)
    Y = add_awgn(ModifiedJashService.propagate(X, ch), rng, noise_variance)
    _, bits = ModifiedJashService.modified_jash_decode(Y, ch, bf, constellation, power)
    return _outcome(frame, bits, ch.resamples)


def _modified_gamma(rng, size):
    # 쌍마다 두 심볼이 같은 γ_sum 을 받음
    gamma = _jash_stream_gamma(rng, size).reshape(size, 2, 2, 2)
    total = np.sum(gamma, axis=-1, keepdims=True)
    return np.repeat(total, 2, axis=-1).reshape(size, STREAMS)


# 2셀 네트워크


def _imac_simulate(rng, size, constellation, power, noise_variance):
    ch = ChannelService.sample_cell_channels(rng, size=size, gate=imac_gate)
    frame = SymbolFrame.random(rng, constellation, power, size)
    _, bits = ImacService.imac_run(frame, ch, rng, noise_variance)
    return _outcome(frame, bits, ch.resamples)


def _imac_gamma(rng, size):
    ch = ChannelService.sample_cell_channels(rng, size=size, gate=imac_gate)
    links = imac_links(ch)
    Ht = XBeamformingService.equivalent_channels(links, XBeamformingService.beamformers(links))
    return gamma_all_streams(Ht).reshape(size, STREAMS)


def _ibc_simulate(rng, size, constellation, power, noise_variance):
    ch = ChannelService.sample_cell_channels(rng, size=size, gate=ibc_gate)
    frame = SymbolFrame.random(rng, constellation, power, size)
    _, bits = IbcService.ibc_run(frame, ch, rng, noise_variance)
    return _outcome(frame, bits, ch.resamples)


def _ibc_gamma(rng, size):
    ch = ChannelService.sample_cell_channels(rng, size=size, gate=ibc_gate)
    pre = IbcService.ibc_precoders(ch)
    gamma = pre.gain**2 / frob_norm2(inverse2(ch.I))
    return np.repeat(gamma[..., None], 2, axis=-1).reshape(size, STREAMS)


def _downlink_ia_simulate(rng, size, constellation, power, noise_variance):
    ch = ChannelService.sample_cell_channels(rng, size=size)
    frame = SymbolFrame.random(rng, constellation, power, size)
    _, bits = DownlinkIaService.downlink_ia_run(frame, ch, rng, constellation, noise_variance)
    return _outcome(frame, bits, ch.resamples)


def _downlink_ia_gamma(rng, size):
    ch = ChannelService.sample_cell_channels(rng, size=size)
    pre = DownlinkIaService.downlink_ia_precoders(ch, draw_random_precoder(rng, ch))
    return (pre.d**2).reshape(size, STREAMS)


SCHEMES: Dict[str, Scheme] = {
    scheme.name: scheme
    for scheme in (
        Scheme("x_alamouti", "Alamouti 정렬 (X 채널)", 3, False, _x_simulate, _x_gamma),
        Scheme("jash", "JaSh 선형 정렬", 3, False, _jash_simulate, _jash_gamma),
        Scheme("jash_modified", "JaSh + Alamouti 내부 부호", 6, False, _modified_simulate, _modified_gamma),
        Scheme("imac", "Alamouti 정렬 (상향링크)", 3, False, _imac_simulate, _imac_gamma),
        Scheme("ibc_alamouti", "Alamouti 정렬 (하향링크)", 3, True, _ibc_simulate, _ibc_gamma),
        Scheme("ibc_downlink_ia", "하향링크 IA 기준 방식", 3, False, _downlink_ia_simulate, _downlink_ia_gamma),
    )
}


def get_scheme(name: str) -> Scheme:
    """이름으로 방식 조회

    Raises:
        ConfigurationError: 등록되지 않은 이름
    """
    try:
        return SCHEMES[name]
    except KeyError:
        raise ConfigurationError(
            f"지원하지 않는 방식입니다: {name} (가능: {', '.join(SCHEMES)})",
            errors={"schemes": [f"unknown scheme '{name}'"]},
        ) from None


def validate_pairing(scheme_name: str, constellation_name: str) -> Scheme:
    """방식과 성상도 조합 검사

    Raises:
        ConfigurationError: 알 수 없는 이름이거나 PSK 전용 방식에 PSK 가 아닌 성상도를 준 경우
    """
    scheme = get_scheme(scheme_name)
    constellation = get_constellation(constellation_name)
    if scheme.requires_psk and not constellation.is_psk:
        raise ConfigurationError(
            f"{scheme.name} 방식은 PSK 계열 성상도가 필요합니다: {constellation.name}",
            errors={"constellation": [f"{scheme.name} requires a PSK constellation, got '{constellation.name}'"]},
        )
    return scheme
