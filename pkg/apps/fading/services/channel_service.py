import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from apps.common.exceptions import ConditioningError

logger = logging.getLogger(__name__)

MAX_RESAMPLES = 64


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0,1) 표본 (실수부/허수부 분산 각각 1/2)"""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@dataclass(frozen=True)
class ChannelSetX:
    """X 채널 한 블록의 채널 실현값

    Attributes:
        H: (N, 2, 2, 2, 2) 배열, H[n, j, i] 는 송신기 j → 수신기 i 링크 (행 = 송신 안테나)
        resamples: 조건 검사 실패로 다시 뽑은 실현값 개수
    """

    H: np.ndarray
    resamples: int = 0

    def link(self, j: int, i: int) -> np.ndarray:
        return self.H[..., j, i, :, :]

    @property
    def size(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class ChannelSetCell:
    """2셀 네트워크 한 블록의 채널 실현값

    쌍 (j, i) 의 의미는 방식마다 다릅니다. 상향링크 (IMAC) 에서는 셀 i 의 단말 j 와 기지국 i 사이가
    H[j, i], 반대편 기지국 ī 사이가 I[j, i] 입니다. 하향링크 (IBC) 에서는 기지국 j 와 셀 j 의 단말 i
    사이가 H[j, i], 반대편 기지국 ĵ 와 단말 (j, i) 사이가 I[j, i] 입니다.

    Attributes:
        H: (N, 2, 2, 2, 2) 원하는 링크
        I: (N, 2, 2, 2, 2) 간섭 링크
        resamples: 다시 뽑은 실현값 개수
    """

    H: np.ndarray
    I: np.ndarray
    resamples: int = 0

    def link(self, j: int, i: int) -> np.ndarray:
        return self.H[..., j, i, :, :]

    def interference(self, j: int, i: int) -> np.ndarray:
        return self.I[..., j, i, :, :]

    @property
    def size(self) -> int:
        return self.H.shape[0]

    def as_x_channel(self) -> ChannelSetX:
        """원하는 링크만 X 채널로 취급"""
        return ChannelSetX(H=self.H, resamples=self.resamples)


Gate = Callable[[object], np.ndarray]


class ChannelService:
    """채널 실현값 생성 서비스"""

    @staticmethod
    def _draw_with_gate(rng, size, draw, build, gate, max_resamples):
        arrays = draw(size)
        resamples = 0
        if gate is None:
            return build(arrays, resamples)

        ok = np.asarray(gate(build(arrays, 0)), dtype=bool)
        rounds = 0
        while not np.all(ok):
            if rounds >= max_resamples:
                raise ConditioningError(f"{max_resamples}회 재샘플링 후에도 조건 검사를 통과하지 못했습니다.")
            bad = np.flatnonzero(~ok)
            fresh = draw(bad.size)
            for target, source in zip(arrays, fresh):
                target[bad] = source
            resamples += bad.size
            ok[bad] = np.asarray(gate(build(tuple(a[bad] for a in arrays), 0)), dtype=bool)
            rounds += 1

        if resamples:
            logger.debug(f"Channel resampled: count={resamples} batch={size}")
        return build(arrays, resamples)

    @staticmethod
    def sample_x_channels(
        rng: np.random.Generator,
        size: int = 1,
        gate: Optional[Gate] = None,
        max_resamples: int = MAX_RESAMPLES,
    ) -> ChannelSetX:
        """X 채널 실현값 생성

        Args:
            rng: 난수 생성기
            size: 배치 크기
            gate: ChannelSetX -> (N,) bool 마스크. False 인 실현값은 다시 뽑음
            max_resamples: 재샘플링 반복 한도

        Returns:
            ChannelSetX

        Raises:
            ConditioningError: 한도 안에서 조건을 만족하지 못한 경우
        """
        return ChannelService._draw_with_gate(
            rng,
            size,
            lambda n: (crandn(rng, (n, 2, 2, 2, 2)),),
            lambda arrays, r: ChannelSetX(H=arrays[0], resamples=r),
            gate,
            max_resamples,
        )

    @staticmethod
    def sample_cell_channels(
        rng: np.random.Generator,
        size: int = 1,
        gate: Optional[Gate] = None,
        max_resamples: int = MAX_RESAMPLES,
    ) -> ChannelSetCell:
        """2셀 네트워크 채널 실현값 생성 (원하는 링크와 간섭 링크는 서로 독립)"""
        return ChannelService._draw_with_gate(
            rng,
            size,
            lambda n: (crandn(rng, (n, 2, 2, 2, 2)), crandn(rng, (n, 2, 2, 2, 2))),
            lambda arrays, r: ChannelSetCell(H=arrays[0], I=arrays[1], resamples=r),
            gate,
            max_resamples,
        )
