"""에르고딕 상호 정보량 (합 전송률)

영강제 수신 후 스트림별 순간 SNR P·γ 로 전송률 log₂(1 + P·γ) 를 정의하고, 채널에 대해 평균한
뒤 모든 원하는 스트림을 더해 채널 사용 수로 나눕니다. 채널 표본은 SNR 점마다 공유합니다.
"""

import logging
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from scipy.stats import linregress, norm

from apps.common.exceptions import InsufficientData
from apps.fading.services.seeding import RngSpec, stream_tag
from apps.metrics.services.ber_service import CONFIDENCE, batch_sizes, snr_to_power
from apps.metrics.services.parallel import run_tasks
from apps.metrics.services.schemes import get_scheme

logger = logging.getLogger(__name__)

MI_FORMULA = (
    "sum_rate(P) = (1/T) * sum over desired streams of E_H[log2(1 + P * gamma_stream)], "
    "T = channel uses per block"
)


@dataclass(frozen=True)
class MiPoint:
    snr_db: float
    sum_rate: float
    ci_halfwidth: float
    trials: int


@dataclass(frozen=True)
class MiCurve:
    """합 전송률 곡선 (bits/channel use)"""

    scheme: str
    points: Tuple[MiPoint, ...] = field(default_factory=tuple)
    formula: str = MI_FORMULA

    @property
    def snr_db(self):
        return [p.snr_db for p in self.points]

    @property
    def sum_rate(self):
        return [p.sum_rate for p in self.points]


def sum_rate_samples(gamma: np.ndarray, power: float, channel_uses: int) -> np.ndarray:
    """실현값별 합 전송률

    Args:
        gamma: (N, S) 스트림별 정규화 γ
        power: 심볼 전력 P
        channel_uses: 블록당 채널 사용 수 T

    Returns:
        (N,) Σ_s log₂(1 + P γ_s) / T
    """
    return np.sum(np.log2(1 + power * gamma), axis=-1) / channel_uses


@dataclass(frozen=True)
class MiTask:
    scheme: str
    snr_grid: Tuple[float, ...]
    master_seed: int
    batch_index: int
    size: int


def mi_batch_moments(task: MiTask) -> np.ndarray:
    """배치 하나의 SNR 점별 (합, 제곱합)

    Returns:
        (len(snr_grid), 2)
    """
    scheme = get_scheme(task.scheme)
    rng = RngSpec(task.master_seed).generator(stream_tag("mi"), stream_tag(task.scheme), task.batch_index)
    gamma = scheme.gamma_batch(rng, task.size)
    out = np.empty((len(task.snr_grid), 2))
    for idx, snr_db in enumerate(task.snr_grid):
        rates = sum_rate_samples(gamma, snr_to_power(snr_db), scheme.channel_uses)
        out[idx] = (np.sum(rates), np.sum(rates**2))
    return out


class MiService:
    """합 전송률 계산 서비스"""

    @staticmethod
    def run_mi(
        scheme: str,
        snr_grid: Sequence[float],
        rng_spec: RngSpec,
        trials: int = 20_000,
        batch_size: int = 20_000,
        workers: int = 1,
    ) -> MiCurve:
        """방식 하나의 합 전송률 곡선

        Raises:
            ConfigurationError: 알 수 없는 방식
        """
        get_scheme(scheme)
        grid = tuple(float(s) for s in sorted(snr_grid))
        sizes = batch_sizes(trials, batch_size)
        tasks = [MiTask(scheme, grid, rng_spec.master_seed, b, size) for b, size in enumerate(sizes)]
        moments = np.sum(run_tasks(mi_batch_moments, tasks, workers), axis=0)

        z = norm.ppf(0.5 + CONFIDENCE / 2)
        points = []
        for (total, squares), snr_db in zip(moments, grid):
            mean = total / trials
            variance = max(squares / trials - mean**2, 0.0)
            halfwidth = float(z * np.sqrt(variance / trials))
            points.append(MiPoint(snr_db=snr_db, sum_rate=float(mean), ci_halfwidth=halfwidth, trials=trials))
            logger.debug(f"MI point done: scheme={scheme} snr_db={snr_db} sum_rate={mean:.4f}")

        logger.info(f"MI curve done: scheme={scheme} points={len(points)} trials={trials}")
        return MiCurve(scheme=scheme, points=tuple(points))


def estimate_dof(curve: MiCurve, window: Tuple[float, float] = (40.0, 60.0)) -> float:
    """합 전송률 대 log₂P 기울기 (자유도)

    Raises:
        InsufficientData: 창 안의 점이 3개 미만
    """
    points = [p for p in curve.points if window[0] <= p.snr_db <= window[1]]
    if len(points) < 3:
        raise InsufficientData(f"자유도 추정에 필요한 점이 부족합니다: {len(points)}개 (최소 3개)")
    log2_power = np.array([p.snr_db for p in points]) / 10 * np.log2(10)
    return float(linregress(log2_power, [p.sum_rate for p in points]).slope)


def rate_gap(first: MiCurve, second: MiCurve, snr_db: float) -> float:
    """같은 SNR 에서 두 곡선의 합 전송률 차이 (first - second)"""
    def at(curve: MiCurve) -> float:
        return next(p.sum_rate for p in curve.points if abs(p.snr_db - snr_db) < 1e-9)

    return at(first) - at(second)
