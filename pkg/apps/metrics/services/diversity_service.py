"""다이버시티 이득 추정

두 가지 독립적인 방법을 씁니다.

* BER 기울기: 창 안의 log₁₀BER 대 SNR(dB)/10 최소제곱 기울기의 부호를 바꾼 값
* 불능 기울기: log P(γ < ε) 대 log ε 기울기
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from apps.common.exceptions import InsufficientData
from apps.fading.services.channel_service import crandn
from apps.metrics.services.ber_service import BerCurve

logger = logging.getLogger(__name__)

BER_SLOPE = "BER_SLOPE"
OUTAGE_SLOPE = "OUTAGE_SLOPE"

BER_WINDOW = (20.0, 32.0)
MIN_OUTAGE_COUNT = 100
MIN_POINTS = 3


@dataclass(frozen=True)
class DiversityEstimate:
    """다이버시티 추정 결과

    Attributes:
        method: BER_SLOPE | OUTAGE_SLOPE
        window: 사용한 구간 (dB 또는 ε)
        d: 추정 다이버시티
        residual: 적합 잔차의 RMS
        dropped: 불능 사건이 부족해 버린 ε 값
    """

    method: str
    window: Tuple[float, float]
    d: float
    residual: float
    dropped: Tuple[float, ...] = field(default_factory=tuple)


def _fit(x: np.ndarray, y: np.ndarray):
    fit = linregress(x, y)
    residual = y - (fit.intercept + fit.slope * x)
    return fit.slope, float(np.sqrt(np.mean(residual**2)))


def estimate_diversity_ber(curve: BerCurve, window: Tuple[float, float] = BER_WINDOW) -> DiversityEstimate:
    """BER 곡선 기울기로 다이버시티 추정

    Raises:
        InsufficientData: 창 안의 점이 3개 미만이거나 BER 이 0 인 점이 있는 경우
    """
    points = [p for p in curve.points if window[0] <= p.snr_db <= window[1]]
    if len(points) < MIN_POINTS:
        raise InsufficientData(f"BER 기울기 추정에 필요한 점이 부족합니다: {len(points)}개 (최소 {MIN_POINTS}개)")
    if any(p.ber <= 0 for p in points):
        raise InsufficientData(f"창 {window} 안에 BER 이 0 인 점이 있습니다. 시행 수를 늘리거나 창을 줄이세요.")

    x = np.array([p.snr_db for p in points]) / 10
    y = np.log10([p.ber for p in points])
    slope, residual = _fit(x, y)
    logger.info(f"BER slope fit: scheme={curve.scheme} window={window} d={-slope:.3f} residual={residual:.3g}")
    return DiversityEstimate(method=BER_SLOPE, window=(float(window[0]), float(window[1])), d=-slope, residual=residual)


def outage_probability(samples: np.ndarray, eps_grid: Sequence[float]) -> np.ndarray:
    """ε 마다 P(γ < ε) 경험적 추정"""
    samples = np.sort(np.asarray(samples).ravel())
    counts = np.searchsorted(samples, np.asarray(eps_grid, dtype=float), side="left")
    return counts / samples.size


def eps_grid(start: float = 1e-3, stop: float = 1e-1, points: int = 9) -> np.ndarray:
    """로그 간격 ε 격자"""
    return np.logspace(np.log10(start), np.log10(stop), points)


def estimate_diversity_outage_samples(
    samples: np.ndarray,
    eps: Sequence[float],
    min_count: int = MIN_OUTAGE_COUNT,
) -> DiversityEstimate:
    """표본에서 불능 기울기 추정

    불능 사건 수가 min_count 미만인 ε 는 버리고 결과에 기록합니다.

    Raises:
        InsufficientData: ε 격자가 두 자릿수(decade)를 넘지 못하거나 남은 점이 3개 미만인 경우
    """
    eps = np.sort(np.asarray(eps, dtype=float))
    if np.log10(eps[-1] / eps[0]) < 2 - 1e-9:
        raise InsufficientData(f"ε 격자는 최소 두 자릿수를 포함해야 합니다: [{eps[0]:g}, {eps[-1]:g}]")

    samples = np.asarray(samples).ravel()
    probability = outage_probability(samples, eps)
    counts = np.rint(probability * samples.size)
    keep = counts >= min_count
    dropped = tuple(float(e) for e in eps[~keep])
    if dropped:
        logger.warning(f"Outage points dropped: eps={list(dropped)} min_count={min_count} trials={samples.size}")
    if np.count_nonzero(keep) < MIN_POINTS:
        raise InsufficientData(
            f"불능 사건이 {min_count}회 이상인 ε 가 {np.count_nonzero(keep)}개뿐입니다 (시행 수 {samples.size})."
        )

    slope, residual = _fit(np.log10(eps[keep]), np.log10(probability[keep]))
    return DiversityEstimate(
        method=OUTAGE_SLOPE,
        window=(float(eps[keep][0]), float(eps[keep][-1])),
        d=float(slope),
        residual=residual,
        dropped=dropped,
    )


def estimate_diversity_outage(
    gamma_sampler: Callable[[int], np.ndarray],
    eps: Sequence[float],
    trials: int,
    min_count: int = MIN_OUTAGE_COUNT,
    chunk: Optional[int] = None,
) -> DiversityEstimate:
    """γ 표본 생성기로 불능 기울기 추정

    Args:
        gamma_sampler: 크기 n 을 받아 (n,) γ 표본을 돌려주는 함수
        eps: ε 격자
        trials: 전체 표본 수
        chunk: 한 번에 만들 표본 수 (메모리 제한용)
    """
    chunk = chunk or trials
    parts = []
    remaining = trials
    while remaining > 0:
        size = min(chunk, remaining)
        parts.append(np.asarray(gamma_sampler(size)).ravel())
        remaining -= size
    return estimate_diversity_outage_samples(np.concatenate(parts), eps, min_count)


def exponential_gamma(rng: np.random.Generator, size: int) -> np.ndarray:
    """γ = |CN(0, 1)|² 기준 표본 (다이버시티 1)"""
    return np.abs(crandn(rng, size)) ** 2
