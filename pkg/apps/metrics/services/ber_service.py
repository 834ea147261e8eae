"""비트 오류율 곡선

SNR 점마다 배치를 차례로 돌려 누적 비트 오류가 목표에 처음 도달한 배치에서 멈춥니다. 병렬
실행은 배치를 작업자 수만큼 묶어 한 번에 계산하되, 멈춤 판단은 배치 인덱스 순서로 하므로
작업자 수와 무관하게 같은 곡선이 나옵니다.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

from scipy.stats import norm

from apps.fading.services.constellation_service import get_constellation
from apps.fading.services.seeding import RngSpec, snr_tag, stream_tag
from apps.metrics.services.parallel import run_tasks, waves
from apps.metrics.services.schemes import BatchOutcome, get_scheme, validate_pairing

logger = logging.getLogger(__name__)

CONFIDENCE = 0.95


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    bit_errors: int
    bits: int
    trials: int
    ci_halfwidth: float
    resamples: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0


@dataclass(frozen=True)
class BerCurve:
    """방식 하나의 BER 곡선 (snr_db 오름차순)"""

    scheme: str
    constellation: str
    points: Tuple[BerPoint, ...] = field(default_factory=tuple)

    @property
    def snr_db(self):
        return [p.snr_db for p in self.points]

    @property
    def ber(self):
        return [p.ber for p in self.points]

    @property
    def resamples(self) -> int:
        return sum(p.resamples for p in self.points)


def wilson_halfwidth(errors: int, n: int, confidence: float = CONFIDENCE) -> float:
    """Wilson 점수 구간의 반폭

    오류가 적은 깊은 SNR 점에서도 구간이 [0, 1] 안에 머뭅니다.
    """
    if n <= 0:
        return 0.0
    z = norm.ppf(0.5 + confidence / 2)
    p = errors / n
    denom = 1 + z**2 / n
    return z * math.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom


def snr_to_power(snr_db: float) -> float:
    """잡음 분산 1 기준 심볼 전력 P"""
    return 10 ** (snr_db / 10)


def batch_sizes(max_trials: int, batch_size: int):
    """배치 인덱스별 크기 (마지막 배치는 남은 시행 수)"""
    count = math.ceil(max_trials / batch_size)
    return [min(batch_size, max_trials - b * batch_size) for b in range(count)]


@dataclass(frozen=True)
class BerTask:
    scheme: str
    constellation: str
    snr_db: float
    noise_variance: float
    master_seed: int
    batch_index: int
    size: int


def simulate_ber_batch(task: BerTask) -> BatchOutcome:
    """작업 하나 실행 (작업자 프로세스에서 호출)"""
    scheme = get_scheme(task.scheme)
    key = (stream_tag("ber"), stream_tag(task.scheme), stream_tag(task.constellation), snr_tag(task.snr_db))
    rng = RngSpec(task.master_seed).generator(*key, task.batch_index)
    return scheme.simulate_batch(
        rng, task.size, get_constellation(task.constellation), snr_to_power(task.snr_db), task.noise_variance
    )


class BerService:
    """BER 곡선 계산 서비스"""

    @staticmethod
    def run_ber_point(
        scheme: str,
        constellation: str,
        snr_db: float,
        rng_spec: RngSpec,
        target_errors: int = 200,
        max_trials: int = 10_000_000,
        batch_size: int = 20_000,
        workers: int = 1,
        noise_variance: float = 1.0,
    ) -> BerPoint:
        """SNR 한 점의 BER

        누적 오류가 target_errors 에 처음 도달한 배치까지 포함하고, 그 뒤 배치는 버립니다.
        """
        sizes = batch_sizes(max_trials, batch_size)
        total = BatchOutcome(0, 0, 0, 0)
        done = False
        for wave in waves(0, len(sizes), workers):
            tasks = [
                BerTask(scheme, constellation, snr_db, noise_variance, rng_spec.master_seed, b, sizes[b]) for b in wave
            ]
            for outcome in run_tasks(simulate_ber_batch, tasks, workers):
                total = total + outcome
                if total.bit_errors >= target_errors:
                    done = True
                    break
            if done:
                break

        logger.info(
            f"BER point done: scheme={scheme} constellation={constellation} snr_db={snr_db} "
            f"errors={total.bit_errors} bits={total.bits} trials={total.trials}"
        )
        return BerPoint(
            snr_db=float(snr_db),
            bit_errors=total.bit_errors,
            bits=total.bits,
            trials=total.trials,
            ci_halfwidth=wilson_halfwidth(total.bit_errors, total.bits),
            resamples=total.resamples,
        )

    @staticmethod
    def run_ber(
        scheme: str,
        constellation: str,
        snr_grid: Sequence[float],
        rng_spec: RngSpec,
        target_errors: int = 200,
        max_trials: int = 10_000_000,
        batch_size: int = 20_000,
        workers: int = 1,
        noise_variance: float = 1.0,
    ) -> BerCurve:
        """방식 하나의 BER 곡선

        모든 수신기의 모든 원하는 스트림에 대해 평균한 BER 입니다.

        Raises:
            ConfigurationError: 방식/성상도 조합이 잘못된 경우
        """
        validate_pairing(scheme, constellation)
        constellation = get_constellation(constellation).name
        points = [
            BerService.run_ber_point(
                scheme, constellation, snr_db, rng_spec, target_errors, max_trials, batch_size, workers, noise_variance
            )
            for snr_db in sorted(snr_grid)
        ]
        return BerCurve(scheme=scheme, constellation=constellation, points=tuple(points))


def snr_at_ber(curve: BerCurve, target: float) -> float:
    """log10 BER 를 선형 보간해 목표 BER 에 해당하는 SNR (dB) 추정

    Returns:
        곡선이 target 을 지나지 않으면 nan
    """
    pairs = [(p.snr_db, p.ber) for p in curve.points if p.ber > 0]
    for (x0, y0), (x1, y1) in zip(pairs, pairs[1:]):
        if y0 >= target >= y1 and y0 != y1:
            t = (math.log10(y0) - math.log10(target)) / (math.log10(y0) - math.log10(y1))
            return x0 + t * (x1 - x0)
    return math.nan
