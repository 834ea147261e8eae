"""실험 실행

설정의 command 에 따라 metrics 서비스를 호출하고 결과 행을 모읍니다. 모든 난수는 master_seed
에서 파생된 하위 스트림만 쓰므로 한 프로세스에서 두 설정을 연달아 실행해도 각각 따로 실행한
것과 같은 결과가 나옵니다.
"""

import logging
import math
import time
import uuid
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from apps.common.exceptions import InsufficientData
from apps.common.logging import set_run_id
from apps.experiments.services.config_service import ExperimentConfig
from apps.fading.services.seeding import RngSpec, stream_tag
from apps.metrics.services.ber_service import BerCurve, BerService
from apps.metrics.services.diversity_service import (
    eps_grid,
    estimate_diversity_ber,
    estimate_diversity_outage,
)
from apps.metrics.services.mi_service import MiService, estimate_dof
from apps.metrics.services.schemes import get_scheme
from apps.metrics.services.verification_service import VerificationReport, VerificationService

logger = logging.getLogger(__name__)

NOT_APPLICABLE = "-"
DOF_WINDOW_DB = (40.0, 60.0)
OUTAGE_CHUNK = 250_000


@dataclass(frozen=True)
class ResultRow:
    """CSV 한 행 (방식 x SNR 점 x 지표)"""

    scheme: str
    constellation: str
    snr_db: Optional[float]
    metric_name: str
    value: float
    ci_halfwidth: Optional[float]
    trials: int
    seed: int


@dataclass
class RunRecord:
    """실행 결과

    Attributes:
        run_id: 로그와 매니페스트를 잇는 실행 ID
        rows: 결과 행
        reports: verify 명령의 검증 결과
        resample_counters: 방식별 채널 재샘플링 횟수
        skipped: 데이터 부족으로 건너뛴 추정 (방식, 지표, 사유)
        wall_clock_seconds: 실행 시간
    """

    run_id: str
    config: ExperimentConfig
    rows: List[ResultRow] = field(default_factory=list)
    reports: List[VerificationReport] = field(default_factory=list)
    resample_counters: Dict[str, int] = field(default_factory=dict)
    skipped: List[Dict[str, str]] = field(default_factory=list)
    wall_clock_seconds: float = 0.0

    @property
    def failures(self) -> List[str]:
        return [r.name for r in self.reports if not r.passed]

    @property
    def passed(self) -> bool:
        return not self.failures


def _ber_rows(curve: BerCurve, seed: int) -> List[ResultRow]:
    return [
        ResultRow(curve.scheme, curve.constellation, p.snr_db, "ber", p.ber, p.ci_halfwidth, p.trials, seed)
        for p in curve.points
    ]


class RunService:
    """실험 실행 서비스"""

    @staticmethod
    def run(config: ExperimentConfig) -> RunRecord:
        """설정 하나 실행

        Raises:
            ConfigurationError: 알 수 없는 명령
        """
        run_id = f"{config.command}-s{config.seed}-{uuid.uuid4().hex[:8]}"
        set_run_id(run_id)
        record = RunRecord(run_id=run_id, config=config)
        handlers = {
            "ber": RunService._run_ber,
            "mi": RunService._run_mi,
            "diversity": RunService._run_diversity,
            "verify": RunService._run_verify,
        }

        logger.info(f"Run started: run_id={run_id} command={config.command} schemes={list(config.schemes)}")
        started = time.perf_counter()
        handlers[config.command](config, record)
        record.wall_clock_seconds = time.perf_counter() - started
        logger.info(
            f"Run finished: run_id={run_id} rows={len(record.rows)} "
            f"seconds={record.wall_clock_seconds:.1f} failures={record.failures}"
        )
        return record

    @staticmethod
    def _ber_curve(config: ExperimentConfig, scheme: str, snr_grid) -> BerCurve:
        return BerService.run_ber(
            scheme,
            config.constellation,
            snr_grid,
            RngSpec(config.seed),
            target_errors=config.trials.target_bit_errors,
            max_trials=config.trials.max_trials,
            batch_size=config.trials.batch_size,
            workers=config.workers,
            noise_variance=config.noise_variance,
        )

    @staticmethod
    def _run_ber(config: ExperimentConfig, record: RunRecord) -> None:
        for scheme in config.schemes:
            curve = RunService._ber_curve(config, scheme, config.snr.points())
            record.rows += _ber_rows(curve, config.seed)
            record.resample_counters[scheme] = curve.resamples

    @staticmethod
    def _run_mi(config: ExperimentConfig, record: RunRecord) -> None:
        seed = config.seed
        for scheme in config.schemes:
            curve = MiService.run_mi(
                scheme,
                config.snr.points(),
                RngSpec(config.seed),
                trials=config.trials.mi_trials,
                batch_size=config.trials.batch_size,
                workers=config.workers,
            )
            record.rows += [
                ResultRow(scheme, NOT_APPLICABLE, p.snr_db, "sum_rate", p.sum_rate, p.ci_halfwidth, p.trials, seed)
                for p in curve.points
            ]
            try:
                dof = estimate_dof(curve, DOF_WINDOW_DB)
            except InsufficientData as e:
                logger.debug(f"DoF skipped: scheme={scheme} reason={e}")
                continue
            record.rows.append(ResultRow(scheme, NOT_APPLICABLE, None, "dof", dof, None, config.trials.mi_trials, seed))

    @staticmethod
    def _run_diversity(config: ExperimentConfig, record: RunRecord) -> None:
        policy = config.diversity
        grid = eps_grid(policy.eps_start, policy.eps_stop, policy.eps_points)
        low, high = policy.ber_window_db
        window_points = [s for s in config.snr.points() if low <= s <= high]
        gamma_trials = config.trials.gamma_trials
        seed = config.seed

        for scheme_name in config.schemes:
            scheme = get_scheme(scheme_name)
            rng = RngSpec(config.seed).generator(stream_tag("outage"), stream_tag(scheme_name))
            try:
                estimate = estimate_diversity_outage(
                    lambda n: scheme.outage_gamma(rng, n),
                    grid,
                    gamma_trials,
                    min_count=policy.min_count,
                    chunk=min(gamma_trials, OUTAGE_CHUNK),
                )
                record.rows.append(
                    ResultRow(
                        scheme_name, NOT_APPLICABLE, None, "diversity_outage", estimate.d, None, gamma_trials, seed
                    )
                )
            except InsufficientData as e:
                logger.warning(f"Outage slope skipped: scheme={scheme_name} reason={e}")
                record.skipped.append({"scheme": scheme_name, "metric": "diversity_outage", "reason": str(e)})

            if not window_points:
                record.skipped.append(
                    {"scheme": scheme_name, "metric": "diversity_ber", "reason": "SNR 격자가 BER 창과 겹치지 않습니다."}
                )
                continue
            curve = RunService._ber_curve(config, scheme_name, window_points)
            record.rows += _ber_rows(curve, seed)
            record.resample_counters[scheme_name] = curve.resamples
            try:
                estimate = estimate_diversity_ber(curve, (low, high))
            except InsufficientData as e:
                logger.warning(f"BER slope skipped: scheme={scheme_name} reason={e}")
                record.skipped.append({"scheme": scheme_name, "metric": "diversity_ber", "reason": str(e)})
                continue
            trials = sum(p.trials for p in curve.points)
            record.rows.append(
                ResultRow(scheme_name, curve.constellation, None, "diversity_ber", estimate.d, None, trials, seed)
            )

    @staticmethod
    def _run_verify(config: ExperimentConfig, record: RunRecord) -> None:
        reports = VerificationService.run_suite(
            RngSpec(config.seed), trials=config.trials.verify_trials, gamma_trials=config.trials.gamma_trials
        )
        record.reports = reports
        for report in reports:
            trials = report.details.get("trials", config.trials.verify_trials)
            record.rows.append(
                ResultRow(
                    NOT_APPLICABLE,
                    NOT_APPLICABLE,
                    None,
                    report.name,
                    report.statistic,
                    report.details.get("halfwidth"),
                    int(trials),
                    config.seed,
                )
            )


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "nan" if math.isnan(value) else f"{value:.4g}"
    return str(value)


def render_table(record: RunRecord) -> str:
    """결과를 고정 폭 표 문자열로 변환"""
    if record.reports:
        header = ("name", "result", "statistic", "criterion")
        body = [(r.name, "PASS" if r.passed else "FAIL", _cell(r.statistic), r.criterion) for r in record.reports]
    else:
        header = ("scheme", "constellation", "snr_db", "metric", "value", "ci_halfwidth", "trials")
        body = [
            (r.scheme, r.constellation, _cell(r.snr_db), r.metric_name, _cell(r.value), _cell(r.ci_halfwidth), r.trials)
            for r in record.rows
        ]
    widths = [max(len(str(row[i])) for row in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(str(cell).ljust(width) for cell, width in zip(row, widths)).rstrip() for row in [header, *body]]
    lines.insert(1, "  ".join("-" * width for width in widths))
    return "\n".join(lines)
