"""수치 검증 모음

각 검증은 VerificationReport 를 돌려주며, 실행 명령은 하나라도 실패하면 종료 코드 1 로 끝납니다.
모든 검증은 (master_seed, 검증 이름) 하위 스트림을 쓰므로 재현 가능합니다.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.stats import norm

from apps.cellular.services.downlink_ia_service import (
    DownlinkIaService,
    _interference_columns,
    draw_random_precoder,
    left_null_rows_reference,
)
from apps.cellular.services.ibc_service import (
    IbcService,
    combining_matrix,
    ibc_gate,
    interference_basis,
    receive_stack,
)
from apps.common.exceptions import InsufficientData
from apps.fading.services.channel_service import ChannelService, crandn
from apps.fading.services.constellation_service import SymbolFrame, get_constellation
from apps.fading.services.seeding import RngSpec, stream_tag
from apps.jash.services.jash_service import JashService, gamma_parts, jash_gate, upper_gamma_from_parts
from apps.linalg.services.alamouti_service import alamouti_residual, swapped_alamouti_residual
from apps.linalg.services.matrix_service import det2, frob_norm2, herm, inverse2, svd_smallest
from apps.metrics.services.diversity_service import eps_grid, estimate_diversity_outage_samples
from apps.xchannel.services.beamforming_service import AlignmentLinks, XBeamformingService, hat_blocks, x_channel_gate
from apps.xchannel.services.receiver_service import x_cancel_aligned, x_decouple_users, x_receive_stack, x_stack_matrix
from apps.xchannel.services.snr_service import full_rank_margin, stacked_signal_matrix, stream_gamma, x_zf_gamma

logger = logging.getLogger(__name__)

STRUCTURAL_TOL = 1e-10
ZF_INVARIANCE_TOL = 1e-8
PHI_UPPER = 2 + 4 / math.pi
PHI_TRACE_TOL = 1e-9


@dataclass(frozen=True)
class VerificationReport:
    """검증 결과

    Attributes:
        name: 검증 이름
        passed: 통과 여부
        statistic: 대표 통계량
        criterion: 통과 기준 설명
        details: 추가 통계 (정보용)
    """

    name: str
    passed: bool
    statistic: float
    criterion: str
    details: dict = field(default_factory=dict)


def _rng(rng_spec: RngSpec, name: str) -> np.random.Generator:
    return rng_spec.generator(stream_tag("verify"), stream_tag(name))


def _span_residual(basis: np.ndarray, z: np.ndarray) -> np.ndarray:
    """(N,) z 를 basis 열공간에 사영했을 때의 상대 잔차"""
    coeff, *_ = np.linalg.lstsq(basis, z.T, rcond=None)
    residual = np.linalg.norm(z.T - basis @ coeff, axis=0)
    return residual / np.maximum(np.linalg.norm(z, axis=-1), np.finfo(float).tiny)


def _relative(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(a - b) / np.maximum(np.abs(b), np.finfo(float).tiny)


def _percentiles(values: np.ndarray) -> dict:
    q = np.percentile(values, [0, 1, 50])
    return {"min": float(q[0]), "p01": float(q[1]), "median": float(q[2])}


# 보조 정리와 상한


def verify_lemma1(rng_spec: RngSpec, trials: int = 1_000_000, eps=None) -> VerificationReport:
    """1 / tr(F⁻¹ F⁻*) 의 불능 기울기가 1 인지 확인 (F: 2x2 CN(0, 1))"""
    rng = _rng(rng_spec, "lemma1")
    eps = eps_grid(1e-4, 1e-2, 9) if eps is None else eps
    F = crandn(rng, (trials, 2, 2))
    with np.errstate(all="ignore"):
        samples = 1.0 / frob_norm2(inverse2(F, check=False))
    samples = np.nan_to_num(samples, nan=0.0)
    try:
        estimate = estimate_diversity_outage_samples(samples, eps)
    except InsufficientData as e:
        logger.warning(f"Outage slope verification lacks data: trials={trials} reason={e}")
        return VerificationReport("lemma1_outage_slope", False, math.nan, "|d - 1| <= 0.1", {"error": str(e)})
    return VerificationReport(
        name="lemma1_outage_slope",
        passed=abs(estimate.d - 1.0) <= 0.1,
        statistic=estimate.d,
        criterion="|d - 1| <= 0.1",
        details={"window": estimate.window, "dropped_eps": estimate.dropped, "residual": estimate.residual},
    )


def verify_lemma2(rng_spec: RngSpec, trials: int = 10_000) -> VerificationReport:
    """구조가 다른 두 영강제 수신기가 같은 γ 를 주는지 확인

    X 채널: 간섭 제거 + 분리 γ 와 사영 영강제 γ
    JaSh: 사영 영강제 γ 와 유사역행렬 대각 γ
    하향링크 IA: SVD 영공간과 scipy 영공간의 사영 행렬
    """
    rng = _rng(rng_spec, "lemma2")
    ch = ChannelService.sample_x_channels(rng, size=trials, gate=x_channel_gate)
    links = AlignmentLinks.from_x_channel(ch)
    Ht = XBeamformingService.equivalent_channels(links, XBeamformingService.beamformers(links))
    x_dev = 0.0
    for i in range(2):
        for j in range(2):
            for k in range(2):
                gamma, _ = stream_gamma(Ht[:, :, i], j, k)
                x_dev = max(x_dev, float(np.max(_relative(x_zf_gamma(Ht[:, :, i], j, k), gamma))))

    jch = ChannelService.sample_x_channels(rng, size=trials, gate=jash_gate)
    M = JashService.equivalent_matrix(jch, JashService.jash_beamformers(jch))
    _, projector_gamma = JashService.zero_forcing(M)
    pinv_gamma = 1.0 / np.real(np.diagonal(np.linalg.inv(herm(M) @ M), axis1=-2, axis2=-1))[..., :4]
    jash_dev = float(np.max(_relative(projector_gamma, pinv_gamma)))

    cells = ChannelService.sample_cell_channels(rng, size=min(trials, 500))
    Prand = draw_random_precoder(rng, cells)
    columns = _interference_columns(cells, Prand)
    u = DownlinkIaService.downlink_ia_precoders(cells, Prand).u
    reference = left_null_rows_reference(columns)
    ia_dev = float(np.max(np.abs(herm(u) @ u - herm(reference) @ reference)))

    statistic = max(x_dev, jash_dev, ia_dev)
    return VerificationReport(
        name="lemma2_zf_invariance",
        passed=statistic < ZF_INVARIANCE_TOL,
        statistic=statistic,
        criterion=f"max relative deviation < {ZF_INVARIANCE_TOL:g}",
        details={"x_alamouti": x_dev, "jash": jash_dev, "downlink_ia_projector": ia_dev},
    )


def verify_gamma_prime(rng_spec: RngSpec, trials: int = 10_000) -> VerificationReport:
    """JaSh 의 γ ≤ γ′ 와 1 ≤ |κ| ≤ 2 조건 빈도"""
    rng = _rng(rng_spec, "gamma_prime")
    ch = ChannelService.sample_x_channels(rng, size=trials, gate=jash_gate)
    bf = JashService.jash_beamformers(ch)
    _, gamma = JashService.zero_forcing(JashService.equivalent_matrix(ch, bf)[:, 0])
    parts = gamma_parts(ch, bf.eig)
    upper = upper_gamma_from_parts(parts)
    violations = int(np.count_nonzero(gamma[:, :2] > upper[:, None] * (1 + 1e-9)))

    magnitude = np.abs(parts.kappa)
    fraction = float(np.mean((magnitude >= 1) & (magnitude <= 2)))
    halfwidth = float(norm.ppf(0.975) * math.sqrt(fraction * (1 - fraction) / trials))
    return VerificationReport(
        name="jash_gamma_upper_bound",
        passed=violations == 0 and 0 < fraction < 1,
        statistic=float(violations),
        criterion="no trial with gamma > gamma' and 0 < P(1 <= |kappa| <= 2) < 1",
        details={"kappa_window_fraction": fraction, "kappa_window_halfwidth": halfwidth, "trials": trials},
    )


def phi_matrix(ch) -> np.ndarray:
    """스트림 (0, 0, 0) 의 조건부 공분산 Φ (N, 2, 2)

    Φ = b (Ĥ_o0* Θ Ĥ_o0 / n0² + Ĥ_o1* Θ Ĥ_o1 / n1²),  Θ = diag(‖L⁻¹ 의 행‖² / ‖L⁻¹‖_F²)
    """
    links = AlignmentLinks.from_x_channel(ch)
    bf = XBeamformingService.beamformers(links)
    Ht = XBeamformingService.equivalent_channels(links, bf)
    other = hat_blocks(Ht[:, 1, 0])
    n = frob_norm2(other)
    b = 1.0 / (1.0 / (2 * n[:, 0]) + 1.0 / (2 * n[:, 1]))

    Linv = inverse2(links.L[:, 0, 0])
    theta = np.sum(np.abs(Linv) ** 2, axis=-1) / frob_norm2(Linv)[:, None]
    terms = [
        herm(other[:, m]) @ (theta[:, :, None] * other[:, m]) / n[:, m, None, None] ** 2 for m in range(2)
    ]
    return b[:, None, None] * (terms[0] + terms[1])


def verify_phi_bounds(rng_spec: RngSpec, trials: int = 1_000_000) -> VerificationReport:
    """E[1/det Φ] 의 하한 1 과 tr Φ = 1 확인

    tr Φ = 1 이면 det Φ ≤ 1/4 라서 하한 1 (그리고 2 + 4/π) 은 항상 성립합니다. 실제로 걸러내는 조건은
    대각합 항등식이고, 2 + 4/π 와의 비교는 정보로만 기록합니다.
    """
    rng = _rng(rng_spec, "phi_bounds")
    ch = ChannelService.sample_x_channels(rng, size=trials, gate=x_channel_gate)
    phi = phi_matrix(ch)
    inv_det = 1.0 / np.real(det2(phi))
    mean = float(np.mean(inv_det))
    halfwidth = float(norm.ppf(0.975) * np.std(inv_det) / math.sqrt(trials))
    trace_dev = float(np.max(np.abs(np.real(np.trace(phi, axis1=-2, axis2=-1)) - 1)))
    return VerificationReport(
        name="phi_inverse_determinant",
        passed=trace_dev < PHI_TRACE_TOL and bool(np.all(inv_det > 1 - 1e-9)) and mean > 1,
        statistic=mean,
        criterion=f"tr(Phi) = 1 within {PHI_TRACE_TOL:g} and 1/det(Phi) > 1 on every trial",
        details={
            "halfwidth": halfwidth,
            "min": float(np.min(inv_det)),
            "upper_reference": PHI_UPPER,
            "below_upper_reference": mean < PHI_UPPER,
            "trace_deviation": trace_dev,
        },
    )


def verify_gamma_bar_bounds(rng_spec: RngSpec, trials: int = 10_000) -> VerificationReport:
    """(3/4)γ̄ ≥ γ ≥ (3/8)γ̄ 를 모든 스트림과 실현값에서 확인"""
    rng = _rng(rng_spec, "gamma_bar")
    ch = ChannelService.sample_x_channels(rng, size=trials, gate=x_channel_gate)
    links = AlignmentLinks.from_x_channel(ch)
    Ht = XBeamformingService.equivalent_channels(links, XBeamformingService.beamformers(links))
    violations = 0
    ratios = []
    for i in range(2):
        for j in range(2):
            for k in range(2):
                gamma, gamma_bar = stream_gamma(Ht[:, :, i], j, k)
                ratio = gamma / gamma_bar
                ratios.append(ratio)
                violations += int(np.count_nonzero((ratio > 0.75 * (1 + 1e-9)) | (ratio < 0.375 * (1 - 1e-9))))
    ratios = np.concatenate(ratios)
    return VerificationReport(
        name="x_gamma_bar_bounds",
        passed=violations == 0,
        statistic=float(violations),
        criterion="3/8 <= gamma/gamma_bar <= 3/4 on every trial",
        details={"ratio_min": float(np.min(ratios)), "ratio_max": float(np.max(ratios))},
    )


# 구조 검증


def _x_structural(rng: np.random.Generator, trials: int) -> List[VerificationReport]:
    ch = ChannelService.sample_x_channels(rng, size=trials, gate=x_channel_gate)
    frame = SymbolFrame.random(rng, get_constellation("QPSK"), 1.0, trials)
    links = AlignmentLinks.from_x_channel(ch)
    bf = XBeamformingService.beamformers(links)
    Ht = XBeamformingService.equivalent_channels(links, bf)
    basis = x_stack_matrix(np.eye(2), np.eye(2))[:, 4:]

    span, alamouti, stack_sv, margins = 0.0, 0.0, [], []
    for i in range(2):
        s = frame.s.copy()
        s[:, :, i, :] = 0
        quiet = SymbolFrame(s, frame.bits, frame.constellation, 1.0)
        Y = XBeamformingService.propagate(XBeamformingService.x_encode_parts(quiet, bf), links)
        span = max(span, float(np.max(_span_residual(basis, x_receive_stack(Y[:, i], i)))))

        y1, y2 = x_cancel_aligned(x_receive_stack(Y[:, i], i))
        hats = hat_blocks(Ht[:, :, i])
        for j in range(2):
            _, H = x_decouple_users(y1, y2, hats[:, j], hats[:, 1 - j])
            scale = np.sqrt(frob_norm2(H))
            alamouti = max(alamouti, float(np.max(alamouti_residual(H) / scale)))
        stack_sv.append(svd_smallest(stacked_signal_matrix(Ht[:, :, i])))
        margins.append(full_rank_margin(Ht[:, :, i]))

    stack_sv = np.concatenate(stack_sv)
    margins = np.concatenate(margins)
    return [
        VerificationReport(
            "x_interference_span", span < STRUCTURAL_TOL, span, f"relative residual < {STRUCTURAL_TOL:g}"
        ),
        VerificationReport(
            "x_decoupled_alamouti", alamouti < STRUCTURAL_TOL, alamouti, f"Alamouti residual < {STRUCTURAL_TOL:g}"
        ),
        VerificationReport(
            "x_stack_independence",
            bool(np.min(stack_sv) > 0),
            float(np.min(stack_sv)),
            "smallest singular value of the 6x6 stacked matrix > 0",
            _percentiles(stack_sv),
        ),
        VerificationReport(
            "x_full_rank_submatrix",
            bool(np.min(margins) > 0),
            float(np.min(margins)),
            "smallest singular value of the 4x4 signal submatrix > 0",
            _percentiles(margins),
        ),
    ]


def _jash_structural(rng: np.random.Generator, trials: int) -> List[VerificationReport]:
    ch = ChannelService.sample_x_channels(rng, size=trials, gate=jash_gate)
    M = JashService.equivalent_matrix(ch, JashService.jash_beamformers(ch))
    sv = svd_smallest(M).ravel()
    return [
        VerificationReport(
            "jash_independence",
            bool(np.min(sv) > 0),
            float(np.min(sv)),
            "smallest singular value of the 6x6 equivalent matrix > 0",
            _percentiles(sv),
        )
    ]


def _ibc_structural(rng: np.random.Generator, trials: int) -> List[VerificationReport]:
    ch = ChannelService.sample_cell_channels(rng, size=trials, gate=ibc_gate)
    pre = IbcService.ibc_precoders(ch)
    own_combined = combining_matrix(pre.Ht) @ pre.Ht
    swapped = float(np.max(swapped_alamouti_residual(own_combined) / np.sqrt(frob_norm2(own_combined))))

    frame = SymbolFrame.random(rng, get_constellation("QPSK"), 1.0, trials)
    Q = interference_basis()
    span = 0.0
    for j in range(2):
        for i in range(2):
            s = frame.s.copy()
            s[:, j, i] = 0
            quiet = SymbolFrame(s, frame.bits, frame.constellation, 1.0)
            Y = IbcService.ibc_propagate(IbcService.ibc_encode(quiet, pre), ch)
            span = max(span, float(np.max(_span_residual(Q, receive_stack(Y[:, j, i], ch.I[:, j, i], j)))))
    return [
        VerificationReport(
            "ibc_swapped_alamouti", swapped < STRUCTURAL_TOL, swapped, f"swapped residual < {STRUCTURAL_TOL:g}"
        ),
        VerificationReport(
            "ibc_interference_span", span < STRUCTURAL_TOL, span, f"relative residual < {STRUCTURAL_TOL:g}"
        ),
    ]


def _downlink_ia_structural(rng: np.random.Generator, trials: int) -> List[VerificationReport]:
    ch = ChannelService.sample_cell_channels(rng, size=trials)
    Prand = draw_random_precoder(rng, ch)
    pre = DownlinkIaService.downlink_ia_precoders(ch, Prand)
    leak = np.abs(pre.u @ _interference_columns(ch, Prand))
    scale = np.linalg.norm(Prand, axis=(-2, -1))[:, None, None, None, None]
    residual = float(np.max(leak / scale))
    return [
        VerificationReport(
            "downlink_ia_nulling", residual < 1e-9, residual, "relative inter-cell leakage after u < 1e-9"
        )
    ]


def verify_structural(rng_spec: RngSpec, trials: int = 10_000) -> List[VerificationReport]:
    """빠르고 정확한 구조 검증 묶음"""
    rng = _rng(rng_spec, "structural")
    return (
        _x_structural(rng, trials)
        + _jash_structural(rng, trials)
        + _ibc_structural(rng, trials)
        + _downlink_ia_structural(rng, min(trials, 2_000))
    )


class VerificationService:
    """전체 검증 실행 서비스"""

    @staticmethod
    def run_suite(rng_spec: RngSpec, trials: int = 10_000, gamma_trials: int = 1_000_000) -> List[VerificationReport]:
        """구조 검증과 보조 정리/상한 검증을 모두 실행

        Args:
            trials: 구조 검증과 정확한 부등식 검증의 실현값 수
            gamma_trials: 기울기/기댓값 추정의 표본 수
        """
        reports = verify_structural(rng_spec, trials)
        reports += [
            verify_lemma1(rng_spec, gamma_trials),
            verify_lemma2(rng_spec, trials),
            verify_gamma_prime(rng_spec, trials),
            verify_gamma_bar_bounds(rng_spec, trials),
            verify_phi_bounds(rng_spec, gamma_trials),
        ]
        failed = [r.name for r in reports if not r.passed]
        if failed:
            logger.warning(f"Verification failed: names={failed}")
        else:
            logger.info(f"Verification passed: reports={len(reports)}")
        return reports
