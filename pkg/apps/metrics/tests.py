import math
from unittest import mock

import numpy as np
import pytest
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from apps.common.exceptions import ConfigurationError, InsufficientData
from apps.fading.services.constellation_service import get_constellation
from apps.fading.services.seeding import RngSpec
from apps.metrics.services import verification_service
from apps.metrics.services.ber_service import (
    BerCurve,
    BerPoint,
    BerService,
    BerTask,
    batch_sizes,
    simulate_ber_batch,
    snr_at_ber,
    wilson_halfwidth,
)
from apps.metrics.services.diversity_service import (
    eps_grid,
    estimate_diversity_ber,
    estimate_diversity_outage,
    estimate_diversity_outage_samples,
    exponential_gamma,
    outage_probability,
)
from apps.metrics.services.mi_service import MiCurve, MiPoint, MiService, estimate_dof, rate_gap, sum_rate_samples
from apps.metrics.services.parallel import run_tasks, waves
from apps.metrics.services.schemes import SCHEMES, get_scheme, validate_pairing
from apps.metrics.services.verification_service import (
    PHI_UPPER,
    verify_gamma_bar_bounds,
    verify_gamma_prime,
    verify_lemma1,
    verify_lemma2,
    verify_phi_bounds,
    verify_structural,
)

SCHEME_NAMES = ("x_alamouti", "jash", "jash_modified", "imac", "ibc_alamouti", "ibc_downlink_ia")


def _in_process(func, tasks, workers=1):
    return [func(task) for task in tasks]


def _square(x):
    return x * x


class SchemeRegistryTestCase(SimpleTestCase):
    """방식 레지스트리 테스트"""

    def test_all_registered(self):
        """여섯 방식 모두 등록"""
        self.assertEqual(set(SCHEMES), set(SCHEME_NAMES))
        self.assertEqual(get_scheme("jash_modified").channel_uses, 6)
        self.assertTrue(get_scheme("ibc_alamouti").requires_psk)

    def test_unknown_scheme(self):
        """등록되지 않은 방식은 ConfigurationError"""
        with self.assertRaises(ConfigurationError) as ctx:
            get_scheme("x_linear")
        self.assertIn("schemes", ctx.exception.errors)

    def test_psk_pairing(self):
        """IBC 방식에 QAM16 을 주면 PSK 필요 메시지로 거부"""
        with self.assertRaises(ConfigurationError) as ctx:
            validate_pairing("ibc_alamouti", "QAM16")
        self.assertIn("PSK", str(ctx.exception))
        self.assertEqual(validate_pairing("ibc_alamouti", "psk16").name, "ibc_alamouti")

    def test_gamma_shapes(self):
        """모든 방식의 γ 는 (N, 8) 양수"""
        for name in SCHEME_NAMES:
            gamma = get_scheme(name).gamma_batch(np.random.default_rng(0), 40)
            self.assertEqual(gamma.shape, (40, 8), name)
            self.assertTrue(np.all(gamma > 0), name)

    def test_zero_noise_batches(self):
        """무잡음 배치는 모든 방식에서 오류 0"""
        qpsk = get_constellation("QPSK")
        for name in SCHEME_NAMES:
            outcome = get_scheme(name).simulate_batch(np.random.default_rng(1), 100, qpsk, 1.0, 0.0)
            self.assertEqual(outcome.bit_errors, 0, name)
            self.assertEqual(outcome.bits, 100 * 8 * 2)
            self.assertEqual(outcome.trials, 100)

    def test_same_key_same_outcome(self):
        """같은 하위 스트림이면 같은 결과"""
        task = BerTask("jash", "BPSK", 10.0, 1.0, 3, 0, 500)
        self.assertEqual(simulate_ber_batch(task), simulate_ber_batch(task))


class ParallelTestCase(SimpleTestCase):
    """작업 분배 테스트"""

    def test_waves(self):
        """배치 인덱스를 폭 단위로 나눔"""
        self.assertEqual([list(w) for w in waves(0, 5, 2)], [[0, 1], [2, 3], [4]])
        self.assertEqual([list(w) for w in waves(0, 2, 0)], [[0], [1]])

    def test_in_process(self):
        """작업자 1 이면 현재 프로세스에서 순서대로 실행"""
        self.assertEqual(run_tasks(_square, [1, 2, 3], workers=1), [1, 4, 9])

    @pytest.mark.slow
    def test_pool_keeps_order(self):
        """프로세스 풀도 입력 순서를 유지"""
        self.assertEqual(run_tasks(_square, list(range(8)), workers=2), [x * x for x in range(8)])


class BerTestCase(SimpleTestCase):
    """BER 곡선 테스트"""

    def test_wilson_halfwidth(self):
        """Wilson 반폭: 시행 4배면 절반, 2배면 1/√2"""
        base = wilson_halfwidth(200, 100_000)
        self.assertAlmostEqual(wilson_halfwidth(800, 400_000) / base, 0.5, delta=0.1)
        self.assertAlmostEqual(wilson_halfwidth(400, 200_000) / base, 1 / math.sqrt(2), delta=0.05)
        self.assertEqual(wilson_halfwidth(0, 0), 0.0)
        self.assertGreater(wilson_halfwidth(0, 1000), 0.0)

    def test_batch_sizes(self):
        """마지막 배치는 남은 시행 수"""
        self.assertEqual(batch_sizes(50, 20), [20, 20, 10])

    def test_zero_noise_curve(self):
        """무잡음이면 BER = 0"""
        kwargs = dict(target_errors=10, max_trials=400, batch_size=200, noise_variance=0.0)
        curve = BerService.run_ber("x_alamouti", "QPSK", [10, 20], RngSpec(0), **kwargs)
        self.assertEqual(curve.ber, [0.0, 0.0])
        self.assertEqual([p.trials for p in curve.points], [400, 400])

    def test_stops_at_first_batch_reaching_target(self):
        """누적 오류가 목표에 처음 도달한 배치에서 멈추고 작업자 수와 무관"""
        spec = RngSpec(5)
        outcomes = [simulate_ber_batch(BerTask("jash", "BPSK", 6.0, 1.0, 5, b, 100)) for b in range(20)]
        cumulative = np.cumsum([o.bit_errors for o in outcomes])
        target = int(cumulative[2])
        stop = int(np.argmax(cumulative >= target))

        with mock.patch("apps.metrics.services.ber_service.run_tasks", side_effect=_in_process):
            results = [
                BerService.run_ber_point("jash", "BPSK", 6.0, spec, target, max_trials=2000, batch_size=100, workers=w)
                for w in (1, 3, 4)
            ]
        for point in results:
            self.assertEqual(point.bit_errors, int(cumulative[stop]))
            self.assertEqual(point.trials, 100 * (stop + 1))
        self.assertEqual(results[0], results[1])

    def test_sorted_points(self):
        """점은 SNR 오름차순, ber = 오류/비트"""
        kwargs = dict(target_errors=20, max_trials=2000, batch_size=500)
        curve = BerService.run_ber("jash", "bpsk", [12, 4, 8], RngSpec(1), **kwargs)
        self.assertEqual(curve.snr_db, [4.0, 8.0, 12.0])
        self.assertEqual(curve.constellation, "BPSK")
        for p in curve.points:
            self.assertAlmostEqual(p.ber, p.bit_errors / p.bits)

    def test_invalid_pairing(self):
        """PSK 전용 방식과 QAM16 조합은 시작 전에 거부"""
        with self.assertRaises(ConfigurationError):
            BerService.run_ber("ibc_alamouti", "QAM16", [10], RngSpec(0))

    def test_snr_at_ber(self):
        """log BER 선형 보간"""
        points = tuple(BerPoint(s, e, 1000, 1, 0.0) for s, e in ((10, 100), (20, 10), (30, 1)))
        curve = BerCurve("x", "BPSK", points)
        self.assertAlmostEqual(snr_at_ber(curve, 1e-2), 20.0)
        self.assertAlmostEqual(snr_at_ber(curve, 10 ** -1.5), 15.0)
        self.assertTrue(math.isnan(snr_at_ber(curve, 1e-5)))


class MiTestCase(SimpleTestCase):
    """합 전송률 테스트"""

    def test_sum_rate_formula(self):
        """Σ log₂(1 + Pγ) / T"""
        gamma = np.array([[1.0, 3.0]])
        assert_allclose(sum_rate_samples(gamma, 1.0, 3), [(1 + 2) / 3])

    def test_curve_monotone(self):
        """합 전송률은 0 이상이고 SNR 에 대해 증가"""
        curve = MiService.run_mi("x_alamouti", [0, 10, 20], RngSpec(0), trials=2000, batch_size=1000)
        rates = curve.sum_rate
        self.assertTrue(all(r >= 0 for r in rates))
        self.assertTrue(rates[0] < rates[1] < rates[2])
        self.assertIn("log2", curve.formula)

    def test_deterministic(self):
        """같은 시드면 같은 곡선"""
        a = MiService.run_mi("imac", [10], RngSpec(4), trials=500, batch_size=200)
        b = MiService.run_mi("imac", [10], RngSpec(4), trials=500, batch_size=200)
        self.assertEqual(a, b)

    def test_dof_synthetic(self):
        """합 전송률 = (8/3) log₂P 이면 기울기 8/3"""
        points = tuple(MiPoint(s, 8 / 3 * s / 10 * math.log2(10), 0.0, 1) for s in (40, 45, 50, 55, 60))
        self.assertAlmostEqual(estimate_dof(MiCurve("x", points)), 8 / 3)
        with self.assertRaises(InsufficientData):
            estimate_dof(MiCurve("x", points[:2]))

    def test_rate_gap(self):
        """같은 SNR 의 합 전송률 차이"""
        a = MiCurve("a", (MiPoint(25.0, 10.0, 0.0, 1),))
        b = MiCurve("b", (MiPoint(25.0, 7.0, 0.0, 1),))
        self.assertAlmostEqual(rate_gap(a, b, 25), 3.0)

    @pytest.mark.slow
    def test_alamouti_not_below_jash(self):
        """모든 SNR 에서 Alamouti 정렬 합 전송률 ≥ JaSh (신뢰구간 반폭 허용)"""
        grid = [5, 15, 25, 35]
        proposed = MiService.run_mi("x_alamouti", grid, RngSpec(0), trials=5000, batch_size=2500)
        baseline = MiService.run_mi("jash", grid, RngSpec(0), trials=5000, batch_size=2500)
        for p, b in zip(proposed.points, baseline.points):
            self.assertEqual(p.snr_db, b.snr_db)
            self.assertGreaterEqual(p.sum_rate + p.ci_halfwidth + b.ci_halfwidth, b.sum_rate, p.snr_db)


class DiversityTestCase(SimpleTestCase):
    """다이버시티 추정 테스트"""

    def _power_law_curve(self, d):
        points = tuple(
            BerPoint(s, int(round(1e12 * 10 ** (-d * s / 10))), 10**12, 1, 0.0) for s in (20, 22, 24, 26, 28, 30, 32)
        )
        return BerCurve("synthetic", "BPSK", points)

    def test_ber_power_law(self):
        """BER = c·P⁻² 이면 d = 2.0 ± 0.01"""
        estimate = estimate_diversity_ber(self._power_law_curve(2))
        self.assertAlmostEqual(estimate.d, 2.0, delta=0.01)
        self.assertEqual(estimate.method, "BER_SLOPE")

    def test_ber_insufficient(self):
        """창 안의 점이 부족하거나 BER 0 이면 InsufficientData"""
        curve = self._power_law_curve(2)
        with self.assertRaises(InsufficientData):
            estimate_diversity_ber(curve, window=(20, 22))
        zero = BerCurve("z", "BPSK", curve.points[:-1] + (BerPoint(32, 0, 100, 1, 0.0),))
        with self.assertRaises(InsufficientData):
            estimate_diversity_ber(zero)

    def test_outage_probability(self):
        """경험적 P(γ < ε)"""
        assert_allclose(outage_probability(np.arange(10) / 10, [0.05, 0.5, 2.0]), [0.1, 0.5, 1.0])

    def test_exponential_reference(self):
        """γ = |CN(0,1)|² 이면 d = 1.0 ± 0.05"""
        rng = np.random.default_rng(0)
        estimate = estimate_diversity_outage(
            lambda n: exponential_gamma(rng, n), eps_grid(1e-3, 1e-1, 9), 1_000_000, chunk=250_000
        )
        self.assertAlmostEqual(estimate.d, 1.0, delta=0.05)
        self.assertEqual(estimate.dropped, ())

    def test_outage_drops_sparse_points(self):
        """불능 사건이 부족한 ε 는 버리고 기록"""
        samples = exponential_gamma(np.random.default_rng(1), 50_000)
        estimate = estimate_diversity_outage_samples(samples, eps_grid(1e-4, 1e-1, 7))
        self.assertAlmostEqual(estimate.dropped[0], 1e-4)
        self.assertAlmostEqual(estimate.d, 1.0, delta=0.1)

    def test_outage_grid_span(self):
        """ε 격자가 두 자릿수를 넘지 않으면 InsufficientData"""
        with self.assertRaises(InsufficientData):
            estimate_diversity_outage_samples(np.ones(10), [1e-2, 1e-1])


class VerificationTestCase(SimpleTestCase):
    """수치 검증 테스트"""

    def test_structural_suite(self):
        """구조 검증은 모두 통과"""
        reports = verify_structural(RngSpec(0), trials=300)
        names = {r.name for r in reports}
        self.assertIn("ibc_interference_span", names)
        self.assertIn("x_full_rank_submatrix", names)
        for report in reports:
            self.assertTrue(report.passed, f"{report.name}: {report.statistic}")

    def test_zf_gamma_invariance(self):
        """영강제 수신기 선택과 무관한 γ"""
        report = verify_lemma2(RngSpec(0), trials=500)
        self.assertTrue(report.passed, report.details)

    def test_gamma_prime(self):
        """γ ≤ γ′, 1 ≤ |κ| ≤ 2 빈도는 0 과 1 사이"""
        report = verify_gamma_prime(RngSpec(0), trials=3000)
        self.assertTrue(report.passed, report.details)
        self.assertGreater(report.details["kappa_window_fraction"], 0.05)

    def test_gamma_bar_bounds(self):
        """(3/4)γ̄ ≥ γ ≥ (3/8)γ̄"""
        report = verify_gamma_bar_bounds(RngSpec(0), trials=2000)
        self.assertTrue(report.passed, report.details)

    def test_phi_bounds(self):
        """1/det Φ > 1, tr Φ = 1"""
        report = verify_phi_bounds(RngSpec(0), trials=20_000)
        self.assertTrue(report.passed)
        self.assertLess(report.details["trace_deviation"], 1e-9)
        self.assertGreaterEqual(report.details["min"], 4 - 1e-6)
        self.assertEqual(report.details["upper_reference"], PHI_UPPER)

    def test_phi_trace_violation_fails(self):
        """tr Φ ≠ 1 이면 검증 실패"""
        original = verification_service.phi_matrix
        with mock.patch.object(verification_service, "phi_matrix", side_effect=lambda ch: 2 * original(ch)):
            report = verify_phi_bounds(RngSpec(0), trials=2000)
        self.assertFalse(report.passed)
        self.assertAlmostEqual(report.details["trace_deviation"], 1.0, places=9)
        self.assertIn("tr(Phi)", report.criterion)

    @pytest.mark.slow
    def test_outage_slope_near_one(self):
        """1/tr(F⁻¹F⁻*) 불능 기울기 1.0 ± 0.1"""
        report = verify_lemma1(RngSpec(0), trials=2_000_000)
        self.assertTrue(report.passed, report.details)


@pytest.mark.acceptance
class ReproductionTestCase(SimpleTestCase):
    """재현 실험 (기본 실행에서 제외)"""

    def test_x_outage_slope(self):
        """Alamouti 정렬 γ 의 불능 기울기 2.0 ± 0.2"""
        scheme, spec = get_scheme("x_alamouti"), RngSpec(0)
        rng = spec.generator(1)
        sampler = lambda n: scheme.outage_gamma(rng, n)
        estimate = estimate_diversity_outage(sampler, eps_grid(), 10_000_000, chunk=500_000)
        self.assertAlmostEqual(estimate.d, 2.0, delta=0.2)

    def test_jash_outage_slope(self):
        """JaSh γ 와 변형 방식 γ_sum 의 불능 기울기 ≤ 1.2"""
        for name in ("jash", "jash_modified"):
            scheme, rng = get_scheme(name), RngSpec(0).generator(2)
            sampler = lambda n: scheme.outage_gamma(rng, n)
            estimate = estimate_diversity_outage(sampler, eps_grid(), 2_000_000, chunk=250_000)
            self.assertLessEqual(estimate.d, 1.2, name)

    def test_array_gain_x_channel(self):
        """Alamouti 정렬이 JaSh 보다 BER 10⁻³ 에서 9 dB, 10⁻⁴ 에서 10 dB 이상 앞서고 차이는 벌어짐"""
        grid = list(range(10, 46, 2))
        kwargs = dict(target_errors=200, max_trials=5_000_000, batch_size=50_000, workers=4)
        proposed = BerService.run_ber("x_alamouti", "BPSK", grid, RngSpec(0), **kwargs)
        baseline = BerService.run_ber("jash", "BPSK", grid, RngSpec(0), **kwargs)
        gap_3 = snr_at_ber(baseline, 1e-3) - snr_at_ber(proposed, 1e-3)
        gap_4 = snr_at_ber(baseline, 1e-4) - snr_at_ber(proposed, 1e-4)
        self.assertGreater(gap_3, 9.0)
        self.assertGreater(gap_4, 10.0)
        self.assertGreater(gap_4, gap_3)

    def test_array_gain_ibc(self):
        """BER 10⁻² 에서 하향링크 Alamouti 정렬이 하향링크 IA 보다 20 ± 5 dB 앞섬"""
        grid = list(range(0, 42, 2))
        kwargs = dict(target_errors=200, max_trials=2_000_000, batch_size=50_000, workers=4)
        proposed = BerService.run_ber("ibc_alamouti", "BPSK", grid, RngSpec(0), **kwargs)
        baseline = BerService.run_ber("ibc_downlink_ia", "BPSK", grid, RngSpec(0), **kwargs)
        gap = snr_at_ber(baseline, 1e-2) - snr_at_ber(proposed, 1e-2)
        self.assertTrue(15.0 <= gap <= 25.0, gap)

    def test_ibc_ber_slope(self):
        """하향링크 Alamouti 정렬의 BER 기울기 [1.7, 2.3]"""
        kwargs = dict(target_errors=200, max_trials=5_000_000, batch_size=50_000, workers=4)
        curve = BerService.run_ber("ibc_alamouti", "BPSK", [20, 24, 28, 32], RngSpec(0), **kwargs)
        self.assertTrue(1.7 <= estimate_diversity_ber(curve).d <= 2.3)

    def test_imac_matches_ibc_slope(self):
        """상향링크와 하향링크 BER 기울기가 모두 약 2 이고 서로 0.3 이내"""
        kwargs = dict(target_errors=200, max_trials=5_000_000, batch_size=50_000, workers=4)
        grid = [20, 24, 28, 32]
        imac = estimate_diversity_ber(BerService.run_ber("imac", "BPSK", grid, RngSpec(0), **kwargs)).d
        ibc = estimate_diversity_ber(BerService.run_ber("ibc_alamouti", "BPSK", grid, RngSpec(0), **kwargs)).d
        self.assertTrue(1.6 <= imac <= 2.4, imac)
        self.assertAlmostEqual(imac, ibc, delta=0.3)

    def test_modified_jash_qpsk(self):
        """변형 JaSh + QPSK 의 BER 기울기 ≤ 1.3, BER 10⁻³ 에서 Alamouti 정렬 BPSK 가 5 dB 이상 앞섬"""
        grid = list(range(10, 46, 2))
        kwargs = dict(target_errors=200, max_trials=5_000_000, batch_size=50_000, workers=4)
        modified = BerService.run_ber("jash_modified", "QPSK", grid, RngSpec(0), **kwargs)
        proposed = BerService.run_ber("x_alamouti", "BPSK", grid, RngSpec(0), **kwargs)
        self.assertLessEqual(estimate_diversity_ber(modified, window=(30.0, 44.0)).d, 1.3)
        self.assertGreater(snr_at_ber(modified, 1e-3) - snr_at_ber(proposed, 1e-3), 5.0)

    def test_dof_and_offsets(self):
        """자유도 8/3 ± 0.1, 25 dB 에서 합 전송률 차이 약 3, 약 8"""
        grid = [25, 40, 45, 50, 55, 60]
        curves = {name: MiService.run_mi(name, grid, RngSpec(0), trials=20_000) for name in SCHEME_NAMES}
        for name in ("x_alamouti", "ibc_alamouti", "jash", "ibc_downlink_ia"):
            self.assertAlmostEqual(estimate_dof(curves[name]), 8 / 3, delta=0.1)
        self.assertAlmostEqual(rate_gap(curves["x_alamouti"], curves["jash"], 25), 3.0, delta=1.0)
        self.assertAlmostEqual(rate_gap(curves["ibc_alamouti"], curves["ibc_downlink_ia"], 25), 8.0, delta=1.0)
