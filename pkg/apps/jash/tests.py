import numpy as np
import pytest
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from apps.fading.services.channel_service import ChannelService
from apps.fading.services.constellation_service import SymbolFrame, get_constellation
from apps.jash.services.jash_service import (
    JashService,
    column_channels,
    gamma_parts,
    jash_gamma,
    jash_gamma_upper,
    jash_gate,
    reference_gamma_parts,
)
from apps.jash.services.modified_jash_service import ModifiedJashService, inner_code, modified_jash_gamma
from apps.linalg.services.matrix_service import apply_per_slot, frob_norm2, herm, svd_smallest


def _channels(seed, size):
    rng = np.random.default_rng(seed)
    ch = ChannelService.sample_x_channels(rng, size=size, gate=jash_gate)
    return rng, ch


class JashBeamformerTestCase(SimpleTestCase):
    """선형 정렬 빔포머 테스트"""

    def test_alignment_identities(self):
        """Ḡ11 v̄10 = α10 Ḡ01 v̄00, Ḡ10 v̄11 = α11 Ḡ00 v̄01"""
        _, ch = _channels(0, 500)
        bf = JashService.jash_beamformers(ch)
        G = column_channels(ch.H)
        for a, b, c, d, k in ((1, 1, 0, 1, 0), (1, 0, 0, 0, 1)):
            # Ḡ[a,b] v̄[1,k] vs α_k Ḡ[c,d] v̄[0,k]
            lhs = apply_per_slot(G[:, a, b], bf.vbar[:, 1, k])
            rhs = bf.alpha[:, k, None, None] * apply_per_slot(G[:, c, d], bf.vbar[:, 0, k])
            residual = np.sqrt(frob_norm2(lhs - rhs) / frob_norm2(rhs))
            self.assertLess(float(np.max(residual)), 1e-9)

    def test_interference_two_dimensional(self):
        """수신기마다 간섭은 2차원 부분공간에 정렬"""
        _, ch = _channels(1, 300)
        bf = JashService.jash_beamformers(ch)
        G = column_channels(ch.H)
        for i in range(2):
            other = 1 - i
            cols = np.concatenate(
                [apply_per_slot(G[:, 0, i], bf.vbar[:, 0, other]), apply_per_slot(G[:, 1, i], bf.vbar[:, 1, other])],
                axis=-1,
            )
            sv = np.linalg.svd(cols, compute_uv=False)
            self.assertTrue(np.all(sv[:, 2] < 1e-9 * sv[:, 0]))

    def test_beam_power(self):
        """모든 빔포머 ‖v̄‖_F² = 3/2"""
        _, ch = _channels(2, 200)
        bf = JashService.jash_beamformers(ch)
        assert_allclose(frob_norm2(bf.vbar), 1.5, atol=1e-10)

    def test_equal_stream_energy(self):
        """네 빔포머의 모든 열 에너지 3/4, 스트림마다 같은 전력"""
        _, ch = _channels(5, 200)
        bf = JashService.jash_beamformers(ch)
        assert_allclose(np.sum(np.abs(bf.vbar) ** 2, axis=-2), 0.75, atol=1e-10)

    def test_block_power(self):
        """랜덤 프레임의 평균 블록 전력은 3P ± 1%"""
        rng, ch = _channels(3, 100_000)
        frame = SymbolFrame.random(rng, get_constellation("QPSK"), 2.0, ch.size)
        X = JashService.jash_encode(frame, JashService.jash_beamformers(ch))
        self.assertAlmostEqual(float(np.mean(frob_norm2(X))) / 6.0, 1.0, delta=0.01)

    def test_independence(self):
        """6x6 등가 행렬의 최소 특이값 > 0"""
        _, ch = _channels(4, 10_000)
        M = JashService.equivalent_matrix(ch, JashService.jash_beamformers(ch))
        self.assertGreater(float(np.min(svd_smallest(M))), 0.0)


class JashReceiverTestCase(SimpleTestCase):
    """영강제 수신기 테스트"""

    def test_zero_noise_recovery(self):
        """무잡음에서 모든 심볼 복원"""
        for seed, name in enumerate(("BPSK", "QPSK", "QAM16")):
            rng, ch = _channels(10 + seed, 300)
            frame = SymbolFrame.random(rng, get_constellation(name), 1.0, ch.size)
            bf = JashService.jash_beamformers(ch)
            Y = JashService.propagate(JashService.jash_encode(frame, bf), ch)
            symbols, bits = JashService.jash_decode(Y, ch, bf, frame.constellation, 1.0)
            self.assertEqual(frame.count_bit_errors(bits), 0)
            assert_allclose(symbols, frame.s, atol=1e-6)

    def test_propagation_is_per_slot(self):
        """행 형태 전파는 슬롯별 Ḡ x̄ 와 같다"""
        rng, ch = _channels(14, 20)
        frame = SymbolFrame.random(rng, get_constellation("QPSK"), 1.0, ch.size)
        bf = JashService.jash_beamformers(ch)
        X = JashService.jash_encode(frame, bf)
        Y = JashService.propagate(X, ch)
        G = column_channels(ch.H)
        x = X.reshape(ch.size, 2, 6, 1)
        expected = apply_per_slot(G[:, 0, 1], x[:, 0]) + apply_per_slot(G[:, 1, 1], x[:, 1])
        assert_allclose(Y[:, 1].reshape(ch.size, 6), expected[..., 0], atol=1e-12)

    def test_zf_choice_independent(self):
        """사영 영강제 γ 는 유사역행렬 영강제 γ 와 같다"""
        _, ch = _channels(15, 1000)
        M = JashService.equivalent_matrix(ch, JashService.jash_beamformers(ch))[:, 0]
        _, gamma = JashService.zero_forcing(M)
        inverse_gram = np.linalg.inv(herm(M) @ M)
        pinv_gamma = 1.0 / np.real(np.diagonal(inverse_gram, axis1=-2, axis2=-1))[:, :4]
        assert_allclose(gamma, pinv_gamma, rtol=1e-8)


class JashGammaTestCase(SimpleTestCase):
    """순간 SNR 테스트"""

    @pytest.mark.slow
    def test_upper_bound(self):
        """10⁵ 실현값에서 γ ≤ γ′"""
        _, ch = _channels(20, 100_000)
        upper = jash_gamma_upper(ch)
        for k in range(2):
            gamma = jash_gamma(ch, (0, 0, k)).gamma
            self.assertTrue(np.all(gamma <= upper * (1 + 1e-9)))

    def test_upper_bound_small(self):
        """γ ≤ γ′ (소규모)"""
        _, ch = _channels(21, 5000)
        upper = jash_gamma_upper(ch)
        gamma = jash_gamma(ch, (0, 0, 0)).gamma
        self.assertTrue(np.all(gamma <= upper * (1 + 1e-9)))
        self.assertGreater(float(np.mean(gamma / upper)), 0.0)

    def test_parts_dual_path(self):
        """닫힌 형태 고유값 분해와 numpy 분해의 κ, δ 가 일치"""
        _, ch = _channels(22, 2000)
        closed = gamma_parts(ch)
        reference = reference_gamma_parts(ch)
        assert_allclose(closed.kappa, reference.kappa, rtol=1e-9)
        assert_allclose(closed.delta11, reference.delta11, rtol=1e-9)
        assert_allclose(closed.delta22, reference.delta22, rtol=1e-9)

    def test_delta_positive(self):
        """Δ 의 대각 원소는 양수"""
        _, ch = _channels(23, 1000)
        parts = gamma_parts(ch)
        self.assertTrue(np.all(parts.delta11 > 0))
        self.assertTrue(np.all(parts.delta22 > 0))


class ModifiedJashTestCase(SimpleTestCase):
    """변형 방식 테스트"""

    def test_inner_code(self):
        """둘째 블록은 (-b*, a*)"""
        first, second = inner_code(np.array([1 + 2j, 3 - 1j]))
        assert_allclose(second, [-(3 + 1j), 1 - 2j])

    def test_gamma_sum(self):
        """γ_sum 은 각 스트림 γ 이상"""
        _, ch = _channels(30, 2000)
        total = modified_jash_gamma(ch, (1, 0)).gamma
        for k in range(2):
            self.assertTrue(np.all(total >= jash_gamma(ch, (1, 0, k)).gamma))

    def test_zero_noise_recovery(self):
        """무잡음 16PSK 복원"""
        rng, ch = _channels(31, 300)
        frame = SymbolFrame.random(rng, get_constellation("PSK16"), 1.0, ch.size)
        bf = JashService.jash_beamformers(ch)
        Y = ModifiedJashService.propagate(ModifiedJashService.modified_jash_encode(frame, bf), ch)
        _, bits = ModifiedJashService.modified_jash_decode(Y, ch, bf, frame.constellation, 1.0)
        self.assertEqual(frame.count_bit_errors(bits), 0)
