import numpy as np
import pytest
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from apps.fading.services.channel_service import ChannelService, ChannelSetX
from apps.fading.services.constellation_service import SymbolFrame, get_constellation
from apps.fading.services.noise_service import add_awgn
from apps.linalg.services.alamouti_service import alamouti_residual
from apps.xchannel.services.beamforming_service import (
    SCALE,
    AlignmentLinks,
    XBeamformingService,
    block_power,
    hat_blocks,
    x_channel_gate,
)
from apps.xchannel.services.receiver_service import (
    XReceiverService,
    aligned_interference,
    x_cancel_aligned,
    x_decouple_users,
    x_receive_stack,
    x_stack_matrix,
)
from apps.xchannel.services.snr_service import full_rank_margin, x_equivalent_channels, x_gamma, x_zf_gamma


def _setup(seed, size, name="QPSK", power=1.0):
    rng = np.random.default_rng(seed)
    ch = ChannelService.sample_x_channels(rng, size=size, gate=x_channel_gate)
    links = AlignmentLinks.from_x_channel(ch)
    bf = XBeamformingService.beamformers(links)
    frame = SymbolFrame.random(rng, get_constellation(name), power, size)
    return rng, ch, links, bf, frame


def _fixed_channel():
    eye = np.eye(2, dtype=complex)
    H = np.empty((1, 2, 2, 2, 2), dtype=complex)
    H[0, 0, 0] = eye
    H[0, 0, 1] = eye
    H[0, 1, 0] = eye
    H[0, 1, 1] = np.diag([1.0, 1j])
    return ChannelSetX(H=H)


class XBeamformerTestCase(SimpleTestCase):
    """송신 빔포머 테스트"""

    def test_identity_cross_channel(self):
        """교차 채널이 단위행렬이면 V = I/√2, c = 1/√2"""
        ch = ChannelSetX(H=np.broadcast_to(np.eye(2, dtype=complex), (1, 2, 2, 2, 2)).copy())
        bf = XBeamformingService.x_beamformers(ch)
        assert_allclose(bf.V[0, 0, 0], np.eye(2) / np.sqrt(2))
        self.assertAlmostEqual(float(bf.c[0, 0, 0]), 1 / np.sqrt(2))

    def test_unit_power(self):
        """tr(V V*) = 1, 모든 원소 크기 < 1"""
        _, _, _, bf, _ = _setup(0, 500)
        assert_allclose(np.sum(np.abs(bf.V) ** 2, axis=(-2, -1)), 1.0, atol=1e-10)
        self.assertTrue(np.all(np.abs(bf.V) < 1))

    def test_symbol_energy(self):
        """심볼당 송신 에너지 (3/4) tr(V V*) = 3/4"""
        _, _, _, bf, _ = _setup(6, 200)
        assert_allclose(SCALE**2 * np.sum(np.abs(bf.V) ** 2, axis=(-2, -1)), 0.75, atol=1e-10)

    def test_uses_cross_channel(self):
        """V[j, i] 는 H[j, ī] 를 역변환"""
        _, ch, _, bf, _ = _setup(1, 50)
        product = bf.V[:, 1, 0] @ ch.H[:, 1, 1]
        assert_allclose(product, bf.c[:, 1, 0, None, None] * np.eye(2), atol=1e-10)


class XEncodeTestCase(SimpleTestCase):
    """송신 블록 테스트"""

    def test_zero_symbols(self):
        """심볼이 모두 0 이면 블록도 0"""
        _, _, _, bf, frame = _setup(2, 10)
        zero = SymbolFrame(np.zeros_like(frame.s), frame.bits, frame.constellation, frame.power)
        assert_array_equal(XBeamformingService.x_encode(zero, bf), 0)

    def test_third_slot_empty(self):
        """수신기 1 용 심볼이 0 이면 세 번째 슬롯은 0"""
        _, _, _, bf, frame = _setup(3, 10)
        s = frame.s.copy()
        s[:, :, 1, :] = 0
        X = XBeamformingService.x_encode(SymbolFrame(s, frame.bits, frame.constellation, 1.0), bf)
        assert_array_equal(X[:, :, 2, :], 0)
        self.assertTrue(np.all(np.abs(X[:, :, 0, :]) > 0))

    def test_block_power(self):
        """랜덤 프레임의 평균 블록 전력은 3P ± 1%"""
        P = 2.0
        _, _, _, bf, frame = _setup(4, 100_000, power=P)
        power = block_power(XBeamformingService.x_encode(frame, bf))
        self.assertAlmostEqual(float(np.mean(power)) / (3 * P), 1.0, delta=0.01)


class XReceiverTestCase(SimpleTestCase):
    """수신기 테스트"""

    def _noiseless(self, seed, size, name="QPSK"):
        rng, ch, links, bf, frame = _setup(seed, size, name)
        Y = XBeamformingService.propagate(XBeamformingService.x_encode_parts(frame, bf), links)
        Ht = XBeamformingService.equivalent_channels(links, bf)
        return Y, Ht, bf, frame

    def test_propagation_matches_block_form(self):
        """성분별 전파 결과는 Y^{[i]} = Σ_j X^{[j]} H^{[ji]} 와 같다"""
        rng, ch, links, bf, frame = _setup(5, 20)
        X = XBeamformingService.x_encode(frame, bf)
        Y = XBeamformingService.propagate(XBeamformingService.x_encode_parts(frame, bf), links)
        for i in range(2):
            expected = X[:, 0] @ ch.H[:, 0, i] + X[:, 1] @ ch.H[:, 1, i]
            assert_allclose(Y[:, i], expected, atol=1e-12)

    def test_stack_matches_matrix_form(self):
        """무잡음 ỹ 는 6x6 행렬 형태와 일치"""
        Y, Ht, bf, frame = self._noiseless(6, 200)
        for i in range(2):
            unknowns = np.concatenate(
                [frame.s[:, 0, i], frame.s[:, 1, i], aligned_interference(frame.s, bf.c, i)], axis=-1
            )
            M = x_stack_matrix(Ht[:, 0, i], Ht[:, 1, i])
            expected = SCALE * np.einsum("nrc,nc->nr", M, unknowns)
            assert_allclose(x_receive_stack(Y[:, i], i), expected, atol=1e-10)

    def test_single_symbol_column(self):
        """s₁^{[00]} 만 1 이면 ỹ 는 행렬의 첫 열 × √(3/4)"""
        links = AlignmentLinks.from_x_channel(ChannelSetX(H=np.eye(2, dtype=complex) * np.ones((1, 2, 2, 1, 1))))
        bf = XBeamformingService.beamformers(links)
        s = np.zeros((1, 2, 2, 2), dtype=complex)
        s[0, 0, 0, 0] = 1
        frame = SymbolFrame.from_symbols(s, get_constellation("BPSK"), 1.0)
        Y = XBeamformingService.propagate(XBeamformingService.x_encode_parts(frame, bf), links)
        Ht = XBeamformingService.equivalent_channels(links, bf)
        M = x_stack_matrix(Ht[:, 0, 0], Ht[:, 1, 0])
        assert_allclose(x_receive_stack(Y[:, 0], 0), SCALE * M[:, :, 0], atol=1e-12)

    def test_zero_input(self):
        """0 입력 → 0 출력"""
        assert_array_equal(x_receive_stack(np.zeros((3, 2)), 1), np.zeros(6))

    def test_column_orthogonality(self):
        """신호 열 0⊥1, 2⊥3"""
        _, Ht, _, _ = self._noiseless(8, 100)
        M = x_stack_matrix(Ht[:, 0, 0], Ht[:, 1, 0])
        for a, b in ((0, 1), (2, 3)):
            inner = np.abs(np.sum(np.conj(M[:, :, a]) * M[:, :, b], axis=-1))
            scale = np.linalg.norm(M[:, :, a], axis=-1) * np.linalg.norm(M[:, :, b], axis=-1)
            self.assertTrue(np.all(inner < 1e-12 * scale))

    def test_interference_aligned(self):
        """원하는 심볼이 0 이면 ỹ 는 간섭 열 두 개가 만드는 공간 안에 있다"""
        rng, ch, links, bf, frame = _setup(9, 100)
        s = frame.s.copy()
        s[:, :, 0, :] = 0
        quiet = SymbolFrame(s, frame.bits, frame.constellation, 1.0)
        Y = XBeamformingService.propagate(XBeamformingService.x_encode_parts(quiet, bf), links)
        y = x_receive_stack(Y[:, 0], 0)
        basis = x_stack_matrix(np.eye(2), np.eye(2))[:, 4:]
        coeff, *_ = np.linalg.lstsq(basis, y.T, rcond=None)
        residual = np.linalg.norm(y.T - basis @ coeff, axis=0)
        self.assertTrue(np.all(residual < 1e-10 * np.linalg.norm(y, axis=-1)))

    def test_cancel_removes_interference(self):
        """원하는 심볼이 0 이면 ŷ1 = ŷ2 = 0"""
        rng, ch, links, bf, frame = _setup(10, 100)
        s = frame.s.copy()
        s[:, :, 1, :] = 0
        quiet = SymbolFrame(s, frame.bits, frame.constellation, 1.0)
        Y = XBeamformingService.propagate(XBeamformingService.x_encode_parts(quiet, bf), links)
        y1, y2 = x_cancel_aligned(x_receive_stack(Y[:, 1], 1))
        assert_allclose(y1, 0, atol=1e-12)
        assert_allclose(y2, 0, atol=1e-12)

    def test_cancelled_noise_covariance(self):
        """잡음만 있으면 등가 잡음 공분산은 diag(1, 2, 1, 2)"""
        rng = np.random.default_rng(11)
        noise = add_awgn(np.zeros((400_000, 3, 2)), rng)
        y1, y2 = x_cancel_aligned(x_receive_stack(noise, 0))
        w = np.concatenate([y1, y2], axis=-1)
        cov = w.T @ np.conj(w) / w.shape[0]
        assert_allclose(np.real(np.diag(cov)), [1, 2, 1, 2], atol=0.03)
        self.assertLess(float(np.max(np.abs(cov - np.diag(np.diag(cov))))), 0.02)

    def test_cancel_matches_hat_blocks(self):
        """간섭 제거 결과는 Ĥ 블록으로 쓴 등가 시스템과 일치"""
        Y, Ht, bf, frame = self._noiseless(12, 100)
        y1, y2 = x_cancel_aligned(x_receive_stack(Y[:, 0], 0))
        hats = hat_blocks(Ht[:, :, 0])
        for n, y in enumerate((y1, y2)):
            expected = sum(SCALE * np.einsum("nrc,nc->nr", hats[:, j, n], frame.s[:, j, 0]) for j in range(2))
            assert_allclose(y, expected, atol=1e-10)

    def test_decoupled_is_alamouti(self):
        """분리 후 등가 채널은 Alamouti, 다른 송신기 신호가 없으면 ŷ = √(3/4) Ĥ s"""
        rng, ch, links, bf, frame = _setup(13, 100)
        s = frame.s.copy()
        s[:, 1, 0, :] = 0
        frame = SymbolFrame(s, frame.bits, frame.constellation, 1.0)
        Y = XBeamformingService.propagate(XBeamformingService.x_encode_parts(frame, bf), links)
        Ht = XBeamformingService.equivalent_channels(links, bf)
        hats = hat_blocks(Ht[:, :, 0])
        y1, y2 = x_cancel_aligned(x_receive_stack(Y[:, 0], 0))
        y, H = x_decouple_users(y1, y2, hats[:, 0], hats[:, 1])
        self.assertTrue(np.all(alamouti_residual(H) < 1e-10))
        assert_allclose(y, SCALE * np.einsum("nrc,nc->nr", H, frame.s[:, 0, 0]), atol=1e-10)

    def test_other_user_removed(self):
        """분리 결과에는 다른 송신기 심볼이 남지 않는다"""
        Y, Ht, bf, frame = self._noiseless(14, 100)
        hats = hat_blocks(Ht[:, :, 1])
        y1, y2 = x_cancel_aligned(x_receive_stack(Y[:, 1], 1))
        y, H = x_decouple_users(y1, y2, hats[:, 1], hats[:, 0])
        assert_allclose(y, SCALE * np.einsum("nrc,nc->nr", H, frame.s[:, 1, 1]), atol=1e-10)

    def test_zero_noise_recovery(self):
        """무잡음에서 모든 성상도의 모든 심볼을 정확히 복원"""
        for seed, name in enumerate(("BPSK", "QPSK", "PSK16", "QAM16")):
            Y, Ht, bf, frame = self._noiseless(20 + seed, 300, name)
            symbols, bits = XReceiverService.decode(Y, Ht, frame.constellation, frame.power)
            assert_allclose(symbols, frame.s, atol=1e-9)
            self.assertEqual(frame.count_bit_errors(bits), 0)

    @pytest.mark.slow
    def test_bpsk_high_snr(self):
        """BPSK, 30 dB 에서 BER < 1e-3"""
        P = 10**3.0
        rng, ch, links, bf, frame = _setup(30, 20_000, "BPSK", P)
        Y = XBeamformingService.channel_output(frame, links, bf, rng)
        Ht = XBeamformingService.equivalent_channels(links, bf)
        _, bits = XReceiverService.decode(Y, Ht, frame.constellation, P)
        self.assertLess(frame.count_bit_errors(bits) / frame.bit_count, 1e-3)


class XGammaTestCase(SimpleTestCase):
    """순간 SNR 테스트"""

    def test_fixed_channel_closed_form(self):
        """고정 채널에서 손으로 계산한 γ = 1/4, γ̄ = 1/2"""
        sample = x_gamma(_fixed_channel(), (0, 0, 0))
        assert_allclose(sample.gamma, [0.25], atol=1e-12)
        assert_allclose(sample.gamma_bar, [0.5], atol=1e-12)

    def test_gamma_bar_bounds(self):
        """(3/4)γ̄ ≥ γ ≥ (3/8)γ̄"""
        rng = np.random.default_rng(40)
        ch = ChannelService.sample_x_channels(rng, size=5000, gate=x_channel_gate)
        for stream in ((0, 0, 0), (1, 0, 1), (0, 1, 1), (1, 1, 0)):
            sample = x_gamma(ch, stream)
            self.assertTrue(np.all(sample.gamma <= 0.75 * sample.gamma_bar * (1 + 1e-10)))
            self.assertTrue(np.all(sample.gamma >= 0.375 * sample.gamma_bar * (1 - 1e-10)))

    def test_gamma_equals_zero_forcing(self):
        """간섭 제거 γ 와 영강제 사영 γ 는 같다"""
        rng = np.random.default_rng(41)
        ch = ChannelService.sample_x_channels(rng, size=2000, gate=x_channel_gate)
        Ht = x_equivalent_channels(ch)
        for j, i, k in ((0, 0, 0), (1, 0, 0), (0, 1, 1), (1, 1, 1)):
            gamma = x_gamma(ch, (j, i, k)).gamma
            assert_allclose(x_zf_gamma(Ht[:, :, i], j, k), gamma, rtol=1e-8)

    def test_full_rank(self):
        """4x4 신호 행렬은 항상 최대 계수"""
        rng = np.random.default_rng(42)
        ch = ChannelService.sample_x_channels(rng, size=10_000, gate=x_channel_gate)
        margin = full_rank_margin(x_equivalent_channels(ch)[:, :, 0])
        self.assertGreater(float(np.min(margin)), 0.0)
