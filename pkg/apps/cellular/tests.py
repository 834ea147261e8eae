import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from apps.cellular.services.downlink_ia_service import (
    DownlinkIaService,
    _interference_columns,
    downlink_ia_gamma,
    draw_random_precoder,
    left_null_rows_reference,
)
from apps.cellular.services.ibc_service import (
    IbcService,
    combining_matrix,
    extraction_matrix,
    ibc_gamma,
    ibc_gate,
    interference_basis,
    receive_stack,
    rotated_symbols,
    row_alamouti,
)
from apps.cellular.services.imac_service import ImacService, imac_gamma, imac_gate
from apps.common.exceptions import ConfigurationError
from apps.fading.services.channel_service import ChannelService, ChannelSetCell
from apps.fading.services.constellation_service import SymbolFrame, get_constellation
from apps.linalg.services.alamouti_service import alamouti_embed, is_alamouti, is_swapped_alamouti
from apps.linalg.services.matrix_service import frob_norm2, herm, inverse2
from apps.xchannel.services.beamforming_service import AlignmentLinks, XBeamformingService, x_channel_gate
from apps.xchannel.services.receiver_service import XReceiverService


def _cell(seed, size, gate=None):
    rng = np.random.default_rng(seed)
    return rng, ChannelService.sample_cell_channels(rng, size=size, gate=gate)


def _frame(rng, size, name="QPSK", power=1.0):
    return SymbolFrame.random(rng, get_constellation(name), power, size)


class ImacTestCase(SimpleTestCase):
    """상향링크 정렬 테스트"""

    def test_x_channel_specialization(self):
        """I[j, i] = H[j, ī] 이면 X 채널 방식과 비트 단위로 같다"""
        rng = np.random.default_rng(0)
        ch = ChannelService.sample_x_channels(rng, size=500, gate=x_channel_gate)
        frame = _frame(rng, ch.size, "QPSK", 10.0)

        links = AlignmentLinks.from_x_channel(ch)
        bf = XBeamformingService.beamformers(links)
        Y = XBeamformingService.channel_output(frame, links, bf, np.random.default_rng(7))
        Ht = XBeamformingService.equivalent_channels(links, bf)
        _, x_bits = XReceiverService.decode(Y, Ht, frame.constellation, frame.power)

        cell = ChannelSetCell(H=ch.H, I=ch.H[:, :, ::-1])
        _, imac_bits = ImacService.imac_run(frame, cell, np.random.default_rng(7))
        assert_array_equal(imac_bits, x_bits)

    def test_zero_noise_recovery(self):
        """무잡음 복원"""
        rng, ch = _cell(1, 300, imac_gate)
        frame = _frame(rng, ch.size, "QAM16")
        symbols, bits = ImacService.imac_run(frame, ch, rng, noise_variance=0.0)
        self.assertEqual(frame.count_bit_errors(bits), 0)
        assert_allclose(symbols, frame.s, atol=1e-9)

    def test_mobile_power(self):
        """단말 블록 전력은 3P/2"""
        rng, ch = _cell(2, 100_000, imac_gate)
        frame = _frame(rng, ch.size, "QPSK", 2.0)
        links = AlignmentLinks(D=ch.H, L=ch.I)
        parts = XBeamformingService.x_encode_parts(frame, XBeamformingService.beamformers(links))
        self.assertAlmostEqual(float(np.mean(frob_norm2(parts))) / 3.0, 1.0, delta=0.01)

    def test_gamma_bounds(self):
        """(3/4)γ̄ ≥ γ ≥ (3/8)γ̄"""
        _, ch = _cell(3, 3000, imac_gate)
        sample = imac_gamma(ch, (1, 0, 1))
        self.assertTrue(np.all(sample.gamma <= 0.75 * sample.gamma_bar * (1 + 1e-10)))
        self.assertTrue(np.all(sample.gamma >= 0.375 * sample.gamma_bar * (1 - 1e-10)))


class IbcPrecoderTestCase(SimpleTestCase):
    """하향링크 프리코더 테스트"""

    def test_hat_blocks_alamouti(self):
        """행으로 만든 Ĥ_m 과 회전 행렬 C 는 Alamouti"""
        _, ch = _cell(10, 200, ibc_gate)
        pre = IbcService.ibc_precoders(ch)
        for m in range(2):
            self.assertTrue(is_alamouti(row_alamouti(pre.Ht, m)))
        self.assertTrue(is_alamouti(pre.C))

    def test_other_user_swapped(self):
        """다른 단말용 등가 채널 R(H̃) H̃ 는 swapped Alamouti"""
        _, ch = _cell(11, 200, ibc_gate)
        pre = IbcService.ibc_precoders(ch)
        self.assertTrue(is_swapped_alamouti(combining_matrix(pre.Ht) @ pre.Ht))

    def test_precoder_power(self):
        """‖P‖_F² = 1/2, 기지국 블록 전력은 3P ± 1%"""
        rng, ch = _cell(12, 100_000, ibc_gate)
        pre = IbcService.ibc_precoders(ch)
        assert_allclose(frob_norm2(pre.P), 0.5, atol=1e-10)
        frame = _frame(rng, ch.size, "QPSK", 2.0)
        power = frob_norm2(IbcService.ibc_encode(frame, pre))
        self.assertAlmostEqual(float(np.mean(power)) / 6.0, 1.0, delta=0.01)


class IbcEncodeTestCase(SimpleTestCase):
    """하향링크 송신 블록 테스트"""

    def test_zero_symbols(self):
        """심볼이 모두 0 이면 블록도 0"""
        rng, ch = _cell(20, 10, ibc_gate)
        frame = _frame(rng, ch.size)
        zero = SymbolFrame(np.zeros_like(frame.s), frame.bits, frame.constellation, 1.0)
        assert_array_equal(IbcService.ibc_encode(zero, IbcService.ibc_precoders(ch)), 0)

    def test_padding_swapped(self):
        """반대편 셀이 읽는 슬롯 순서에서 채움 블록은 swapped Alamouti"""
        rng, ch = _cell(21, 100, ibc_gate)
        X = IbcService.ibc_encode(_frame(rng, ch.size), IbcService.ibc_precoders(ch))
        self.assertTrue(is_swapped_alamouti(X[:, 0, [2, 1], :]))
        self.assertTrue(is_swapped_alamouti(X[:, 1, [0, 1], :]))

    def test_psk_envelope(self):
        """PSK 입력의 Alamouti 블록은 원소 크기가 일정"""
        rng = np.random.default_rng(22)
        frame = _frame(rng, 100, "PSK16", 4.0)

        S = alamouti_embed(frame.s[..., 0], frame.s[..., 1])
        assert_allclose(np.abs(S), 2.0, atol=1e-12)


class IbcReceiverTestCase(SimpleTestCase):
    """하향링크 수신기 테스트"""

    def _noiseless(self, seed, size, name="QPSK"):
        rng, ch = _cell(seed, size, ibc_gate)
        frame = _frame(rng, ch.size, name)
        pre = IbcService.ibc_precoders(ch)
        Y = IbcService.ibc_propagate(IbcService.ibc_encode(frame, pre), ch)
        return ch, frame, pre, Y

    def test_zero_noise_recovery(self):
        """무잡음에서 8개 심볼 모두 복원"""
        for seed, name in enumerate(("BPSK", "QPSK", "PSK16")):
            rng, ch = _cell(30 + seed, 300, ibc_gate)
            frame = _frame(rng, ch.size, name)
            symbols, bits = IbcService.ibc_run(frame, ch, rng, noise_variance=0.0)
            self.assertEqual(frame.count_bit_errors(bits), 0)
            assert_allclose(symbols, frame.s, atol=1e-9)

    def test_extraction_is_diagonal(self):
        """무잡음 추출값은 ŷ_k = αρ s_k"""
        ch, frame, pre, Y = self._noiseless(33, 200)
        for j in range(2):
            y = IbcService.ibc_receive(Y[:, j], ch.I[:, j], j)
            assert_allclose(y, pre.gain[:, j, :, None] * frame.s[:, j], atol=1e-9)

    def test_interference_in_q_span(self):
        """원하는 심볼이 0 이면 z 는 Q 의 열공간 안에 있다"""
        rng, ch = _cell(34, 200, ibc_gate)
        frame = _frame(rng, ch.size)
        pre = IbcService.ibc_precoders(ch)
        Q = interference_basis()
        for j, i in ((0, 0), (1, 1)):
            s = frame.s.copy()
            s[:, j, i] = 0
            quiet = SymbolFrame(s, frame.bits, frame.constellation, 1.0)
            Y = IbcService.ibc_propagate(IbcService.ibc_encode(quiet, pre), ch)
            z = receive_stack(Y[:, j, i], ch.I[:, j, i], j)
            coeff, *_ = np.linalg.lstsq(Q, z.T, rcond=None)
            residual = np.linalg.norm(z.T - Q @ coeff, axis=0)
            self.assertTrue(np.all(residual < 1e-10 * np.linalg.norm(z, axis=-1)))

    def test_desired_outside_q_span(self):
        """원하는 신호는 Q 와 독립 (6x6 쌓은 행렬의 최소 특이값 > 0)"""
        ch, frame, pre, Y = self._noiseless(35, 200)
        Q = np.broadcast_to(interference_basis(), (ch.size, 6, 4))
        columns = []
        for k in range(2):
            s = np.zeros_like(frame.s)
            s[:, 0, 0, k] = 1
            unit = SymbolFrame(s, frame.bits, frame.constellation, 1.0)
            Yk = IbcService.ibc_propagate(IbcService.ibc_encode(unit, pre), ch)
            columns.append(receive_stack(Yk[:, 0, 0], ch.I[:, 0, 0], 0))
        M = np.concatenate([np.stack(columns, axis=-1), Q], axis=-1)
        self.assertGreater(float(np.min(np.linalg.svd(M, compute_uv=False)[:, -1])), 0.0)

    def test_extraction_matrix_alamouti(self):
        """회전 심볼에서 추출값으로 가는 행렬은 Alamouti"""
        _, _, pre, _ = self._noiseless(36, 100)
        self.assertTrue(is_alamouti(extraction_matrix(pre)))

    def test_rotation_consistency(self):
        """추출 행렬을 풀어 얻은 회전 심볼이 직접 계산한 값과 일치"""
        ch, frame, pre, Y = self._noiseless(37, 200)
        E = extraction_matrix(pre)
        c = rotated_symbols(frame, pre)
        for j in range(2):
            y = IbcService.ibc_receive(Y[:, j], ch.I[:, j], j)
            recovered = np.linalg.solve(E[:, j], y[..., None])[..., 0]
            assert_allclose(recovered, c[:, j], atol=1e-9)

    def test_non_psk_rejected(self):
        """PSK 가 아니면 ConfigurationError"""
        with self.assertRaises(ConfigurationError):
            IbcService.ibc_decode(np.zeros((1, 2)), np.ones(1), get_constellation("QAM16"), 1.0)

    def test_gamma_matches_noise(self):
        """추출 잡음 분산은 ‖I⁻¹‖_F², γ = (αρ)² / ‖I⁻¹‖_F²"""
        rng, ch = _cell(38, 1, ibc_gate)
        N = 200_000
        I = np.broadcast_to(ch.I[:, 0, 1], (N, 2, 2))
        noise = (rng.standard_normal((N, 3, 2)) + 1j * rng.standard_normal((N, 3, 2))) / np.sqrt(2)
        y = IbcService.ibc_receive(noise, I, 0)
        expected = float(frob_norm2(inverse2(ch.I[0, 0, 1])))
        self.assertAlmostEqual(float(np.mean(np.abs(y[:, 0]) ** 2)) / expected, 1.0, delta=0.02)

        gamma = ibc_gamma(ch, (0, 1, 0)).gamma
        pre = IbcService.ibc_precoders(ch)
        assert_allclose(gamma, pre.gain[:, 0, 1] ** 2 / expected)


class DownlinkIaTestCase(SimpleTestCase):
    """하향링크 IA 기준 방식 테스트"""

    def _setup(self, seed, size):
        rng, ch = _cell(seed, size)
        pre = DownlinkIaService.downlink_ia_precoders(ch, draw_random_precoder(rng, ch))
        return rng, ch, pre

    def test_zero_noise_recovery(self):
        """무잡음 복원"""
        rng, ch = _cell(40, 300)
        frame = _frame(rng, ch.size, "QAM16")
        symbols, bits = DownlinkIaService.downlink_ia_run(frame, ch, rng, frame.constellation, noise_variance=0.0)
        self.assertEqual(frame.count_bit_errors(bits), 0)

    def test_inter_cell_nulling(self):
        """u (I₃⊗Iᵀ) P 는 0, u 의 행은 정규직교"""
        _, ch, pre = self._setup(41, 200)
        residual = pre.u @ _interference_columns(ch, pre.Prand)
        scale = np.linalg.norm(pre.Prand, axis=(-2, -1))[:, None, None, None, None]
        self.assertLess(float(np.max(np.abs(residual) / scale)), 1e-9)
        assert_allclose(pre.u @ herm(pre.u), np.broadcast_to(np.eye(2), pre.u.shape[:-2] + (2, 2)), atol=1e-12)

    def test_null_space_dual_path(self):
        """SVD 영공간과 scipy 영공간의 사영 행렬이 일치"""
        _, ch, pre = self._setup(42, 20)
        reference = left_null_rows_reference(_interference_columns(ch, pre.Prand))
        assert_allclose(herm(pre.u) @ pre.u, herm(reference) @ reference, atol=1e-10)

    def test_block_power(self):
        """스트림 전력 3/4, 기지국 블록 전력 3P ± 1%"""
        rng, ch, pre = self._setup(43, 50_000)
        frame = _frame(rng, ch.size, "QPSK", 2.0)
        power = frob_norm2(DownlinkIaService.encode(frame, pre))
        self.assertAlmostEqual(float(np.mean(power)) / 6.0, 1.0, delta=0.01)

    def test_gamma_is_amplitude(self):
        """γ = d² > 0"""
        rng, ch = _cell(44, 100)
        gamma = downlink_ia_gamma(ch, rng, (1, 0, 1)).gamma
        self.assertTrue(np.all(gamma > 0))
