import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from apps.common.exceptions import ConditioningError, UnknownConstellation
from apps.fading.services.channel_service import ChannelService
from apps.fading.services.constellation_service import (
    SymbolFrame,
    demodulate_nearest,
    get_constellation,
    modulate,
)
from apps.fading.services.noise_service import add_awgn
from apps.fading.services.seeding import RngSpec, stream_tag


class ChannelSamplingTestCase(SimpleTestCase):
    """채널 생성 테스트"""

    def test_unit_power(self):
        """|h|² 표본 평균은 1"""
        rng = np.random.default_rng(0)
        ch = ChannelService.sample_x_channels(rng, size=70_000)
        self.assertAlmostEqual(float(np.mean(np.abs(ch.H) ** 2)), 1.0, delta=0.01)
        self.assertAlmostEqual(float(np.var(ch.H.real)), 0.5, delta=0.01)

    def test_same_substream_same_channels(self):
        """같은 하위 스트림은 같은 채널"""
        spec = RngSpec(master_seed=42)
        a = ChannelService.sample_cell_channels(spec.generator(1, 2, 3), size=4)
        b = ChannelService.sample_cell_channels(spec.generator(1, 2, 3), size=4)
        assert_array_equal(a.H, b.H)
        assert_array_equal(a.I, b.I)

    def test_gate_resamples(self):
        """조건 검사에 실패한 실현값만 다시 뽑는다"""
        rng = np.random.default_rng(1)
        gate = lambda ch: np.abs(ch.H[:, 0, 0, 0, 0]) > 0.5
        ch = ChannelService.sample_x_channels(rng, size=1000, gate=gate)
        self.assertTrue(np.all(np.abs(ch.H[:, 0, 0, 0, 0]) > 0.5))
        self.assertGreater(ch.resamples, 0)

    def test_gate_exhausted(self):
        """통과할 수 없는 조건이면 ConditioningError"""
        rng = np.random.default_rng(1)
        with self.assertRaises(ConditioningError):
            ChannelService.sample_x_channels(rng, size=3, gate=lambda ch: np.zeros(ch.size, bool), max_resamples=2)

    def test_default_resample_rate(self):
        """기본 조건에서 재샘플링은 사실상 발생하지 않는다"""
        from apps.linalg.services.matrix_service import is_conditioned2

        rng = np.random.default_rng(2)
        gate = lambda ch: np.all(is_conditioned2(ch.H), axis=(1, 2))
        ch = ChannelService.sample_x_channels(rng, size=50_000, gate=gate)
        self.assertEqual(ch.resamples, 0)

    def test_stream_tag_stable(self):
        """문자열 태그는 고정값"""
        self.assertEqual(stream_tag("x_alamouti"), stream_tag("x_alamouti"))
        self.assertNotEqual(stream_tag("x_alamouti"), stream_tag("jash"))


class ConstellationTestCase(SimpleTestCase):
    """성상도 테스트"""

    def test_bpsk_sign(self):
        """BPSK 비트 0 → +√P, 1 → -√P"""
        c = get_constellation("BPSK")
        assert_allclose(modulate(np.array([0, 1]), c, 4.0), [2.0, -2.0])

    def test_qpsk_round_trip(self):
        """QPSK 네 라벨 왕복"""
        c = get_constellation("qpsk")
        bits = c.bit_map.reshape(-1)
        symbols = modulate(bits, c, 2.0)
        points, decoded = demodulate_nearest(symbols, c, 2.0)
        assert_array_equal(decoded, c.bit_map)
        assert_allclose(points, symbols)

    def test_psk16_geometry(self):
        """16PSK 점은 반지름 √P 원 위, 간격 2π/16"""
        c = get_constellation("PSK16")
        P = 3.0
        points = np.sqrt(P) * c.points
        assert_allclose(np.abs(points), np.sqrt(P))
        angles = np.sort(np.mod(np.angle(points), 2 * np.pi))
        assert_allclose(np.diff(angles), 2 * np.pi / 16, atol=1e-12)

    def test_gray_neighbours(self):
        """PSK 인접 점은 1비트만 다르다"""
        for name in ("QPSK", "PSK16"):
            c = get_constellation(name)
            order = np.argsort(np.mod(np.angle(c.points), 2 * np.pi))
            bits = c.bit_map[order]
            hamming = np.sum(bits != np.roll(bits, -1, axis=0), axis=1)
            assert_array_equal(hamming, 1)

    def test_unit_energy(self):
        """평균 에너지 1"""
        for name in ("BPSK", "QPSK", "PSK16", "QAM16"):
            c = get_constellation(name)
            self.assertAlmostEqual(float(np.mean(np.abs(c.points) ** 2)), 1.0)
            self.assertEqual(c.order, 2**c.bits_per_symbol)

    def test_unknown_name(self):
        """알 수 없는 이름은 UnknownConstellation"""
        with self.assertRaises(UnknownConstellation):
            get_constellation("QAM64")

    def test_bit_count_mismatch(self):
        """비트 수가 배수가 아니면 ValueError"""
        with self.assertRaises(ValueError):
            modulate(np.array([0, 1, 1]), get_constellation("QPSK"), 1.0)

    def test_frame_round_trip(self):
        """랜덤 프레임의 심볼과 비트가 일치"""
        rng = np.random.default_rng(4)
        c = get_constellation("QAM16")
        frame = SymbolFrame.random(rng, c, 10.0, size=50)
        _, bits = demodulate_nearest(frame.s, c, 10.0)
        assert_array_equal(bits, frame.bits)
        self.assertEqual(frame.count_bit_errors(bits), 0)


class NoiseTestCase(SimpleTestCase):
    """잡음 테스트"""

    def test_variance(self):
        """잡음 분산 1, 실수/허수 각각 0.5, 상관 없음"""
        rng = np.random.default_rng(9)
        noise = add_awgn(np.zeros(1_000_000), rng)
        self.assertAlmostEqual(float(np.mean(np.abs(noise) ** 2)), 1.0, delta=0.01)
        self.assertAlmostEqual(float(np.var(noise.real)), 0.5, delta=0.01)
        self.assertAlmostEqual(float(np.var(noise.imag)), 0.5, delta=0.01)
        self.assertLess(abs(float(np.mean(noise.real * noise.imag))), 0.01)

    def test_zero_noise_mode(self):
        """분산 0 이면 입력 그대로"""
        block = np.arange(6, dtype=complex).reshape(3, 2)
        assert_array_equal(add_awgn(block, np.random.default_rng(0), variance=0.0), block)
