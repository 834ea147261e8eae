"""Gray 매핑 성상도와 심볼 프레임

모든 성상도는 평균 에너지 1 이고, 전력 P 는 변조 시점에 √P 로 곱해집니다.
비트 라벨은 MSB 가 먼저입니다.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from apps.common.exceptions import UnknownConstellation

logger = logging.getLogger(__name__)

PSK_FAMILY = ("BPSK", "QPSK", "PSK16")
SUPPORTED = ("BPSK", "QPSK", "PSK16", "QAM16")


@dataclass(frozen=True, eq=False)
class Constellation:
    """성상도

    Attributes:
        name: BPSK | QPSK | PSK16 | QAM16
        points: 라벨(정수) 순서의 단위 평균 에너지 점
        bits_per_symbol: 심볼당 비트 수
    """

    name: str
    points: np.ndarray
    bits_per_symbol: int

    @property
    def order(self) -> int:
        return self.points.size

    @property
    def is_psk(self) -> bool:
        return self.name in PSK_FAMILY

    @property
    def bit_map(self) -> np.ndarray:
        """(order, bits_per_symbol) 라벨별 비트 (MSB 먼저)"""
        labels = np.arange(self.order)[:, None]
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)[None, :]
        return ((labels >> shifts) & 1).astype(np.int8)


def _gray(m: np.ndarray) -> np.ndarray:
    return m ^ (m >> 1)


def _psk_points(order: int) -> np.ndarray:
    points = np.empty(order, dtype=np.complex128)
    m = np.arange(order)
    points[_gray(m)] = np.exp(2j * np.pi * m / order)
    return points


def _qam16_points() -> np.ndarray:
    # 축마다 2비트 Gray: 00 → -3, 01 → -1, 11 → +1, 10 → +3
    level = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}
    points = np.empty(16, dtype=np.complex128)
    for label in range(16):
        points[label] = level[label >> 2] + 1j * level[label & 0b11]
    return points / np.sqrt(10)


@lru_cache(maxsize=None)
def get_constellation(name: str) -> Constellation:
    """이름으로 성상도 조회

    Raises:
        UnknownConstellation: 지원하지 않는 이름
    """
    key = str(name).upper()
    if key == "BPSK":
        return Constellation("BPSK", np.array([1.0 + 0j, -1.0 + 0j]), 1)
    if key == "QPSK":
        return Constellation("QPSK", _psk_points(4) * np.exp(1j * np.pi / 4), 2)
    if key == "PSK16":
        return Constellation("PSK16", _psk_points(16), 4)
    if key == "QAM16":
        return Constellation("QAM16", _qam16_points(), 4)
    raise UnknownConstellation(
        f"지원하지 않는 변조 방식입니다: {name} (가능: {', '.join(SUPPORTED)})",
        errors={"constellation": [f"unknown constellation '{name}'"]},
    )


def modulate(bits: np.ndarray, constellation: Constellation, power: float) -> np.ndarray:
    """비트 → 심볼 (Gray 매핑)

    Args:
        bits: (..., n * bits_per_symbol) 0/1 배열
        constellation: 성상도
        power: 심볼 전력 P

    Returns:
        (..., n) 복소 심볼

    Raises:
        ValueError: 비트 수가 bits_per_symbol 의 배수가 아닌 경우
    """
    bits = np.asarray(bits)
    bps = constellation.bits_per_symbol
    if bits.shape[-1] % bps:
        raise ValueError(f"비트 수({bits.shape[-1]})가 심볼당 비트 수({bps})의 배수가 아닙니다.")

    grouped = bits.reshape(bits.shape[:-1] + (bits.shape[-1] // bps, bps)).astype(np.int64)
    weights = 1 << np.arange(bps - 1, -1, -1)
    labels = grouped @ weights
    return np.sqrt(power) * constellation.points[labels]


def nearest_labels(z: np.ndarray, constellation: Constellation, power: float) -> np.ndarray:
    """최소 유클리드 거리 라벨"""
    z = np.asarray(z)
    distance = np.abs(z[..., None] - np.sqrt(power) * constellation.points) ** 2
    return np.argmin(distance, axis=-1)


def demodulate_nearest(z: np.ndarray, constellation: Constellation, power: float):
    """최근접 성상점 검출

    Args:
        z: (...) 검출 대상 (전력 P 스케일)
        constellation: 성상도
        power: 심볼 전력 P

    Returns:
        (points, bits): (...) 검출 심볼, (..., bits_per_symbol) 비트
    """
    labels = nearest_labels(z, constellation, power)
    return np.sqrt(power) * constellation.points[labels], constellation.bit_map[labels]


@dataclass(frozen=True)
class SymbolFrame:
    """한 전송 블록의 비부호화 심볼

    Attributes:
        s: (N, 2, 2, 2) 심볼, s[n, j, i, k] 는 송신기 j → 수신기 i 의 k 번째 심볼
        bits: (N, 2, 2, 2, bits_per_symbol) 원본 비트
        constellation: 성상도
        power: 심볼 전력 P
    """

    s: np.ndarray
    bits: np.ndarray
    constellation: Constellation
    power: float

    @classmethod
    def random(cls, rng: np.random.Generator, constellation: Constellation, power: float, size: int):
        """균일 비트로 프레임 생성"""
        bps = constellation.bits_per_symbol
        bits = rng.integers(0, 2, size=(size, 2, 2, 2, bps), dtype=np.int8)
        symbols = modulate(bits.reshape(size, 2, 2, 2 * bps), constellation, power)
        return cls(s=symbols.reshape(size, 2, 2, 2), bits=bits, constellation=constellation, power=power)

    @classmethod
    def from_symbols(cls, s: np.ndarray, constellation: Constellation, power: float):
        """주어진 심볼로 프레임 생성 (비트는 최근접 검출로 복원)"""
        s = np.asarray(s, dtype=np.complex128)
        _, bits = demodulate_nearest(s, constellation, power)
        return cls(s=s, bits=bits, constellation=constellation, power=power)

    @property
    def size(self) -> int:
        return self.s.shape[0]

    def count_bit_errors(self, decoded_bits: np.ndarray) -> int:
        """검출 비트와 원본 비트의 불일치 개수"""
        return int(np.count_nonzero(decoded_bits != self.bits))

    @property
    def bit_count(self) -> int:
        return int(self.bits.size)
