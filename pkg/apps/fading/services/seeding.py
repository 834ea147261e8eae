"""결정적 난수 하위 스트림

하위 스트림은 SeedSequence(master_seed, spawn_key=key) 로 만듭니다. key 는 (용도 태그, 방식 태그,
SNR 인덱스, 배치 인덱스) 처럼 정수 튜플이고, 같은 (master_seed, key) 는 항상 같은 난수열을
돌려줍니다. 작업자 수나 실행 순서와 무관하게 결과가 재현됩니다.
"""

import zlib
from dataclasses import dataclass

import numpy as np


def stream_tag(name: str) -> int:
    """문자열을 안정적인 32비트 정수 태그로 변환 (프로세스 간 동일)"""
    return zlib.crc32(name.encode("utf-8"))


def snr_tag(snr_db: float) -> int:
    """SNR 값을 밀리 dB 단위 정수 태그로 변환"""
    return int(round(snr_db * 1000)) & 0xFFFFFFFF


@dataclass(frozen=True)
class RngSpec:
    """마스터 시드와 하위 스트림 규칙"""

    master_seed: int = 0

    def generator(self, *key: int) -> np.random.Generator:
        """(master_seed, key) 에만 의존하는 PCG64 생성기"""
        seq = np.random.SeedSequence(self.master_seed, spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.PCG64(seq))
