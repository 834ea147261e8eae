import numpy as np

from apps.fading.services.channel_service import crandn


def add_awgn(block: np.ndarray, rng: np.random.Generator, variance: float = 1.0) -> np.ndarray:
    """원소마다 CN(0, variance) 잡음 추가

    잡음 분산 1 로 정규화하므로 네트워크 SNR 은 심볼 전력 P 와 같습니다.
    variance=0 은 무잡음 테스트 모드이며 입력을 그대로 복사해 돌려줍니다.
    """
    block = np.asarray(block, dtype=np.complex128)
    if variance == 0:
        return block.copy()
    return block + np.sqrt(variance) * crandn(rng, block.shape)
