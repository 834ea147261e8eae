"""Alamouti 정렬 방식의 순간 수신 SNR

γ 는 잡음 분산 1, 심볼 전력 1 로 정규화한 값이며 실제 SNR 은 P·γ 입니다.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from apps.fading.services.channel_service import ChannelSetX
from apps.linalg.services.matrix_service import frob_norm2, herm, inverse2, null_projector, quad_form, svd_smallest
from apps.xchannel.services.beamforming_service import SCALE, AlignmentLinks, XBeamformingService, hat_blocks
from apps.xchannel.services.receiver_service import NOISE_DIAG, x_stack_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SnrSample:
    """한 스트림의 순간 정규화 수신 SNR

    Attributes:
        gamma: (N,) γ
        gamma_bar: (N,) 근사 γ̄ (제공하는 방식만)
        stream: (j, i, k) 스트림 인덱스
    """

    gamma: np.ndarray
    gamma_bar: Optional[np.ndarray] = None
    stream: tuple = (0, 0, 0)


def _combiner(other_hat: np.ndarray):
    """Ĥbig = [Ĥ_o0 / n0; -Ĥ_o1 / n1] 와 n"""
    n = frob_norm2(other_hat)
    big = np.concatenate(
        [other_hat[..., 0, :, :] / n[..., 0, None, None], -other_hat[..., 1, :, :] / n[..., 1, None, None]],
        axis=-2,
    )
    return big, n


def stream_gamma(Ht_i: np.ndarray, j: int, k: int):
    """수신기 i 의 등가 채널로부터 송신기 j, 심볼 k 의 γ 와 γ̄

    γ = (3/4) g* C⁻¹ g,  g = Ĥbig* ĥ_k,  C = Ĥbig* diag(1,2,1,2) Ĥbig
    γ̄ = b ‖g‖²,  b = (1/(2n0) + 1/(2n1))⁻¹

    Args:
        Ht_i: (N, 2, 2, 2) 수신기 i 의 등가 채널 H̃[j, i]

    Returns:
        (gamma, gamma_bar): 각각 (N,)
    """
    hats = hat_blocks(Ht_i)
    own, other = hats[:, j], hats[:, 1 - j]
    big, n = _combiner(other)
    h = np.concatenate([own[..., 0, :, k], own[..., 1, :, k]], axis=-1)
    g = np.einsum("...rc,...r->...c", np.conj(big), h)
    C = herm(big) @ (NOISE_DIAG[:, None] * big)
    gamma = SCALE**2 * quad_form(g, inverse2(C))
    b = 1.0 / (1.0 / (2 * n[..., 0]) + 1.0 / (2 * n[..., 1]))
    gamma_bar = b * np.sum(np.abs(g) ** 2, axis=-1)
    return gamma, gamma_bar


def x_equivalent_channels(ch: ChannelSetX) -> np.ndarray:
    links = AlignmentLinks.from_x_channel(ch)
    return XBeamformingService.equivalent_channels(links, XBeamformingService.beamformers(links))


def x_gamma(ch: ChannelSetX, stream: tuple = (0, 0, 0)) -> SnrSample:
    """스트림 (j, i, k) 의 순간 SNR γ 와 근사 γ̄

    Raises:
        SingularMatrix: 조건 검사를 통과하지 못한 채널
    """
    j, i, k = stream
    gamma, gamma_bar = stream_gamma(x_equivalent_channels(ch)[:, :, i], j, k)
    return SnrSample(gamma=gamma, gamma_bar=gamma_bar, stream=(j, i, k))


def gamma_all_streams(Ht: np.ndarray) -> np.ndarray:
    """8개 스트림 전체의 γ

    Args:
        Ht: (N, 2, 2, 2, 2) 등가 채널

    Returns:
        (N, 2, 2, 2) [j, i, k]
    """
    out = np.empty(Ht.shape[:1] + (2, 2, 2))
    for j in range(2):
        for i in range(2):
            for k in range(2):
                out[:, j, i, k], _ = stream_gamma(Ht[:, :, i], j, k)
    return out


def stacked_signal_matrix(Ht_i: np.ndarray) -> np.ndarray:
    """√(3/4) 를 포함한 6x6 쌓기 행렬"""
    return SCALE * x_stack_matrix(Ht_i[:, 0], Ht_i[:, 1])


def x_zf_gamma(Ht_i: np.ndarray, j: int, k: int) -> np.ndarray:
    """영강제 사영으로 계산한 γ

    쌓은 6 벡터에서 다른 송신기의 두 열과 간섭 열 (I₁, I₂) 을 사영으로 제거한 뒤 남는
    신호 에너지 m* Π m 입니다. 간섭 제거와 분리 과정의 γ 와 같아야 합니다.
    """
    M = stacked_signal_matrix(Ht_i)
    col = 2 * j + k
    others = [2 * (1 - j), 2 * (1 - j) + 1, 4, 5]
    return quad_form(M[..., :, col], null_projector(M[..., :, others]))


def full_rank_submatrix(Ht_i: np.ndarray) -> np.ndarray:
    """간섭 행을 제외한 4x4 신호 행렬 (행 0, 1, 3, 4 / 열 0..3)"""
    M = x_stack_matrix(Ht_i[:, 0], Ht_i[:, 1])
    return M[..., [0, 1, 3, 4], :][..., :, :4]


def full_rank_margin(Ht_i: np.ndarray) -> np.ndarray:
    """4x4 신호 행렬의 최소 특이값"""
    return svd_smallest(full_rank_submatrix(Ht_i))
