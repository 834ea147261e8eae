"""2셀 하향링크 (IBC) 정렬

단말 (j, i) 는 수신 블록 오른쪽에 자기 간섭 링크의 역행렬을 곱합니다.

    Ỹ = Y I⁻¹ = X^{[j]} H̃^{[ji]} + X^{[ĵ]} + W I⁻¹,  H̃^{[ji]} = H^{[ji]} (I^{[ji]})⁻¹

기지국 j 는 두 단말의 Alamouti 블록을 프리코딩해 2x2 블록 B 를 만들고, 남는 한 슬롯을
swapped Alamouti 가 되도록 채웁니다.

    X^{[0]} = [B₀; B₁; [-B₁₁*, B₁₀*]],  X^{[1]} = [[-B₁₁*, B₁₀*]; B₁; B₀]

셀 0 단말은 슬롯 (0, 1), 셀 1 단말은 슬롯 (2, 1) 을 읽습니다. 이 창에서 반대편 기지국 블록은
swapped Alamouti 이므로 (w₀₀ + w₁₁*, w₀₁ - w₁₀*) 결합으로 사라집니다.
"""

import logging
from dataclasses import dataclass

import numpy as np

from apps.common.exceptions import ConfigurationError
from apps.fading.services.channel_service import ChannelSetCell
from apps.fading.services.constellation_service import Constellation, SymbolFrame
from apps.fading.services.noise_service import add_awgn
from apps.linalg.services.alamouti_service import alamouti_embed, alamouti_extract, alamouti_part
from apps.linalg.services.matrix_service import COND_LIMIT, frob_norm, frob_norm2, herm, inverse2, is_conditioned2
from apps.xchannel.services.snr_service import SnrSample

logger = logging.getLogger(__name__)

NORM_FLOOR = 1e-9
PRECODER_POWER = 1 / 2

# 셀 j 단말이 읽는 슬롯 (창의 첫 행, 둘째 행)
WINDOWS = ((0, 1), (2, 1))


@dataclass(frozen=True)
class IbcPrecoders:
    """기지국 프리코더

    Attributes:
        P: (N, 2, 2, 2, 2) P[n, j, i] 는 기지국 j 가 단말 i 에게 쓰는 프리코더, ‖P‖_F² = 1/2
        alpha: (N, 2, 2) 전력 정규화 상수
        Ht: (N, 2, 2, 2, 2) 등가 채널 H̃[j, i]
        C: (N, 2, 2, 2, 2) 회전 행렬 (Alamouti 구조)
        rho: (N, 2, 2) ‖C 의 첫 행‖²
    """

    P: np.ndarray
    alpha: np.ndarray
    Ht: np.ndarray
    C: np.ndarray
    rho: np.ndarray

    @property
    def gain(self) -> np.ndarray:
        """추출 후 심볼 이득 αρ"""
        return self.alpha * self.rho


def ibc_equivalent_channels(ch: ChannelSetCell, check: bool = True) -> np.ndarray:
    """H̃[j, i] = H[j, i] I[j, i]⁻¹"""
    return ch.H @ inverse2(ch.I, check=check)


def row_alamouti(Ht: np.ndarray, m: int) -> np.ndarray:
    """m 번째 행으로 만든 Alamouti 블록 Ĥ_m = [[h̃m0, h̃m1], [-h̃m1*, h̃m0*]]"""
    return alamouti_embed(Ht[..., m, 0], Ht[..., m, 1])


def row_norms2(Ht: np.ndarray) -> np.ndarray:
    """(..., 2) 행별 노름 제곱"""
    return np.sum(np.abs(Ht) ** 2, axis=-1)


def rotation_matrix(own: np.ndarray, other: np.ndarray) -> np.ndarray:
    """C = Ĥ₀(own)* Ĥ₀(other) / n₀ - Ĥ₁(own)* Ĥ₁(other) / n₁, n_m = ‖other 의 m 행‖²"""
    n = row_norms2(other)
    first = herm(row_alamouti(own, 0)) @ row_alamouti(other, 0) / n[..., 0, None, None]
    second = herm(row_alamouti(own, 1)) @ row_alamouti(other, 1) / n[..., 1, None, None]
    return first - second


def combining_matrix(other: np.ndarray) -> np.ndarray:
    """R = [[h̃₀₀*/n₀, -h̃₁₀*/n₁], [h̃₀₁*/n₀, -h̃₁₁*/n₁]]

    R H̃ 의 Alamouti 성분은 H̃ = other 일 때 0 이 됩니다.
    """
    n = row_norms2(other)
    col0 = np.conj(other[..., 0, :]) / n[..., 0, None]
    col1 = -np.conj(other[..., 1, :]) / n[..., 1, None]
    return np.stack([col0, col1], axis=-1)


def ibc_gate(ch: ChannelSetCell, cond_limit: float = COND_LIMIT, norm_floor: float = NORM_FLOOR) -> np.ndarray:
    """간섭 링크 조건수, 등가 채널 행 노름, 회전 이득 검사 마스크"""
    ok = np.all(is_conditioned2(ch.I, cond_limit), axis=(1, 2))
    with np.errstate(all="ignore"):
        Ht = ibc_equivalent_channels(ch, check=False)
        norms = np.nan_to_num(row_norms2(Ht), nan=0.0)
        ok &= np.all(norms > norm_floor, axis=(1, 2, 3))
        rho = frob_norm2(rotation_matrix(Ht, Ht[:, :, ::-1])) / 2
        ok &= np.all(np.nan_to_num(rho, nan=0.0) > norm_floor, axis=(1, 2))
    return ok


def swapped_padding(row: np.ndarray) -> np.ndarray:
    """[x₁₀, x₁₁] → [-x₁₁*, x₁₀*] (창을 swapped Alamouti 로 만드는 채움 슬롯)"""
    return np.stack([-np.conj(row[..., 1]), np.conj(row[..., 0])], axis=-1)


class IbcService:
    """하향링크 정렬 서비스"""

    @staticmethod
    def ibc_precoders(ch: ChannelSetCell) -> IbcPrecoders:
        """P^{[ji]} = α C^{[ji]} R^{[jī]},  ‖P^{[ji]}‖_F² = 1/2

        Raises:
            SingularMatrix: 간섭 링크가 역변환 불가능한 경우
        """
        Ht = ibc_equivalent_channels(ch)
        other = Ht[:, :, ::-1]
        C = rotation_matrix(Ht, other)
        raw = C @ combining_matrix(other)
        alpha = np.sqrt(PRECODER_POWER) / frob_norm(raw)
        rho = np.abs(C[..., 0, 0]) ** 2 + np.abs(C[..., 0, 1]) ** 2
        return IbcPrecoders(P=alpha[..., None, None] * raw, alpha=alpha, Ht=Ht, C=C, rho=rho)

    @staticmethod
    def ibc_blocks(frame: SymbolFrame, pre: IbcPrecoders) -> np.ndarray:
        """B^{[j]} = Σ_i S^{[ji]} P^{[ji]}

        Returns:
            (N, 2, 2, 2) 기지국별 2x2 블록
        """
        S = alamouti_embed(frame.s[..., 0], frame.s[..., 1])
        return np.sum(S @ pre.P, axis=2)

    @staticmethod
    def ibc_encode(frame: SymbolFrame, pre: IbcPrecoders) -> np.ndarray:
        """채움 슬롯을 포함한 3x2 송신 블록

        Returns:
            (N, 2, 3, 2) 기지국별 블록, E tr(X X*) = 3P
        """
        B = IbcService.ibc_blocks(frame, pre)
        pad = swapped_padding(B[..., 1, :])
        X0 = np.stack([B[:, 0, 0], B[:, 0, 1], pad[:, 0]], axis=-2)
        X1 = np.stack([pad[:, 1], B[:, 1, 1], B[:, 1, 0]], axis=-2)
        return np.stack([X0, X1], axis=1)

    @staticmethod
    def ibc_propagate(X: np.ndarray, ch: ChannelSetCell) -> np.ndarray:
        """Y^{[ji]} = X^{[j]} H^{[ji]} + X^{[ĵ]} I^{[ji]}

        Returns:
            (N, 2, 2, 3, 2) 단말별 수신 블록
        """
        return X[:, :, None] @ ch.H + X[:, ::-1, None] @ ch.I

    @staticmethod
    def ibc_receive(Y: np.ndarray, I: np.ndarray, j: int) -> np.ndarray:
        """수신 빔포밍과 창 결합

        Args:
            Y: (..., 3, 2) 단말 (j, i) 의 수신 블록
            I: (..., 2, 2) 단말 자신의 간섭 링크
            j: 셀 인덱스

        Returns:
            (..., 2) ŷ = αρ s + 잡음
        """
        Yt = Y @ inverse2(I)
        first, second = WINDOWS[j]
        window = np.stack([Yt[..., first, :], Yt[..., second, :]], axis=-2)
        return alamouti_extract(window)

    @staticmethod
    def ibc_decode(y: np.ndarray, gain: np.ndarray, constellation: Constellation, power: float):
        """상관 검출 argmax_s Re(ŷ s*)

        Args:
            y: (..., 2) 추출값
            gain: (...) 양의 실수 이득 αρ (PSK 에서는 결정에 영향 없음)

        Returns:
            (symbols, bits): (..., 2), (..., 2, bits_per_symbol)

        Raises:
            ConfigurationError: PSK 계열이 아닌 성상도
        """
        if not constellation.is_psk:
            raise ConfigurationError(
                f"IBC 정렬은 PSK 계열만 지원합니다: {constellation.name}",
                errors={"constellation": [f"ibc requires PSK, got '{constellation.name}'"]},
            )
        points = np.sqrt(power) * constellation.points
        scaled = y / np.asarray(gain)[..., None]
        labels = np.argmax(np.real(scaled[..., None] * np.conj(points)), axis=-1)
        return points[labels], constellation.bit_map[labels]

    @staticmethod
    def ibc_run(frame: SymbolFrame, ch: ChannelSetCell, rng: np.random.Generator, noise_variance: float = 1.0):
        """부호화부터 검출까지 한 배치 실행

        Returns:
            (symbols, bits): SymbolFrame 과 같은 축 순서
        """
        pre = IbcService.ibc_precoders(ch)
        Y = add_awgn(IbcService.ibc_propagate(IbcService.ibc_encode(frame, pre), ch), rng, noise_variance)
        symbols = np.empty_like(frame.s)
        bits = np.empty_like(frame.bits)
        for j in range(2):
            y = IbcService.ibc_receive(Y[:, j], ch.I[:, j], j)
            symbols[:, j], bits[:, j] = IbcService.ibc_decode(y, pre.gain[:, j], frame.constellation, frame.power)
        return symbols, bits


def ibc_gamma(ch: ChannelSetCell, stream: tuple = (0, 0, 0)) -> SnrSample:
    """γ = (αρ)² / ‖(I^{[ji]})⁻¹‖_F² (두 심볼이 같음)"""
    j, i, k = stream
    pre = IbcService.ibc_precoders(ch)
    noise = frob_norm2(inverse2(ch.I[:, j, i]))
    return SnrSample(gamma=pre.gain[:, j, i] ** 2 / noise, stream=(j, i, k))


def rotated_symbols(frame: SymbolFrame, pre: IbcPrecoders) -> np.ndarray:
    """회전 심볼 (c₁, c₂): [[c₁, c₂], [-c₂*, c₁*]] = α S C

    Returns:
        (N, 2, 2, 2)
    """
    S = alamouti_embed(frame.s[..., 0], frame.s[..., 1])
    return (pre.alpha[..., None, None] * (S @ pre.C))[..., 0, :]


def extraction_matrix(pre: IbcPrecoders) -> np.ndarray:
    """회전 심볼에서 추출값으로 가는 2x2 행렬 2[[p, -q*], [q, p*]]

    (p, q) 는 R^{[jī]} H̃^{[ji]} 의 Alamouti 성분입니다. 결과는 Alamouti 구조이며 회전과 합쳐지면 대각이 됩니다.
    """
    A = alamouti_part(combining_matrix(pre.Ht[:, :, ::-1]) @ pre.Ht)
    p, q = A[..., 0, 0], A[..., 0, 1]
    return 2 * alamouti_embed(p, -np.conj(q))


def receive_stack(Y: np.ndarray, I: np.ndarray, j: int) -> np.ndarray:
    """z = (ỹ₀₀, ỹ₀₁, ỹ₁₀*, ỹ₁₁*, ỹ₂₀, ỹ₂₁), 셀 1 은 슬롯 순서를 뒤집어 적용"""
    Yt = Y @ inverse2(I)
    if j == 1:
        Yt = Yt[..., ::-1, :]
    return np.stack(
        [Yt[..., 0, 0], Yt[..., 0, 1], np.conj(Yt[..., 1, 0]), np.conj(Yt[..., 1, 1]), Yt[..., 2, 0], Yt[..., 2, 1]],
        axis=-1,
    )


def interference_basis() -> np.ndarray:
    """간섭이 정렬되는 4차원 부분공간의 기저 Q (6x4)"""
    Q = np.zeros((6, 4), dtype=np.complex128)
    Q[[0, 3], 0] = [1, -1]
    Q[[1, 2], 1] = [1, 1]
    Q[4, 2] = 1
    Q[5, 3] = 1
    return Q
