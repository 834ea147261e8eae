"""선형 정렬 기준 방식 (안테나 2개 X 채널)

수신 열 형태 G = Hᵀ 로 계산합니다. 슬롯 t 의 수신 벡터는 y_tᵀ = Σ_j G^{[ji]} x_tᵀ 이고,
세 슬롯을 시간 순서로 쌓으면 Ḡ = I₃ ⊗ G 입니다. 송신 벡터 x̄ 는 3x2 블록 X 를 행 순서로
펼친 6 벡터이므로 전파는 X 채널 방식과 같은 Y = X H 입니다.

A = G00⁻¹ G10 G11⁻¹ G01 의 고유벡터 u1, u2 로 송신기 0 빔포머를 만들고, 송신기 1 빔포머는
정렬 조건에서 바로 얻습니다. 수신기는 6x6 등가 행렬에서 사영 영강제로 원하는 스트림을 분리합니다.
"""

import logging
from dataclasses import dataclass

import numpy as np

from apps.fading.services.channel_service import ChannelSetX
from apps.fading.services.constellation_service import Constellation, SymbolFrame, demodulate_nearest
from apps.linalg.services.matrix_service import (
    COND_LIMIT,
    EIG_GAP,
    Eig2,
    apply_per_slot,
    eig2x2,
    eig_gap_ok,
    frob_norm,
    herm,
    inverse2,
    is_conditioned2,
    null_projector,
)
from apps.xchannel.services.snr_service import SnrSample

logger = logging.getLogger(__name__)

BETA = np.sqrt(3 / 8)
BEAM_POWER = 3 / 2


@dataclass(frozen=True)
class JashBeamformers:
    """송신 빔포머

    Attributes:
        vbar: (N, 2, 2, 6, 2) vbar[n, j, i] 는 송신기 j → 수신기 i 의 두 스트림 빔포머
        eig: A 의 고유값 분해
        alpha: (N, 2) 송신기 1 빔포머 정규화 상수 (수신기 0 용, 수신기 1 용)
    """

    vbar: np.ndarray
    eig: Eig2
    alpha: np.ndarray


@dataclass(frozen=True)
class JashGammaParts:
    """상한 SNR 계산 요소

    Attributes:
        kappa: (N,) λ1/λ2
        delta11, delta22: (N,) Δ = (u* G00* G00 u)⁻¹ 의 대각 원소
    """

    kappa: np.ndarray
    delta11: np.ndarray
    delta22: np.ndarray


def column_channels(H: np.ndarray) -> np.ndarray:
    """행 형태 채널을 수신 열 형태 G = Hᵀ 로 변환"""
    return np.swapaxes(H, -1, -2)


def alignment_operator(G: np.ndarray, check: bool = True) -> np.ndarray:
    """A = G00⁻¹ G10 G11⁻¹ G01"""
    return inverse2(G[:, 0, 0], check=check) @ G[:, 1, 0] @ inverse2(G[:, 1, 1], check=check) @ G[:, 0, 1]


def _patterns(eig: Eig2):
    u1, u2 = eig.u1, eig.u2
    n = u1.shape[0]
    first = np.zeros((n, 6, 2), dtype=np.complex128)
    second = np.zeros((n, 6, 2), dtype=np.complex128)
    for v, tail in ((first, slice(2, 4)), (second, slice(4, 6))):
        v[:, 0:2, 0] = u1
        v[:, 0:2, 1] = u2
        v[:, tail, 0] = u2
        v[:, tail, 1] = u1
    return BETA * first, BETA * second


class JashService:
    """선형 정렬 기준 방식 서비스"""

    @staticmethod
    def jash_beamformers(ch: ChannelSetX, gap: float = EIG_GAP) -> JashBeamformers:
        """전역 채널 정보로 네 빔포머를 계산

        송신기 0: v̄00 = β[[u1, u2], [u2, u1], [0, 0]], v̄01 = β[[u1, u2], [0, 0], [u2, u1]]
        송신기 1: v̄10 = α10 (I₃ ⊗ G11⁻¹ G01) v̄00, v̄11 = α11 (I₃ ⊗ G10⁻¹ G00) v̄01

        모든 빔포머는 ‖v̄‖_F² = 3/2 이고 블록 전력은 3P 입니다.

        Raises:
            SingularMatrix: 역변환이 필요한 링크가 특이한 경우
            DegenerateEigenvalues: A 의 고유값이 구분되지 않는 경우
        """
        G = column_channels(ch.H)
        eig = eig2x2(alignment_operator(G), gap)
        v00, v01 = _patterns(eig)

        raw10 = apply_per_slot(inverse2(G[:, 1, 1]) @ G[:, 0, 1], v00)
        raw11 = apply_per_slot(inverse2(G[:, 1, 0]) @ G[:, 0, 0], v01)
        alpha = np.sqrt(BEAM_POWER) / np.stack([frob_norm(raw10), frob_norm(raw11)], axis=-1)

        vbar = np.empty(G.shape[:1] + (2, 2, 6, 2), dtype=np.complex128)
        vbar[:, 0, 0] = v00
        vbar[:, 0, 1] = v01
        vbar[:, 1, 0] = alpha[:, 0, None, None] * raw10
        vbar[:, 1, 1] = alpha[:, 1, None, None] * raw11
        return JashBeamformers(vbar=vbar, eig=eig, alpha=alpha)

    @staticmethod
    def jash_encode(frame: SymbolFrame, bf: JashBeamformers) -> np.ndarray:
        """x̄^{[j]} = Σ_i v̄^{[ji]} s^{[ji]}

        Returns:
            (N, 2, 3, 2) 행 = 슬롯 형태의 송신 블록
        """
        x = np.einsum("njirc,njic->njr", bf.vbar, frame.s)
        return x.reshape(x.shape[:2] + (3, 2))

    @staticmethod
    def propagate(X: np.ndarray, ch: ChannelSetX) -> np.ndarray:
        """Y^{[i]} = Σ_j X^{[j]} H^{[ji]}"""
        return np.einsum("njtc,njicr->nitr", X, ch.H)

    @staticmethod
    def equivalent_matrix(ch: ChannelSetX, bf: JashBeamformers) -> np.ndarray:
        """수신기별 6x6 등가 행렬 [Ḡ0i v̄0i, Ḡ1i v̄1i, Ḡ0i v̄0ī]

        Returns:
            (N, 2, 6, 6) 열 0..3 은 원하는 스트림 (송신기 0 의 두 개, 송신기 1 의 두 개), 열 4, 5 는 정렬된 간섭
        """
        G = column_channels(ch.H)
        out = []
        for i in range(2):
            out.append(
                np.concatenate(
                    [
                        apply_per_slot(G[:, 0, i], bf.vbar[:, 0, i]),
                        apply_per_slot(G[:, 1, i], bf.vbar[:, 1, i]),
                        apply_per_slot(G[:, 0, i], bf.vbar[:, 0, 1 - i]),
                    ],
                    axis=-1,
                )
            )
        return np.stack(out, axis=1)

    @staticmethod
    def zero_forcing(M: np.ndarray):
        """사영 영강제 필터

        원하는 열 m_c 를 나머지 다섯 열의 직교 보공간으로 사영한 q = Π m_c 로 w_c = q / (m_c* q) 를 만듭니다.

        Args:
            M: (..., 6, 6) 등가 행렬

        Returns:
            (W, gamma): (..., 4, 6) 필터, (..., 4) γ = m_c* Π m_c
        """
        filters, gammas = [], []
        for col in range(4):
            others = [c for c in range(6) if c != col]
            q = np.einsum("...rc,...c->...r", null_projector(M[..., :, others]), M[..., :, col])
            gamma = np.real(np.sum(np.conj(M[..., :, col]) * q, axis=-1))
            filters.append(q / gamma[..., None])
            gammas.append(gamma)
        return np.stack(filters, axis=-2), np.stack(gammas, axis=-1)

    @staticmethod
    def zf_estimates(Y: np.ndarray, ch: ChannelSetX, bf: JashBeamformers):
        """영강제 추정값과 스트림별 γ

        Returns:
            (estimates, gamma): 각각 (N, 2, 2, 2) [j, i, k]
        """
        M = JashService.equivalent_matrix(ch, bf)
        W, gamma = JashService.zero_forcing(M)
        ybar = Y.reshape(Y.shape[:2] + (6,))
        z = np.einsum("nicr,nir->nic", np.conj(W), ybar)
        # (N, i, j*2+k) -> (N, j, i, k)
        reorder = lambda a: np.swapaxes(a.reshape(a.shape[:2] + (2, 2)), 1, 2)
        return reorder(z), reorder(gamma)

    @staticmethod
    def jash_decode(Y: np.ndarray, ch: ChannelSetX, bf: JashBeamformers, constellation: Constellation, power: float):
        """영강제 후 최근접 검출

        Returns:
            (symbols, bits): (N, 2, 2, 2), (N, 2, 2, 2, bits_per_symbol)
        """
        estimates, _ = JashService.zf_estimates(Y, ch, bf)
        return demodulate_nearest(estimates, constellation, power)


def jash_gate(ch: ChannelSetX, cond_limit: float = COND_LIMIT, gap: float = EIG_GAP) -> np.ndarray:
    """역변환, 고유값 간격, 6x6 등가 행렬 조건수 검사 마스크"""
    G = column_channels(ch.H)
    ok = np.all(is_conditioned2(G, cond_limit), axis=(1, 2))
    with np.errstate(all="ignore"):
        ok &= eig_gap_ok(alignment_operator(G, check=False), gap)

    idx = np.flatnonzero(ok)
    if idx.size:
        sub = ChannelSetX(H=ch.H[idx])
        M = JashService.equivalent_matrix(sub, JashService.jash_beamformers(sub, gap))
        ok[idx] &= np.all(np.linalg.cond(M) < cond_limit, axis=-1)
    return ok


def jash_gamma(ch: ChannelSetX, stream: tuple = (0, 0, 0)) -> SnrSample:
    """영강제 사영으로 계산한 스트림 (j, i, k) 의 γ"""
    j, i, k = stream
    bf = JashService.jash_beamformers(ch)
    _, gamma = JashService.zero_forcing(JashService.equivalent_matrix(ch, bf)[:, i])
    return SnrSample(gamma=gamma[:, 2 * j + k], stream=(j, i, k))


def gamma_parts(ch: ChannelSetX, eig: Eig2 = None) -> JashGammaParts:
    """κ, δ11, δ22 (수신기 0, 송신기 0 기준)"""
    G = column_channels(ch.H)
    if eig is None:
        eig = eig2x2(alignment_operator(G))
    Gu = G[:, 0, 0] @ eig.u
    delta = inverse2(herm(Gu) @ Gu)
    return JashGammaParts(kappa=eig.kappa, delta11=np.real(delta[:, 0, 0]), delta22=np.real(delta[:, 1, 1]))


def reference_gamma_parts(ch: ChannelSetX) -> JashGammaParts:
    """numpy 일반 고유값 분해로 다시 계산한 κ, δ (교차 검증용)"""
    G = column_channels(ch.H)
    A = np.linalg.inv(G[:, 0, 0]) @ G[:, 1, 0] @ np.linalg.inv(G[:, 1, 1]) @ G[:, 0, 1]
    values, vectors = np.linalg.eig(A)
    order = np.argsort(-np.abs(values), axis=-1, kind="stable")
    values = np.take_along_axis(values, order, axis=-1)
    vectors = np.take_along_axis(vectors, order[:, None, :], axis=-1)
    vectors = vectors / np.linalg.norm(vectors, axis=-2, keepdims=True)
    Gu = G[:, 0, 0] @ vectors
    delta = np.linalg.inv(herm(Gu) @ Gu)
    return JashGammaParts(
        kappa=values[:, 0] / values[:, 1],
        delta11=np.real(delta[:, 0, 0]),
        delta22=np.real(delta[:, 1, 1]),
    )


def upper_gamma_from_parts(parts: JashGammaParts) -> np.ndarray:
    """γ′ = β² |1 - κ|² / (δ11 + |κ|² δ22)"""
    return BETA**2 * np.abs(1 - parts.kappa) ** 2 / (parts.delta11 + np.abs(parts.kappa) ** 2 * parts.delta22)


def jash_gamma_upper(ch: ChannelSetX) -> np.ndarray:
    """정렬 간섭 제거 제약을 뺀 시스템의 SNR γ′

    송신기 0 → 수신기 0 의 두 스트림 모두 같은 상한을 가집니다 (u1, u2 를 바꾸면 κ → 1/κ,
    δ11 ↔ δ22 가 되어 식이 그대로 유지됨).
    """
    return upper_gamma_from_parts(gamma_parts(ch))
