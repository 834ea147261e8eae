import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from apps.common.exceptions import DegenerateEigenvalues, SingularMatrix
from apps.linalg.services.alamouti_service import (
    alamouti_embed,
    alamouti_extract,
    alamouti_part,
    is_alamouti,
    is_swapped_alamouti,
    swapped_alamouti_embed,
)
from apps.linalg.services.matrix_service import (
    apply_per_slot,
    eig2x2,
    frob_norm,
    herm,
    inverse2,
    kron,
    kron_eye3,
    null_projector,
    svd_smallest,
    vecm,
)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


class AlamoutiStructureTestCase(SimpleTestCase):
    """Alamouti 생성자/판별 함수 테스트"""

    def setUp(self):
        self.rng = np.random.default_rng(11)

    def test_embed_identity(self):
        """(1, 0) 은 단위 행렬"""
        assert_allclose(alamouti_embed(1, 0), np.eye(2))

    def test_embed_rotation(self):
        """(0, 1) 은 [[0,1],[-1,0]]"""
        assert_allclose(alamouti_embed(0, 1), np.array([[0, 1], [-1, 0]]))

    def test_embed_gram(self):
        """M M* = (|a|²+|b|²) I"""
        a, b = crandn(self.rng, 2)
        M = alamouti_embed(a, b)
        assert_allclose(M @ herm(M), (abs(a) ** 2 + abs(b) ** 2) * np.eye(2), atol=1e-12)

    def test_is_alamouti_examples(self):
        """판별 함수 기본 예시"""
        self.assertTrue(is_alamouti(np.eye(2), tol=1e-12))
        self.assertFalse(is_alamouti(np.diag([1, 2]), tol=1e-12))

    def test_closure(self):
        """Alamouti 집합의 합/곱/실수배 닫힘"""
        a = alamouti_embed(*crandn(self.rng, 2, 500))
        b = alamouti_embed(*crandn(self.rng, 2, 500))
        self.assertTrue(is_alamouti(a + b))
        self.assertTrue(is_alamouti(a @ b))
        self.assertTrue(is_alamouti(-3.7 * a))

    def test_swapped_examples(self):
        """swapped Alamouti 판별 예시"""
        self.assertTrue(is_swapped_alamouti(np.diag([1, -1])))
        self.assertFalse(is_swapped_alamouti(np.eye(2)))
        m = alamouti_embed(*crandn(self.rng, 2, 100))
        self.assertTrue(is_swapped_alamouti(m[..., ::-1]))

    def test_alamouti_times_swapped(self):
        """Alamouti · swapped Alamouti 는 swapped Alamouti"""
        a = alamouti_embed(*crandn(self.rng, 2, 500))
        s = swapped_alamouti_embed(*crandn(self.rng, 2, 500))
        self.assertTrue(is_swapped_alamouti(a @ s))

    def test_dimension_mismatch(self):
        """2x2 가 아니면 ValueError"""
        with self.assertRaises(ValueError):
            is_alamouti(np.eye(3))

    def test_extract_kills_swapped(self):
        """추출 결합은 swapped 성분을 제거하고 Alamouti 성분을 두 배로 만든다"""
        M = crandn(self.rng, 200, 2, 2)
        out = alamouti_extract(M)
        part = alamouti_part(M)
        assert_allclose(out, 2 * part[..., 0, :], atol=1e-12)
        s = swapped_alamouti_embed(*crandn(self.rng, 2, 50))
        assert_allclose(alamouti_extract(s), 0, atol=1e-12)


class MatrixServiceTestCase(SimpleTestCase):
    """소형 행렬 연산 테스트"""

    def setUp(self):
        self.rng = np.random.default_rng(5)

    def test_inverse_identity(self):
        """inverse2(I) = I"""
        assert_allclose(inverse2(np.eye(2)), np.eye(2))

    def test_inverse_multiply_back(self):
        """inverse2(M)·M = I"""
        M = crandn(self.rng, 1000, 2, 2)
        assert_allclose(inverse2(M) @ M, np.broadcast_to(np.eye(2), M.shape), atol=1e-10)

    def test_inverse_singular(self):
        """특이 행렬은 SingularMatrix"""
        with self.assertRaises(SingularMatrix):
            inverse2(np.array([[1, 2], [2, 4]], dtype=complex))

    def test_kron_and_vec(self):
        """kron(I2, I3) = I6, vecm 은 열 단위"""
        assert_allclose(kron(np.eye(2), np.eye(3)), np.eye(6))
        assert_allclose(vecm(np.array([[1, 2], [3, 4]])), [1, 3, 2, 4])

    def test_kron_eye3_matches_numpy(self):
        """kron_eye3 와 apply_per_slot 이 numpy.kron 과 일치"""
        G = crandn(self.rng, 2, 2)
        v = crandn(self.rng, 6, 2)
        assert_allclose(kron_eye3(G), np.kron(np.eye(3), G))
        assert_allclose(apply_per_slot(G, v), np.kron(np.eye(3), G) @ v, atol=1e-12)

    def test_svd_smallest(self):
        """최소 특이값"""
        self.assertAlmostEqual(float(svd_smallest(np.diag([3.0, 0.5]))), 0.5)

    def test_null_projector(self):
        """사영 행렬은 O 를 0 으로 보낸다"""
        O = crandn(self.rng, 6, 4)
        P = null_projector(O)
        assert_allclose(P @ O, 0, atol=1e-10)
        assert_allclose(P @ P, P, atol=1e-10)

    def test_frob_norm(self):
        """프로베니우스 노름"""
        self.assertAlmostEqual(float(frob_norm(np.eye(2))), np.sqrt(2))


class Eig2TestCase(SimpleTestCase):
    """닫힌 형태 2x2 고유값 분해 테스트"""

    def test_diagonal(self):
        """diag(2,1) → λ=(2,1), u=(e1,e2), κ=2"""
        e = eig2x2(np.diag([2.0, 1.0]))
        self.assertAlmostEqual(complex(e.lambda1), 2)
        self.assertAlmostEqual(complex(e.lambda2), 1)
        assert_allclose(e.u1, [1, 0], atol=1e-12)
        assert_allclose(e.u2, [0, 1], atol=1e-12)
        self.assertAlmostEqual(complex(e.kappa), 2)

    def test_exchange(self):
        """[[0,1],[1,0]] → λ=±1, (1,±1)/√2"""
        e = eig2x2(np.array([[0, 1], [1, 0]], dtype=complex))
        self.assertAlmostEqual(complex(e.lambda1), 1)
        self.assertAlmostEqual(complex(e.lambda2), -1)
        assert_allclose(e.u1, np.array([1, 1]) / np.sqrt(2), atol=1e-12)
        assert_allclose(e.u2, np.array([1, -1]) / np.sqrt(2), atol=1e-12)

    def test_random_residual_and_reconstruction(self):
        """A u = λ u 잔차와 재구성"""
        rng = np.random.default_rng(3)
        A = crandn(rng, 2000, 2, 2)
        e = eig2x2(A)
        norm = frob_norm(A)[..., None]
        r1 = np.linalg.norm(np.einsum("...ij,...j->...i", A, e.u1) - e.lambda1[..., None] * e.u1, axis=-1)
        r2 = np.linalg.norm(np.einsum("...ij,...j->...i", A, e.u2) - e.lambda2[..., None] * e.u2, axis=-1)
        self.assertTrue(np.all(r1 < 1e-9 * norm[..., 0]))
        self.assertTrue(np.all(r2 < 1e-9 * norm[..., 0]))
        assert_allclose(np.linalg.norm(e.u1, axis=-1), 1, atol=1e-12)
        self.assertTrue(np.all(np.abs(e.lambda1) >= np.abs(e.lambda2)))

        U = e.u
        D = np.zeros_like(A)
        D[..., 0, 0] = e.lambda1
        D[..., 1, 1] = e.lambda2
        rebuilt = U @ D @ np.linalg.inv(U)
        assert_allclose(rebuilt, A, rtol=1e-8, atol=1e-8)

    def test_degenerate(self):
        """고유값이 겹치면 DegenerateEigenvalues"""
        with self.assertRaises(DegenerateEigenvalues):
            eig2x2(np.eye(2))
