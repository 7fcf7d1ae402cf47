import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from ecdkit.matcore import (
    DimensionError,
    NotHermitianError,
    NotPSDError,
    diagnostics,
    ginibre,
    herm_eig,
    partial_trace,
    psd_sqrt,
    random_psd,
    random_unitary,
    reset_diagnostics,
    tensor,
    trace_norm,
)

seeds = st.integers(0, 2**32 - 1)


class TestTensor:
    def test_identities(self):
        assert_allclose(tensor(np.eye(2), np.eye(3)), np.eye(6))

    def test_diagonal(self):
        assert_allclose(tensor(np.diag([1, 2]), np.diag([1, 0])), np.diag([1, 0, 2, 0]))

    def test_against_index_loop(self):
        rng = np.random.default_rng(0)
        a, b = ginibre(2, 2, rng), ginibre(2, 3, rng)
        out = np.zeros((4, 6), dtype=complex)
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    for m in range(3):
                        out[i * 2 + k, j * 3 + m] = a[i, j] * b[k, m]
        assert_allclose(tensor(a, b), out)

    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_associative(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = ginibre(2, 3, rng), ginibre(2, 2, rng), ginibre(3, 1, rng)
        assert_allclose(tensor(tensor(a, b), c), tensor(a, tensor(b, c)))


class TestPartialTrace:
    def test_product_state(self):
        rng = np.random.default_rng(1)
        rho, sigma = random_psd(2, rng), random_psd(3, rng, trace=0.7)
        assert_allclose(partial_trace(tensor(rho, sigma), (2, 3), 0), 0.7 * rho, atol=1e-14)
        assert_allclose(partial_trace(tensor(rho, sigma), (2, 3), 1), sigma, atol=1e-14)

    def test_identity(self):
        assert_allclose(partial_trace(np.eye(4), (2, 2), 0), 2 * np.eye(2))

    def test_maximally_entangled(self):
        phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
        m = np.outer(phi, phi)
        # direct summation oracle: (rho_A)_{ij} = sum_k m[(i,k),(j,k)]
        oracle = np.array([[sum(m[i * 2 + k, j * 2 + k] for k in range(2)) for j in range(2)] for i in range(2)])
        assert_allclose(partial_trace(m, (2, 2), 0), oracle)
        assert_allclose(partial_trace(m, (2, 2), 0), np.eye(2) / 2)
        assert_allclose(partial_trace(m, (2, 2), 1), np.eye(2) / 2)

    def test_bad_split(self):
        with pytest.raises(DimensionError):
            partial_trace(np.eye(4), (3, 2), 0)

    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_trace_and_product_rule(self, seed):
        rng = np.random.default_rng(seed)
        a, b = ginibre(3, 3, rng), ginibre(2, 2, rng)
        m = ginibre(6, 6, rng)
        assert np.isclose(np.trace(partial_trace(m, (3, 2), 0)), np.trace(m))
        assert_allclose(partial_trace(tensor(a, b), (3, 2), 0), a * np.trace(b), atol=1e-12)


class TestTraceNorm:
    def test_diagonal(self):
        assert trace_norm(np.diag([1.0, -2.0])) == pytest.approx(3.0)

    def test_rank_one(self):
        rng = np.random.default_rng(2)
        phi, psi = ginibre(4, 1, rng).ravel(), ginibre(4, 1, rng).ravel()
        assert trace_norm(np.outer(phi, psi.conj())) == pytest.approx(np.linalg.norm(phi) * np.linalg.norm(psi))

    @given(seeds)
    @settings(max_examples=25, deadline=None)
    def test_unitary_invariance_and_triangle(self, seed):
        rng = np.random.default_rng(seed)
        m, n = ginibre(4, 4, rng), ginibre(4, 4, rng)
        u = random_unitary(4, rng)
        svd = np.sum(np.linalg.svd(m, compute_uv=False))
        assert trace_norm(u @ m) == pytest.approx(svd, rel=1e-12)
        assert trace_norm(m + n) <= trace_norm(m) + trace_norm(n) + 1e-12


class TestHermEig:
    def test_diag(self):
        w, u = herm_eig(np.diag([3.0, 1.0]))
        assert_allclose(w, [1, 3])
        assert_allclose(np.abs(u), [[0, 1], [1, 0]])

    def test_pauli_x(self):
        w, _ = herm_eig(np.array([[0, 1], [1, 0]]))
        assert_allclose(w, [-1, 1])

    def test_cubic_roots(self):
        rng = np.random.default_rng(3)
        x = ginibre(3, 3, rng)
        h = x + x.conj().T
        roots = np.sort(np.roots(np.poly(h)).real)
        assert_allclose(herm_eig(h)[0], roots, atol=1e-9)

    def test_reconstruction(self):
        rng = np.random.default_rng(4)
        x = ginibre(8, 8, rng)
        h = x + x.conj().T
        w, u = herm_eig(h)
        assert np.all(np.diff(w) >= 0)
        assert np.linalg.norm(h - (u * w) @ u.conj().T) <= 1e-10 * (1 + np.linalg.norm(h))
        assert np.linalg.norm(u.conj().T @ u - np.eye(8)) <= 1e-10 * 8

    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitianError):
            herm_eig(np.array([[0, 1], [0, 0]]))


class TestPsdSqrt:
    def test_diag(self):
        assert_allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_zero(self):
        assert_allclose(psd_sqrt(np.zeros((3, 3))), 0)

    def test_round_trip(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            d = int(rng.integers(1, 7))
            rho = random_psd(d, rng, rank=int(rng.integers(1, d + 1)), trace=None)
            r = psd_sqrt(rho)
            assert np.linalg.norm(r @ r - rho) <= 1e-9 * (1 + np.linalg.norm(rho))
            assert np.linalg.eigvalsh(r)[0] >= -1e-12

    def test_rejects_negative(self):
        with pytest.raises(NotPSDError):
            psd_sqrt(np.diag([1.0, -1e-6]))

    def test_clamp_is_counted(self):
        reset_diagnostics()
        psd_sqrt(np.diag([1.0, -1e-14]))
        assert diagnostics["psd_clamp"] == 1

    def test_roundoff_zero_matrix(self):
        # vanishes up to roundoff: accepted through the absolute floor
        assert_allclose(psd_sqrt(np.diag([3e-16, -3e-16])), np.diag([np.sqrt(3e-16), 0.0]))
