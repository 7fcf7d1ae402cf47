"""Dense complex matrix kernel.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Tensor factors
use the row-major convention: for ``kron(a, b)`` the composite index is
``i_a * dim(b) + i_b``.
"""

from __future__ import annotations

from collections import Counter
from typing import Sequence

import numpy as np

HERM_TOL = 1e-12
PSD_TOL = 1e-12
# absolute floor for matrices that vanish up to roundoff, e.g. I - C*C for unitary C
PSD_ATOL = 64 * np.finfo(float).eps

# Counts silent repairs (eigenvalues clamped to zero) so tests can detect them.
diagnostics: Counter = Counter()


class DimensionError(ValueError):
    """Raised when matrix shapes and declared tensor splits disagree."""


class NotHermitianError(ValueError):
    pass


class NotPSDError(ValueError):
    pass


def reset_diagnostics() -> None:
    diagnostics.clear()


def as_cmat(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def is_hermitian(m: np.ndarray, tol: float = HERM_TOL) -> bool:
    m = as_cmat(m)
    if m.shape[0] != m.shape[1]:
        return False
    scale = 1.0 + (np.max(np.abs(m)) if m.size else 0.0)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol * scale)


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def tensor(a, b) -> np.ndarray:
    """Kronecker product ``a ⊗ b``."""
    return np.kron(as_cmat(a), as_cmat(b))


def _check_split(n: int, split: Sequence[int]) -> tuple[int, ...]:
    split = tuple(int(d) for d in split)
    if not split or any(d < 1 for d in split):
        raise DimensionError(f"invalid factor dimensions {split}")
    if int(np.prod(split)) != n:
        raise DimensionError(f"factors {split} do not multiply to {n}")
    return split


def partial_trace(m, split: Sequence[int], keep) -> np.ndarray:
    """Trace out every factor of ``split`` whose index is not in ``keep``.

    Parameters
    ----------
    m : (n, n) array
        Operator on the tensor product of the factors.
    split : sequence of int
        Factor dimensions, slowest-varying first.
    keep : int or iterable of int
        Indices of the factors that survive, in their original order.
    """
    m = as_cmat(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"partial trace needs a square matrix, got {m.shape}")
    split = _check_split(m.shape[0], split)
    if np.isscalar(keep) or isinstance(keep, (int, np.integer)):
        keep = (int(keep),)
    keep = tuple(sorted(set(int(k) for k in keep)))
    if any(k < 0 or k >= len(split) for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {len(split)} factors")
    k = len(split)
    t = m.reshape(split + split)
    # trace from the last factor so earlier axis numbers stay valid
    for ax in reversed(range(k)):
        if ax in keep:
            continue
        nrow = t.ndim // 2
        t = np.trace(t, axis1=ax, axis2=ax + nrow)
    d = int(np.prod([split[i] for i in keep])) if keep else 1
    return t.reshape(d, d)


def trace_norm(m) -> float:
    """Sum of singular values."""
    m = as_cmat(m)
    if m.size == 0:
        return 0.0
    if m.shape[0] == m.shape[1] and is_hermitian(m):
        return float(np.sum(np.abs(np.linalg.eigvalsh(hermitize(m)))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def herm_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending."""
    m = as_cmat(m)
    if not is_hermitian(m):
        raise NotHermitianError("herm_eig called on a non-Hermitian matrix")
    w, u = np.linalg.eigh(hermitize(m))
    return w, u


def psd_sqrt(m) -> np.ndarray:
    """Principal square root of a positive semidefinite matrix.

    Eigenvalues in ``[-max(1e-12 * ||m||, PSD_ATOL), 0)`` are clamped to zero and counted in
    ``diagnostics["psd_clamp"]``; anything more negative raises
    :class:`NotPSDError`.
    """
    w, u = herm_eig(m)
    scale = np.max(np.abs(w), initial=0.0)
    if w.size and w[0] < -max(PSD_TOL * scale, PSD_ATOL):
        raise NotPSDError(f"matrix has eigenvalue {w[0]:.3e} (norm {scale:.3e})")
    neg = w < 0
    if np.any(neg):
        diagnostics["psd_clamp"] += int(np.count_nonzero(neg))
        w = np.where(neg, 0.0, w)
    return (u * np.sqrt(w)) @ u.conj().T


def polar_unitary(m) -> np.ndarray:
    """Partial isometry ``U`` with ``m = U |m|`` (unitary for square input)."""
    w, _, vh = np.linalg.svd(as_cmat(m), full_matrices=False)
    return w @ vh


def sign_hermitian(m: np.ndarray) -> np.ndarray:
    """Hermitian unitary ``sign(m)``; the polar factor of a Hermitian matrix."""
    w, u = np.linalg.eigh(hermitize(m))
    s = np.where(w >= 0, 1.0, -1.0)
    return (u * s) @ u.conj().T


def ket(v) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape(-1, 1)


def proj(v) -> np.ndarray:
    """Rank-one operator ``|v><v|``."""
    v = np.asarray(v, dtype=complex).ravel()
    return np.outer(v, v.conj())


def basis(d: int, k: int) -> np.ndarray:
    e = np.zeros(d, dtype=complex)
    e[k] = 1.0
    return e


def haar_vector(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def ginibre(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(ginibre(d, d, rng))
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_psd(d: int, rng: np.random.Generator, rank: int | None = None, trace: float | None = 1.0) -> np.ndarray:
    x = ginibre(d, rank or d, rng)
    rho = x @ x.conj().T
    if trace is not None:
        rho *= trace / np.trace(rho).real
    return rho
