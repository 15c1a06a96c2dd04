"""Complex Hermitian linear algebra used throughout the package.

Everything here works on dense ``complex128`` numpy arrays. Hermitian inputs
are symmetrized before any eigensolve.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NotIsometricError, NotPositiveKernelError

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class PsdReport:
    """Outcome of a PSD test.

    ``witness`` is a unit eigenvector for ``min_eigenvalue``; when the matrix
    fails the test, ``witness* H witness`` equals ``min_eigenvalue``.
    """

    is_psd: bool
    min_eigenvalue: float
    witness: np.ndarray


def as_cmatrix(a) -> np.ndarray:
    m = np.atleast_2d(np.asarray(a, dtype=complex))
    if m.ndim != 2:
        raise InvalidInputError(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix has non-finite entries")
    return m


def hermitian(a) -> np.ndarray:
    """Return ``(A + A*)/2`` after validating shape and finiteness."""
    m = as_cmatrix(a)
    if m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"Hermitian matrix must be square, got {m.shape}")
    return (m + m.conj().T) / 2


def psd_check(H, tol: float = DEFAULT_TOL) -> PsdReport:
    """Decide ``H >= -tol`` via the smallest eigenvalue of ``(H + H*)/2``."""
    if tol < 0:
        raise InvalidInputError("tol must be non-negative")
    h = hermitian(H)
    if h.shape[0] == 0:
        return PsdReport(True, 0.0, np.zeros(0, dtype=complex))
    evals, evecs = np.linalg.eigh(h)
    lam = float(evals[0])
    return PsdReport(lam >= -tol, lam, evecs[:, 0].copy())


def nearest_psd(H) -> np.ndarray:
    """Frobenius-nearest PSD matrix: clip negative eigenvalues to zero."""
    h = hermitian(H)
    if h.shape[0] == 0:
        return h
    evals, evecs = np.linalg.eigh(h)
    out = (evecs * np.clip(evals, 0.0, None)) @ evecs.conj().T
    return (out + out.conj().T) / 2


def psd_factor(G, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Return ``F`` with ``F F* ~= G`` keeping eigenvalues ``> tol*max(1, lam_max)``."""
    g = hermitian(G)
    if g.shape[0] == 0:
        return np.zeros((0, 0), dtype=complex)
    evals, evecs = np.linalg.eigh(g)
    cutoff = tol * max(1.0, float(evals[-1]))
    keep = evals > cutoff
    # eigh sorts ascending; flip so the dominant direction comes first
    idx = np.flatnonzero(keep)[::-1]
    return evecs[:, idx] * np.sqrt(evals[idx])


def kolmogorov_factor(K, tol: float = DEFAULT_TOL, block_dim: int | None = None) -> list[np.ndarray]:
    """Factor a finite positive kernel as ``K(z_i, z_j) = H_i H_j*``.

    ``K`` is either an object exposing ``gram()`` and ``block_dim`` (such as
    :class:`aglerkit.kernels.FiniteKernel`) or an assembled block Gram matrix,
    in which case ``block_dim`` gives the block size.

    Returns one ``block_dim x r`` factor per node, where ``r`` is the
    numerical rank. Raises :class:`NotPositiveKernelError` when the Gram
    matrix has an eigenvalue below ``-tol``.
    """
    if hasattr(K, "gram"):
        G = K.gram()
        bd = K.block_dim
    else:
        G = hermitian(K)
        bd = 1 if block_dim is None else int(block_dim)
    if bd <= 0 or G.shape[0] % bd:
        raise InvalidInputError(f"Gram size {G.shape[0]} is not a multiple of block size {bd}")
    report = psd_check(G, tol)
    if not report.is_psd:
        raise NotPositiveKernelError(
            f"kernel Gram matrix has eigenvalue {report.min_eigenvalue:.3e} < -{tol:g}", report
        )
    F = psd_factor(G, tol)
    n = G.shape[0] // bd
    return [F[i * bd:(i + 1) * bd, :] for i in range(n)]


def _pivoted_basis(vectors: np.ndarray, tol: float, start: np.ndarray | None = None) -> np.ndarray:
    """Orthonormal basis for span(vectors) orthogonal to ``start``.

    Modified Gram-Schmidt with the largest-remaining-norm pivot (ties go to
    the lowest column index). Columns whose residual norm is ``<= tol`` are
    treated as dependent.
    """
    dim = vectors.shape[0]
    basis = [] if start is None else [start[:, k] for k in range(start.shape[1])]
    rem = vectors.astype(complex, copy=True)
    for q in basis:
        rem -= np.outer(q, q.conj() @ rem)
        rem -= np.outer(q, q.conj() @ rem)
    new = []
    active = np.ones(rem.shape[1], dtype=bool)
    while active.any() and len(basis) < dim:
        norms = np.where(active, np.linalg.norm(rem, axis=0), -1.0)
        k = int(np.argmax(norms))  # argmax returns the first maximal index
        if norms[k] <= tol:
            break
        q = rem[:, k] / norms[k]
        active[k] = False
        # two passes keep the basis orthonormal to ~1e-16
        for _ in range(2):
            for b in basis + new:
                q = q - b * (b.conj() @ q)
            q = q / np.linalg.norm(q)
        new.append(q)
        rem -= np.outer(q, q.conj() @ rem)
    if not new:
        return np.zeros((dim, 0), dtype=complex)
    return np.column_stack(new)


def _polar_isometry(M: np.ndarray) -> np.ndarray:
    if M.shape[1] == 0:
        return M
    u, _, vh = np.linalg.svd(M, full_matrices=False)
    return u @ vh


def unitary_completion(domain_vectors, range_vectors, tol: float = 1e-8,
                       dim: int | None = None) -> np.ndarray:
    """Extend the map ``d_k -> r_k`` to a unitary on the ambient space.

    Parameters
    ----------
    domain_vectors, range_vectors
        Column-stacked arrays (``dim x m``) or sequences of length-``dim``
        vectors. Both families must have the same Gram matrix within ``tol``.
    dim
        Ambient dimension, required only when both families are empty.

    Returns
    -------
    ndarray
        ``U`` with ``U d_k = r_k`` and ``U* U = U U* = I``.
    """
    D = _stack(domain_vectors, dim)
    R = _stack(range_vectors, dim)
    if D.shape != R.shape:
        raise InvalidInputError(f"domain/range shapes differ: {D.shape} vs {R.shape}")
    n = D.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    gd = D.conj().T @ D
    gr = R.conj().T @ R
    mismatch = float(np.max(np.abs(gd - gr))) if gd.size else 0.0
    if mismatch > tol:
        raise NotIsometricError(f"Gram mismatch {mismatch:.3e} exceeds {tol:g}")

    scale = max(1.0, float(np.max(np.linalg.norm(D, axis=0)))) if D.shape[1] else 1.0
    rank_tol = 1e-10 * scale
    Qd = _pivoted_basis(D, rank_tol)
    # coordinates of the d_k in the basis Qd, then the image of that basis
    coords = Qd.conj().T @ D
    image = R @ np.linalg.pinv(coords, rcond=1e-12) if Qd.shape[1] else Qd
    Qr = _polar_isometry(image)
    eye = np.eye(n, dtype=complex)
    Qd_perp = _pivoted_basis(eye, 1e-8, start=Qd)
    Qr_perp = _pivoted_basis(eye, 1e-8, start=Qr)
    left = np.hstack([Qr, Qr_perp])
    right = np.hstack([Qd, Qd_perp])
    return left @ right.conj().T


def _stack(vectors, dim):
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        return vectors.astype(complex)
    vs = [np.asarray(v, dtype=complex).ravel() for v in vectors]
    if not vs:
        if dim is None:
            raise InvalidInputError("dim is required when no vectors are given")
        return np.zeros((dim, 0), dtype=complex)
    if len({v.size for v in vs}) != 1:
        raise InvalidInputError("vectors have inconsistent lengths")
    if dim is not None and vs[0].size != dim:
        raise InvalidInputError(f"vectors have length {vs[0].size}, expected {dim}")
    return np.column_stack(vs)


def unitarity_defect(U) -> float:
    """``max(|U*U - I|_max, |UU* - I|_max)``; zero for empty matrices."""
    U = np.asarray(U, dtype=complex)
    if U.size == 0:
        return 0.0
    eye = np.eye(U.shape[0])
    return float(max(np.max(np.abs(U.conj().T @ U - eye)), np.max(np.abs(U @ U.conj().T - eye))))
