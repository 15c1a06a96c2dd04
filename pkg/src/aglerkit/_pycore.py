"""Pure-numpy versions of the hot kernels in ``_core.pyx``.

Both modules expose the same functions with the same signatures; see
``aglerkit._backend`` for the selection logic.
"""
import numpy as np


def genkernel_forms(nodes, svals, alphas, betas):
    """Assembled dual-test matrices for a batch of (alpha, beta) directions.

    For each sample ``s`` the ``(i, j)`` block of the result is
    ``(I - S_i* S_j) kron conj(K_s(z_i, z_j))`` with
    ``K_s(z, w) = (a + z b)(a + w b)* + z^2 conj(w)^2 / (1 - z conj(w)) I``.
    Row index order is ``(node, S-index, K-index)``.
    """
    z = np.asarray(nodes, dtype=complex)
    S = np.asarray(svals, dtype=complex)
    a = np.asarray(alphas, dtype=complex)
    b = np.asarray(betas, dtype=complex)
    m, N = a.shape
    n = z.size
    v = a[:, None, :] + z[None, :, None] * b[:, None, :]
    zz = z[:, None] * z.conj()[None, :]
    c = zz**2 / (1.0 - zz)
    K = np.einsum("sia,sjb->sijab", v, v.conj()) + c[None, :, :, None, None] * np.eye(N)
    M = np.eye(N)[None, None] - np.einsum("iba,jbc->ijac", S.conj(), S)
    G = np.einsum("ijac,sijbd->siabjcd", M, K.conj())
    return G.reshape(m, n * N * N, n * N * N)


def kernel_matrices(M, K, X):
    """Scalar kernel matrices ``k[s, i, j] = tr(X_j* M_ij X_i K_ij)``.

    ``M`` has shape ``(n, n, p, p)``, ``K`` has shape ``(n, n, e, e)`` and
    ``X`` has shape ``(m, n, p, e)``.
    """
    M = np.asarray(M, dtype=complex)
    K = np.asarray(K, dtype=complex)
    X = np.asarray(X, dtype=complex)
    return np.einsum("sjab,ijac,sicd,ijdb->sij", X.conj(), M, X, K, optimize=True)
