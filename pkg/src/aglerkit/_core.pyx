# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; semantics match ``aglerkit._pycore`` exactly."""
import numpy as np
cimport cython


def genkernel_forms(nodes, svals, alphas, betas):
    cdef double complex[::1] z = np.ascontiguousarray(nodes, dtype=complex)
    cdef double complex[:, :, ::1] S = np.ascontiguousarray(svals, dtype=complex)
    cdef double complex[:, ::1] a = np.ascontiguousarray(alphas, dtype=complex)
    cdef double complex[:, ::1] b = np.ascontiguousarray(betas, dtype=complex)
    cdef Py_ssize_t m = a.shape[0], N = a.shape[1], n = z.shape[0]
    cdef Py_ssize_t blk = N * N, dim = n * blk
    cdef Py_ssize_t s, i, j, p, q, r, e, f
    cdef double complex zz, c, acc
    out_arr = np.empty((m, dim, dim), dtype=complex)
    cdef double complex[:, :, ::1] out = out_arr
    Marr = np.empty((n, n, N, N), dtype=complex)
    cdef double complex[:, :, :, ::1] M = Marr
    Varr = np.empty((n, N), dtype=complex)
    cdef double complex[:, ::1] v = Varr
    Carr = np.empty((n, n), dtype=complex)
    cdef double complex[:, ::1] cc = Carr
    Karr = np.empty((N, N), dtype=complex)
    cdef double complex[:, ::1] K = Karr

    for i in range(n):
        for j in range(n):
            zz = z[i] * z[j].conjugate()
            cc[i, j] = zz * zz / (1.0 - zz)
            for p in range(N):
                for q in range(N):
                    acc = 1.0 if p == q else 0.0
                    for r in range(N):
                        acc = acc - S[i, r, p].conjugate() * S[j, r, q]
                    M[i, j, p, q] = acc

    for s in range(m):
        for i in range(n):
            for p in range(N):
                v[i, p] = a[s, p] + z[i] * b[s, p]
        for i in range(n):
            for j in range(n):
                # conj(K_s(z_i, z_j))
                for e in range(N):
                    for f in range(N):
                        acc = v[i, e] * v[j, f].conjugate()
                        if e == f:
                            acc = acc + cc[i, j]
                        K[e, f] = acc.conjugate()
                for p in range(N):
                    for e in range(N):
                        for q in range(N):
                            c = M[i, j, p, q]
                            for f in range(N):
                                out[s, i * blk + p * N + e, j * blk + q * N + f] = c * K[e, f]
    return out_arr


def kernel_matrices(Min, Kin, Xin):
    cdef double complex[:, :, :, ::1] M = np.ascontiguousarray(Min, dtype=complex)
    cdef double complex[:, :, :, ::1] K = np.ascontiguousarray(Kin, dtype=complex)
    cdef double complex[:, :, :, ::1] X = np.ascontiguousarray(Xin, dtype=complex)
    cdef Py_ssize_t m = X.shape[0], n = X.shape[1], P = X.shape[2], E = X.shape[3]
    cdef Py_ssize_t s, i, j, a, c, d, bb
    cdef double complex acc, t
    out_arr = np.empty((m, n, n), dtype=complex)
    cdef double complex[:, :, ::1] out = out_arr
    Tarr = np.empty((P, E), dtype=complex)
    cdef double complex[:, ::1] MXK = Tarr
    for s in range(m):
        for i in range(n):
            for j in range(n):
                # MXK = M_ij X_i K_ij
                for a in range(P):
                    for bb in range(E):
                        acc = 0.0
                        for c in range(P):
                            t = 0.0
                            for d in range(E):
                                t = t + X[s, i, c, d] * K[i, j, d, bb]
                            acc = acc + M[i, j, a, c] * t
                        MXK[a, bb] = acc
                acc = 0.0
                for a in range(P):
                    for bb in range(E):
                        acc = acc + X[s, j, a, bb].conjugate() * MXK[a, bb]
                out[s, i, j] = acc
    return out_arr
