"""Unitary colligations from Agler decompositions and their transfer functions.

Only the square case is handled: input, output and every test-function
coefficient space are ``C^N``-like, and ``rho(E(z))`` is the block diagonal
matrix ``diag_m(I_{r_m} kron psi_m(z))`` acting on the state space.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agler import AglerDecomposition, DecompositionProblem, factor_reconstruction
from .errors import (
    InconsistentDecompositionError,
    InvalidInputError,
    NotIsometricError,
    NumericalFailure,
    UnsupportedError,
)
from .linalg import unitarity_defect, unitary_completion
from .testfns import TestFunction

RESOLVENT_COND_LIMIT = 1e12


@dataclass
class Colligation:
    """``U = [[A, B], [C, D]]`` plus the sector table ``[(psi_m, r_m), ...]``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    sectors: list = field(default_factory=list)

    def __post_init__(self):
        self.D = np.atleast_2d(np.asarray(self.D, dtype=complex))
        N = self.D.shape[0]
        s = sum(r * psi.size for psi, r in self.sectors)
        self.A = np.asarray(self.A, dtype=complex).reshape(s, s)
        self.B = np.asarray(self.B, dtype=complex).reshape(s, N)
        self.C = np.asarray(self.C, dtype=complex).reshape(N, s)

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.D.shape[0]

    @property
    def input_dim(self) -> int:
        return max([psi.input_dim for psi, _ in self.sectors], default=1)

    def U(self) -> np.ndarray:
        return np.block([[self.A, self.B], [self.C, self.D]])

    def unitarity_defect(self) -> float:
        return unitarity_defect(self.U())

    def __call__(self, z) -> np.ndarray:
        return transfer_eval(self, z)

    def to_dict(self) -> dict:
        from .serialize import cmat_to_json

        return {
            "A": cmat_to_json(self.A) if self.state_dim else [],
            "B": cmat_to_json(self.B) if self.state_dim else [],
            "C": cmat_to_json(self.C) if self.state_dim else [],
            "D": cmat_to_json(self.D),
            "sectors": [{"test_function": psi.to_dict(), "multiplicity": int(r)}
                        for psi, r in self.sectors],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Colligation":
        from .serialize import cmat_from_json

        sectors = [(TestFunction.from_dict(s["test_function"]), int(s["multiplicity"]))
                   for s in data["sectors"]]
        D = cmat_from_json(data["D"])
        s = sum(r * psi.size for psi, r in sectors)
        N = D.shape[0]

        def block(key, shape):
            if shape[0] * shape[1] == 0:
                return np.zeros(shape, dtype=complex)
            M = cmat_from_json(data[key])
            if M.shape != shape:
                raise InvalidInputError(f"block {key} has shape {M.shape}, expected {shape}")
            return M

        return cls(block("A", (s, s)), block("B", (s, N)), block("C", (N, s)), D, sectors)


@dataclass
class TransferReport:
    node_errors: list
    max_error: float
    unitarity_defect: float
    spectral_radius: float
    resolvent_condition: float


def rho_eval(sectors, z) -> np.ndarray:
    """``diag_m(I_{r_m} kron psi_m(z))``."""
    blocks = [np.kron(np.eye(r), psi(z)) for psi, r in sectors if r > 0]
    if not blocks:
        return np.zeros((0, 0), dtype=complex)
    s = sum(b.shape[0] for b in blocks)
    out = np.zeros((s, s), dtype=complex)
    k = 0
    for b in blocks:
        m = b.shape[0]
        out[k:k + m, k:k + m] = b
        k += m
    return out


def _resolvent(col: Colligation, z):
    rho = rho_eval(col.sectors, z)
    M = np.eye(col.state_dim) - rho @ col.A
    return rho, M


def transfer_eval(colligation: Colligation, z, return_condition: bool = False):
    """``D + C (I - rho A)^{-1} rho B`` at ``z``.

    Raises :class:`NumericalFailure` when ``I - rho A`` has condition number
    above ``1e12``.
    """
    col = colligation
    if col.state_dim == 0:
        return (col.D.copy(), 1.0) if return_condition else col.D.copy()
    rho, M = _resolvent(col, z)
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > RESOLVENT_COND_LIMIT:
        raise NumericalFailure(f"resolvent condition number {cond:.3e} at z={z}")
    val = col.D + col.C @ np.linalg.solve(M, rho @ col.B)
    return (val, cond) if return_condition else val


def state_function(colligation: Colligation, z) -> np.ndarray:
    """``C (I - rho(z) A)^{-1}``, the realized ``H(z)``."""
    col = colligation
    if col.state_dim == 0:
        return np.zeros((col.N, 0), dtype=complex)
    _, M = _resolvent(col, z)
    return np.linalg.solve(M.T, col.C.T).T


def toshow_residual(colligation: Colligation, z, w) -> float:
    """Max-entry gap in ``I - S(z)S(w)* = H(z)(I - rho(z)rho(w)*)H(w)*``."""
    col = colligation
    lhs = np.eye(col.N) - transfer_eval(col, z) @ transfer_eval(col, w).conj().T
    if col.state_dim == 0:
        return float(np.max(np.abs(lhs)))
    rz, rw = rho_eval(col.sectors, z), rho_eval(col.sectors, w)
    Hz, Hw = state_function(col, z), state_function(col, w)
    rhs = Hz @ (np.eye(col.state_dim) - rz @ rw.conj().T) @ Hw.conj().T
    return float(np.max(np.abs(lhs - rhs)))


def lurking_isometry(decomposition: AglerDecomposition, problem: DecompositionProblem,
                     abs_tol: float = 1e-9) -> Colligation:
    """Realize the sampled function from its Agler decomposition.

    The map ``[rho(z_i)* H(z_i)* y; y] -> [H(z_i)* y; S(z_i)* y]`` (nodes in
    order, ``y`` over the standard basis) is isometric by the decomposition
    identity. Its unitary extension is ``U*``.
    """
    n, N = problem.n, problem.N
    sectors = [(psi, r) for psi, r in zip(problem.family, decomposition.multiplicities)]
    s = sum(r * psi.size for psi, r in sectors)
    H = [np.hstack([np.asarray(F[i]).reshape(N, -1) for F in decomposition.factors])
         if s else np.zeros((N, 0), dtype=complex) for i in range(n)]
    if any(h.shape != (N, s) for h in H):
        raise InconsistentDecompositionError("factor shapes do not match the sector table")

    gap = float(np.max(np.abs(factor_reconstruction(decomposition, problem)
                              - _target(problem))))
    tol = 100 * max(decomposition.residual, 0.0) + abs_tol
    if gap > tol:
        raise InconsistentDecompositionError(
            f"factors reproduce the target only to {gap:.3e} (allowed {tol:.3e})")

    dom, rng = [], []
    for i in range(n):
        rho = rho_eval(sectors, problem.nodes[i])
        Hs = H[i].conj().T
        for a in range(N):
            y = np.zeros(N)
            y[a] = 1.0
            dom.append(np.concatenate([rho.conj().T @ (Hs @ y), y]))
            rng.append(np.concatenate([Hs @ y, problem.samples[i].conj().T @ y]))
    try:
        Ustar = unitary_completion(np.column_stack(dom), np.column_stack(rng), tol=max(tol, 1e-12))
    except NotIsometricError as exc:
        raise InconsistentDecompositionError(str(exc)) from exc
    U = Ustar.conj().T
    return Colligation(U[:s, :s], U[:s, s:], U[s:, :s], U[s:, s:], sectors)


def _target(problem: DecompositionProblem) -> np.ndarray:
    S = problem.samples
    N = problem.N
    return (np.eye(N)[None, :, None, :] * np.ones((problem.n, 1, problem.n, 1))
            - np.einsum("iab,jcb->iajc", S, S.conj()))


def probe_points(input_dim: int, count: int = 100, radius: float = 0.9, seed=0) -> list:
    """Deterministic interior points of the (poly)disk."""
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.random((count, input_dim)))
    th = 2 * np.pi * rng.random((count, input_dim))
    pts = r * np.exp(1j * th)
    return [p[0] if input_dim == 1 else p for p in pts]


def verify_colligation(colligation: Colligation, problem: DecompositionProblem | None = None,
                       probes: int = 20) -> TransferReport:
    col = colligation
    errs = []
    if problem is not None:
        errs = [float(np.linalg.norm(transfer_eval(col, z) - S, 2))
                for z, S in zip(problem.nodes, problem.samples)]
    srad, cond = 0.0, 1.0
    if col.state_dim:
        for z in probe_points(col.input_dim, probes):
            rho, M = _resolvent(col, z)
            srad = max(srad, float(np.max(np.abs(np.linalg.eigvals(rho @ col.A)))))
            cond = max(cond, float(np.linalg.cond(M)))
    return TransferReport(errs, max(errs, default=0.0), col.unitarity_defect(), srad, cond)


# -- von Neumann inequality -------------------------------------------------------------

@dataclass
class Polynomial:
    """Scalar polynomial ``sum_k c_k z^k`` with multi-indices ``k``."""

    coeffs: dict

    @property
    def input_dim(self) -> int:
        return len(next(iter(self.coeffs))) if self.coeffs else 1

    def __call__(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return sum(c * np.prod(z ** np.array(k)) for k, c in self.coeffs.items())

    def substitute(self, T) -> np.ndarray:
        dim = T[0].shape[0]
        out = np.zeros((dim, dim), dtype=complex)
        for k, c in self.coeffs.items():
            term = np.eye(dim, dtype=complex)
            for Tj, e in zip(T, k):
                term = term @ np.linalg.matrix_power(Tj, e)
            out += c * term
        return out


def _check_tuple(T, tol: float):
    T = [np.atleast_2d(np.asarray(t, dtype=complex)) for t in T]
    if not T or len({t.shape for t in T}) != 1 or T[0].shape[0] != T[0].shape[1]:
        raise InvalidInputError("operator tuple must be square matrices of one size")
    for t in T:
        if np.linalg.norm(t, 2) > 1 - 1e-6:
            raise InvalidInputError("operators must be strict contractions")
    for i in range(len(T)):
        for j in range(i):
            if np.linalg.norm(T[i] @ T[j] - T[j] @ T[i], 2) > tol:
                raise InvalidInputError("operator tuple does not commute")
    return T


def von_neumann_test(f, T, tol: float = 1e-10) -> float:
    """``||f(T)||`` for a polynomial or a coordinate-family colligation ``f``."""
    T = _check_tuple(T, tol)
    if isinstance(f, Polynomial):
        return float(np.linalg.norm(f.substitute(T), 2))
    col = f
    k = T[0].shape[0]
    if any(not psi.is_coordinate for psi, _ in col.sectors):
        raise UnsupportedError("operator substitution needs coordinate test functions")
    if col.state_dim == 0:
        return float(np.linalg.norm(np.kron(col.D, np.eye(k)), 2))
    if max(psi.coordinate_index for psi, _ in col.sectors) >= len(T):
        raise InvalidInputError("operator tuple is shorter than the number of variables")
    s = col.state_dim
    # state coordinates in sector order; ordering is kron(state, operator space)
    rho = np.zeros((s * k, s * k), dtype=complex)
    j = 0
    for psi, r in col.sectors:
        for _ in range(r):
            rho[j * k:(j + 1) * k, j * k:(j + 1) * k] = T[psi.coordinate_index]
            j += 1
    Ik = np.eye(k)
    M = np.eye(s * k) - rho @ np.kron(col.A, Ik)
    ST = np.kron(col.D, Ik) + np.kron(col.C, Ik) @ np.linalg.solve(M, rho @ np.kron(col.B, Ik))
    return float(np.linalg.norm(ST, 2))


def random_commuting_contractions(d: int, dim: int, rng, max_norm: float = 0.99) -> list:
    """``d`` commuting strict contractions built as polynomials in one random matrix."""
    X = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    X /= np.linalg.norm(X, 2)
    out = []
    for _ in range(d):
        c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        P = c[0] * np.eye(dim) + c[1] * X + c[2] * X @ X
        out.append(P * (rng.uniform(0.3, max_norm) / np.linalg.norm(P, 2)))
    return out
