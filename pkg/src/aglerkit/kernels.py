"""Finite positive kernels, Pick matrices and dual interpolation checks.

Coupling convention
-------------------
For a coefficient function ``X`` on the nodes, a kernel ``K`` and a
multiplier ``S``, the quadratic form

    Q(X) = sum_{i,j} tr( X_j* (M^2 I - S_j* S_i) X_i K_ij ),   K_ij = K(z_i, z_j),

is ``vec(X)* G vec(X)`` for the block matrix ``G`` whose ``(i, j)`` block is

    (M^2 I - S_i* S_j)  kron  conj(K_ij),

with ``vec`` taken row-major in each ``X_i``. ``Q >= 0`` for every ``X``
exactly when ``G`` is PSD, which is how every positivity test below is
decided. ``trace_form`` evaluates ``Q`` directly from the trace formula and
serves as an independent oracle for this convention.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import InvalidInputError, TestAxiomError
from .linalg import DEFAULT_TOL, PsdReport, hermitian, psd_check

CLASS_TAGS = ("classical-disk", "constrained-H1", "polydisk", "custom")


def _node_array(nodes) -> np.ndarray:
    arr = np.asarray(nodes, dtype=complex)
    if arr.ndim == 0:
        arr = arr[None]
    return arr


@dataclass(frozen=True)
class FiniteKernel:
    """Values ``K(z_i, z_j)`` of an ``N x N`` matrix kernel on a finite node set.

    ``values`` has shape ``(n, n, N, N)``.
    """

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        z = _node_array(self.nodes)
        V = np.asarray(self.values, dtype=complex)
        if V.ndim == 2:
            V = V[:, :, None, None]
        n = z.shape[0]
        if V.shape[:2] != (n, n) or V.shape[2] != V.shape[3]:
            raise InvalidInputError(f"kernel values shape {V.shape} does not fit {n} nodes")
        if not np.all(np.isfinite(V)):
            raise InvalidInputError("kernel values must be finite")
        asym = np.max(np.abs(V - V.conj().transpose(1, 0, 3, 2))) if V.size else 0.0
        if asym > 1e-10:
            raise InvalidInputError(f"kernel is not Hermitian-symmetric (defect {asym:.2e})")
        object.__setattr__(self, "nodes", z)
        object.__setattr__(self, "values", V)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def block_dim(self) -> int:
        return self.values.shape[2]

    def gram(self) -> np.ndarray:
        n, N = self.n, self.block_dim
        G = self.values.transpose(0, 2, 1, 3).reshape(n * N, n * N)
        return (G + G.conj().T) / 2

    def is_positive(self, tol: float = DEFAULT_TOL) -> bool:
        return psd_check(self.gram(), tol).is_psd

    @classmethod
    def from_function(cls, nodes, fn) -> "FiniteKernel":
        z = _node_array(nodes)
        vals = np.array([[np.atleast_2d(fn(zi, zj)) for zj in z] for zi in z], dtype=complex)
        return cls(z, vals)

    @classmethod
    def szego(cls, nodes, N: int = 1) -> "FiniteKernel":
        """``I_N / (1 - z conj(w))`` on disk nodes."""
        return cls.from_function(nodes, lambda z, w: np.eye(N) / (1 - z * np.conj(w)))

    @classmethod
    def product_szego(cls, nodes, N: int = 1) -> "FiniteKernel":
        """``I_N / prod_k (1 - z_k conj(w_k))`` on polydisk nodes."""
        return cls.from_function(
            nodes, lambda z, w: np.eye(N) / np.prod(1 - np.atleast_1d(z) * np.conj(np.atleast_1d(w))))

    @classmethod
    def constant(cls, nodes, C) -> "FiniteKernel":
        C = np.atleast_2d(np.asarray(C, dtype=complex))
        return cls.from_function(nodes, lambda z, w: C)

    @classmethod
    def generating(cls, nodes, alpha, beta) -> "FiniteKernel":
        """Generating kernel ``(a + z b)(a + w b)* + z^2 conj(w)^2 / (1 - z conj(w)) I``."""
        a = np.atleast_1d(np.asarray(alpha, dtype=complex))
        b = np.atleast_1d(np.asarray(beta, dtype=complex))
        return cls(nodes, genkernel_values(nodes, a, b))


def genkernel_values(nodes, alpha, beta) -> np.ndarray:
    z = _node_array(nodes)
    a = np.atleast_1d(np.asarray(alpha, dtype=complex))
    b = np.atleast_1d(np.asarray(beta, dtype=complex))
    v = a[None, :] + z[:, None] * b[None, :]
    zz = z[:, None] * z.conj()[None, :]
    return (np.einsum("ia,jb->ijab", v, v.conj())
            + (zz**2 / (1 - zz))[:, :, None, None] * np.eye(a.size))


@dataclass(frozen=True)
class InterpolationProblem:
    """Nodes in the open disk or polydisk with ``N x N`` target values."""

    nodes: np.ndarray
    values: np.ndarray
    cls: str = "classical-disk"

    def __post_init__(self):
        z = _node_array(self.nodes)
        V = np.asarray(self.values, dtype=complex)
        if V.ndim == 1:
            V = V[:, None, None]
        if z.shape[0] == 0:
            raise InvalidInputError("interpolation problem has no nodes")
        if V.ndim != 3 or V.shape[0] != z.shape[0] or V.shape[1] != V.shape[2]:
            raise InvalidInputError(f"values shape {V.shape} does not fit {z.shape[0]} nodes")
        if self.cls not in CLASS_TAGS:
            raise InvalidInputError(f"unknown class tag {self.cls!r}")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(V))):
            raise InvalidInputError("nodes and values must be finite")
        if np.any(np.abs(z) >= 1):
            raise InvalidInputError("nodes must lie in the open unit (poly)disk")
        flat = z.reshape(z.shape[0], -1)
        d = np.max(np.abs(flat[:, None, :] - flat[None, :, :]), axis=2) + np.eye(z.shape[0])
        if d.min() < 1e-14:
            raise InvalidInputError("nodes must be distinct")
        object.__setattr__(self, "nodes", z)
        object.__setattr__(self, "values", V)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    @property
    def input_dim(self) -> int:
        return 1 if self.nodes.ndim == 1 else self.nodes.shape[1]


@dataclass
class CheckReport:
    """Outcome of a dual (Pick-type) check.

    ``verdict`` is ``"feasible"``, ``"infeasible"`` or ``"undecided"``; an
    infeasible report always carries a ``witness`` whose ``pick_matrix`` has
    minimum eigenvalue below ``-tol``. A feasible verdict from sampling is
    only as strong as the samples; ``min_eig_seen`` says how close it came.
    """

    verdict: str
    witness: dict | None = None
    samples_used: int = 0
    min_eig_seen: float = float("inf")
    vacuous: bool = False
    notes: list = field(default_factory=list)


# -- Pick matrices and multiplier tests ----------------------------------------

def dbr_pick_matrix(problem: InterpolationProblem) -> np.ndarray:
    """Block Pick matrix ``(I - S_i S_j*) / (1 - z_i conj(z_j))`` for disk data."""
    if problem.input_dim != 1:
        raise InvalidInputError("dbr_pick_matrix needs disk nodes")
    z, S = problem.nodes, problem.values
    n, N = problem.n, problem.N
    num = np.eye(N)[None, None] - np.einsum("iab,jcb->ijac", S, S.conj())
    blocks = num / (1 - z[:, None] * z.conj()[None, :])[:, :, None, None]
    return hermitian(blocks.transpose(0, 2, 1, 3).reshape(n * N, n * N))


def coupling_blocks(S_vals, M: float = 1.0) -> np.ndarray:
    """``C[i, j] = M^2 I - S_i* S_j`` for multiplier values ``S_vals[i]``."""
    S = np.asarray(S_vals, dtype=complex)
    p = S.shape[2]
    return M**2 * np.eye(p)[None, None] - np.einsum("iba,jbc->ijac", S.conj(), S)


def assemble_form(C: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Block matrix with ``(i, j)`` block ``C[i, j] kron conj(K[i, j])``."""
    n, _, p, _ = C.shape
    e = K.shape[2]
    G = np.einsum("ijac,ijbd->iabjcd", C, K.conj())
    return hermitian(G.reshape(n * p * e, n * p * e))


def form_to_coefficients(vec: np.ndarray, n: int, p: int, e: int) -> np.ndarray:
    """Reshape a vector of the assembled form into coefficient matrices ``X_i`` (``p x e``)."""
    return np.asarray(vec).reshape(n, p, e)


def trace_kernel_matrix(K_vals, S_vals, X, M: float = 1.0) -> np.ndarray:
    """``k[i, j] = tr(X_j* (M^2 I - S_j* S_i) X_i K_ij)`` evaluated from the trace formula.

    ``X`` may carry a leading batch axis.
    """
    S = np.asarray(S_vals, dtype=complex)
    p = S.shape[2]
    # trace-formula order: row node i, column node j -> M^2 I - S_j* S_i
    Mp = M**2 * np.eye(p)[None, None] - np.einsum("jba,ibc->ijac", S.conj(), S)
    X = np.asarray(X, dtype=complex)
    single = X.ndim == 3
    out = _backend.kernel_matrices(Mp, np.asarray(K_vals, dtype=complex), X[None] if single else X)
    return out[0] if single else out


def trace_form(K_vals, S_vals, X, M: float = 1.0):
    """``Q(X) = sum_{i,j} k[i, j]`` (real up to rounding)."""
    k = trace_kernel_matrix(K_vals, S_vals, X, M)
    return k.sum(axis=(-1, -2)).real


def _psi_values(psi, nodes) -> np.ndarray:
    vals = np.array([np.atleast_2d(psi(z)) for z in nodes], dtype=complex)
    norms = [np.linalg.norm(v, 2) for v in vals]
    if norms and max(norms) >= 1:
        raise TestAxiomError(f"test function has norm {max(norms):.6g} >= 1 at a node")
    return vals


def multiplier_norm_bound(K: FiniteKernel, S_vals, M: float, tol: float = DEFAULT_TOL) -> PsdReport:
    """Decide ``||R_S|| <= M`` on ``H(K)`` from values of ``S`` at the kernel nodes.

    ``S_vals`` has shape ``(n, q, p)``; coefficients ``X_i`` are ``p x N``.
    The report's witness reshapes (via :func:`form_to_coefficients`) into an
    ``X`` with ``Q(X) = min_eigenvalue``.
    """
    if M <= 0:
        raise InvalidInputError("M must be positive")
    S = np.asarray(S_vals, dtype=complex)
    if S.ndim == 1:
        S = S[:, None, None]
    if S.shape[0] != K.n:
        raise InvalidInputError("multiplier values do not match kernel nodes")
    return psd_check(assemble_form(coupling_blocks(S, M), K.values), tol)


def admissibility_check(K: FiniteKernel, psi, tol: float = DEFAULT_TOL) -> PsdReport:
    """Is right multiplication by ``psi`` contractive on ``H(K)``?"""
    vals = _psi_values(psi, K.nodes)
    return multiplier_norm_bound(K, vals, 1.0, tol)


def sampled_form_minimum(K: FiniteKernel, S_vals, M: float = 1.0, draws: int = 1000,
                         seed=None) -> tuple[float, np.ndarray]:
    """Random-coefficient oracle: smallest ``Q(X)/||X||^2`` over Gaussian draws.

    Uses only the trace formula, never the assembled matrix. Returns the
    minimum and the minimizing ``X``.
    """
    S = np.asarray(S_vals, dtype=complex)
    if S.ndim == 1:
        S = S[:, None, None]
    rng = np.random.default_rng(seed)
    shape = (draws, K.n, S.shape[2], K.block_dim)
    X = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    X /= np.linalg.norm(X.reshape(draws, -1), axis=1)[:, None, None, None]
    vals = trace_form(K.values, S, X, M)
    k = int(np.argmin(vals))
    return float(vals[k]), X[k]


# -- constrained Nevanlinna-Pick ----------------------------------------------

def sphere_samples(N: int, count: int, seed=0) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors ``(alpha, beta)`` in ``C^{2N}``.

    Order: a real grid at pi/12 spacing in each coordinate plane, starting
    from the balanced direction ``alpha = beta`` (angle pi/4), then (for
    ``N = 1``) a Fibonacci lattice on the Hopf base sphere, then seeded
    Gaussian draws. At least the grid is always returned.
    """
    alphas, betas = [], []
    theta = np.pi / 4 + np.arange(24) * np.pi / 12
    for k in range(N):
        e = np.zeros(N)
        e[k] = 1
        for th in theta:
            alphas.append(np.cos(th) * e)
            betas.append(np.sin(th) * e)
    remaining = max(0, count - len(alphas))
    if N == 1 and remaining:
        nfib = remaining // 2
        i = np.arange(nfib) + 0.5
        polar = np.arccos(1 - 2 * i / max(nfib, 1))
        azim = np.pi * (1 + 5**0.5) * i
        for ph, az in zip(polar, azim):
            alphas.append(np.array([np.cos(ph / 2)]))
            betas.append(np.array([np.exp(1j * az) * np.sin(ph / 2)]))
        remaining -= nfib
    if remaining:
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((remaining, 2 * N)) + 1j * rng.standard_normal((remaining, 2 * N))
        g /= np.linalg.norm(g, axis=1)[:, None]
        alphas.extend(g[:, :N])
        betas.extend(g[:, N:])
    return np.array(alphas, dtype=complex), np.array(betas, dtype=complex)


def max_threads() -> int:
    try:
        return max(1, int(os.environ.get("AGLER_THREADS", "1")))
    except ValueError:
        return 1


def _chunked_min_eigs(fn, count: int, chunk: int = 256) -> np.ndarray:
    """Apply ``fn(lo, hi) -> eigenvalue minima`` over chunks, in order."""
    bounds = [(lo, min(lo + chunk, count)) for lo in range(0, count, chunk)]
    threads = max_threads()
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: fn(*b), bounds))
    else:
        parts = [fn(lo, hi) for lo, hi in bounds]
    return np.concatenate(parts) if parts else np.zeros(0)


def _first_failure(mins: np.ndarray, tol: float):
    bad = np.flatnonzero(mins < -tol)
    return int(bad[0]) if bad.size else None


def constrained_np_check(problem: InterpolationProblem, sphere_samples_count: int = 1000,
                         y_samples: int = 0, seed=0, tol: float = DEFAULT_TOL) -> CheckReport:
    """Dual test for interpolation by the constrained class (``S'(0) = 0``, ``||S|| <= 1``).

    For each sampled unit ``(alpha, beta)`` the kernel
    ``k(z, w) = tr(Y(w)* (I - S(w)* S(z)) Y(z) K_ab(z, w))`` must be positive
    for every ``Y``. With ``y_samples == 0`` the quantifier over ``Y`` is
    eliminated exactly by testing the assembled form; otherwise ``Y`` is
    drawn at random (``y_samples`` per direction, plus ``Y = I``). For
    ``N = 1``, ``Y`` cancels and the test is always exact.
    """
    if problem.cls != "constrained-H1":
        raise InvalidInputError(f"constrained_np_check needs class constrained-H1, got {problem.cls!r}")
    if problem.input_dim != 1:
        raise InvalidInputError("constrained_np_check needs disk nodes")
    z, S, n, N = problem.nodes, problem.values, problem.n, problem.N
    alphas, betas = sphere_samples(N, sphere_samples_count, seed)
    m = alphas.shape[0]

    if N == 1 or y_samples <= 0:
        def mins(lo, hi):
            G = _backend.genkernel_forms(z, S, alphas[lo:hi], betas[lo:hi])
            return np.linalg.eigvalsh(G)[:, 0]

        eig_min = _chunked_min_eigs(mins, m)
        report = CheckReport("feasible", samples_used=m, min_eig_seen=float(eig_min.min()))
        k = _first_failure(eig_min, tol)
        if k is not None:
            G = _backend.genkernel_forms(z, S, alphas[k:k + 1], betas[k:k + 1])[0]
            rep = psd_check(G, tol)
            if N == 1:
                Y = np.ones((n, 1, 1), dtype=complex)
            else:
                Y = np.sqrt(n) * form_to_coefficients(rep.witness, n, N, N)
            report.verdict = "infeasible"
            report.witness = _np_witness(z, S, alphas[k], betas[k], Y, tol)
        return report

    rng = np.random.default_rng(seed)
    eye = np.repeat(np.eye(N, dtype=complex)[None, None], n, axis=1)
    min_seen, used = np.inf, 0
    for k in range(m):
        K = genkernel_values(z, alphas[k], betas[k])
        g = rng.standard_normal((y_samples, n, N, N)) + 1j * rng.standard_normal((y_samples, n, N, N))
        Ys = np.concatenate([eye, g])
        picks = trace_kernel_matrix(K, S, Ys)
        picks = (picks + picks.conj().transpose(0, 2, 1)) / 2
        eigs = np.linalg.eigvalsh(picks)[:, 0]
        used += Ys.shape[0]
        min_seen = min(min_seen, float(eigs.min()))
        j = _first_failure(eigs, tol)
        if j is not None:
            return CheckReport("infeasible", _np_witness(z, S, alphas[k], betas[k], Ys[j], tol),
                               used, min_seen)
    return CheckReport("feasible", samples_used=used, min_eig_seen=min_seen)


def _np_witness(z, S, alpha, beta, Y, tol) -> dict:
    K = genkernel_values(z, alpha, beta)
    pick = trace_kernel_matrix(K, S, Y)
    pick = (pick + pick.conj().T) / 2
    return {"alpha": np.atleast_1d(alpha), "beta": np.atleast_1d(beta), "Y": Y,
            "nodes": z, "pick_matrix": pick, "report": psd_check(pick, tol)}


def generic_dual_check(problem: InterpolationProblem, kernel_family, y_samples: int = 0,
                       seed=0, tol: float = DEFAULT_TOL) -> CheckReport:
    """Dual test against a supplied generating set of admissible kernels.

    Each kernel must live on the problem nodes with ``N x N`` values. An
    empty family is vacuously feasible and flagged as such.
    """
    family = list(kernel_family)
    if not family:
        return CheckReport("feasible", samples_used=0, vacuous=True,
                           notes=["empty kernel family: feasible vacuously"])
    z, S, n, N = problem.nodes, problem.values, problem.n, problem.N
    rng = np.random.default_rng(seed)
    min_seen, used = np.inf, 0
    for idx, K in enumerate(family):
        if K.n != n or K.nodes.shape != z.shape or np.max(np.abs(K.nodes - z)) > 1e-12:
            raise InvalidInputError(f"kernel {idx} is not defined on the problem nodes")
        if K.block_dim != N:
            raise InvalidInputError(f"kernel {idx} has block size {K.block_dim}, expected {N}")
        if y_samples <= 0 or N == 1:
            rep = multiplier_norm_bound(K, S, 1.0, tol)
            used += 1
            min_seen = min(min_seen, rep.min_eigenvalue)
            if not rep.is_psd:
                Y = (np.ones((n, 1, 1), dtype=complex) if N == 1
                     else np.sqrt(n) * form_to_coefficients(rep.witness, n, N, N))
                return CheckReport("infeasible", _dual_witness(K, S, Y, idx, tol), used, min_seen)
            continue
        g = rng.standard_normal((y_samples, n, N, N)) + 1j * rng.standard_normal((y_samples, n, N, N))
        Ys = np.concatenate([np.repeat(np.eye(N, dtype=complex)[None, None], n, axis=1), g])
        picks = trace_kernel_matrix(K.values, S, Ys)
        picks = (picks + picks.conj().transpose(0, 2, 1)) / 2
        eigs = np.linalg.eigvalsh(picks)[:, 0]
        used += Ys.shape[0]
        min_seen = min(min_seen, float(eigs.min()))
        j = _first_failure(eigs, tol)
        if j is not None:
            return CheckReport("infeasible", _dual_witness(K, S, Ys[j], idx, tol), used, min_seen)
    return CheckReport("feasible", samples_used=used, min_eig_seen=float(min_seen))


def _dual_witness(K: FiniteKernel, S, Y, idx: int, tol: float) -> dict:
    pick = trace_kernel_matrix(K.values, S, Y)
    pick = (pick + pick.conj().T) / 2
    return {"kernel_index": idx, "Y": Y, "nodes": K.nodes, "pick_matrix": pick,
            "report": psd_check(pick, tol)}
