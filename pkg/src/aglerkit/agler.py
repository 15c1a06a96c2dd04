"""Discretized Agler decompositions.

Given samples ``S(z_i)`` and a finite test family ``psi_1..psi_M`` we look
for PSD matrices ``W_m`` indexed by ``(node i, output row a, inner index p)``
with

    I - S(z_i) S(z_j)* = sum_m sum_{p,q} W_m[(i,a,p),(j,b,q)] Delta_m[i,j][p,q],
    Delta_m[i,j] = I - psi_m(z_i) psi_m(z_j)*.

Factoring ``W_m = G G*`` and reading ``G`` column by column gives functions
``H_m(z_i)`` with ``I - S(z_i)S(z_j)* = sum_m H_m(z_i) (I_r kron Delta_m[i,j]) H_m(z_j)*``;
the number of copies ``r`` is the rank of ``W_m``.

The linear map ``W -> L(W)`` acts entrywise in ``(i, j, a, b)``, so the
projection onto ``{L(W) = T}`` is a closed-form rank-one correction per
entry.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import InconsistentDecompositionError, InvalidInputError, UndecidedError
from .linalg import DEFAULT_TOL, kolmogorov_factor, nearest_psd
from .testfns import TestFamily


@dataclass
class DecompositionProblem:
    """Samples of ``S`` on finitely many nodes plus a finite test family."""

    nodes: np.ndarray
    samples: np.ndarray
    family: TestFamily
    multiplicity: int | None = None
    tol: float = 1e-7
    max_iter: int = 50_000

    def __post_init__(self):
        z = np.asarray(self.nodes, dtype=complex)
        if z.ndim == 0:
            z = z[None]
        S = np.asarray(self.samples, dtype=complex)
        if S.ndim == 1:
            S = S[:, None, None]
        if z.shape[0] < 1:
            raise InvalidInputError("need at least one node")
        if S.ndim != 3 or S.shape[0] != z.shape[0] or S.shape[1] != S.shape[2]:
            raise InvalidInputError(f"samples shape {S.shape} does not fit {z.shape[0]} nodes")
        if len(self.family) < 1:
            raise InvalidInputError("test family is empty")
        if self.multiplicity is not None and self.multiplicity < 1:
            raise InvalidInputError("multiplicity must be >= 1")
        if not isinstance(self.family, TestFamily):
            self.family = TestFamily(self.family)
        self.nodes = z
        self.samples = S
        self.family.check_axiom(z)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def N(self) -> int:
        return self.samples.shape[1]

    def sizes(self) -> list[int]:
        return [psi.size for psi in self.family]

    def deltas(self) -> list[np.ndarray]:
        """``Delta_m[i, j] = I - psi_m(z_i) psi_m(z_j)*`` with shape ``(n, n, P, P)``."""
        out = []
        for psi in self.family:
            V = np.array([psi(z) for z in self.nodes])
            out.append(np.eye(V.shape[1])[None, None] - np.einsum("ipr,jqr->ijpq", V, V.conj()))
        return out


@dataclass
class AglerDecomposition:
    """PSD Gram variables ``W[m]`` plus the extracted factors ``H[m][i]`` (``N x r_m P_m``)."""

    W: list
    factors: list
    multiplicities: list
    residual: float
    iterations: int = 0
    method: str = "dykstra"


@dataclass
class SeparationEvidence:
    """A functional ``Lambda`` nonnegative on the decomposition cone and negative on the target.

    ``Lambda(X) = Re sum_{i,j} tr(coefficients[i, j]* X_ij)``. ``margin`` is
    ``-Lambda(target)``; ``generator_min`` is the smallest value seen on
    sampled rank-one cone generators and ``dual_min_eig`` the exact minimum
    over the cone (up to rounding).
    """

    coefficients: np.ndarray
    margin: float
    generator_min: float
    dual_min_eig: float
    gap: float
    iterations: int = 0
    trace: list = field(default_factory=list)

    def evaluate(self, X: np.ndarray) -> float:
        return float(np.real(np.vdot(self.coefficients, X)))


# -- linear map ---------------------------------------------------------------

def _target4(problem: DecompositionProblem) -> np.ndarray:
    S, n, N = problem.samples, problem.n, problem.N
    eye = np.eye(N)[None, :, None, :] * np.ones((n, 1, n, 1))
    return eye - np.einsum("iab,jcb->iajc", S, S.conj())


def target_kernel(problem: DecompositionProblem) -> np.ndarray:
    """Block matrix with ``(i, j)`` block ``I - S(z_i) S(z_j)*``."""
    n, N = problem.n, problem.N
    T = _target4(problem).reshape(n * N, n * N)
    return (T + T.conj().T) / 2


def _apply(W, deltas, n, N) -> np.ndarray:
    out = np.zeros((n, N, n, N), dtype=complex)
    for w, D in zip(W, deltas):
        P = D.shape[2]
        out += np.einsum("iapjbq,ijpq->iajb", w.reshape(n, N, P, n, N, P), D)
    return out


def _adjoint(R, deltas, n, N) -> list:
    out = []
    for D in deltas:
        P = D.shape[2]
        out.append(np.einsum("iajb,ijpq->iapjbq", R, D.conj()).reshape(n * N * P, n * N * P))
    return out


def reconstruct(W, problem: DecompositionProblem) -> np.ndarray:
    """``L(W)`` as an ``(n, N, n, N)`` array."""
    return _apply(W, problem.deltas(), problem.n, problem.N)


def verify_decomposition(decomposition: AglerDecomposition, problem: DecompositionProblem,
                         psd_tol: float = DEFAULT_TOL) -> float:
    """Max-entry reconstruction error of the target; raises if some ``W_m`` is not PSD."""
    W = decomposition.W
    sizes = problem.sizes()
    if len(W) != len(sizes):
        raise InvalidInputError(f"{len(W)} Gram blocks for {len(sizes)} test functions")
    for w, P in zip(W, sizes):
        if np.shape(w) != (problem.n * problem.N * P,) * 2:
            raise InvalidInputError(f"Gram block has shape {np.shape(w)}")
        w = np.asarray(w)
        if w.size and np.linalg.eigvalsh((w + w.conj().T) / 2)[0] < -psd_tol:
            raise InconsistentDecompositionError("a Gram block is not PSD")
    return float(np.max(np.abs(reconstruct(W, problem) - _target4(problem))))


def factor_reconstruction(decomposition: AglerDecomposition, problem: DecompositionProblem) -> np.ndarray:
    """``sum_m H_m(z_i) (I_r kron Delta_m[i,j]) H_m(z_j)*`` as an ``(n, N, n, N)`` array."""
    n, N = problem.n, problem.N
    out = np.zeros((n, N, n, N), dtype=complex)
    for H, r, D in zip(decomposition.factors, decomposition.multiplicities, problem.deltas()):
        if r == 0:
            continue
        P = D.shape[2]
        Hr = np.asarray(H).reshape(n, N, r, P)
        out += np.einsum("iakp,ijpq,jbkq->iajb", Hr, D, Hr.conj())
    return out


# -- factor extraction ----------------------------------------------------------

def extract_factors(W, problem: DecompositionProblem, tol: float = DEFAULT_TOL):
    """Kolmogorov factors ``H_m(z_i)`` of each Gram block, copy-major columns."""
    n, N = problem.n, problem.N
    factors, mults = [], []
    for w, P in zip(W, problem.sizes()):
        parts = kolmogorov_factor(w, tol=tol, block_dim=N * P)
        r = parts[0].shape[1]
        if problem.multiplicity is not None and r < problem.multiplicity:
            parts = [np.hstack([f, np.zeros((N * P, problem.multiplicity - r))]) for f in parts]
            r = problem.multiplicity
        H = np.array([f.reshape(N, P, r).transpose(0, 2, 1).reshape(N, r * P) for f in parts])
        factors.append(H)
        mults.append(r)
    return factors, mults


# -- factored refinement --------------------------------------------------------

def _refine(W0, deltas, T, n, N, max_nfev: int = 200):
    """Gauss-Newton on ``W_m = G_m G_m*`` warm-started from ``W0``.

    Works on faces without interior points, where alternating projections
    converge sublinearly. Returns the new Gram blocks and their residual.
    """
    Gs0 = []
    for w in W0:
        evals, evecs = np.linalg.eigh((w + w.conj().T) / 2)
        Gs0.append(evecs * np.sqrt(np.clip(evals, 0, None)))
    dims = [g.shape[0] for g in Gs0]
    Ps = [D.shape[2] for D in deltas]

    def unpack(v):
        out, k = [], 0
        for s in dims:
            out.append(v[k:k + s * s].reshape(s, s) + 1j * v[k + s * s:k + 2 * s * s].reshape(s, s))
            k += 2 * s * s
        return out

    def fun(v):
        Gs = unpack(v)
        R = _apply([g @ g.conj().T for g in Gs], deltas, n, N) - T
        return np.concatenate([R.real.ravel(), R.imag.ravel()])

    eye_n, eye_N = np.eye(n), np.eye(N)

    def jac(v):
        blocks = []
        for G, D, P in zip(unpack(v), deltas, Ps):
            rho = G.shape[1]
            G4 = G.reshape(n, N, P, rho)
            A1 = np.einsum("jbql,kjpq->kpljb", G4.conj(), D)
            A2 = np.einsum("iapl,ikpq->iakql", G4, D)
            T1 = np.einsum("ik,ac,kpljb->iajbkcpl", eye_n, eye_N, A1)
            T2 = np.einsum("jk,bc,iakpl->iajbkcpl", eye_n, eye_N, A2)
            rows = (n * N) ** 2
            T1 = T1.reshape(rows, -1)
            T2 = T2.reshape(rows, -1)
            Jre, Jim = T1 + T2, 1j * (T1 - T2)
            blocks.append(np.vstack([np.hstack([Jre.real, Jim.real]),
                                     np.hstack([Jre.imag, Jim.imag])]))
        return np.hstack(blocks)

    v0 = np.concatenate([np.concatenate([g.real.ravel(), g.imag.ravel()]) for g in Gs0])
    sol = least_squares(fun, v0, jac=jac, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        max_nfev=max_nfev)
    W = [g @ g.conj().T for g in unpack(sol.x)]
    W = [(w + w.conj().T) / 2 for w in W]
    return W, float(np.max(np.abs(_apply(W, deltas, n, N) - T)))


# -- separation -------------------------------------------------------------------

def _separation(x, deltas, T, n, N, iterations, trace, rng, generators: int = 1000,
                gen_tol: float = 1e-8, polish_steps: int = 200) -> SeparationEvidence | None:
    den = sum(np.sum(np.abs(D) ** 2, axis=(2, 3)) for D in deltas)[:, None, :, None]

    def proj_aff(W):
        R = (_apply(W, deltas, n, N) - T) / den
        return [w - a for w, a in zip(W, _adjoint(R, deltas, n, N))]

    for _ in range(polish_steps):
        x = [nearest_psd(w) for w in proj_aff(x)]
    # y = P_aff(x) = x - L*(mu); mu is the separating functional up to scale
    mu = (_apply(x, deltas, n, N) - T) / den
    gap = float(np.sqrt(sum(np.sum(np.abs(a) ** 2) for a in _adjoint(mu, deltas, n, N))))
    lam = mu / np.linalg.norm(mu)

    def dual_min(L):
        return min(float(np.linalg.eigvalsh((a + a.conj().T) / 2)[0]) for a in _adjoint(L, deltas, n, N))

    # push into the dual cone with Lambda_0 = blockdiag(I): L*(Lambda_0) is positive definite
    lam0 = np.eye(n)[:, None, :, None] * np.eye(N)[None, :, None, :]
    floor0 = dual_min(lam0)
    dmin = dual_min(lam)
    if dmin < 0:
        lam = lam + (-dmin / floor0) * (1 + 1e-6) * lam0
        lam = lam / np.linalg.norm(lam)
    dmin = dual_min(lam)
    margin = -float(np.real(np.vdot(lam, T)))

    gen_min = np.inf
    sizes = [w.shape[0] for w in x]
    for k in range(generators):
        m = k % len(deltas)
        h = rng.standard_normal(sizes[m]) + 1j * rng.standard_normal(sizes[m])
        h /= np.linalg.norm(h)
        W = [np.zeros((s, s), dtype=complex) for s in sizes]
        W[m] = np.outer(h, h.conj())
        gen_min = min(gen_min, float(np.real(np.vdot(lam, _apply(W, deltas, n, N)))))
    if margin <= 0 or gen_min < -gen_tol:
        return None
    return SeparationEvidence(lam, margin, gen_min, dmin, gap, iterations, trace)


# -- solver -----------------------------------------------------------------------

def solve_decomposition(problem: DecompositionProblem, max_iter: int | None = None,
                        tol: float | None = None, check_every: int = 500,
                        plateau_rtol: float = 1e-12, seed=0):
    """Find an Agler decomposition of the samples over the test family.

    Dykstra's alternating projections between the PSD cone and the affine
    set ``{L(W) = T}`` run from ``W_m = I``. Every ``check_every`` iterations
    the iterate is handed to a factored Gauss-Newton refinement; the first
    refinement (or Dykstra iterate) with residual ``<= tol`` is returned as an
    :class:`AglerDecomposition`. If the residual stalls (relative
    improvement below ``plateau_rtol`` over ``check_every`` iterations) a
    separating functional is built from the final affine residual and
    returned as :class:`SeparationEvidence` once it survives validation.

    Raises :class:`UndecidedError` when neither happens within ``max_iter``
    iterations.
    """
    max_iter = problem.max_iter if max_iter is None else max_iter
    tol = problem.tol if tol is None else tol
    n, N = problem.n, problem.N
    deltas = problem.deltas()
    T = _target4(problem)
    den = sum(np.sum(np.abs(D) ** 2, axis=(2, 3)) for D in deltas)[:, None, :, None]
    rng = np.random.default_rng(seed)

    def proj_aff(W):
        R = (_apply(W, deltas, n, N) - T) / den
        return [w - a for w, a in zip(W, _adjoint(R, deltas, n, N))]

    def residual(W):
        return float(np.max(np.abs(_apply(W, deltas, n, N) - T)))

    def finish(W, it, method):
        factors, mults = extract_factors(W, problem)
        return AglerDecomposition(W, factors, mults, residual(W), it, method)

    sizes = [n * N * P for P in problem.sizes()]
    x = [np.eye(s, dtype=complex) for s in sizes]
    p = [np.zeros_like(a) for a in x]
    q = [np.zeros_like(a) for a in x]
    trace = []
    it = 0
    res = residual(x)
    while it < max_iter:
        y = proj_aff([a + b for a, b in zip(x, p)])
        p = [a + b - c for a, b, c in zip(x, p, y)]
        x_new = [nearest_psd(a + b) for a, b in zip(y, q)]
        q = [a + b - c for a, b, c in zip(y, q, x_new)]
        x = x_new
        it += 1
        res = residual(x)
        trace.append(res)
        if res <= tol:
            W, r2 = _refine(x, deltas, T, n, N, max_nfev=50)
            if r2 < res:
                return finish(W, it, "dykstra+factored")
            return finish(x, it, "dykstra")
        if it % check_every == 0:
            W, r2 = _refine(x, deltas, T, n, N)
            if r2 <= tol:
                return finish(W, it, "dykstra+factored")
            if it >= 2 * check_every and res > trace[it - check_every - 1] * (1 - plateau_rtol):
                ev = _separation(x, deltas, T, n, N, it, trace, rng)
                if ev is not None:
                    return ev
                raise UndecidedError("residual plateaued but separation failed validation", trace)
    raise UndecidedError(f"no decision after {it} iterations (residual {res:.3e})", trace)
