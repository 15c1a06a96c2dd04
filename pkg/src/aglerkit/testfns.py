"""Test-function families.

Coordinate functions on the disk and polydisk, plus the extreme family of the
constrained Hardy algebra (bounded holomorphic matrix functions on the disk
with vanishing derivative at 0). Members of the constrained family are
indexed by finitely supported quantum probability measures
``mu = sum_r W_r delta_{t_r}`` on the circle satisfying the two moment
constraints ``sum Re(t_r) W_r = sum Im(t_r) W_r = 0``. Each measure gives a
Herglotz function ``F`` and its Cayley transform ``S = (F + I)^{-1}(F - I)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NormalizationError, SamplingFailure, TestAxiomError
from .linalg import nearest_psd

MEASURE_TOL = 1e-10
MOMENT_TOL = 1e-8


@dataclass(frozen=True)
class QuantumMeasure:
    """Finitely supported positive-matrix measure on the unit circle."""

    points: np.ndarray
    weights: np.ndarray
    constrained: bool = True
    extreme_candidate: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).ravel()
        W = np.asarray(self.weights, dtype=complex)
        if W.ndim == 1:
            W = W[:, None, None]
        if W.ndim != 3 or W.shape[0] != pts.size or W.shape[1] != W.shape[2]:
            raise InvalidInputError(f"weights shape {W.shape} does not match {pts.size} points")
        W = (W + W.conj().transpose(0, 2, 1)) / 2
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", W)

    @property
    def N(self) -> int:
        return self.weights.shape[1]

    @property
    def n(self) -> int:
        return self.points.size

    def mass_residual(self) -> float:
        return float(np.max(np.abs(self.weights.sum(axis=0) - np.eye(self.N))))

    def moment_residual(self) -> float:
        re = np.einsum("r,rab->ab", self.points.real, self.weights)
        im = np.einsum("r,rab->ab", self.points.imag, self.weights)
        return float(max(np.max(np.abs(re)), np.max(np.abs(im))))

    def validate(self) -> None:
        """Raise :class:`InvalidInputError` if a type invariant fails."""
        if np.max(np.abs(np.abs(self.points) - 1.0)) > 1e-12:
            raise InvalidInputError("support points must be unimodular")
        if self.mass_residual() > MEASURE_TOL:
            raise InvalidInputError(f"weights sum to I only within {self.mass_residual():.2e}")
        for W in self.weights:
            if np.linalg.eigvalsh(W)[0] < -MEASURE_TOL:
                raise InvalidInputError("weights must be PSD")
        if self.constrained and self.moment_residual() > MOMENT_TOL:
            raise InvalidInputError(f"moment constraints violated by {self.moment_residual():.2e}")
        if self.extreme_candidate and not 1 <= self.n <= 3 * self.N:
            raise InvalidInputError(f"extreme candidates have 1..3N points, got {self.n}")

    def to_dict(self) -> dict:
        from .serialize import cmat_to_json, complex_to_json

        return {
            "points": [complex_to_json(t) for t in self.points],
            "weights": [cmat_to_json(W) for W in self.weights],
        }

    @classmethod
    def from_dict(cls, data: dict, **flags) -> "QuantumMeasure":
        from .serialize import cmat_from_json, complex_from_json

        pts = [complex_from_json(t) for t in data["points"]]
        W = [cmat_from_json(w) for w in data["weights"]]
        return cls(np.array(pts), np.array(W), **flags)


@dataclass(frozen=True)
class BarycentricInfeasible:
    """Returned by :func:`solve_barycentric` when no weights exist."""

    residual: float
    iterations: int


# -- barycentric weights ----------------------------------------------------

def _moment_matrix(points: np.ndarray) -> np.ndarray:
    return np.vstack([np.ones(points.size), points.real, points.imag])


def _check_points(points) -> np.ndarray:
    t = np.asarray(points, dtype=complex).ravel()
    if t.size < 2:
        raise InvalidInputError("need at least two support points")
    if np.max(np.abs(np.abs(t) - 1.0)) > 1e-12:
        raise InvalidInputError("support points must lie on the unit circle")
    d = np.abs(t[:, None] - t[None, :]) + np.eye(t.size)
    if d.min() < 1e-12:
        raise InvalidInputError("support points must be distinct")
    return t


def solve_barycentric(points, N: int = 1, max_iter: int = 20_000, tol: float = 1e-9,
                      plateau_window: int = 500, plateau_rtol: float = 1e-12):
    """Matrix barycentric coordinates of 0 with respect to ``points``.

    Finds PSD ``W_r`` with ``sum W_r = I_N`` and
    ``sum Re(t_r) W_r = sum Im(t_r) W_r = 0`` by Dykstra's alternating
    projections between the product PSD cone and the affine constraint set,
    started from ``W_r = I/n``.

    Returns a :class:`QuantumMeasure` on success and
    :class:`BarycentricInfeasible` (carrying the final residual) when the
    constraint set is empty or the residual stalls above ``tol``.
    """
    t = _check_points(points)
    if N < 1:
        raise InvalidInputError("N must be positive")
    n = t.size
    A = _moment_matrix(t)
    A_pinv = np.linalg.pinv(A, rcond=1e-12)
    rhs = np.array([1.0, 0.0, 0.0])
    # The affine set is empty when A w = e_1 has no solution at all.
    inconsistency = float(np.max(np.abs(A @ (A_pinv @ rhs) - rhs)))
    if inconsistency > tol:
        return BarycentricInfeasible(inconsistency, 0)

    B = np.zeros((3, N, N), dtype=complex)
    B[0] = np.eye(N)

    def residual(W):
        return float(np.max(np.abs(np.einsum("cr,rab->cab", A, W) - B)))

    def proj_affine(W):
        R = np.einsum("cr,rab->cab", A, W) - B
        return W - np.einsum("rc,cab->rab", A_pinv, R)

    def proj_psd(W):
        return np.array([nearest_psd(w) for w in W])

    x = np.repeat(np.eye(N, dtype=complex)[None] / n, n, axis=0)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    history = []
    res = residual(x)
    it = 0
    while res > tol and it < max_iter:
        y = proj_affine(x + p)
        p = x + p - y
        x_new = proj_psd(y + q)
        q = y + q - x_new
        x = x_new
        it += 1
        res = residual(x)
        history.append(res)
        if it >= plateau_window and res > history[it - plateau_window - 1] * (1 - plateau_rtol):
            break
    if res > tol:
        return BarycentricInfeasible(res, it)
    return QuantumMeasure(t, _face_polish(t, x, B), constrained=True)


def _face_polish(t: np.ndarray, W: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Remove the last ~tol of constraint error without leaving the face of ``W``.

    The correction is the least-norm Hermitian update supported on the
    current ranges, so zero eigenvalues stay exactly zero and the positive
    ones move by O(residual).
    """
    scale = max(1.0, float(np.max(np.abs(W))))
    M, index = _independence_system(t, W, 1e-7 * scale)
    if M.shape[1] == 0:
        return W
    R = np.einsum("cr,rab->cab", _moment_matrix(t), W) - B
    theta, *_ = np.linalg.lstsq(M, -np.concatenate([R.real.ravel(), R.imag.ravel()]), rcond=None)
    out = W.copy()
    for coef, (r, E) in zip(theta, index):
        out[r] += coef * E
    out = (out + out.conj().transpose(0, 2, 1)) / 2
    for w in out:
        if np.linalg.eigvalsh(w)[0] < -MEASURE_TOL:
            return W
    return out


# -- weak independence and extreme points -----------------------------------

def _hermitian_basis(k: int) -> list[np.ndarray]:
    basis = []
    for a in range(k):
        E = np.zeros((k, k), dtype=complex)
        E[a, a] = 1
        basis.append(E)
    for a in range(k):
        for b in range(a + 1, k):
            E = np.zeros((k, k), dtype=complex)
            E[a, b] = E[b, a] = 1
            basis.append(E)
            E = np.zeros((k, k), dtype=complex)
            E[a, b], E[b, a] = 1j, -1j
            basis.append(E)
    return basis


def _range_bases(weights: np.ndarray, tol: float) -> list[np.ndarray]:
    bases = []
    for W in weights:
        evals, evecs = np.linalg.eigh(W)
        bases.append(evecs[:, evals > tol])
    return bases


def _independence_system(points: np.ndarray, weights: np.ndarray, tol: float):
    """Real matrix of ``theta -> (sum T_r, sum Re t_r T_r, sum Im t_r T_r)``.

    ``T_r = Q_r H_r(theta) Q_r*`` ranges over Hermitian matrices supported on
    range(W_r). Also returns the per-point column blocks needed to rebuild
    ``T_r`` from a parameter vector.
    """
    A = _moment_matrix(points)
    bases = _range_bases(weights, tol)
    cols, index = [], []
    for r, Q in enumerate(bases):
        for E in _hermitian_basis(Q.shape[1]):
            T = Q @ E @ Q.conj().T
            img = A[:, r][:, None, None] * T[None]
            cols.append(np.concatenate([img.real.ravel(), img.imag.ravel()]))
            index.append((r, T))
    N = weights.shape[1]
    if not cols:
        return np.zeros((6 * N * N, 0)), index
    return np.column_stack(cols), index


def _null_space(M: np.ndarray) -> np.ndarray:
    if M.shape[1] == 0:
        return np.zeros((0, 0))
    _, s, vh = np.linalg.svd(M)
    cutoff = 1e-10 * max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff))
    return vh[rank:].conj().T


def weak_independence_check(mu: QuantumMeasure, tol: float = 1e-9) -> tuple[bool, int]:
    """Constrained weak independence of ``mu``.

    Returns ``(flag, nullity)`` where ``nullity`` is the dimension of the real
    space of Hermitian tuples ``T_r`` with range(T_r) inside range(W_r) and
    ``sum T_r = sum Re(t_r) T_r = sum Im(t_r) T_r = 0``; the flag is
    ``nullity == 0``.
    """
    M, _ = _independence_system(mu.points, mu.weights, tol)
    nullity = _null_space(M).shape[1]
    return nullity == 0, nullity


def reduce_to_extreme(mu: QuantumMeasure, rng=None, tol: float = 1e-9,
                      max_steps: int = 1000) -> QuantumMeasure:
    """Walk from a feasible measure to an extreme point of the same support.

    Each step moves along a null direction of the independence system until
    some weight loses rank; the total rank strictly drops, so at most
    ``n * N`` steps are taken. Points whose weight vanishes are dropped.
    """
    rng = np.random.default_rng(rng)
    W = mu.weights.copy()
    t = mu.points
    for _ in range(max_steps):
        M, index = _independence_system(t, W, tol)
        null = _null_space(M)
        if null.shape[1] == 0:
            break
        theta = null @ rng.standard_normal(null.shape[1])
        T = np.zeros_like(W)
        for coef, (r, E) in zip(theta, index):
            T[r] += coef * E
        step = np.inf
        for r, Q in enumerate(_range_bases(W, tol)):
            if Q.shape[1] == 0:
                continue
            lam = np.linalg.eigvalsh(Q.conj().T @ W[r] @ Q)
            root = Q / np.sqrt(lam)
            h = np.linalg.eigvalsh(root.conj().T @ T[r] @ root)
            if h[0] < 0:
                step = min(step, -1.0 / h[0])
        if not np.isfinite(step):  # pragma: no cover - sum T_r = 0 forbids this
            break
        W = W + step * T
        cleaned = []
        for w in W:
            evals, evecs = np.linalg.eigh((w + w.conj().T) / 2)
            evals = np.where(evals > tol, evals, 0.0)
            cleaned.append((evecs * evals) @ evecs.conj().T)
        W = np.array(cleaned)
    B = np.zeros((3, mu.N, mu.N), dtype=complex)
    B[0] = np.eye(mu.N)
    W = _face_polish(t, W, B)
    keep = np.array([np.linalg.norm(w) > tol for w in W])
    return QuantumMeasure(t[keep], W[keep], constrained=mu.constrained,
                          extreme_candidate=mu.extreme_candidate)


def _hull_contains_origin(t: np.ndarray) -> bool:
    """0 lies in the closed convex hull of unimodular points iff no angular gap exceeds pi."""
    ang = np.sort(np.angle(t) % (2 * np.pi))
    gaps = np.diff(np.concatenate([ang, ang[:1] + 2 * np.pi]))
    return bool(gaps.max() <= np.pi + 1e-12)


def antipodal_measure(N: int = 1) -> QuantumMeasure:
    """``(delta_1 + delta_{-1}) / 2`` tensored with ``I_N``; its Cayley transform is ``z^2 I``."""
    W = np.repeat(np.eye(N, dtype=complex)[None] / 2, 2, axis=0)
    return QuantumMeasure(np.array([1.0, -1.0], dtype=complex), W, extreme_candidate=True)


def sample_extreme_measure(N: int, seed=None, max_attempts: int = 1000,
                           max_iter: int = 20_000) -> QuantumMeasure:
    """Rejection-sample an extreme constrained quantum probability measure.

    Draws ``3 <= n <= 3N`` uniform points on the circle, solves for barycentric
    weights, reduces the solution to an extreme point, and accepts it once
    :func:`weak_independence_check` passes.
    """
    if N < 1:
        raise InvalidInputError("N must be positive")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        n = int(rng.integers(3, 3 * N + 1))
        t = np.exp(2j * np.pi * rng.random(n))
        if not _hull_contains_origin(t):
            continue
        try:
            res = solve_barycentric(t, N, max_iter=max_iter)
        except InvalidInputError:
            continue
        if not isinstance(res, QuantumMeasure):
            continue
        mu = reduce_to_extreme(res, rng)
        if not weak_independence_check(mu)[0]:
            continue
        mu = QuantumMeasure(mu.points, mu.weights, constrained=True, extreme_candidate=True)
        mu.validate()
        return mu
    raise SamplingFailure(f"no extreme measure found in {max_attempts} attempts")


# -- evaluation ---------------------------------------------------------------

def herglotz_eval(mu: QuantumMeasure, z) -> np.ndarray:
    """``F(z) = sum_r (t_r + z)/(t_r - z) W_r`` for ``|z| < 1``."""
    z = complex(z)
    if abs(z) >= 1:
        raise InvalidInputError("herglotz_eval needs |z| < 1")
    coef = (mu.points + z) / (mu.points - z)
    return np.einsum("r,rab->ab", coef, mu.weights)


def cayley_to_schur(mu: QuantumMeasure, z) -> np.ndarray:
    """``S(z) = (F(z) + I)^{-1} (F(z) - I)``."""
    F = herglotz_eval(mu, z)
    eye = np.eye(mu.N)
    return np.linalg.solve(F + eye, F - eye)


def boundary_unitary(mu: QuantumMeasure, radius: float = 1 - 1e-6, tol: float = 1e-4) -> np.ndarray:
    """Unitary polar factor of ``S(radius)``, the numerical boundary value at 1."""
    S1 = cayley_to_schur(mu, radius)
    defect = float(np.max(np.abs(S1 @ S1.conj().T - np.eye(mu.N))))
    if defect > tol:
        raise NormalizationError(f"S(1) is not unitary within {tol:g} (defect {defect:.2e})")
    u, _, vh = np.linalg.svd(S1)
    return u @ vh


def normalize_at_one(mu: QuantumMeasure, z, radius: float = 1 - 1e-6) -> np.ndarray:
    """``S(z) S(1)*``: the representative with value ``I`` at the boundary point 1."""
    U = boundary_unitary(mu, radius)
    return cayley_to_schur(mu, z) @ U.conj().T


# -- test functions and families ----------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """A matrix-valued test function on the disk or polydisk.

    ``kind`` is one of ``"disk"``, ``"polydisk"`` (coordinate ``coord`` of
    ``input_dim`` variables), ``"constrained"`` (Cayley transform of
    ``measure``) or ``"tabulated"`` (values only at listed nodes).
    """

    __test__ = False  # not a pytest class

    kind: str
    input_dim: int = 1
    coord: int = 0
    measure: QuantumMeasure | None = None
    table: tuple = field(default=())

    @classmethod
    def disk(cls) -> "TestFunction":
        return cls("disk")

    @classmethod
    def coordinate(cls, k: int, d: int) -> "TestFunction":
        if not 0 <= k < d:
            raise InvalidInputError(f"coordinate {k} out of range for d={d}")
        return cls("polydisk", input_dim=d, coord=k)

    @classmethod
    def constrained(cls, mu: QuantumMeasure) -> "TestFunction":
        return cls("constrained", measure=mu)

    @classmethod
    def tabulated(cls, nodes, values) -> "TestFunction":
        pts = tuple(tuple(np.atleast_1d(np.asarray(z, dtype=complex))) for z in nodes)
        vals = tuple(np.atleast_2d(np.asarray(v, dtype=complex)) for v in values)
        d = len(pts[0]) if pts else 1
        return cls("tabulated", input_dim=d, table=tuple(zip(pts, vals)))

    @property
    def size(self) -> int:
        if self.kind == "constrained":
            return self.measure.N
        if self.kind == "tabulated":
            return self.table[0][1].shape[0]
        return 1

    @property
    def is_coordinate(self) -> bool:
        return self.kind in ("disk", "polydisk")

    @property
    def coordinate_index(self) -> int:
        return self.coord if self.kind == "polydisk" else 0

    def __call__(self, z) -> np.ndarray:
        zz = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.kind == "disk":
            return np.array([[zz[0]]])
        if self.kind == "polydisk":
            if zz.size != self.input_dim:
                raise InvalidInputError(f"expected a point in C^{self.input_dim}")
            return np.array([[zz[self.coord]]])
        if self.kind == "constrained":
            return cayley_to_schur(self.measure, zz[0])
        if self.kind == "tabulated":
            for pt, val in self.table:
                if len(pt) == zz.size and np.max(np.abs(np.array(pt) - zz)) < 1e-12:
                    return val
            raise InvalidInputError(f"tabulated test function has no value at {z}")
        raise InvalidInputError(f"unknown test function kind {self.kind!r}")

    def check_axiom(self, points) -> None:
        """Raise :class:`TestAxiomError` unless ``||psi(z)|| < 1`` at every point."""
        for z in points:
            nrm = np.linalg.norm(self(z), 2)
            if nrm >= 1.0:
                raise TestAxiomError(f"test function has norm {nrm:.6g} >= 1 at {z}")

    def to_dict(self) -> dict:
        if self.kind == "disk":
            return {"kind": "disk"}
        if self.kind == "polydisk":
            return {"kind": "polydisk", "d": self.input_dim, "coord": self.coord}
        if self.kind == "constrained":
            return {"kind": "constrained", "measure": self.measure.to_dict()}
        from .serialize import cmat_to_json, complex_to_json

        return {"kind": "tabulated",
                "nodes": [[complex_to_json(c) for c in pt] for pt, _ in self.table],
                "values": [cmat_to_json(v) for _, v in self.table]}

    @classmethod
    def from_dict(cls, data: dict) -> "TestFunction":
        kind = data.get("kind")
        if kind == "disk":
            return cls.disk()
        if kind == "polydisk":
            return cls.coordinate(int(data["coord"]), int(data["d"]))
        if kind == "constrained":
            return cls.constrained(QuantumMeasure.from_dict(data["measure"], extreme_candidate=True))
        if kind == "tabulated":
            from .serialize import cmat_from_json, complex_from_json

            nodes = [[complex_from_json(c) for c in pt] for pt in data["nodes"]]
            return cls.tabulated(nodes, [cmat_from_json(v) for v in data["values"]])
        raise InvalidInputError(f"unknown test function kind {kind!r}")


class TestFamily(list):
    """A finite list of test functions; evaluating it gives the discretized ``E(z)``."""

    __test__ = False

    @classmethod
    def disk(cls) -> "TestFamily":
        return cls([TestFunction.disk()])

    @classmethod
    def polydisk(cls, d: int) -> "TestFamily":
        return cls([TestFunction.coordinate(k, d) for k in range(d)])

    @classmethod
    def constrained(cls, measures, dedupe: bool = True) -> "TestFamily":
        fns = [TestFunction.constrained(mu) for mu in measures]
        return cls(dedupe_family(fns) if dedupe else fns)

    @classmethod
    def sampled_constrained(cls, N: int, count: int, seed=0,
                            include_antipodal: bool = True) -> "TestFamily":
        measures = [antipodal_measure(N)] if include_antipodal else []
        k = 0
        while len(measures) < count:
            measures.append(sample_extreme_measure(N, seed=_derived_seed(seed, k)))
            k += 1
        return cls.constrained(measures[:count])

    def evaluate(self, z) -> list[np.ndarray]:
        return [psi(z) for psi in self]

    def check_axiom(self, points) -> None:
        for psi in self:
            psi.check_axiom(points)

    def to_list(self) -> list[dict]:
        return [psi.to_dict() for psi in self]

    @classmethod
    def from_list(cls, items) -> "TestFamily":
        return cls(TestFunction.from_dict(d) for d in items)


def eval_family(family, z) -> list[np.ndarray]:
    """Evaluate every member of ``family`` at ``z``."""
    return [psi(z) for psi in family]


def _derived_seed(seed, k: int) -> int:
    base = 0 if seed is None else int(seed)
    return base * 1_000_003 + k


_PROBE = (0.0, 0.5, -0.5, 0.5j, -0.5j, 0.3 + 0.4j)


def dedupe_family(fns, probe=_PROBE, tol: float = 1e-9) -> list:
    """Drop test functions whose kernels ``I - psi(z) psi(w)*`` match an earlier one on ``probe``."""
    seen, out = [], []
    for psi in fns:
        vals = [psi(z) for z in probe]
        sig = np.array([[v @ w.conj().T for w in vals] for v in vals])
        if any(s.shape == sig.shape and np.max(np.abs(s - sig)) < tol for s in seen):
            continue
        seen.append(sig)
        out.append(psi)
    return out
