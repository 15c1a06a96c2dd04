"""Acceptance gate: one test per criterion, each recorded for the summary table."""
import time

import numpy as np
import pytest

from aglerkit.agler import DecompositionProblem, solve_decomposition, verify_decomposition
from aglerkit.kernels import (
    FiniteKernel,
    InterpolationProblem,
    constrained_np_check,
    form_to_coefficients,
    multiplier_norm_bound,
    sampled_form_minimum,
    trace_form,
)
from aglerkit.realize import (
    lurking_isometry,
    probe_points,
    random_commuting_contractions,
    toshow_residual,
    verify_colligation,
    von_neumann_test,
)
from aglerkit.testfns import (
    TestFamily,
    antipodal_measure,
    cayley_to_schur,
    sample_extreme_measure,
    solve_barycentric,
)

GRID = np.array([[a, b] for a in (0, 0.5) for b in (0, 0.5j)])
Z3 = np.array([0, 0.5, 0.5j])


@pytest.fixture(scope="module")
def bidisk_case():
    prob = DecompositionProblem(GRID, GRID[:, 0] * GRID[:, 1], TestFamily.polydisk(2))
    t0 = time.perf_counter()
    dec = solve_decomposition(prob)
    return prob, dec, time.perf_counter() - t0


@pytest.fixture(scope="module")
def forced_case():
    prob = DecompositionProblem(Z3, Z3**2, TestFamily.disk())
    return prob, solve_decomposition(prob)


def test_criterion_01_antipodal_weights(criterion):
    t0 = time.perf_counter()
    mu = solve_barycentric([1, -1], N=1)
    dt = time.perf_counter() - t0
    err = float(np.max(np.abs(mu.weights[:, 0, 0] - 0.5)))
    ok = err <= 1e-12 and dt < 1.0
    criterion.record(1, ok, f"weights off (1/2, 1/2) by {err:.1e} (<= 1e-12) in {dt:.3f} s (< 1 s)")
    assert ok


def test_criterion_02_antipodal_is_z_squared(criterion):
    pts = probe_points(1, 20, radius=0.95, seed=2)
    mu = antipodal_measure(1)
    err = max(abs(cayley_to_schur(mu, z)[0, 0] - z**2) for z in pts)
    ok = err <= 1e-10
    criterion.record(2, ok, f"max |S(z) - z^2| over 20 points = {err:.1e} (<= 1e-10)")
    assert ok


def test_criterion_03_constrained_pick(criterion):
    t0 = time.perf_counter()
    bad = constrained_np_check(InterpolationProblem([0, 0.5], [0, 0.5], "constrained-H1"), 1000)
    good = constrained_np_check(InterpolationProblem([0, 0.5], [0, 0.25], "constrained-H1"), 1000)
    dt = time.perf_counter() - t0
    P = bad.witness["pick_matrix"] if bad.witness else np.zeros((2, 2))
    det_err = abs(np.linalg.det(P) + 7 / 64)
    mat_err = float(np.max(np.abs(P - [[0.5, 0.75], [0.75, 29 / 32]])))
    ok = (bad.verdict == "infeasible" and det_err <= 1e-12 and mat_err <= 1e-12
          and good.verdict == "feasible" and good.samples_used >= 1000
          and good.min_eig_seen >= -1e-9 and dt < 10)
    criterion.record(3, ok, f"witness det err {det_err:.1e}; feasible side {good.samples_used} samples, "
                            f"min eig {good.min_eig_seen:.1e}; {dt:.2f} s (< 10 s)")
    assert ok


def test_criterion_04_bidisk_decomposition(criterion, bidisk_case):
    prob, dec, dt = bidisk_case
    res = verify_decomposition(dec, prob)
    eig = min(float(np.linalg.eigvalsh(W)[0]) for W in dec.W)
    ok = res <= 1e-7 and eig >= -1e-9 and dt < 60
    criterion.record(4, ok, f"residual {res:.1e} (<= 1e-7), min eig {eig:.1e} (>= -1e-9), {dt:.2f} s")
    assert ok


def test_criterion_05_forced_kernel(criterion, forced_case):
    _, dec = forced_case
    err = float(np.max(np.abs(dec.W[0] - (1 + np.outer(Z3, Z3.conj())))))
    ok = err <= 1e-6
    criterion.record(5, ok, f"recovered kernel off 1 + z conj(w) by {err:.1e} (<= 1e-6)")
    assert ok


def test_criterion_06_realization_round_trip(criterion, bidisk_case, forced_case):
    worst_def, worst_node, worst_id = 0.0, 0.0, 0.0
    for prob, dec in (bidisk_case[:2], forced_case):
        col = lurking_isometry(dec, prob)
        rep = verify_colligation(col, prob)
        worst_def = max(worst_def, rep.unitarity_defect)
        worst_node = max(worst_node, rep.max_error)
        pts = probe_points(col.input_dim, 100, seed=6)
        worst_id = max(worst_id, max(toshow_residual(col, pts[k], pts[k + 50]) for k in range(50)))
    ok = worst_def <= 1e-10 and worst_node <= 1e-6 and worst_id <= 1e-8
    criterion.record(6, ok, f"unitarity defect {worst_def:.1e}, node error {worst_node:.1e}, "
                            f"identity gap {worst_id:.1e} on 50 pairs")
    assert ok


def test_criterion_07_von_neumann(criterion, bidisk_case, forced_case):
    rng = np.random.default_rng(70)
    worst = 0.0
    for (prob, dec), d in ((bidisk_case[:2], 2), (forced_case, 1)):
        col = lurking_isometry(dec, prob)
        for _ in range(100):
            T = random_commuting_contractions(d, int(rng.integers(1, 7)), rng)
            worst = max(worst, von_neumann_test(col, T))
    ok = worst <= 1 + 1e-8
    criterion.record(7, ok, f"max ||S(T)|| over 2 x 100 commuting tuples = {worst:.10f} (<= 1 + 1e-8)")
    assert ok


def test_criterion_08_oracle_agreement(criterion):
    rng = np.random.default_rng(80)
    tol = 1e-9
    agree, worst_witness, fails = 0, -np.inf, 0
    for k in range(100):
        n, N, P = int(rng.integers(1, 6)), int(rng.integers(1, 4)), int(rng.integers(1, 4))
        z = 0.9 * np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))
        F = rng.standard_normal((n * N, n * N)) + 1j * rng.standard_normal((n * N, n * N))
        F = F[:, :int(rng.integers(1, n * N + 1))]
        vals = (F @ F.conj().T).reshape(n, N, n, N).transpose(0, 2, 1, 3)
        if k % 2:
            vals = vals / (1 - z[:, None] * z.conj()[None, :])[:, :, None, None]
        K = FiniteKernel(z, vals)
        psi = rng.standard_normal((n, P, P)) + 1j * rng.standard_normal((n, P, P))
        psi *= (0.95 * rng.random() / np.array([np.linalg.norm(p, 2) for p in psi]))[:, None, None]
        rep = multiplier_norm_bound(K, psi, 1.0, tol)
        sampled, _ = sampled_form_minimum(K, psi, 1.0, draws=1000, seed=k)
        if rep.is_psd:
            agree += sampled >= -tol
        else:
            fails += 1
            val = trace_form(K.values, psi, form_to_coefficients(rep.witness, n, P, N))
            worst_witness = max(worst_witness, val)
            agree += val <= -tol / 2
    ok = agree == 100
    criterion.record(8, ok, f"{agree}/100 instances agree ({fails} non-admissible, "
                            f"worst witness value {worst_witness:.1e} <= {-tol / 2:.0e})")
    assert ok


def test_criterion_09_taylor_constraints(criterion):
    h = 1e-5
    worst0, worst1 = 0.0, 0.0
    for k in range(50):
        mu = sample_extreme_measure(1 + k % 2, seed=900 + k)
        worst0 = max(worst0, float(np.linalg.norm(cayley_to_schur(mu, 0), 2)))
        d = (cayley_to_schur(mu, h) - cayley_to_schur(mu, -h)) / (2 * h)
        worst1 = max(worst1, float(np.linalg.norm(d, 2)))
    ok = worst0 <= 1e-10 and worst1 <= 1e-6
    criterion.record(9, ok, f"50 measures: max |S(0)| {worst0:.1e} (<= 1e-10), "
                            f"max |S'(0)| {worst1:.1e} (<= 1e-6)")
    assert ok


def test_criterion_10_determinism(criterion):
    def run():
        mus = [sample_extreme_measure(2, seed=s) for s in range(3)]
        prob = DecompositionProblem(GRID, GRID[:, 0] * GRID[:, 1], TestFamily.polydisk(2))
        dec = solve_decomposition(prob, seed=1)
        chk = constrained_np_check(InterpolationProblem([0, 0.5], [0, 0.5], "constrained-H1"), 500, seed=4)
        return mus, dec, chk

    a, b = run(), run()
    same = (all(np.array_equal(x.weights, y.weights) and np.array_equal(x.points, y.points)
                for x, y in zip(a[0], b[0]))
            and all(np.array_equal(x, y) for x, y in zip(a[1].W, b[1].W))
            and np.array_equal(a[2].witness["pick_matrix"], b[2].witness["pick_matrix"]))
    criterion.record(10, same, "repeated seeded runs are bit-identical"
                     if same else "repeated seeded runs differ")
    assert same
