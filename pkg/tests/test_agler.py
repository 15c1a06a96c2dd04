import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aglerkit.agler import (
    AglerDecomposition,
    DecompositionProblem,
    SeparationEvidence,
    reconstruct,
    solve_decomposition,
    target_kernel,
    verify_decomposition,
)
from aglerkit.errors import InconsistentDecompositionError, InvalidInputError, UndecidedError
from aglerkit.testfns import TestFamily, antipodal_measure

GRID = np.array([[a, b] for a in (0, 0.5) for b in (0, 0.5j)])


def bidisk_problem():
    S = np.array([[[a * b]] for a, b in GRID])
    return DecompositionProblem(GRID, S, TestFamily.polydisk(2))


def z_squared_problem():
    z = np.array([0, 0.5, 0.5j])
    return DecompositionProblem(z, z**2, TestFamily.disk())


def z_vs_antipodal_problem():
    z = np.array([0, 0.5])
    return DecompositionProblem(z, z, TestFamily.constrained([antipodal_measure(1)]))


# target kernel

def test_target_zero_function():
    prob = DecompositionProblem([0, 0.5], np.zeros(2), TestFamily.disk())
    assert np.allclose(target_kernel(prob), np.ones((2, 2)))


def test_target_coordinate():
    prob = DecompositionProblem([0, 0.5], [0, 0.5], TestFamily.disk())
    assert np.allclose(target_kernel(prob), [[1, 1], [1, 0.75]])


def test_target_constant_unitary():
    U = np.linalg.qr(np.array([[1, 2j], [3, 4]]))[0]
    prob = DecompositionProblem([0, 0.5], np.array([U, U]), TestFamily.disk())
    assert np.max(np.abs(target_kernel(prob))) < 1e-15


def test_problem_validation():
    with pytest.raises(InvalidInputError):
        DecompositionProblem([0, 0.5], [0], TestFamily.disk())
    with pytest.raises(InvalidInputError):
        DecompositionProblem([0], [0], TestFamily())
    with pytest.raises(InvalidInputError):
        DecompositionProblem([0], [0], TestFamily.disk(), multiplicity=0)


# verification

def ando_decomposition(prob):
    # 1 - z1 z2 conj(w1 w2) = (1 - z1 conj(w1)) + z1 conj(w1) (1 - z2 conj(w2))
    z1 = GRID[:, 0]
    W1 = np.ones((4, 4), dtype=complex)
    W2 = np.outer(z1, z1.conj())
    return AglerDecomposition([W1, W2], [], [], 0.0)


def test_hand_built_decomposition_verifies():
    prob = bidisk_problem()
    assert verify_decomposition(ando_decomposition(prob), prob) <= 1e-12


def test_zero_decomposition_misses_identity_target():
    prob = DecompositionProblem([0, 0.5], np.zeros(2), TestFamily.disk())
    dec = AglerDecomposition([np.zeros((2, 2))], [], [], 0.0)
    assert verify_decomposition(dec, prob) == pytest.approx(1.0)


def test_perturbation_shows_in_residual():
    prob = bidisk_problem()
    dec = ando_decomposition(prob)
    dec.W[0] = dec.W[0].copy()
    dec.W[0][0, 0] += 1e-6
    assert 1e-7 <= verify_decomposition(dec, prob) <= 1e-5


def test_verify_rejects_indefinite_gram():
    prob = bidisk_problem()
    dec = ando_decomposition(prob)
    dec.W[1] = -np.eye(4)
    with pytest.raises(InconsistentDecompositionError):
        verify_decomposition(dec, prob)


def test_verify_rejects_wrong_shapes():
    prob = bidisk_problem()
    with pytest.raises(InvalidInputError):
        verify_decomposition(AglerDecomposition([np.eye(4)], [], [], 0.0), prob)
    with pytest.raises(InvalidInputError):
        verify_decomposition(AglerDecomposition([np.eye(3), np.eye(4)], [], [], 0.0), prob)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reconstruction_is_linear(seed):
    rng = np.random.default_rng(seed)
    prob = bidisk_problem()

    def rand_w():
        F = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        return F @ F.conj().T

    A = [rand_w(), rand_w()]
    B = [rand_w(), rand_w()]
    mid = reconstruct([(a + b) / 2 for a, b in zip(A, B)], prob)
    assert np.allclose(mid, (reconstruct(A, prob) + reconstruct(B, prob)) / 2, atol=1e-12)


# solver

def test_bidisk_product_decomposes():
    prob = bidisk_problem()
    dec = solve_decomposition(prob)
    assert isinstance(dec, AglerDecomposition)
    assert dec.residual <= 1e-7
    assert verify_decomposition(dec, prob) <= 1e-7
    for W in dec.W:
        assert np.linalg.eigvalsh(W)[0] >= -1e-9


def test_forced_scalar_decomposition():
    prob = z_squared_problem()
    dec = solve_decomposition(prob)
    z = prob.nodes
    assert np.max(np.abs(dec.W[0] - (1 + np.outer(z, z.conj())))) <= 1e-6
    assert dec.multiplicities == [2]


def test_coordinate_fails_for_antipodal_family():
    prob = z_vs_antipodal_problem()
    ev = solve_decomposition(prob)
    assert isinstance(ev, SeparationEvidence)
    assert ev.margin > 0
    T = target_kernel(prob).reshape(2, 1, 2, 1)
    assert ev.evaluate(T) == pytest.approx(-ev.margin)
    # independent generator sample: rank-one Gram variables
    rng = np.random.default_rng(11)
    for _ in range(1000):
        h = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        gen = reconstruct([np.outer(h, h.conj())], prob)
        assert ev.evaluate(gen) >= -1e-8 * np.linalg.norm(h) ** 2


def test_one_iteration_is_undecided():
    with pytest.raises(UndecidedError) as exc:
        solve_decomposition(bidisk_problem(), max_iter=1)
    assert len(exc.value.trace) == 1


def test_matrix_valued_decomposition():
    rng = np.random.default_rng(1)
    z = np.array([0, 0.5, -0.3j, 0.2 + 0.2j])
    U = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))[0]
    prob = DecompositionProblem(z, (z**2)[:, None, None] * U[None],
                                TestFamily.constrained([antipodal_measure(2)]))
    dec = solve_decomposition(prob)
    assert isinstance(dec, AglerDecomposition)
    assert verify_decomposition(dec, prob) <= 1e-7


def test_multiplicity_pads_factors():
    prob = z_squared_problem()
    prob.multiplicity = 3
    dec = solve_decomposition(prob)
    assert dec.multiplicities == [3]
    assert dec.factors[0].shape == (3, 1, 3)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_schur_data_decomposes_over_disk(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    z = 0.8 * np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))
    a = 0.5 * (rng.random() - 0.5)
    s = 0.9 * (z - a) / (1 - a * z)
    prob = DecompositionProblem(z, s, TestFamily.disk())
    dec = solve_decomposition(prob)
    assert isinstance(dec, AglerDecomposition)
    assert verify_decomposition(dec, prob) <= 1e-7
