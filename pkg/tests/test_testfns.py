import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aglerkit.errors import InvalidInputError, SamplingFailure, TestAxiomError
from aglerkit.testfns import (
    BarycentricInfeasible,
    QuantumMeasure,
    TestFamily,
    TestFunction,
    antipodal_measure,
    boundary_unitary,
    cayley_to_schur,
    eval_family,
    herglotz_eval,
    normalize_at_one,
    reduce_to_extreme,
    sample_extreme_measure,
    solve_barycentric,
    weak_independence_check,
)


def probe(rng, k, r=0.95):
    return r * np.sqrt(rng.random(k)) * np.exp(2j * np.pi * rng.random(k))


def sampled_measures(count=12):
    return [sample_extreme_measure(N, seed=s) for N in (1, 2) for s in range(count // 2)]


# barycentric weights

def test_antipodal_weights_are_halves():
    mu = solve_barycentric([1, -1])
    assert np.allclose(mu.weights[:, 0, 0], [0.5, 0.5], atol=1e-12)


def test_cube_roots_get_equal_weights():
    t = np.exp(2j * np.pi * np.arange(3) / 3)
    mu = solve_barycentric(t)
    assert np.allclose(mu.weights[:, 0, 0], 1 / 3, atol=1e-10)
    mu.validate()


def test_non_antipodal_pair_is_infeasible():
    out = solve_barycentric([1, 1j])
    assert isinstance(out, BarycentricInfeasible)
    assert out.residual > 0.1


@pytest.mark.parametrize("pts", [[1, 1], [1, 0.5], [1]])
def test_barycentric_rejects_bad_points(pts):
    with pytest.raises(InvalidInputError):
        solve_barycentric(pts)


def test_matrix_barycentric_weights_satisfy_invariants():
    t = np.exp(1j * np.array([0.1, 2.0, 4.0, 5.0]))
    mu = solve_barycentric(t, N=2)
    assert isinstance(mu, QuantumMeasure)
    mu.validate()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_barycentric_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    t = np.exp(2j * np.pi * rng.random(3))
    mu = solve_barycentric(t)
    perm = rng.permutation(3)
    nu = solve_barycentric(t[perm])
    if isinstance(mu, QuantumMeasure):
        assert isinstance(nu, QuantumMeasure)
        assert np.allclose(nu.weights[:, 0, 0], mu.weights[perm, 0, 0], atol=1e-8)
    else:
        assert isinstance(nu, BarycentricInfeasible)


# weak independence

def test_antipodal_measure_is_weakly_independent():
    assert weak_independence_check(antipodal_measure(1)) == (True, 0)


def test_four_points_are_dependent():
    t = np.exp(1j * np.pi * np.array([0, 0.5, 1, 1.5]))
    flag, nullity = weak_independence_check(QuantumMeasure(t, np.full(4, 0.25)))
    assert not flag and nullity >= 1


def test_zero_weight_behaves_like_submeasure():
    t = np.array([1, -1, 1j])
    mu = QuantumMeasure(t, [0.5, 0.5, 0.0])
    assert weak_independence_check(mu) == weak_independence_check(antipodal_measure(1))


def test_reduction_lands_on_extreme_point():
    t = np.exp(1j * np.pi * np.array([0, 0.5, 1, 1.5]))
    mu = reduce_to_extreme(QuantumMeasure(t, np.full(4, 0.25)), np.random.default_rng(0))
    mu.validate()
    assert weak_independence_check(mu)[0]


# sampling

def test_scalar_sample_is_triangle_or_pair_containing_zero():
    for seed in range(10):
        mu = sample_extreme_measure(1, seed=seed)
        mu.validate()
        assert mu.n in (2, 3)
        if mu.n == 3:
            # 0 strictly inside the triangle: all barycentric weights positive
            assert np.all(mu.weights[:, 0, 0].real > 0)
            ang = np.sort(np.angle(mu.points) % (2 * np.pi))
            gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
            assert gaps.max() < np.pi


def test_sampling_is_reproducible():
    a = sample_extreme_measure(2, seed=7)
    b = sample_extreme_measure(2, seed=7)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.weights, b.weights)


@pytest.mark.parametrize("seed", range(8))
def test_matrix_samples_are_valid_extreme_candidates(seed):
    mu = sample_extreme_measure(2, seed=seed)
    assert mu.extreme_candidate
    mu.validate()
    assert weak_independence_check(mu)[0]


def test_sampler_exhaustion():
    with pytest.raises(SamplingFailure):
        sample_extreme_measure(1, seed=0, max_attempts=0)


# Herglotz and Cayley transforms

def test_herglotz_at_zero_is_identity():
    for mu in sampled_measures(6):
        assert np.allclose(herglotz_eval(mu, 0), np.eye(mu.N), atol=1e-10)


def test_antipodal_herglotz_closed_form():
    mu = antipodal_measure(1)
    for z in probe(np.random.default_rng(0), 10):
        assert herglotz_eval(mu, z)[0, 0] == pytest.approx((1 + z**2) / (1 - z**2))


def test_antipodal_cayley_is_z_squared():
    mu = antipodal_measure(1)
    for z in probe(np.random.default_rng(1), 20):
        assert abs(cayley_to_schur(mu, z)[0, 0] - z**2) <= 1e-10


def test_herglotz_derivative_vanishes_at_zero():
    h = 1e-5
    for mu in sampled_measures(6):
        d = (herglotz_eval(mu, h) - herglotz_eval(mu, -h)) / (2 * h)
        assert np.linalg.norm(d) <= 1e-6


def test_herglotz_real_part_is_psd():
    rng = np.random.default_rng(2)
    for mu in sampled_measures(10):
        for z in probe(rng, 100):
            F = herglotz_eval(mu, z)
            assert np.linalg.eigvalsh((F + F.conj().T) / 2)[0] >= -1e-10


def test_schur_values_contractive_and_vanish_at_zero():
    rng = np.random.default_rng(3)
    for mu in sampled_measures(10):
        assert np.max(np.abs(cayley_to_schur(mu, 0))) <= 1e-12
        for z in probe(rng, 50, 0.999):
            assert np.linalg.norm(cayley_to_schur(mu, z), 2) <= 1 + 1e-10


def test_boundary_normalization():
    mu = antipodal_measure(1)
    assert abs(boundary_unitary(mu)[0, 0] - 1) < 1e-5
    rng = np.random.default_rng(4)
    for nu in sampled_measures(6):
        U = boundary_unitary(nu)
        zs = probe(rng, 5)
        for z in zs:
            for w in zs:
                a = cayley_to_schur(nu, z) @ cayley_to_schur(nu, w).conj().T
                b = normalize_at_one(nu, z) @ normalize_at_one(nu, w).conj().T
                assert np.allclose(a, b, atol=1e-10)
        r = 1 - 1e-6
        S = cayley_to_schur(nu, r)
        assert np.linalg.norm(S @ S.conj().T - np.eye(nu.N)) < 1e-3
        assert np.allclose(U @ U.conj().T, np.eye(nu.N), atol=1e-10)


# test functions and families

def test_family_evaluations():
    assert np.allclose(eval_family(TestFamily.disk(), 0.5), [[[0.5]]])
    vals = eval_family(TestFamily.polydisk(2), [0.5, 1j / 3])
    assert np.allclose(np.ravel(vals), [0.5, 1j / 3])
    fam = TestFamily.constrained([antipodal_measure(1), sample_extreme_measure(1, seed=3)])
    assert any(np.allclose(v, 0.25) for v in eval_family(fam, 0.5))


def test_family_obeys_axiom_inside():
    fam = TestFamily.sampled_constrained(2, 4, seed=1)
    rng = np.random.default_rng(5)
    pts = probe(rng, 100, 0.99)
    fam.check_axiom(pts)
    assert max(np.linalg.norm(v, 2) for z in pts for v in fam.evaluate(z)) < 1


def test_axiom_violation_raised():
    with pytest.raises(TestAxiomError):
        TestFunction.disk().check_axiom([0.2, 1.0])


def test_polydisk_coordinate_bounds():
    with pytest.raises(InvalidInputError):
        TestFunction.coordinate(2, 2)


def test_dedupe_drops_rotated_copies():
    mu = antipodal_measure(1)
    rotated = QuantumMeasure(-mu.points, mu.weights)  # same kernel: (-z)^2 = z^2
    fam = TestFamily.constrained([mu, rotated])
    assert len(fam) == 1


def test_family_serialization_roundtrip():
    fam = TestFamily.sampled_constrained(2, 3, seed=2)
    fam.append(TestFunction.coordinate(1, 2))
    fam.append(TestFunction.tabulated([[0.1], [0.2]], [[[0.3]], [[0.4]]]))
    back = TestFamily.from_list(fam.to_list())
    assert back.to_list() == fam.to_list()
    for f, g in zip(fam[:3], back[:3]):
        assert np.allclose(f(0.3j), g(0.3j))
