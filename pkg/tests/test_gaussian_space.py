import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from reflou import ContractViolation, GaussianSpace, TestFunction, apply_covariance, h_inner, hat_functional, sample_gamma
from reflou import rng as rngmod


@pytest.mark.parametrize(
    "lam, u, v, expected",
    [([1, 1], (1, 0), (1, 0), 1.0), ([4], (2,), (2,), 1.0), ([2], (3,), (6,), 9.0)],
)
def test_h_inner_examples(lam, u, v, expected):
    assert h_inner(GaussianSpace(lam), np.array(u, float), np.array(v, float)) == pytest.approx(expected, abs=1e-15)


def test_h_inner_dimension_mismatch():
    with pytest.raises(ContractViolation):
        h_inner(GaussianSpace([1.0, 1.0]), np.ones(3), np.ones(3))


def test_spectrum_validation():
    with pytest.raises(ContractViolation):
        GaussianSpace([1.0, 0.0])
    with pytest.raises(ContractViolation):
        GaussianSpace([0.5, 1.0])
    s = GaussianSpace.power_law(2.0, 2.0, 3)
    assert s.lambdas == pytest.approx((2.0, 0.5, 2.0 / 9))


spectra = st.lists(st.floats(0.01, 100.0), min_size=1, max_size=6).map(lambda l: GaussianSpace(sorted(l, reverse=True)))


@given(spectra, st.data())
@settings(max_examples=60, deadline=None)
def test_h_inner_is_symmetric_positive(space, data):
    coord = st.one_of(st.just(0.0), st.floats(1e-6, 10), st.floats(-10, -1e-6))
    vec = st.lists(coord, min_size=space.dim, max_size=space.dim).map(np.array)
    u, v = data.draw(vec), data.draw(vec)
    assert h_inner(space, u, v) == pytest.approx(h_inner(space, v, u), rel=1e-14, abs=1e-300)
    assert h_inner(space, u, u) >= 0
    if np.any(u != 0):
        assert h_inner(space, u, u) > 0
    assert h_inner(space, np.zeros(space.dim), np.zeros(space.dim)) == 0


@given(spectra)
@settings(max_examples=40, deadline=None)
def test_basis_is_h_orthonormal(space):
    for j in range(1, space.dim + 1):
        for k in range(1, space.dim + 1):
            assert abs(h_inner(space, space.basis(j), space.basis(k)) - (j == k)) <= 1e-14


@given(spectra, st.data())
@settings(max_examples=40, deadline=None)
def test_covariance_reproduces_euclidean_pairing(space, data):
    vec = st.lists(st.floats(-10, 10), min_size=space.dim, max_size=space.dim).map(np.array)
    l, m = data.draw(vec), data.draw(vec)
    lhs = h_inner(space, apply_covariance(space, l), apply_covariance(space, m))
    rhs = np.sum(space.lam * l * m)
    scale = np.sum(space.lam * np.abs(l * m)) + 1e-300
    assert abs(lhs - rhs) <= 1e-12 * scale


def test_apply_covariance_examples():
    assert np.array_equal(apply_covariance(GaussianSpace([1.0, 1.0, 1.0]), np.array([1.0, -2, 3])), [1.0, -2, 3])
    assert apply_covariance(GaussianSpace([4.0]), np.array([1.0]))[0] == 4.0
    s = GaussianSpace([2.0])
    ql = apply_covariance(s, np.array([3.0]))
    assert h_inner(s, ql, ql) == pytest.approx(18.0)
    assert h_inner(s, ql, ql) == pytest.approx(3.0 * 6.0)


def test_hat_functional_examples():
    assert hat_functional(GaussianSpace([0.25]), 1, np.array([1.0])) == pytest.approx(2.0)
    assert hat_functional(GaussianSpace([3.0, 2.0]), 2, np.zeros(2)) == 0.0
    assert hat_functional(GaussianSpace([4.0, 4.0]), 2, np.array([0.0, -2.0])) == pytest.approx(-1.0)
    with pytest.raises(ContractViolation):
        hat_functional(GaussianSpace([1.0]), 2, np.zeros(1))


def test_sampling_is_deterministic():
    s = GaussianSpace([1.0, 0.5])
    a = sample_gamma(s, rngmod.stream(5, rngmod.AUX))
    b = sample_gamma(s, rngmod.stream(5, rngmod.AUX))
    assert np.array_equal(a, b)


def test_sampling_moments():
    n = 10**6
    s = GaussianSpace([1.0, 0.5])
    x = sample_gamma(s, rngmod.stream(11, rngmod.AUX), n)
    var = x.var(axis=0)
    for k in range(2):
        assert abs(var[k] - s.lam[k]) <= 4 * np.sqrt(2 / n) * s.lam[k]
    cov = np.mean(x[:, 0] * x[:, 1]) - x[:, 0].mean() * x[:, 1].mean()
    assert abs(cov) <= 4 * np.sqrt(s.lam[0] * s.lam[1] / n)


def test_hat_functionals_are_standard_normal():
    n = 10**5
    s = GaussianSpace([3.0, 1.0, 0.1])
    x = sample_gamma(s, rngmod.stream(2, rngmod.AUX), n)
    for k in range(1, 4):
        d = stats.kstest(hat_functional(s, k, x), stats.norm.cdf).statistic
        assert d < 1.63 * 2 / np.sqrt(n)


@pytest.mark.parametrize(
    "phi",
    [
        TestFunction.coordinate(2),
        TestFunction.gaussian_bump(1.3),
        TestFunction.cosine([0.3, -0.8, 1.1]),
        TestFunction.coordinate(1) * TestFunction.cosine([0.3, 0.1, 0.2]) + 2.0,
        TestFunction.gaussian_bump(0.9) * TestFunction.gaussian_bump(2.0),
    ],
    ids=lambda f: f.name,
)
def test_test_function_gradients_match_finite_differences(phi, rng):
    assert phi.check_gradient(rng.normal(size=(50, 3)))


def test_derivatives_along_basis():
    s = GaussianSpace([4.0, 1.0])
    phi = TestFunction.coordinate(1)
    x = np.array([0.3, 0.2])
    assert np.allclose(phi.d_h(s, x), [4.0, 0.0])
    assert phi.d_k(s, 1, x) == pytest.approx(h_inner(s, phi.d_h(s, x), s.basis(1)))
