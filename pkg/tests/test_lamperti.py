import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lampfield.errors import DomainError, ParameterError
from lampfield.fields import FBMSheet, LevyFBM, PolarStationary, covariance_R, gram_matrix, sample_gaussian_field
from lampfield.lamperti import (CocycleSpec, DiagonalGroupElement, HurstMatrix, MssPushforwardKernel,
                                PathOnGrid, PolarPullbackKernel, PolarPushforwardKernel, TimeChange,
                                check_cocycle, check_prop6_conditions, check_wmss_shift_equation,
                                lamperti_forward_1d, lamperti_forward_mss, lamperti_inverse_1d,
                                lamperti_inverse_mss, polar_coordinates, polar_forward_levy,
                                polar_inverse_levy)
from lampfield.statcheck import empirical_covariance, check_stationarity
from lampfield.fields import FieldSample


def G(*a):
    return DiagonalGroupElement(tuple(a))


def test_cocycle_identity():
    C = CocycleSpec([[0.3, 0.7], [1.0, 0.0]])
    assert check_cocycle(C, G(2.0, 5.0), DiagonalGroupElement.identity(2)) == 0.0
    assert np.array_equal(C(DiagonalGroupElement.identity(2)), np.eye(2))


def test_cocycle_exponents_add():
    assert check_cocycle(CocycleSpec([[0.3, 0.7]]), G(2.0, 1.0), G(1.0, 3.0)) == 0.0


def test_cocycle_random():
    rng = np.random.default_rng(1)
    for _ in range(500):
        m, d = rng.integers(1, 4, 2)
        C = CocycleSpec(rng.uniform(0, 1.5, (m, d)))
        g1 = G(*np.exp(rng.uniform(-3, 3, d)))
        g2 = G(*np.exp(rng.uniform(-3, 3, d)))
        assert check_cocycle(C, g1, g2) <= 1e-12


def test_hurst_matrix_validation():
    with pytest.raises(ParameterError):
        HurstMatrix([[0.5, -0.1]])
    H = HurstMatrix([[0.0, 0.0], [0.2, 0.0]])
    assert H.trivial_components().tolist() == [0]
    with pytest.raises(DomainError):
        G(1.0, 0.0)


def test_shift_conditions_zero_shift():
    res = check_prop6_conditions(CocycleSpec([[0.3, 0.7]]), TimeChange(), [0.0, 0.0], [0.4, -1.2])
    assert res.cond1 == 0.0 and res.cond2 == 0.0


def test_shift_conditions_scalar():
    res = check_prop6_conditions(CocycleSpec([[0.5]]), TimeChange(), [2.0], [1.0])
    assert res.cond1 <= 1e-15 and res.cond2 <= 1e-15


def test_shift_conditions_random():
    rng = np.random.default_rng(2)
    C = CocycleSpec([[0.3, 0.7]])
    for _ in range(300):
        res = check_prop6_conditions(C, TimeChange(), rng.uniform(-3, 3, 2), rng.uniform(-3, 3, 2))
        assert res.cond1 <= 1e-12 and res.cond2 <= 1e-12


def test_shift_conditions_polar_unsupported():
    with pytest.raises(ParameterError):
        check_prop6_conditions(CocycleSpec([[0.5, 0.5]]), TimeChange("polar-plane"), [0, 0], [0, 0])


def test_timechange_roundtrip():
    rng = np.random.default_rng(3)
    s = rng.uniform(-2, 2, (100, 2))
    assert np.allclose(TimeChange().inverse(TimeChange()(s)), s, atol=1e-14)
    s[:, 1] = rng.uniform(-np.pi + 1e-3, np.pi, 100)
    assert np.allclose(TimeChange("polar-plane").inverse(TimeChange("polar-plane")(s)), s, atol=1e-13)


def test_forward_mss_examples():
    P = np.array([[1.0, 2.0], [3.0, 0.5], [1.0, 1.0]])
    zero = PathOnGrid(P, np.zeros((3, 1)))
    assert np.all(lamperti_forward_mss(zero, [[0.3, 0.4]]).values == 0)
    t = np.array([[0.5], [1.0], [4.0], [9.0]])
    Y = lamperti_forward_mss(PathOnGrid(t, np.sqrt(t)), [[0.5]])
    assert Y.frame == "S"
    assert np.allclose(Y.values, 1.0, rtol=1e-15)
    X = PathOnGrid(P, np.array([[2.5], [-1.0], [7.0]]))
    Y = lamperti_forward_mss(X, [[0.3, 0.4]])
    assert Y.values[2, 0] == 7.0 and np.all(Y.points[2] == 0)


def test_forward_mss_domain():
    with pytest.raises(DomainError):
        lamperti_forward_mss(PathOnGrid([[1.0, 0.0]], [[1.0]]), [[0.5, 0.5]])


def test_inverse_mss_examples():
    s = np.array([[-1.0], [0.0], [2.0]])
    X = lamperti_inverse_mss(PathOnGrid(s, np.full((3, 1), 3.0), "S"), [[0.5]])
    assert np.allclose(X.values[:, 0], 3.0 * np.sqrt(np.exp(s[:, 0])), rtol=1e-15)
    Y = PathOnGrid(np.array([[0.1, -0.3]]), np.array([[4.0]]), "S")
    X = lamperti_inverse_mss(Y, [[0.0, 0.0]])
    assert X.values[0, 0] == 4.0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2 ** 31))
def test_mss_roundtrip(m, d, seed):
    rng = np.random.default_rng(seed)
    H = rng.uniform(0, 1, (m, d))
    P = np.exp(rng.uniform(-3, 3, (7, d)))
    V = rng.normal(size=(4, 7, m))
    X = PathOnGrid(P, V)
    back = lamperti_inverse_mss(lamperti_forward_mss(X, H), H)
    assert np.max(np.abs(back.values - V)) <= 1e-12 * max(1.0, np.max(np.abs(V)))
    Y = PathOnGrid(np.log(P), V, "S")
    again = lamperti_forward_mss(lamperti_inverse_mss(Y, H), H)
    assert np.max(np.abs(again.values - V)) <= 1e-12 * max(1.0, np.max(np.abs(V)))


def test_polar_forward_examples():
    ang = np.linspace(-3, 3, 7)
    P = np.stack([np.cos(ang), np.sin(ang)], 1)
    vals = np.arange(7.0)[:, None]
    Y = polar_forward_levy(PathOnGrid(P, vals), 0.5)
    assert np.allclose(Y.points[:, 0], 0, atol=1e-15)
    assert np.allclose(Y.values, vals, rtol=1e-15)
    rng = np.random.default_rng(4)
    Q = rng.normal(size=(20, 2)) * 5
    Y = polar_forward_levy(PathOnGrid(Q, np.linalg.norm(Q, axis=1)[:, None] ** 0.7), 0.7)
    assert np.allclose(Y.values, 1.0, rtol=1e-14)
    with pytest.raises(DomainError):
        polar_forward_levy(PathOnGrid([[0.0, 0.0]], [[1.0]]), 0.5)


def test_polar_inverse_examples():
    rng = np.random.default_rng(5)
    s = np.stack([rng.uniform(-2, 2, 10), rng.uniform(-3, 3, 10)], 1)
    X = polar_inverse_levy(PathOnGrid(s, np.ones((10, 1)), "S"), 0.5)
    assert np.allclose(X.values[:, 0], np.linalg.norm(X.points, axis=1) ** 0.5, rtol=1e-14)
    # 2 pi periodicity in s2
    shifted = polar_inverse_levy(PathOnGrid(s + (0, 2 * np.pi), np.ones((10, 1)), "S"), 0.5)
    assert np.allclose(shifted.points, X.points, atol=1e-13)
    assert np.allclose(shifted.values, X.values, rtol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 1.0), st.integers(0, 2 ** 31))
def test_polar_roundtrip(H, seed):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(9, 2)) * np.exp(rng.uniform(-3, 3, (9, 1)))
    V = rng.normal(size=(3, 9, 1))
    back = polar_inverse_levy(polar_forward_levy(PathOnGrid(P, V), H), H)
    assert np.allclose(back.points, P, rtol=1e-13, atol=1e-300)
    assert np.max(np.abs(back.values - V)) <= 1e-12 * max(1.0, np.max(np.abs(V)))
    s = np.stack([rng.uniform(-3, 3, 9), rng.uniform(-3.1, 3.1, 9)], 1)
    again = polar_forward_levy(polar_inverse_levy(PathOnGrid(s, V, "S"), H), H)
    assert np.max(np.abs(again.values - V)) <= 1e-12 * max(1.0, np.max(np.abs(V)))


def test_polar_branch():
    s = polar_coordinates(np.array([[-1.0, -0.0], [-1.0, 0.0]]))
    assert np.all(s[:, 1] == np.pi)


def test_1d_roundtrip_and_h0():
    rng = np.random.default_rng(6)
    t = np.exp(rng.uniform(-4, 4, (30, 1)))
    V = rng.normal(size=(5, 30, 1))
    for H in (0.0, 0.3, 1.0):
        back = lamperti_inverse_1d(lamperti_forward_1d(PathOnGrid(t, V), H), H)
        assert np.max(np.abs(back.values - V)) <= 1e-12 * np.max(np.abs(V))
    Y = lamperti_forward_1d(PathOnGrid(t, V), 0.0)
    assert np.array_equal(Y.values, V)
    with pytest.raises(DomainError):
        lamperti_forward_1d(PathOnGrid([[-1.0]], [[1.0]]), 0.5)


def test_1d_brownian_to_ou():
    # Brownian motion as the d = 1 sheet with h = 1/2
    s = np.linspace(-1.5, 1.5, 7)
    X = sample_gaussian_field(FBMSheet([0.5]), np.exp(s)[:, None], 20000, 17)
    Y = lamperti_forward_1d(PathOnGrid.from_sample(X), 0.5)
    est = empirical_covariance(FieldSample(Y.points, Y.values))
    target = np.exp(-np.abs(s[:, None] - s[None, :]) / 2)
    z = np.abs(est.cov - target) / est.se
    assert np.max(z[np.triu_indices(7)]) <= 3.5  # 28 entries; see calibration tests for rates


def test_wmss_examples():
    rng = np.random.default_rng(7)
    pairs = [(rng.uniform(0.1, 3, 2), rng.uniform(0.1, 3, 2)) for _ in range(50)]
    assert check_wmss_shift_equation([0.3, 0.6], 0.0, pairs) == 0.0
    assert check_wmss_shift_equation([1.0], 2.0, [([2.0], [3.0])]) == 0.0
    grid = [([a], [b]) for a in (0.5, 1, 2, 3) for b in (0.25, 1, 4)]
    assert check_wmss_shift_equation([1.0], 2.0, grid) <= 1e-14


def test_wmss_random():
    rng = np.random.default_rng(8)
    for _ in range(300):
        d = rng.integers(1, 4)
        H = rng.uniform(0, 1, d)
        pairs = [(rng.uniform(0.5, 2, d), rng.uniform(0.5, 2, d))]
        assert check_wmss_shift_equation(H, rng.uniform(-2, 2), pairs) <= 1e-12


def test_pushforward_stationary_sheet():
    h = [0.3, 0.8]
    K = MssPushforwardKernel(FBMSheet(h), [h])
    rng = np.random.default_rng(9)
    for _ in range(20):
        s = rng.uniform(-2, 2, (6, 2))
        shift = rng.uniform(-2, 2, 2)
        G0, G1 = gram_matrix(K, s), gram_matrix(K, s + shift)
        assert np.max(np.abs(G0 - G1)) <= 1e-12 * np.max(np.abs(G0))


def test_pushforward_levy_is_R():
    rng = np.random.default_rng(10)
    for H in (0.2, 0.5, 0.9):
        K = PolarPushforwardKernel(LevyFBM(H), H)
        s = np.stack([rng.uniform(-2, 2, 8), rng.uniform(-3, 3, 8)], 1)
        G = gram_matrix(K, s)
        R = covariance_R(s[None, :, :] - s[:, None, :], H)
        assert np.max(np.abs(G - R)) <= 1e-12


def test_pullback_recovers_levy():
    rng = np.random.default_rng(11)
    for H in (0.1, 0.6, 1.0):
        K = PolarPullbackKernel(PolarStationary(H), H)
        P = rng.normal(size=(10, 2)) * 3
        G, L = gram_matrix(K, P), gram_matrix(LevyFBM(H), P)
        assert np.max(np.abs(G - L)) <= 1e-12 * np.max(np.abs(L))


def test_polar_inverse_of_stationary_sample_matches_levy():
    rng = np.random.default_rng(12)
    s = np.stack([rng.uniform(-1, 1, 6), rng.uniform(-3, 3, 6)], 1)
    Y = sample_gaussian_field(PolarStationary(0.5), s, 20000, 21)
    X = polar_inverse_levy(PathOnGrid.from_sample(Y, "S"), 0.5)
    est = empirical_covariance(FieldSample(X.points, X.values))
    L = gram_matrix(LevyFBM(0.5), X.points)
    z = np.abs(est.cov - L) / est.se
    assert np.max(z[np.triu_indices(6)]) <= 3.5


def test_distributional_stationarity():
    # samples of Y at s and at s + h have equal covariances
    h = np.array([0.7, -0.4])
    s = np.random.default_rng(13).uniform(-1, 1, (5, 2))

    def sampler(points, n, seed):
        X = sample_gaussian_field(FBMSheet([0.4, 0.6]), np.exp(points), n, seed)
        Y = lamperti_forward_mss(PathOnGrid.from_sample(X), [[0.4, 0.6]])
        return FieldSample(points, Y.values)

    rep = check_stationarity(sampler, h, s, n_reps=5000, seed=4)
    assert rep.passed
