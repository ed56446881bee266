import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from interlink.bounds import ZERO_SECTION, QuadrupleSpec
from interlink.errors import ArgumentError
from interlink.manifolds import FlatTorus, RoundSphere
from interlink.pbopt import (
    FiberRamp,
    LinearFunction,
    MonotoneRamp,
    OptimizerConfig,
    ProductFunction,
    RadialRamp,
    _Objective,
    critical_tau,
    deformed_form,
    estimate_pb_upper,
    pfaffian,
    poisson_bracket,
    random_smooth_function,
    symplectic_matrix,
    verify_degeneracy_identity,
    wedge_identity_residual,
)
from oracles import central_difference, pfaffian_2n

T1 = FlatTorus([[1.0]])
Q, P = LinearFunction([1.0], [0.0]), LinearFunction([0.0], [1.0])


def fd_bracket(F, G, q, p, h=1e-5):
    n = q.size
    z = np.concatenate([q, p])
    gF = central_difference(lambda v: float(F.value(v[:n], v[n:])), z, h)
    gG = central_difference(lambda v: float(G.value(v[:n], v[n:])), z, h)
    return float(gF[:n] @ gG[n:] - gF[n:] @ gG[:n])


def test_bracket_examples():
    q, p = np.array([0.2]), np.array([0.7])
    assert poisson_bracket(Q, P, q, p) == 1.0
    assert poisson_bracket(P, Q, q, p) == -1.0
    F = random_smooth_function(np.random.default_rng(0), 2)
    assert poisson_bracket(F, F, np.array([0.1, 0.4]), np.array([0.3, -1.0])) == 0.0


def test_product_ansatz_bracket_chain_rule():
    g = 2.0
    F = FiberRamp(0.0, 0.3, np.ones(6))
    G = RadialRamp(1.0, 2.0, np.ones(6), [[g]])
    q, p = np.array([0.14]), np.array([-1.5 * math.sqrt(g)])
    expected = F.slope(q[0]) * G.ramp.deriv(1.5) * (-1.0 / math.sqrt(g))
    assert poisson_bracket(F, G, q, p) == pytest.approx(expected, rel=1e-13)
    assert poisson_bracket(F, G, q, p) == pytest.approx(fd_bracket(F, G, q, p), rel=1e-6)


@pytest.mark.parametrize("n", [1, 2])
def test_bracket_matches_finite_differences(n):
    rng = np.random.default_rng(10 + n)
    for _ in range(100):
        F, G = random_smooth_function(rng, n), random_smooth_function(rng, n)
        q, p = rng.uniform(0, 1, n), rng.normal(size=n)
        exact = float(poisson_bracket(F, G, q, p))
        assert exact == pytest.approx(fd_bracket(F, G, q, p), rel=1e-6, abs=1e-6)


@given(seed=st.integers(0, 2**32 - 1), n=st.sampled_from([1, 2]))
@settings(max_examples=50, deadline=None)
def test_antisymmetry_and_leibniz(seed, n):
    rng = np.random.default_rng(seed)
    F, G, H = (random_smooth_function(rng, n) for _ in range(3))
    q, p = rng.uniform(0, 1, n), rng.normal(size=n)
    assert poisson_bracket(F, G, q, p) == -poisson_bracket(G, F, q, p)
    lhs = float(poisson_bracket(ProductFunction(F, H), G, q, p))
    rhs = float(F.value(q, p) * poisson_bracket(H, G, q, p) + H.value(q, p) * poisson_bracket(F, G, q, p))
    assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-8)


def test_pfaffian_against_explicit_formulas():
    rng = np.random.default_rng(4)
    for m in (2, 4):
        for _ in range(50):
            X = rng.normal(size=(m, m))
            A = X - X.T
            assert pfaffian(A) == pytest.approx(pfaffian_2n(A), rel=1e-12, abs=1e-12)
    for m in (6, 8):
        X = rng.normal(size=(m, m))
        A = X - X.T
        assert pfaffian(A) ** 2 == pytest.approx(np.linalg.det(A), rel=1e-10)
    with pytest.raises(ArgumentError):
        pfaffian(np.zeros((3, 3)))


def test_symplectic_matrix_orientation():
    # omega(d/dq, d/dp) = (dp ^ dq)(d/dq, d/dp) = -1
    W = symplectic_matrix(1)
    assert W[0, 1] == -1.0 and pfaffian_2n(W) == -1.0
    assert pfaffian(symplectic_matrix(2)) == pfaffian_2n(symplectic_matrix(2))


def test_degeneracy_identity_examples():
    q, p = np.array([0.3]), np.array([0.2])
    F = random_smooth_function(np.random.default_rng(1), 1)
    assert verify_degeneracy_identity(F, P, 0.0, q, p) == 0.0
    assert verify_degeneracy_identity(Q, P, 0.5, q, p) < 1e-12
    assert pfaffian_2n(deformed_form(Q, P, 0.5, q, p)) == pytest.approx(0.5 * pfaffian_2n(symplectic_matrix(1)))


@pytest.mark.parametrize("n", [1, 2])
def test_identities_on_random_draws(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(100):
        F, G = random_smooth_function(rng, n), random_smooth_function(rng, n)
        q, p = rng.uniform(0, 1, n), rng.normal(size=n)
        tau = rng.uniform(-1, 1)
        assert verify_degeneracy_identity(F, G, tau, q, p) < 1e-10
        assert wedge_identity_residual(F, G, q, p) < 1e-10
        # independent check of the left side through the explicit Pfaffian
        pf = pfaffian_2n(deformed_form(F, G, tau, q, p))
        expected = (1 - tau * float(poisson_bracket(F, G, q, p))) * pfaffian_2n(symplectic_matrix(n))
        assert pf == pytest.approx(expected, abs=1e-10)


def test_degeneracy_at_critical_tau():
    F = FiberRamp(0.0, 0.3, np.ones(8))
    G = RadialRamp(1.0, 2.0, np.ones(8))
    u = np.linspace(0, 1, 20001)
    q = np.array([u[np.argmax(F.slope(u))]])
    p = np.array([1.5])
    peak = float(poisson_bracket(F, G, q, p))
    tau = critical_tau(F, G, q, p)
    assert tau == pytest.approx(1.0 / peak, abs=1e-6)
    assert abs(pfaffian(deformed_form(F, G, 1.0 / peak, q, p))) < 1e-10
    assert abs(pfaffian(deformed_form(F, G, 0.5 / peak, q, p))) > 0.1
    with pytest.raises(ArgumentError):
        critical_tau(F, G, np.array([0.0]), p)


# -- admissible test functions --------------------------------------------


@given(weights=st.lists(st.floats(0.0, 5.0), min_size=1, max_size=12).filter(lambda w: sum(w) > 0.1),
       lo=st.floats(-2, 2), width=st.floats(0.1, 3))
@settings(max_examples=60, deadline=None)
def test_monotone_ramp(weights, lo, width):
    R = MonotoneRamp(lo, lo + width, weights)
    u = np.linspace(lo - 0.5, lo + width + 0.5, 2001)
    v = R.value(u)
    assert np.all(v[u <= lo] == 0.0) and np.all(v[u >= lo + width] == 1.0)
    assert np.all(np.diff(v) >= -1e-12)
    assert R.max_slope() >= np.max(R.deriv(u)) - 1e-12
    assert R.max_slope() >= 1.0 / width - 1e-9
    # slope and curvature vanish at both ends (C^2 gluing)
    e = 1e-6 * width
    for end in (lo, lo + width):
        assert abs(float(R.deriv(end - e))) < 1e-6 * R.max_slope()
        assert abs(float(R.deriv(end + e))) < 1e-6 * R.max_slope()


def test_ramp_validation():
    with pytest.raises(ArgumentError):
        MonotoneRamp(1.0, 1.0, [1.0])
    with pytest.raises(ArgumentError):
        MonotoneRamp(0.0, 1.0, [0.0, 0.0])
    with pytest.raises(ArgumentError):
        MonotoneRamp(0.0, 1.0, [1.0, -0.1])


@pytest.mark.parametrize("x,y", [(0.0, 0.3), (0.9, 0.6), (0.2, 0.7), (0.8, 0.1)])
def test_fiber_ramp_is_admissible(x, y):
    F = FiberRamp(x, y, np.random.default_rng(0).uniform(0.2, 2, 9))
    zero = np.array([0.0])
    eps = 0.005 * F.arc
    for dq in (-eps, 0.0, eps):
        assert F.value(np.array([x + dq]), zero) == 0.0
        assert F.value(np.array([y + dq]), zero) == 1.0
    q = np.linspace(0, 1, 4001)[:, None]
    v = F.value(q, np.zeros_like(q))
    assert v.min() >= 0.0 and v.max() <= 1.0
    np.testing.assert_allclose(F.value(q + 3.0, np.zeros_like(q)), v, atol=1e-12)


def test_radial_ramp_is_admissible():
    G = RadialRamp(1.0, 2.0, np.ones(5), [[4.0]])
    p = np.array([[2.0 * 0.99], [2.0 * 1.0], [-2.0 * 2.0], [2.0 * 5.0]])
    np.testing.assert_array_equal(G.value(np.zeros_like(p), p), [0.0, 0.0, 1.0, 1.0])


# -- estimation ------------------------------------------------------------

FAST = OptimizerConfig(restarts=2, max_evals=800, refine_sweeps=2)


@pytest.mark.parametrize(
    "quad",
    [
        QuadrupleSpec(T1, (0,), (0.3,), 1.0, 3.0),
        QuadrupleSpec(FlatTorus([[2.0]]), (0.1,), (0.45,), 0.5, 1.0),
        QuadrupleSpec(T1, (0,), (0.3,), 1.0, variant=ZERO_SECTION),
    ],
    ids=["a1b3", "metric2", "zero-section"],
)
def test_sandwich(quad):
    est = estimate_pb_upper(quad, FAST)
    assert est.upper >= est.lower - 1e-9
    assert est.gap_ratio == est.upper / est.lower
    assert est.gap_ratio <= 1.2
    assert not est.clamped
    assert est.grid_upper <= est.upper + 1e-12


def test_a1_b3_target():
    est = estimate_pb_upper(QuadrupleSpec(T1, (0,), (0.3,), 1.0, 3.0), FAST)
    assert est.lower == pytest.approx(1 / 0.6)
    assert abs(est.upper / (1 / 0.6) - 1) <= 0.2


def test_estimate_is_deterministic_and_reports_pair():
    quad = QuadrupleSpec(T1, (0,), (0.3,), 1.0, 2.0)
    cfg = OptimizerConfig(restarts=2, max_evals=300, refine_sweeps=1, seed=11)
    a, b = estimate_pb_upper(quad, cfg), estimate_pb_upper(quad, cfg)
    assert a.to_dict() == b.to_dict()
    threaded = estimate_pb_upper(quad, OptimizerConfig(restarts=2, max_evals=300, refine_sweeps=1, seed=11, threads=2))
    assert threaded.to_dict() == a.to_dict()
    d = a.to_dict()
    for key in ("quadruple", "upper", "lower", "gap_ratio", "pair", "stagnated", "seed"):
        assert key in d
    assert d["seed"] == 11


def test_grid_max_factorization_matches_full_grid():
    quad = QuadrupleSpec(T1, (0.1,), (0.8,), 0.5, 1.5)
    obj = _Objective(quad, OptimizerConfig(q_points=128, r_points=64))
    theta = np.random.default_rng(2).uniform(0.5, 1.5, 20)
    pair = obj.pair(theta)
    assert obj.grid_max(theta) == pytest.approx(obj.full_grid_max(pair), rel=1e-12)
    assert obj.exact_max(pair) >= obj.grid_max(theta)


def test_estimate_rejects_unsupported_inputs():
    with pytest.raises(ArgumentError):
        QuadrupleSpec(T1, (0,), (0.3,), 2.0, 1.0)
    with pytest.raises(ArgumentError):
        estimate_pb_upper(QuadrupleSpec(FlatTorus(n=2), (0, 0), (0.3, 0), 1.0, 2.0))
    with pytest.raises(ArgumentError):
        estimate_pb_upper(QuadrupleSpec(RoundSphere(1.0), (0, 0, 1), (1, 0, 0), 1.0, 2.0))
