import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from interlink.bounds import ZERO_SECTION, QuadrupleSpec
from interlink.dynamics import (
    ANOMALY,
    CONFIRMED,
    INCONCLUSIVE,
    ChordRecord,
    SearchConfig,
    Sphere,
    ZeroSection,
    chord_action,
    chord_search,
    find_chord,
    hamiltonian_vector_field,
    integrate,
    measure_separation,
    separation,
    verify_interlinking,
)
from interlink.errors import ArgumentError, NotSeparatingError, StepFailureError
from interlink.hamiltonians import (
    Bump,
    Hamiltonian,
    PerturbedRadialHamiltonian,
    PotentialHamiltonian,
    PowerProfile,
    RadialHamiltonian,
    SplineProfile,
    TrigPolynomial,
    free_hamiltonian,
    parse_hamiltonian,
    zero_hamiltonian,
)
from interlink.manifolds import FlatTorus

T1 = FlatTorus([[1.0]])
G2 = np.array([[2.0, 0.5], [0.5, 1.0]])
TRIG1 = TrigPolynomial(((1,), (2,)), (0.3, 0.0), (0.5, -0.2))


class Oscillator(Hamiltonian):
    """``(p^2 + k q^2) / 2``, used to provoke fixed-point failure."""

    def __init__(self, k):
        super().__init__([[1.0]])
        self.k = k

    def value(self, q, p):
        return 0.5 * (np.sum(np.square(p), axis=-1) + self.k * np.sum(np.square(q), axis=-1))

    def gradients(self, q, p):
        return self.k * np.asarray(q, dtype=float), np.asarray(p, dtype=float)


def shipped_families(metric=((1.0,),)):
    n = np.atleast_2d(metric).shape[0]
    trig = TrigPolynomial(((1,) + (0,) * (n - 1),), (0.3,), (0.5,))
    prof = SplineProfile([0, 1, 0.5, 2, 1, 1], 3.0)
    return {
        "power": RadialHamiltonian(PowerProfile(1.0, 2.0), metric),
        "spline": RadialHamiltonian(prof, metric),
        "perturbed": PerturbedRadialHamiltonian(prof, 0.05, trig, Bump(1.2, 0.7), metric),
        "potential": PotentialHamiltonian(trig, metric),
    }


# -- vector field ----------------------------------------------------------


def test_vector_field_examples():
    q, p = np.array([0.3]), np.array([1.7])
    dq, dp = hamiltonian_vector_field(free_hamiltonian(), q, p)
    assert dq.tolist() == [1.7] and dp.tolist() == [0.0]
    H = RadialHamiltonian(PowerProfile(1.0, 1.0), G2)
    p2 = np.array([0.4, -1.0])
    dq, dp = hamiltonian_vector_field(H, np.zeros(2), p2)
    Ginv = np.linalg.inv(G2)
    np.testing.assert_allclose(dq, Ginv @ p2 / math.sqrt(p2 @ Ginv @ p2), rtol=1e-14)
    assert dp.tolist() == [0.0, 0.0]
    V = PotentialHamiltonian(TRIG1)
    dq, dp = hamiltonian_vector_field(V, q, p)
    assert dq.tolist() == [0.0]
    np.testing.assert_allclose(dp, -TRIG1.grad(q), rtol=1e-15)


@pytest.mark.parametrize("name", ["power", "spline", "perturbed", "potential"])
@pytest.mark.parametrize("metric", [((1.0,),), G2], ids=["t1", "t2"])
def test_energy_is_conserved_by_vector_field(name, metric):
    H = shipped_families(metric)[name]
    n = H.n
    rng = np.random.default_rng(7)
    q, p = rng.uniform(0, 1, (200, n)), rng.normal(size=(200, n)) * 1.5
    dHdq, dHdp = H.gradients(q, p)
    dq, dp = hamiltonian_vector_field(H, q, p)
    assert np.max(np.abs(np.sum(dHdq * dq + dHdp * dp, axis=-1))) < 1e-12


# -- integrator ------------------------------------------------------------


def test_free_flow_example():
    tr = integrate(free_hamiltonian(), ([0.0], [1.0]), 1e-3, 1000)
    assert tr.t[-1] == pytest.approx(1.0)
    assert abs(((tr.q[-1, 0] + 0.5) % 1.0) - 0.5) < 1e-12
    assert tr.energy_drift < 1e-12


def test_radial_speed_and_stationary():
    tr = integrate(RadialHamiltonian(PowerProfile(1.0, 2.0)), ([0.0], [1.0]), 1e-2, 50)
    np.testing.assert_allclose(tr.q[:, 0], 2.0 * tr.t, atol=1e-13)
    still = integrate(zero_hamiltonian(), ([0.25], [1.3]), 1e-2, 50)
    assert np.all(still.q == 0.25) and np.all(still.p == 1.3)


def test_integrate_validation_and_step_failure():
    with pytest.raises(ArgumentError):
        integrate(free_hamiltonian(), ([0.0], [1.0]), 0.0, 10)
    with pytest.raises(StepFailureError, match="smaller dt"):
        integrate(Oscillator(1e4), ([0.1], [0.0]), 1.0, 3)


def _flow_map(H, z, dt, scheme):
    tr = integrate(H, (z[:1], z[1:]), dt, 1, scheme=scheme)
    return np.concatenate([tr.q[-1], tr.p[-1]])


@pytest.mark.parametrize("scheme", ["midpoint", "midpoint4"])
def test_step_is_symplectic(scheme):
    H = shipped_families()["perturbed"]
    z = np.array([0.37, 1.1])
    h = 1e-6
    cols = [(_flow_map(H, z + e, 0.05, scheme) - _flow_map(H, z - e, 0.05, scheme)) / (2 * h)
            for e in (np.array([h, 0.0]), np.array([0.0, h]))]
    D = np.stack(cols, axis=1)
    assert np.linalg.det(D) == pytest.approx(1.0, abs=1e-8)


def test_orders_of_accuracy():
    H = shipped_families()["perturbed"]
    z0 = ([0.2], [1.3])
    ref = integrate(H, z0, 1e-3, 1000)
    errs = {}
    for scheme in ("midpoint", "midpoint4"):
        e = [np.abs(integrate(H, z0, 1.0 / n, n, scheme=scheme).q[-1] - ref.q[-1])[0] for n in (20, 40)]
        errs[scheme] = e[0] / e[1]
    assert 3.5 < errs["midpoint"] < 4.5
    assert 12 < errs["midpoint4"] < 20


def test_energy_drift_short_horizon():
    for name, H in shipped_families().items():
        tr = integrate(H, ([0.1], [1.3]), 1e-3, 2000)
        assert tr.energy_drift < 1e-8, name


def test_trajectory_csv(tmp_path):
    tr = integrate(shipped_families(G2)["perturbed"], ([0.1, 0.2], [1.0, -0.5]), 1e-2, 10)
    path = tmp_path / "traj.csv"
    tr.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "q1", "q2", "p1", "p2", "H"]
    assert len(rows) == 12
    assert float(rows[-1][1]) == tr.q[-1, 0]


# -- separation ------------------------------------------------------------


def test_separation_examples():
    H = parse_hamiltonian("radial:r^2")
    assert separation(H, Sphere(1.0), Sphere(2.0)) == 3.0
    assert separation(H, ZeroSection(), Sphere(1.0)) == 1.0
    P = PerturbedRadialHamiltonian(PowerProfile(1.0, 2.0), 0.1, TrigPolynomial(((1,),), (0.0,), (1.0,)), Bump(1.5, 1.0))
    sep = measure_separation(P, Sphere(1.0), Sphere(2.0), 1024)
    assert 2.8 <= sep.delta <= 3.2
    assert not sep.exact and sep.samples == 1024
    with pytest.raises(NotSeparatingError):
        separation(H, Sphere(2.0), Sphere(1.0))
    with pytest.raises(NotSeparatingError):
        separation(zero_hamiltonian(), Sphere(1.0), Sphere(2.0))


@given(eps=st.floats(0.0, 0.3), center=st.floats(0.5, 2.5))
@settings(max_examples=20, deadline=None)
def test_sampled_separation_within_perturbation_bound(eps, center):
    ang = TrigPolynomial(((1, 0), (0, 1)), (0.4, 0.1), (0.2, -0.3))
    P = PerturbedRadialHamiltonian(PowerProfile(1.0, 2.0), eps, ang, Bump(center, 0.8), G2)
    d = measure_separation(P, Sphere(1.0), Sphere(2.0), 512).delta
    bound = 2 * P.perturbation_bound()
    assert 3.0 - bound - 1e-12 <= d <= 3.0 + bound + 1e-12


# -- chords ----------------------------------------------------------------


def test_find_chord_examples():
    lin = find_chord(parse_hamiltonian("radial:r"), [0], [0.3], 1.0, SearchConfig(r_max=3))
    assert lin.time == pytest.approx(0.3, rel=1e-10)
    assert lin.p0[0] > 0
    quad = find_chord(parse_hamiltonian("radial:r^2"), [0], [0.3], 1.0, SearchConfig(r_max=2))
    assert quad.time == pytest.approx(0.075, rel=1e-8)
    assert quad.p0[0] == pytest.approx(2.0, rel=1e-6)
    assert quad.action == pytest.approx(0.3, rel=1e-6)
    assert lin.action == pytest.approx(0.0, abs=1e-12)
    assert find_chord(zero_hamiltonian(), [0], [0.3], 1.0) is None


def test_chord_in_negative_direction():
    c = find_chord(parse_hamiltonian("radial:r^2"), [0.9], [0.6], 1.0, SearchConfig(r_max=2))
    assert c.time == pytest.approx(0.075, rel=1e-8)
    assert c.p0[0] < 0 and c.lift == (0,)


def test_chord_acceptance_and_stats():
    res = chord_search(parse_hamiltonian("radial:r^2", G2), [0.1, 0.2], [0.6, 0.9], 1.0, SearchConfig(r_max=2))
    c = res.chord
    assert c.endpoint_error < 1e-7 and c.time > 0
    assert res.stats["accepted"] >= 1 and res.stats["grid_points"] == 48 * 48
    M = FlatTorus(G2)
    d = M.distance([0.1, 0.2], [0.6, 0.9])
    assert c.time == pytest.approx(d / 4.0, rel=1e-4)
    np.testing.assert_allclose(res.trajectory.q[0], [0.1, 0.2])


@given(seed=st.integers(0, 10_000))
@settings(max_examples=8, deadline=None)
def test_radial_oracle(seed):
    rng = np.random.default_rng(seed)
    r_max = rng.uniform(1.0, 3.0)
    prof = SplineProfile(rng.uniform(0, 2, 7), r_max + 0.5)
    g = rng.uniform(0.5, 2.0)
    H = RadialHamiltonian(prof, [[g]])
    x, y = rng.uniform(0, 1, 1), rng.uniform(0, 1, 1)
    d = FlatTorus([[g]]).distance(x, y)
    if d < 1e-3:
        return
    slope = prof.max_slope(r_max)[0]
    c = find_chord(H, x, y, 1.2 * d / slope, SearchConfig(r_max=r_max))
    assert c is not None
    assert c.time == pytest.approx(d / slope, rel=1e-4)


def test_chord_action_closed_form_and_mismatch():
    H = RadialHamiltonian(PowerProfile(1.0, 2.0))
    p0, T, n = np.array([2.0]), 0.075, 64
    tr = integrate(H, ([0.0], p0), T / n, n)
    rec = ChordRecord(p0, T, 0.0, 0.0)
    assert chord_action(H, rec, tr) == pytest.approx(0.3, rel=1e-12)
    with pytest.raises(ArgumentError):
        chord_action(H, ChordRecord(p0, 0.1, 0.0, 0.0), tr)
    with pytest.raises(ArgumentError):
        chord_action(H, ChordRecord(np.array([1.0]), T, 0.0, 0.0), tr)
    with pytest.raises(ArgumentError):
        chord_action(H, rec, integrate(H, ([0.0], p0), T / 63, 63))


def test_constant_hamiltonian_action():
    H = RadialHamiltonian(PowerProfile(0.0, 2.0))
    tr = integrate(H, ([0.0], [1.5]), 0.01, 10)
    # p constant, q constant, so only the -cT term survives (c = 0 here)
    assert chord_action(H, ChordRecord(np.array([1.5]), 0.1, 0.0, 0.0), tr) == 0.0


# -- verification ----------------------------------------------------------


def test_verify_examples():
    r2 = verify_interlinking(parse_hamiltonian("radial:r^2"), QuadrupleSpec(T1, (0,), (0.3,), 1.0, 2.0))
    assert (r2.delta, r2.kappa, r2.verdict) == (3.0, pytest.approx(0.3), CONFIRMED)
    assert r2.budget == pytest.approx(0.1)
    assert r2.chord.time == pytest.approx(0.075, rel=1e-8)
    r1 = verify_interlinking(parse_hamiltonian("radial:r"), QuadrupleSpec(T1, (0,), (0.3,), 1.0, 2.0))
    assert r1.delta == 1.0 and r1.budget == pytest.approx(0.3)
    assert r1.verdict == CONFIRMED and r1.chord.time == pytest.approx(0.3, rel=1e-10)
    zs = verify_interlinking(parse_hamiltonian("radial:r^2"), QuadrupleSpec(T1, (0,), (0.3,), 1.0, variant=ZERO_SECTION))
    assert zs.delta == 1.0 and zs.budget == pytest.approx(0.3)
    assert zs.verdict == CONFIRMED and zs.chord.time == pytest.approx(0.15, rel=1e-8)
    d = r2.to_dict()
    for key in ("hamiltonian", "quadruple", "delta", "kappa", "budget", "chord", "verdict", "search_stats"):
        assert key in d


def test_verify_not_separating_and_inconclusive():
    quad = QuadrupleSpec(T1, (0,), (0.3,), 1.0, 2.0)
    with pytest.raises(NotSeparatingError):
        verify_interlinking(zero_hamiltonian(), quad)
    rep = verify_interlinking(parse_hamiltonian("radial:r^2"), quad, SearchConfig(r_max=0.5))
    assert rep.verdict == INCONCLUSIVE and rep.chord is None


class Inconsistent(Hamiltonian):
    """Reports ``H = 3 |p|`` but flows with unit speed: a broken input that must be flagged."""

    def value(self, q, p):
        return 3.0 * self.fiber_norm(p)

    def gradients(self, q, p):
        r, dr = self._norm_and_grad(p)
        return np.zeros_like(np.asarray(q, dtype=float)), dr

    def to_dict(self):
        return {"family": "inconsistent"}


def test_verify_flags_anomaly():
    quad = QuadrupleSpec(T1, (0,), (0.3,), 1.0, 2.0)
    tight = verify_interlinking(parse_hamiltonian("radial:r"), quad, SearchConfig(r_max=2.0), margin=3.0)
    assert tight.verdict == CONFIRMED
    # budget 0.3 / 3 = 0.1, but every chord takes 0.3
    rep = verify_interlinking(Inconsistent([[1.0]]), quad, SearchConfig(r_max=2.0), margin=3.0)
    assert rep.budget == pytest.approx(0.1)
    assert rep.verdict == ANOMALY and rep.chord.time == pytest.approx(0.3)


def test_thread_count_does_not_change_result():
    H = parse_hamiltonian("radial:r^2", G2)
    a = chord_search(H, [0.1, 0.2], [0.6, 0.9], 1.0, SearchConfig(r_max=2, threads=1, chunk=300))
    b = chord_search(H, [0.1, 0.2], [0.6, 0.9], 1.0, SearchConfig(r_max=2, threads=4, chunk=300))
    assert a.chord.to_dict() == b.chord.to_dict()
    assert a.stats == b.stats
