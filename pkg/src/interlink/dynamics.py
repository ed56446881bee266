"""Hamiltonian flows on the cotangent bundle of a flat torus and chord search.

Sign convention. With the Liouville form ``lambda = p dq`` the symplectic form
is ``omega = d lambda = dp ^ dq``. For ``X = (qdot, pdot)``,

    omega(X, .) = pdot dq - qdot dp,

and requiring ``omega(X_H, .) = -dH = -H_q dq - H_p dp`` gives
``qdot = dH/dp`` and ``pdot = -dH/dq``.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .bounds import SPHERES, ZERO_SECTION, QuadrupleSpec, bound_report, chord_time_budget
from .errors import ArgumentError, NotSeparatingError, StepFailureError
from .hamiltonians import Hamiltonian
from .manifolds import FlatTorus

FIXED_POINT_TOL = 1e-13


def worker_count(requested: int | None = None) -> int:
    """Worker threads, capped by ``INTERLINK_THREADS`` when set."""
    cap = os.environ.get("INTERLINK_THREADS")
    n = requested if requested is not None else 1
    if cap:
        n = min(n, max(1, int(cap))) if requested is not None else max(1, int(cap))
    return max(1, n)


# ---------------------------------------------------------------------------
# vector field and integrator


def hamiltonian_vector_field(H: Hamiltonian, q, p):
    """``(dq/dt, dp/dt) = (dH/dp, -dH/dq)``."""
    dHdq, dHdp = H.gradients(q, p)
    return dHdp, -dHdq


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray  # lifted coordinates, not reduced mod 1
    p: np.ndarray
    energy: np.ndarray

    @property
    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))

    def write_csv(self, path) -> None:
        n = self.q.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)] + ["H"])
            for k in range(self.t.size):
                w.writerow([repr(float(self.t[k]))] + [repr(float(v)) for v in self.q[k]]
                           + [repr(float(v)) for v in self.p[k]] + [repr(float(self.energy[k]))])


def _midpoint_step(H, q, p, dt, tol=FIXED_POINT_TOL, max_iter=100):
    """One implicit midpoint step for a batch; ``dt`` is a scalar or shape (B, 1)."""
    half = 0.5 * dt
    fq, fp = hamiltonian_vector_field(H, q, p)
    mq, mp = q + half * fq, p + half * fp
    for _ in range(max_iter):
        fq, fp = hamiltonian_vector_field(H, mq, mp)
        nq, np_ = q + half * fq, p + half * fp
        err = max(np.abs(nq - mq).max(), np.abs(np_ - mp).max())
        mq, mp = nq, np_
        if err <= tol * max(1.0, np.abs(nq).max(), np.abs(np_).max()):
            return 2.0 * mq - q, 2.0 * mp - p
    raise StepFailureError(
        f"implicit midpoint fixed-point iteration did not converge (last change {err:.2e}); "
        "try a smaller dt"
    )


# Symmetric triple jump: three midpoint substeps compose to a fourth-order
# symmetric symplectic map. Plain midpoint leaves an O(dt^2) energy
# oscillation (~1e-7 at dt=1e-3 for the perturbed family).
_JUMP = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
SCHEMES = {
    "midpoint": (1.0,),
    "midpoint4": (_JUMP, 1.0 - 2.0 * _JUMP, _JUMP),
}
DEFAULT_SCHEME = "midpoint4"


def _step(H, q, p, dt, scheme):
    for w in SCHEMES[scheme]:
        q, p = _midpoint_step(H, q, p, w * dt)
    return q, p


def _flow(H, q, p, dt, steps, record=False, scheme=DEFAULT_SCHEME):
    if scheme not in SCHEMES:
        raise ArgumentError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEMES)}")
    qs, ps = [q], [p]
    for _ in range(steps):
        q, p = _step(H, q, p, dt, scheme)
        if record:
            qs.append(q)
            ps.append(p)
    if record:
        return np.stack(qs), np.stack(ps)
    return q, p


def integrate(H: Hamiltonian, z0, dt: float, steps: int, scheme: str = DEFAULT_SCHEME) -> Trajectory:
    """Fixed-step integration from ``z0 = (q0, p0)``.

    ``scheme="midpoint"`` is the plain implicit midpoint rule (second order);
    the default ``"midpoint4"`` composes three midpoint substeps per step.
    Both are symplectic and symmetric.
    """
    if not dt > 0:
        raise ArgumentError(f"dt must be positive, got {dt}")
    if int(steps) < 0:
        raise ArgumentError(f"steps must be nonnegative, got {steps}")
    q0, p0 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in z0)
    if q0.shape != p0.shape:
        raise ArgumentError("q0 and p0 must have the same dimension")
    qs, ps = _flow(H, q0[None, :], p0[None, :], dt, int(steps), record=True, scheme=scheme)
    qs, ps = qs[:, 0, :], ps[:, 0, :]
    t = dt * np.arange(int(steps) + 1)
    return Trajectory(t, qs, ps, np.asarray(H.value(qs, ps), dtype=float))


# ---------------------------------------------------------------------------
# separation


@dataclass(frozen=True)
class Sphere:
    radius: float


@dataclass(frozen=True)
class ZeroSection:
    radius: float = 0.0


@dataclass
class Separation:
    delta: float
    inner_sup: float
    outer_inf: float
    exact: bool
    samples: int

    def to_dict(self):
        return asdict(self)


def _sqrt_metric(G):
    w, V = np.linalg.eigh(G)
    return (V * np.sqrt(w)) @ V.T


def _sample_set(H: Hamiltonian, s, samples: int):
    n = H.n
    pts = qmc.Halton(d=n + max(n - 1, 1), scramble=False).random(samples + 1)[1:]
    q = pts[:, :n]
    if isinstance(s, ZeroSection):
        return q, np.zeros_like(q)
    if n == 1:
        u = np.where(pts[:, 1:2] < 0.5, -1.0, 1.0)
    elif n == 2:
        ang = 2 * math.pi * pts[:, 2]
        u = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        g = ndtri(np.clip(pts[:, n:], 1e-12, 1 - 1e-12))
        g = np.concatenate([g, np.ones((samples, 1))], axis=1)
        u = g / np.linalg.norm(g, axis=1, keepdims=True)
    p = s.radius * u @ _sqrt_metric(H.metric)
    return q, p


def measure_separation(H: Hamiltonian, inner, outer, samples: int = 4096) -> Separation:
    """``inf_outer H - sup_inner H``; exact for radial H, else on a Halton sample."""
    if H.radial:
        lo = float(H.profile.value(np.array(inner.radius)))
        hi = float(H.profile.value(np.array(outer.radius)))
        return Separation(hi - lo, lo, hi, True, 0)
    qi, pi = _sample_set(H, inner, samples)
    qo, po = _sample_set(H, outer, samples)
    lo = float(np.max(H.value(qi, pi)))
    hi = float(np.min(H.value(qo, po)))
    return Separation(hi - lo, lo, hi, False, samples)


def separation(H: Hamiltonian, inner, outer, samples: int = 4096) -> float:
    sep = measure_separation(H, inner, outer, samples)
    if not sep.delta > 0:
        raise NotSeparatingError(f"Delta = {sep.delta:.6g} <= 0: H does not separate the pair")
    return sep.delta


# ---------------------------------------------------------------------------
# chord search


@dataclass
class SearchConfig:
    r_max: float = 3.0
    n_radii: int = 48
    n_directions: int = 48
    tol_q: float = 1e-7
    coarse_threshold: float | None = None
    refine_budget: int = 3
    min_steps: int = 64
    max_step_travel: float = 0.05
    newton_max_iter: int = 20
    zoom_points: int = 17
    radius_tol: float = 1e-7
    chunk: int = 512
    threads: int | None = None

    def to_dict(self):
        return asdict(self)


@dataclass
class ChordRecord:
    p0: np.ndarray
    time: float
    endpoint_error: float
    action: float
    q0: np.ndarray = field(default=None)
    lift: tuple = ()
    steps: int = 0
    refined_error: float = math.nan

    def to_dict(self):
        return {
            "p0": [float(v) for v in self.p0],
            "p0_norm_euclidean": float(np.linalg.norm(self.p0)),
            "time": self.time,
            "endpoint_error": self.endpoint_error,
            "action": self.action,
            "lift": list(self.lift),
            "steps": self.steps,
            "endpoint_error_2x_steps": self.refined_error,
        }


@dataclass
class ChordSearch:
    chord: ChordRecord | None
    trajectory: Trajectory | None
    stats: dict


def _direction_grid(n, count):
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        ang = 2 * math.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # Halton points mapped through the normal quantile, then projected to the sphere
    pts = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
    g = ndtri(np.clip(pts, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _hermite(q0, q1, v0, v1, h, s):
    """Cubic Hermite interpolant and its derivative at fraction ``s`` of a step."""
    s = s[..., None]
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    q = h00 * q0 + h10 * h * v0 + h01 * q1 + h11 * h * v1
    d00 = 6 * s**2 - 6 * s
    d10 = 3 * s**2 - 4 * s + 1
    d01 = -6 * s**2 + 6 * s
    d11 = 3 * s**2 - 2 * s
    dq = (d00 * q0 + d01 * q1) / h + d10 * v0 + d11 * v1
    return q, dq


def _scan_chunk(H, x, y, p0, T_max, steps, threshold, G):
    """Integrate a chunk of initial covectors, return crossing candidates."""
    dt = T_max / steps
    B = p0.shape[0]
    q = np.repeat(x[None, :], B, axis=0)
    qs, ps = _flow(H, q, p0, dt, steps, record=True)
    vq, _ = hamiltonian_vector_field(H, qs, ps)
    a, b = qs[:-1], qs[1:]
    va, vb = vq[:-1], vq[1:]
    k = np.round(0.5 * (a + b) - y)
    target = y + k
    ga = np.einsum("sbi,ij,sbj->sb", va, G, a - target)
    gb = np.einsum("sbi,ij,sbj->sb", vb, G, b - target)
    hit = (ga < 0) & (gb >= 0)
    si, bi = np.nonzero(hit)
    if si.size == 0:
        return []
    A, Bq, VA, VB, TG = a[si, bi], b[si, bi], va[si, bi], vb[si, bi], target[si, bi]
    lo = np.zeros(si.size)
    hi = np.ones(si.size)
    for _ in range(48):  # bisection on the sign of d/dt |q - target|^2
        mid = 0.5 * (lo + hi)
        qm, dqm = _hermite(A, Bq, VA, VB, dt, mid)
        g = np.einsum("ci,ij,cj->c", dqm, G, qm - TG)
        neg = g < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    s = 0.5 * (lo + hi)
    qm, _ = _hermite(A, Bq, VA, VB, dt, s)
    diff = qm - TG
    dist = np.sqrt(np.einsum("ci,ij,cj->c", diff, G, diff))
    times = (si + s) * dt
    keep = dist < threshold
    return [(float(times[c]), int(bi[c]), tuple(int(v) for v in k[si[c], bi[c]]), float(dist[c]))
            for c in np.nonzero(keep)[0]]


def _newton_batch(residual, Z0, S, tol, max_iter, admissible=None):
    """Independent damped Newton solves, one per row of ``Z0``, sharing each flow.

    ``residual(Z, S)`` is evaluated on a stacked batch holding every active
    iterate and its central-difference stencil. An iterate that fails to
    reduce its residual is pulled halfway back towards the best one.
    """
    Z = np.array(Z0, dtype=float)
    S = np.asarray(S, dtype=float)
    K, m = Z.shape
    eye = np.eye(m)
    best = Z.copy()
    best_rn = np.full(K, np.inf)
    step = np.zeros_like(Z)
    active = np.ones(K, dtype=bool)
    for _ in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        z = Z[idx]
        h = 1e-7 * np.maximum(1.0, np.abs(z))
        plus = z[:, None, :] + h[:, None, :] * eye[None]
        minus = z[:, None, :] - h[:, None, :] * eye[None]
        batch = np.concatenate([z[:, None, :], plus, minus], axis=1).reshape(-1, m)
        F = residual(batch, np.repeat(S[idx], 2 * m + 1))
        F = F.reshape(idx.size, 2 * m + 1, -1)
        rn = np.linalg.norm(F[:, 0], axis=1)
        better = rn < best_rn[idx]

        worse = idx[~better]
        step[worse] *= 0.5
        Z[worse] = best[worse] + step[worse]
        tiny = np.linalg.norm(step[worse], axis=1) < 1e-15 * np.maximum(1.0, np.linalg.norm(best[worse], axis=1))
        active[worse[tiny]] = False

        good = idx[better]
        best[good] = z[better]
        best_rn[good] = rn[better]
        done = rn[better] < tol
        active[good[done]] = False
        todo = better.copy()
        todo[better] = ~done
        if todo.any():
            Fs = F[todo]
            J = (Fs[:, 1:m + 1] - Fs[:, m + 1:]) / (2 * h[todo][:, :, None])
            jac = np.swapaxes(J, 1, 2)
            st = -(np.linalg.pinv(jac) @ Fs[:, 0, :, None])[..., 0]
            rows = idx[todo]
            step[rows] = st
            Z[rows] = z[todo] + st
            if admissible is not None:
                bad = ~admissible(Z[rows])
                active[rows[bad]] = False
    return best, best_rn


class _ChordProblem:
    def __init__(self, H, x, config, G):
        self.H, self.x, self.config, self.G = H, x, config, G
        self.n = x.size

    def endpoint(self, p0, T, steps):
        """Endpoints q(T) for batches of (p0, T) with ``steps`` equal steps each."""
        B = p0.shape[0]
        q = np.repeat(self.x[None, :], B, axis=0)
        dt = (T / steps)[:, None]
        q, _ = _flow(self.H, q, p0, dt, steps)
        return q

    def radius_residual(self, target, steps):
        """Residual ``(q(T) - target, |p0| - s)`` over rows ``(p0, T)``."""
        n = self.n
        Ginv = self.H.inverse_metric

        def residual(Z, S):
            p0, T = Z[:, :n], Z[:, n]
            qT = self.endpoint(p0, np.maximum(T, 1e-12), steps)
            r = np.sqrt(np.einsum("bi,ij,bj->b", p0, Ginv, p0))
            return np.concatenate([qT - target, (r - S)[:, None]], axis=1)

        return residual

    def minimize_time(self, target, p_c, t_c, lo, hi, steps, T_max):
        """Minimal chord time over ``|p0|`` in ``[lo, hi]`` by zooming batched solves."""
        n, config = self.n, self.config
        tol = 1e-2 * config.tol_q
        residual = self.radius_residual(target, steps)

        def admissible(Z):
            return (Z[:, n] > 0) & (Z[:, n] < 4 * T_max)

        known_s = np.array([float(self.H.fiber_norm(p_c))])
        known_z = np.concatenate([p_c, [t_c]])[None, :]
        best = None
        while True:
            S = np.linspace(lo, hi, config.zoom_points)
            near = np.argmin(np.abs(S[:, None] - known_s[None, :]), axis=1)
            Z0 = known_z[near].copy()
            Z0[:, :n] *= (S / known_s[near])[:, None]
            Z, rn = _newton_batch(residual, Z0, S, tol, config.newton_max_iter, admissible)
            ok = (rn < tol) & admissible(Z)
            if not ok.any():
                break
            T = np.where(ok, Z[:, n], np.inf)
            j = int(np.argmin(T))
            if best is None or T[j] <= best[1]:
                best = (Z[j].copy(), float(T[j]))
            if hi - lo < config.radius_tol * config.r_max:
                break
            lo, hi = S[max(j - 1, 0)], S[min(j + 1, S.size - 1)]
            known_s, known_z = S[ok], Z[ok]
        return best


def _steps_for(H, x, p0, T, config):
    vq, _ = hamiltonian_vector_field(H, x[None, :], np.atleast_2d(p0))
    travel = float(np.max(np.linalg.norm(vq, axis=1))) * T
    steps = max(config.min_steps, math.ceil(travel / config.max_step_travel))
    return steps + steps % 2


def _torus_error(G, q, target):
    d = q - target
    d = d - np.round(d)
    return math.sqrt(float(d @ G @ d))


def chord_search(H: Hamiltonian, x, y, T_max: float, search: SearchConfig | None = None) -> ChordSearch:
    """Search for the shortest-time Hamiltonian chord from the fiber over x to the fiber over y.

    A coarse grid of initial covectors ``|p0| <= r_max`` is flowed up to
    ``T_max``; closest approaches to lifts of ``y`` are located by bisection
    on the derivative of the squared distance along a Hermite dense output.
    The earliest candidates are refined by Newton on ``(p0, T)`` at fixed
    ``|p0|``, and the time is then minimized over ``|p0|`` near each one.
    """
    config = search or SearchConfig()
    if not T_max > 0:
        raise ArgumentError(f"T_max must be positive, got {T_max}")
    if not config.r_max > 0:
        raise ArgumentError(f"r_max must be positive, got {config.r_max}")
    n = H.n
    G = H.metric
    x = np.mod(np.atleast_1d(np.asarray(x, dtype=float)), 1.0)
    y = np.mod(np.atleast_1d(np.asarray(y, dtype=float)), 1.0)
    if x.size != n or y.size != n:
        raise ArgumentError("x and y must match the torus dimension")
    threshold = config.coarse_threshold or (0.05 if n == 1 else 0.15)

    radii = config.r_max * np.arange(1, config.n_radii + 1) / config.n_radii
    dirs = _direction_grid(n, config.n_directions) @ _sqrt_metric(G)
    p_grid = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    radius_index = np.repeat(np.arange(radii.size), dirs.shape[0])

    vq, _ = hamiltonian_vector_field(H, np.repeat(x[None, :], p_grid.shape[0], axis=0), p_grid)
    vmax = float(np.max(np.linalg.norm(vq, axis=1)))
    steps = max(config.min_steps, math.ceil(vmax * T_max / config.max_step_travel))

    chunks = [slice(i, min(i + config.chunk, p_grid.shape[0])) for i in range(0, p_grid.shape[0], config.chunk)]

    def run(sl):
        found = _scan_chunk(H, x, y, p_grid[sl], T_max, steps, threshold, G)
        return [(t, sl.start + b, k, d) for t, b, k, d in found]

    workers = worker_count(config.threads)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(sl) for sl in chunks]
    # best-aimed direction per (radius, lift); a loose threshold otherwise admits far-off directions
    best = {}
    for c in (c for r in results for c in r):
        key = (int(radius_index[c[1]]), tuple(c[2]))
        if key not in best or (c[3], c[0], c[1]) < (best[key][3], best[key][0], best[key][1]):
            best[key] = c
    candidates = sorted(best.values(), key=lambda c: (c[0], radii[radius_index[c[1]]], c[1]))

    stats = {
        "grid_points": int(p_grid.shape[0]),
        "grid_radii": int(radii.size),
        "grid_directions": int(dirs.shape[0]),
        "scan_steps": int(steps),
        "coarse_threshold": threshold,
        "candidates": len(candidates),
        "refined": 0,
        "accepted": 0,
        "r_max": config.r_max,
        "T_max": T_max,
        "scheme": DEFAULT_SCHEME,
    }

    # earliest candidate per radius bracket
    chosen, used = [], []
    for c in candidates:
        ri = int(radius_index[c[1]])
        if any(abs(ri - u) < 2 for u in used):
            continue
        chosen.append(c)
        used.append(ri)
        if len(chosen) >= config.refine_budget:
            break

    problem = _ChordProblem(H, x, config, G)
    dr = radii[0]
    chords = []
    for t_c, gi, k, _ in chosen:
        stats["refined"] += 1
        target = y + np.array(k, dtype=float)
        p_c = p_grid[gi]
        s_c = radii[radius_index[gi]]
        nsteps = _steps_for(H, x, p_c, t_c, config)
        lo, hi = max(s_c - 1.5 * dr, 0.25 * dr), min(s_c + 1.5 * dr, config.r_max)
        found = problem.minimize_time(target, p_c, t_c, lo, hi, nsteps, T_max)
        if found is None:
            continue
        z, T = found
        if not 0 < T <= T_max:
            continue
        p0 = z[:n]
        traj = integrate(H, (x, p0), T / nsteps, nsteps)
        err = _torus_error(G, traj.q[-1], target)
        if err >= config.tol_q:
            continue
        fine = integrate(H, (x, p0), T / (2 * nsteps), 2 * nsteps)
        rec = ChordRecord(p0, T, err, 0.0, x.copy(), tuple(k), nsteps, _torus_error(G, fine.q[-1], target))
        rec.action = chord_action(H, rec, traj)
        chords.append((rec, traj))
    stats["accepted"] = len(chords)
    if not chords:
        return ChordSearch(None, None, stats)
    rec, traj = min(chords, key=lambda c: (c[0].time, float(H.fiber_norm(c[0].p0))))
    return ChordSearch(rec, traj, stats)


def find_chord(H: Hamiltonian, x, y, T_max: float, search: SearchConfig | None = None) -> ChordRecord | None:
    """Shortest chord found from the fiber over x to the fiber over y, or None."""
    return chord_search(H, x, y, T_max, search).chord


def _simpson(values, h):
    v = np.asarray(values, dtype=float)
    return float(h / 3.0 * (v[0] + v[-1] + 4 * v[1:-1:2].sum() + 2 * v[2:-1:2].sum()))


def chord_action(H: Hamiltonian, chord: ChordRecord, trajectory: Trajectory) -> float:
    """``int p dq - int H dt`` along the chord (boundary primitives vanish on fibers)."""
    t = trajectory.t
    N = t.size - 1
    if N < 2 or N % 2:
        raise ArgumentError("action quadrature needs an even number of uniform steps")
    if not math.isclose(float(t[-1]), chord.time, rel_tol=1e-9, abs_tol=1e-12):
        raise ArgumentError(f"trajectory ends at t={t[-1]} but chord time is {chord.time}")
    if not np.allclose(trajectory.p[0], chord.p0, rtol=1e-12, atol=1e-12):
        raise ArgumentError("trajectory does not start at the chord's initial covector")
    h = float(t[1] - t[0])
    qdot, _ = hamiltonian_vector_field(H, trajectory.q, trajectory.p)
    pq = np.einsum("ti,ti->t", trajectory.p, qdot)
    return _simpson(pq, h) - _simpson(trajectory.energy, h)


# ---------------------------------------------------------------------------
# end-to-end verification

CONFIRMED = "CONFIRMED"
INCONCLUSIVE = "INCONCLUSIVE"
ANOMALY = "ANOMALY"


@dataclass
class VerificationReport:
    hamiltonian: dict
    quadruple: dict
    delta: float
    kappa: float
    budget: float
    chord: ChordRecord | None
    verdict: str
    search_stats: dict
    separation: dict
    basis: list = field(default_factory=lambda: ["TheoremA", "TheoremB", "Theorem6.1", "Theorem1.11"])

    def to_dict(self):
        return {
            "hamiltonian": self.hamiltonian,
            "quadruple": self.quadruple,
            "delta": self.delta,
            "kappa": self.kappa,
            "budget": self.budget,
            "chord": None if self.chord is None else self.chord.to_dict(),
            "verdict": self.verdict,
            "search_stats": self.search_stats,
            "separation": self.separation,
            "basis": self.basis,
        }


def separating_sets(quadruple: QuadrupleSpec):
    if quadruple.variant == ZERO_SECTION:
        return ZeroSection(), Sphere(quadruple.a)
    return Sphere(quadruple.a), Sphere(quadruple.b)


def default_search(H: Hamiltonian, quadruple: QuadrupleSpec) -> SearchConfig:
    """Grid radius: the outer radius for radial H (the mean-value chord lives
    in the shell), one unit beyond it otherwise."""
    extra = 0.0 if H.radial else 1.0
    return SearchConfig(r_max=quadruple.outer_radius + extra)


def verify_interlinking(
    H: Hamiltonian,
    quadruple: QuadrupleSpec,
    search: SearchConfig | None = None,
    margin: float = 0.05,
    tol_t: float = 1e-2,
    samples: int = 4096,
) -> VerificationReport:
    """Check that a chord of time at most ``kappa / Delta`` exists for ``H``.

    ``kappa`` comes from the barcode lower bound on pb+, ``Delta`` from the
    separation of the quadruple's pair of sets. A chord within the budget is
    CONFIRMED; no chord is INCONCLUSIVE (a search failure, never a refutation);
    chords that all exceed the budget are flagged as ANOMALY.
    """
    M = quadruple.manifold
    if not isinstance(M, FlatTorus):
        raise ArgumentError("chord verification is implemented on flat tori only")
    if not np.array_equal(M.metric, H.metric):
        raise ArgumentError("Hamiltonian metric differs from the torus metric")
    inner, outer = separating_sets(quadruple)
    sep = measure_separation(H, inner, outer, samples)
    if not sep.delta > 0:
        raise NotSeparatingError(f"Delta = {sep.delta:.6g} <= 0: H does not separate the pair")
    report = bound_report(quadruple)
    budget = chord_time_budget(report.kappa, sep.delta)
    if search is None:
        search = default_search(H, quadruple)
    result = chord_search(H, quadruple.x, quadruple.y, budget * (1 + margin), search)
    chord = result.chord
    if chord is None:
        verdict = INCONCLUSIVE
    elif chord.time <= budget * (1 + tol_t):
        verdict = CONFIRMED
    else:
        verdict = ANOMALY
    stats = dict(result.stats, margin=margin, tol_t=tol_t)
    return VerificationReport(H.to_dict(), quadruple.to_dict(), sep.delta, report.kappa, budget,
                              chord, verdict, stats, sep.to_dict())
