"""Model Riemannian manifolds with closed-form geodesic spectra.

Two models ship: constant-metric flat tori ``R^n / Z^n`` and the round
2-sphere of radius ``R``. Both give every geodesic between two points in
closed form, and both can be cross-checked by :func:`shoot_geodesic_bvp`,
which integrates the geodesic equation and counts conjugate points of a
Jacobi field.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ArgumentError, DegenerateInputError, NoConvergenceError, NonMorseError

POINT_TOL = 1e-9
CONJUGATE_TOL = 1e-9

ClassTag = Union[tuple, int]


class FlatTorus:
    """``T^n = R^n / Z^n`` with a constant symmetric positive-definite metric."""

    def __init__(self, metric=None, n: int | None = None):
        if metric is None:
            if n is None:
                raise ArgumentError("FlatTorus needs a metric or a dimension")
            metric = np.eye(n)
        G = np.atleast_2d(np.asarray(metric, dtype=float))
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ArgumentError(f"metric must be square, got shape {G.shape}")
        if not np.array_equal(G, G.T):
            raise ArgumentError("metric must be symmetric")
        eig = np.linalg.eigvalsh(G)
        if eig.min() <= 0:
            raise ArgumentError("metric must be positive definite")
        self.metric = G
        self.metric.setflags(write=False)
        self.inverse_metric = np.linalg.inv(G)
        self._eig = eig

    @property
    def n(self) -> int:
        return self.metric.shape[0]

    @property
    def name(self) -> str:
        return f"t{self.n}"

    @property
    def condition_number(self) -> float:
        return float(self._eig.max() / self._eig.min())

    sectional_curvature = 0.0

    def point(self, coords) -> np.ndarray:
        q = np.atleast_1d(np.asarray(coords, dtype=float))
        if q.shape != (self.n,):
            raise ArgumentError(f"expected {self.n} torus coordinates, got shape {q.shape}")
        return np.mod(q, 1.0)

    def norm(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return math.sqrt(float(v @ self.metric @ v))

    def to_dict(self) -> dict:
        return {"model": "torus", "n": self.n, "metric": self.metric.tolist()}

    def _displacement(self, x, y) -> np.ndarray:
        return self.point(y) - self.point(x)

    def _length(self, delta, k) -> float:
        return self.norm(delta + np.asarray(k, dtype=float))

    def _window(self, delta, cutoff: float | None = None) -> int:
        # conservative window from the condition number, widened when needed
        # so that every k with ||delta + k||_G < cutoff is provably enumerated
        w = math.ceil(self.condition_number * (1.0 + float(np.linalg.norm(delta))))
        if cutoff is not None:
            rigorous = math.ceil(cutoff / math.sqrt(self._eig.min()) + float(np.abs(delta).max()))
            w = max(w, rigorous)
        return w

    def _lattice(self, delta, window: int):
        ks = np.array(list(itertools.product(range(-window, window + 1), repeat=self.n)), dtype=float)
        v = delta[None, :] + ks
        lengths = np.sqrt(np.einsum("ij,jk,ik->i", v, self.metric, v))
        return ks, lengths

    def torus_distance(self, q, target) -> float:
        """Distance between two torus points without the distinctness check."""
        delta = self._displacement(q, target)
        delta = delta - np.round(delta)
        ks, lengths = self._lattice(delta, self._window(delta))
        return float(lengths.min())

    def distance(self, x, y) -> float:
        delta = self._displacement(x, y)
        wrapped = delta - np.round(delta)
        if float(np.abs(wrapped).max()) < POINT_TOL:
            raise DegenerateInputError("x and y coincide; distinct points are required")
        ks, lengths = self._lattice(delta, self._window(delta))
        best = ks[int(np.argmin(lengths))]
        return self._length(delta, best)

    def check_nonconjugate(self, x, y) -> bool:
        return True

    def geodesic_spectrum(self, x, y, cutoff: float) -> list["GeodesicRecord"]:
        d = self.distance(x, y)
        if not cutoff > d:
            raise ArgumentError(f"cutoff {cutoff} must exceed distance {d}")
        delta = self._displacement(x, y)
        ks, lengths = self._lattice(delta, self._window(delta, cutoff))
        recs = []
        for k in ks[lengths < cutoff * (1 + 1e-12)]:
            length = self._length(delta, k)
            if length < cutoff:
                recs.append(GeodesicRecord(length, 0, tuple(int(c) for c in k)))
        return sorted(recs, key=GeodesicRecord.sort_key)


class RoundSphere:
    """Round 2-sphere ``{|v| = R}`` in ``R^3``."""

    def __init__(self, radius: float = 1.0):
        radius = float(radius)
        if not radius > 0:
            raise ArgumentError(f"sphere radius must be positive, got {radius}")
        self.radius = radius

    n = 2
    name = "s2"

    @property
    def sectional_curvature(self) -> float:
        return 1.0 / self.radius**2

    def point(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (3,):
            raise ArgumentError(f"sphere points are 3-vectors, got shape {v.shape}")
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise ArgumentError("zero vector is not a sphere direction")
        return v / nrm

    @staticmethod
    def point_at_angle(theta: float) -> tuple[np.ndarray, np.ndarray]:
        """North pole and the point at polar angle ``theta`` in the xz-plane."""
        return np.array([0.0, 0.0, 1.0]), np.array([math.sin(theta), 0.0, math.cos(theta)])

    def to_dict(self) -> dict:
        return {"model": "sphere", "radius": self.radius}

    def angle(self, x, y) -> float:
        c = float(np.clip(self.point(x) @ self.point(y), -1.0, 1.0))
        return math.acos(c)

    def distance(self, x, y) -> float:
        xh, yh = self.point(x), self.point(y)
        if np.linalg.norm(xh - yh) < POINT_TOL:
            raise DegenerateInputError("x and y coincide; distinct points are required")
        return self._arc(0, self.angle(xh, yh))

    def check_nonconjugate(self, x, y) -> bool:
        xh, yh = self.point(x), self.point(y)
        return bool(np.linalg.norm(xh - yh) >= CONJUGATE_TOL and np.linalg.norm(xh + yh) >= CONJUGATE_TOL)

    def _arc(self, m: int, theta: float) -> float:
        j, odd = divmod(m, 2)
        if odd:
            return self.radius * (2 * math.pi * (j + 1) - theta)
        return self.radius * (2 * math.pi * j + theta)

    def geodesic_spectrum(self, x, y, cutoff: float) -> list["GeodesicRecord"]:
        if not self.check_nonconjugate(x, y):
            raise NonMorseError(
                "x and y are conjugate on the round sphere (equal or antipodal); "
                "the energy functional is not Morse"
            )
        d = self.distance(x, y)
        if not cutoff > d:
            raise ArgumentError(f"cutoff {cutoff} must exceed distance {d}")
        theta = self.angle(x, y)
        recs = []
        m = 0
        while (length := self._arc(m, theta)) < cutoff:
            index = 0
            while (index + 1) * math.pi * self.radius < length:
                index += 1
            recs.append(GeodesicRecord(length, index, m))
            m += 1
        return recs


Manifold = Union[FlatTorus, RoundSphere]


@dataclass(frozen=True)
class GeodesicRecord:
    """One geodesic from x to y: its length, Morse index and homotopy class."""

    length: float
    morse_index: int
    class_tag: ClassTag

    def sort_key(self):
        tag = self.class_tag if isinstance(self.class_tag, tuple) else (self.class_tag,)
        return (self.length, self.morse_index, tag)

    def to_dict(self) -> dict:
        tag = list(self.class_tag) if isinstance(self.class_tag, tuple) else self.class_tag
        return {"length": self.length, "index": self.morse_index, "class": tag}


def distance(M: Manifold, x, y) -> float:
    return M.distance(x, y)


def geodesic_spectrum(M: Manifold, x, y, cutoff: float) -> list[GeodesicRecord]:
    """All geodesics from ``x`` to ``y`` shorter than ``cutoff``, sorted by length.

    Equal-length geodesics stay separate records with bit-identical lengths.
    """
    return M.geodesic_spectrum(x, y, cutoff)


def check_nonconjugate(M: Manifold, x, y) -> bool:
    return M.check_nonconjugate(x, y)


# ---------------------------------------------------------------------------
# numerical shooting oracle


def _rk4(rhs, state, t1: float, steps: int, record: bool = False):
    h = t1 / steps
    out = [state] if record else None
    for _ in range(steps):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * h * k1)
        k3 = rhs(state + 0.5 * h * k2)
        k4 = rhs(state + h * k3)
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if record:
            out.append(state)
    return np.array(out) if record else state


def _simpson(values, h: float) -> float:
    v = np.asarray(values)
    return float(h / 3.0 * (v[0] + v[-1] + 4 * v[1:-1:2].sum() + 2 * v[2:-1:2].sum()))


def jacobi_conjugate_count(curvature: float, length: float, steps: int = 4000) -> int:
    """Interior zeros of ``J'' + K J = 0``, ``J(0)=0, J'(0)=1`` on ``(0, length)``."""

    def rhs(s):
        return np.array([s[1], -curvature * s[0]])

    traj = _rk4(rhs, np.array([0.0, 1.0]), length, steps, record=True)
    J = traj[1:-1, 0]
    signs = np.sign(J[np.abs(J) > 1e-14])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def shoot_geodesic_bvp(
    M: Manifold,
    x,
    y,
    class_tag: ClassTag,
    tol: float = 1e-10,
    steps: int = 2000,
    max_iter: int = 50,
) -> GeodesicRecord:
    """Find the geodesic of a homotopy class by Newton shooting.

    For the torus, ``class_tag`` is the lattice vector ``k`` and the target is
    the lift ``y + k``. For the sphere, ``class_tag = m`` selects the great-circle
    geodesic whose speed lies between ``m pi R`` and ``(m+1) pi R``; Newton starts
    at the midpoint of that window.
    """
    if isinstance(M, FlatTorus):
        return _shoot_torus(M, x, y, class_tag, tol, steps, max_iter)
    if isinstance(M, RoundSphere):
        return _shoot_sphere(M, x, y, int(class_tag), tol, steps, max_iter)
    raise ArgumentError(f"unsupported manifold {M!r}")


def _newton(endpoint, v0, tol, max_iter, fd_step=1e-7, clamp=None):
    v = np.array(v0, dtype=float)
    r = endpoint(v)
    best = float(np.linalg.norm(r))
    for _ in range(max_iter):
        if best < tol:
            return v, best
        J = np.empty((r.size, v.size))
        for i in range(v.size):
            e = np.zeros_like(v)
            e[i] = fd_step
            J[:, i] = (endpoint(v + e) - endpoint(v - e)) / (2 * fd_step)
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        lam = 1.0
        while lam > 1e-4:
            cand = v + lam * step
            if clamp is not None:
                cand = clamp(cand)
            rc = endpoint(cand)
            if np.linalg.norm(rc) < np.linalg.norm(r):
                break
            lam *= 0.5
        v, r = cand, rc
        best = min(best, float(np.linalg.norm(r)))
    if best < tol:
        return v, best
    raise NoConvergenceError(f"geodesic shooting did not converge (residual {best:.3e})", best)


def _shoot_torus(M: FlatTorus, x, y, k, tol, steps, max_iter):
    n = M.n
    G = M.metric
    q0 = M.point(x)
    target = M.point(y) + np.asarray(k, dtype=float)

    def rhs(s):
        # constant metric: Christoffel symbols vanish
        return np.concatenate([s[n:], np.zeros(n)])

    def endpoint(v):
        return _rk4(rhs, np.concatenate([q0, v]), 1.0, steps // 10)[:n] - target

    v, _ = _newton(endpoint, np.zeros(n), tol, max_iter)
    traj = _rk4(rhs, np.concatenate([q0, v]), 1.0, steps, record=True)
    speeds = np.sqrt(np.einsum("ij,jk,ik->i", traj[:, n:], G, traj[:, n:]))
    length = _simpson(speeds, 1.0 / steps)
    index = jacobi_conjugate_count(M.sectional_curvature, length)
    return GeodesicRecord(length, index, tuple(int(c) for c in k))


def _shoot_sphere(M: RoundSphere, x, y, m, tol, steps, max_iter):
    R = M.radius
    xh, yh = M.point(x), M.point(y)
    if not M.check_nonconjugate(xh, yh):
        raise NonMorseError("conjugate endpoints on the round sphere")
    e1 = yh - (xh @ yh) * xh
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(xh, e1)
    start = R * xh
    target = R * yh
    lo, hi = m * math.pi * R, (m + 1) * math.pi * R

    def rhs(s):
        pos, vel = s[:3], s[3:]
        return np.concatenate([vel, -(vel @ vel) / R**2 * pos])

    def velocity(c):
        return c[0] * e1 + c[1] * e2

    def endpoint(c):
        return _rk4(rhs, np.concatenate([start, velocity(c)]), 1.0, steps)[:3] - target

    def clamp(c):
        # keep the speed inside this class's window between conjugate speeds
        speed = math.hypot(c[0], c[1])
        if speed <= lo or speed >= hi:
            c = c * (np.clip(speed, lo + 1e-6 * R, hi - 1e-6 * R) / speed)
        return c

    guess = 0.5 * (lo + hi)
    c0 = np.array([guess if m % 2 == 0 else -guess, 0.05 * R])
    c, _ = _newton(endpoint, c0, tol, max_iter, clamp=clamp)
    traj = _rk4(rhs, np.concatenate([start, velocity(c)]), 1.0, steps, record=True)
    length = _simpson(np.linalg.norm(traj[:, 3:], axis=1), 1.0 / steps)
    index = jacobi_conjugate_count(M.sectional_curvature, length)
    return GeodesicRecord(length, index, m)


def spectrum_to_json(records: Sequence[GeodesicRecord]) -> list[dict]:
    return [r.to_dict() for r in records]
