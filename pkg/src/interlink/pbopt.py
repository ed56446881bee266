"""Poisson brackets, the deformed-form identities, and pb+ upper estimates.

Convention: ``{F, G} = sum_i (F_q_i G_p_i - F_p_i G_q_i) = dF(X_G)``, so
``{q, p} = 1``. With ``omega = dp ^ dq`` one has, in dimension 2n,

    dF ^ dG ^ omega^(n-1) = -(1/n) {F, G} omega^n,

and the Pfaffian of ``omega + tau dF ^ dG`` equals ``(1 - tau {F, G}) Pf(omega)``.

Upper estimates of pb+ use a product ansatz on T^1: ``F`` depends on ``q``
only and ``G`` on the fiber radius only, both C^2 monotone ramps whose
constancy near the prescribed sets holds by construction.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.interpolate import BSpline, PPoly
from scipy.optimize import brentq, minimize

from .bounds import ZERO_SECTION, QuadrupleSpec, bound_report
from .dynamics import worker_count
from .errors import ArgumentError
from .hamiltonians import TrigPolynomial
from .manifolds import FlatTorus


# ---------------------------------------------------------------------------
# phase-space functions


class PhaseFunction:
    """A function of ``(q, p)`` with gradients; vectorized over leading axes."""

    def value(self, q, p):
        raise NotImplementedError

    def gradients(self, q, p):
        raise NotImplementedError


class LinearFunction(PhaseFunction):
    """``c + a . q + b . p``."""

    def __init__(self, a_q, a_p, c: float = 0.0):
        self.a_q = np.atleast_1d(np.asarray(a_q, dtype=float))
        self.a_p = np.atleast_1d(np.asarray(a_p, dtype=float))
        self.c = float(c)

    def value(self, q, p):
        return self.c + np.asarray(q, dtype=float) @ self.a_q + np.asarray(p, dtype=float) @ self.a_p

    def gradients(self, q, p):
        q = np.asarray(q, dtype=float)
        return np.broadcast_to(self.a_q, q.shape).copy(), np.broadcast_to(self.a_p, q.shape).copy()


class ProductFunction(PhaseFunction):
    def __init__(self, first, second):
        self.first, self.second = first, second

    def value(self, q, p):
        return self.first.value(q, p) * self.second.value(q, p)

    def gradients(self, q, p):
        a, b = self.first.value(q, p), self.second.value(q, p)
        aq, ap = self.first.gradients(q, p)
        bq, bp = self.second.gradients(q, p)
        a, b = np.asarray(a)[..., None], np.asarray(b)[..., None]
        return a * bq + b * aq, a * bp + b * ap


class SmoothTestFunction(PhaseFunction):
    """``A(q) + b.p + p^T C p / 2 + B(q) (e.p)`` with trigonometric ``A`` and ``B``."""

    def __init__(self, A: TrigPolynomial, B: TrigPolynomial, b, C, e):
        self.A, self.B = A, B
        self.b = np.asarray(b, dtype=float)
        self.C = np.asarray(C, dtype=float)
        self.e = np.asarray(e, dtype=float)

    def value(self, q, p):
        p = np.asarray(p, dtype=float)
        quad = 0.5 * np.einsum("...i,ij,...j->...", p, self.C, p)
        return self.A.value(q) + p @ self.b + quad + self.B.value(q) * (p @ self.e)

    def gradients(self, q, p):
        p = np.asarray(p, dtype=float)
        dq = self.A.grad(q) + self.B.grad(q) * (p @ self.e)[..., None]
        dp = self.b + p @ self.C + self.B.value(q)[..., None] * self.e
        return dq, dp


def random_smooth_function(rng: np.random.Generator, n: int, modes: int = 2) -> SmoothTestFunction:
    def trig():
        ms = tuple(tuple(int(v) for v in rng.integers(-1, 2, size=n)) for _ in range(modes))
        return TrigPolynomial(ms, tuple(rng.normal(size=modes)), tuple(rng.normal(size=modes)))

    X = rng.normal(size=(n, n))
    return SmoothTestFunction(trig(), trig(), rng.normal(size=n), 0.5 * (X + X.T), rng.normal(size=n))


def poisson_bracket(F, G, q, p):
    """``sum_i (dF/dq_i dG/dp_i - dF/dp_i dG/dq_i)``."""
    Fq, Fp = F.gradients(q, p)
    Gq, Gp = G.gradients(q, p)
    return np.sum(Fq * Gp, axis=-1) - np.sum(Fp * Gq, axis=-1)


# ---------------------------------------------------------------------------
# deformed symplectic form


def pfaffian(A) -> float:
    """Pfaffian of a real antisymmetric matrix by pivoted skew elimination."""
    A = np.array(A, dtype=float)
    m = A.shape[0]
    if A.shape != (m, m) or m % 2:
        raise ArgumentError("pfaffian needs an even-dimensional square matrix")
    result = 1.0
    for k in range(0, m - 1, 2):
        piv = k + 1 + int(np.argmax(np.abs(A[k, k + 1:])))
        if piv != k + 1:
            A[[k + 1, piv]] = A[[piv, k + 1]]
            A[:, [k + 1, piv]] = A[:, [piv, k + 1]]
            result = -result
        if A[k, k + 1] == 0.0:
            return 0.0
        result *= A[k, k + 1]
        if k + 2 < m:
            # congruence clearing rows k, k+1 from the trailing block
            tau = A[k, k + 2:] / A[k, k + 1]
            A[k + 2:, k + 2:] += np.outer(A[k + 1, k + 2:], tau) - np.outer(tau, A[k + 1, k + 2:])
    return float(result)


def symplectic_matrix(n: int) -> np.ndarray:
    """Matrix of ``omega = sum dp_i ^ dq_i`` in the basis ``(q_1..q_n, p_1..p_n)``."""
    W = np.zeros((2 * n, 2 * n))
    W[:n, n:] = -np.eye(n)
    W[n:, :n] = np.eye(n)
    return W


def _wedge_matrix(u, v) -> np.ndarray:
    return np.outer(u, v) - np.outer(v, u)


def deformed_form(F, G, tau: float, q, p) -> np.ndarray:
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    Fq, Fp = F.gradients(q, p)
    Gq, Gp = G.gradients(q, p)
    dF = np.concatenate([Fq, Fp])
    dG = np.concatenate([Gq, Gp])
    return symplectic_matrix(q.size) + tau * _wedge_matrix(dF, dG)


def verify_degeneracy_identity(F, G, tau: float, q, p) -> float:
    """``|Pf(omega + tau dF^dG) - (1 - tau {F,G}) Pf(omega)|`` at ``(q, p)``."""
    n = np.atleast_1d(q).size
    lhs = pfaffian(deformed_form(F, G, tau, q, p))
    rhs = (1.0 - tau * float(poisson_bracket(F, G, np.atleast_1d(q), np.atleast_1d(p)))) * pfaffian(symplectic_matrix(n))
    return abs(lhs - rhs)


def wedge_identity_residual(F, G, q, p) -> float:
    """Residual of ``dF ^ dG ^ omega^(n-1) = -(1/n) {F,G} omega^n``.

    Top forms are compared through their coefficient on the coordinate
    volume, obtained as Pfaffians of the antisymmetric matrices: the
    coefficient of ``B ^ omega^(n-1)`` is ``(n-1)!`` times the linear-in-s
    term of ``Pf(omega + s B)``, and that of ``omega^n`` is ``n! Pf(omega)``.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    n = q.size
    Fq, Fp = F.gradients(q, p)
    Gq, Gp = G.gradients(q, p)
    B = _wedge_matrix(np.concatenate([Fq, Fp]), np.concatenate([Gq, Gp]))
    W = symplectic_matrix(n)
    # B has rank two, so Pf(W + s B) is affine in s
    linear = pfaffian(W + B) - pfaffian(W)
    lhs = math.factorial(n - 1) * linear
    rhs = -(1.0 / n) * float(poisson_bracket(F, G, q, p)) * math.factorial(n) * pfaffian(W)
    return abs(lhs - rhs)


def critical_tau(F, G, q, p) -> float:
    """Root of ``tau -> Pf(omega + tau dF^dG)`` located by bracketing."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    pb = float(poisson_bracket(F, G, q, p))
    if pb == 0.0:
        raise ArgumentError("the form stays nondegenerate: {F,G} vanishes at this point")
    guess = 1.0 / pb
    lo, hi = sorted((0.0, 2.0 * guess))
    return brentq(lambda t: pfaffian(deformed_form(F, G, t, q, p)), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


# ---------------------------------------------------------------------------
# admissible test functions


def _clustered_breaks(lo, hi, count):
    """Breakpoints clustered towards both ends, where the ramp switches on."""
    j = np.arange(count)
    return lo + (hi - lo) * 0.5 * (1.0 - np.cos(np.pi * j / (count - 1)))


class MonotoneRamp:
    """C^2 nondecreasing function equal to 0 below ``lo`` and 1 above ``hi``.

    The slope is a clamped cubic B-spline with nonnegative coefficients whose
    first two and last two coefficients are zero, so slope and curvature
    vanish at both ends.
    """

    def __init__(self, lo: float, hi: float, weights):
        w = np.asarray(weights, dtype=float)
        if not hi > lo:
            raise ArgumentError(f"ramp needs lo < hi, got [{lo}, {hi}]")
        if w.ndim != 1 or w.size < 1 or np.any(w < 0) or not np.any(w > 0):
            raise ArgumentError("ramp weights must be nonnegative and not all zero")
        self.lo, self.hi = float(lo), float(hi)
        self.weights = w
        coeffs = np.concatenate([[0.0, 0.0], w, [0.0, 0.0]])
        breaks = _clustered_breaks(self.lo, self.hi, w.size + 2)
        self.knots = np.concatenate([[self.lo] * 3, breaks, [self.hi] * 3])
        self._slope = BSpline(self.knots, coeffs, 3)
        self._integral = self._slope.antiderivative()
        self._total = float(self._integral(self.hi) - self._integral(self.lo))

    def value(self, u):
        u = np.asarray(u, dtype=float)
        inside = (self._integral(np.clip(u, self.lo, self.hi)) - self._integral(self.lo)) / self._total
        return np.where(u <= self.lo, 0.0, np.where(u >= self.hi, 1.0, inside))

    def deriv(self, u):
        u = np.asarray(u, dtype=float)
        inside = self._slope(np.clip(u, self.lo, self.hi)) / self._total
        return np.where((u <= self.lo) | (u >= self.hi), 0.0, inside)

    def argmax_slope(self) -> tuple[float, float]:
        """Exact ``(location, value)`` of the largest derivative (critical points of the cubic slope)."""
        dpp = PPoly.from_spline(self._slope.derivative())
        pts = np.concatenate([np.real(dpp.roots(extrapolate=False)), self.knots])
        pts = np.unique(pts[(pts >= self.lo) & (pts <= self.hi)])
        vals = self._slope(pts)
        k = int(np.argmax(vals))
        return float(pts[k]), float(vals[k]) / self._total

    def max_slope(self) -> float:
        return self.argmax_slope()[1]


class FiberRamp(PhaseFunction):
    """``F(q)`` on T^1: 0 near ``x``, rising to 1 over the short arc to ``y``, falling back over the long arc."""

    def __init__(self, x: float, y: float, weights, margin: float = 0.01):
        x, y = float(x) % 1.0, float(y) % 1.0
        forward = (y - x) % 1.0
        if forward == 0.0:
            raise ArgumentError("x and y coincide")
        self.orientation = 1.0 if forward <= 0.5 else -1.0
        self.arc = forward if forward <= 0.5 else 1.0 - forward
        self.x, self.y = x, y
        m = margin * self.arc
        self.rise = MonotoneRamp(m, self.arc - m, weights)
        self.fall = MonotoneRamp(self.arc + m, 1.0 - m, weights)

    def _u(self, q):
        return (self.orientation * (np.asarray(q, dtype=float)[..., 0] - self.x)) % 1.0

    def value(self, q, p):
        u = self._u(q)
        return self.rise.value(u) - self.fall.value(u)

    def slope(self, u):
        """``dF/du`` along the oriented arc parameter."""
        return self.rise.deriv(u) - self.fall.deriv(u)

    def gradients(self, q, p):
        dq = (self.orientation * self.slope(self._u(q)))[..., None]
        return dq, np.zeros_like(np.asarray(p, dtype=float))


class RadialRamp(PhaseFunction):
    """``G(|p|)`` with the dual-metric fiber norm."""

    def __init__(self, lo: float, hi: float, weights, metric=((1.0,),)):
        self.ramp = MonotoneRamp(lo, hi, weights)
        self.metric = np.atleast_2d(np.asarray(metric, dtype=float))
        self.inverse_metric = np.linalg.inv(self.metric)

    def _radius(self, p):
        p = np.asarray(p, dtype=float)
        Gp = p @ self.inverse_metric
        return np.sqrt(np.einsum("...i,...i->...", Gp, p)), Gp

    def value(self, q, p):
        return self.ramp.value(self._radius(p)[0])

    def gradients(self, q, p):
        r, Gp = self._radius(p)
        safe = np.where(r > 0, r, 1.0)
        dp = (self.ramp.deriv(r) / safe)[..., None] * Gp
        return np.zeros_like(np.asarray(q, dtype=float)), dp


@dataclass
class TestFunctionPair:
    F: FiberRamp
    G: RadialRamp

    def to_dict(self):
        return {
            "F": {"x": self.F.x, "y": self.F.y, "rise": [self.F.rise.lo, self.F.rise.hi],
                  "fall": [self.F.fall.lo, self.F.fall.hi], "weights": self.F.rise.weights.tolist()},
            "G": {"ramp": [self.G.ramp.lo, self.G.ramp.hi], "weights": self.G.ramp.weights.tolist()},
        }


# ---------------------------------------------------------------------------
# minimax estimation


@dataclass
class OptimizerConfig:
    restarts: int = 4
    f_weights: int = 10
    g_weights: int = 10
    max_evals: int = 3000
    refine_sweeps: int = 4
    margin: float = 0.01
    q_points: int = 512
    r_points: int = 256
    seed: int = 0
    threads: int | None = None

    def to_dict(self):
        return asdict(self)


def _refined_grid(lo, hi, count, knots):
    """Uniform grid with two extra points per cell next to each knot."""
    base = np.linspace(lo, hi, count)
    h = (hi - lo) / (count - 1)
    near = knots[(knots >= lo) & (knots <= hi)]
    extra = (near[:, None] + h * np.array([-0.5, -0.25, 0.0, 0.25, 0.5])[None, :]).ravel()
    return np.unique(np.concatenate([base, np.clip(extra, lo, hi)]))


class _Objective:
    def __init__(self, quadruple: QuadrupleSpec, config: OptimizerConfig):
        M = quadruple.manifold
        if not isinstance(M, FlatTorus) or M.n != 1:
            raise ArgumentError("pb+ estimation is implemented on the circle T^1")
        self.quadruple, self.config = quadruple, config
        self.metric = M.metric
        self.sqrt_g = math.sqrt(float(M.metric[0, 0]))
        if quadruple.variant == ZERO_SECTION:
            width = quadruple.a
            self.g_lo, self.g_hi = config.margin * width, quadruple.a - config.margin * width
            self.r_top = quadruple.a + 2.0
        else:
            width = quadruple.b - quadruple.a
            self.g_lo, self.g_hi = quadruple.a + config.margin * width, quadruple.b - config.margin * width
            self.r_top = quadruple.b + 2.0
        self.nf = config.f_weights

    def pair(self, theta) -> TestFunctionPair:
        w = np.asarray(theta, dtype=float) ** 2 + 1e-12
        F = FiberRamp(self.quadruple.x[0], self.quadruple.y[0], w[:self.nf], self.config.margin)
        G = RadialRamp(self.g_lo, self.g_hi, w[self.nf:], self.metric)
        return TestFunctionPair(F, G)

    def grids(self, pair):
        cfg = self.config
        knots_u = np.concatenate([pair.F.rise.knots, pair.F.fall.knots])
        u = _refined_grid(0.0, 1.0, cfg.q_points, knots_u)
        r = _refined_grid(0.0, self.r_top, cfg.r_points, pair.G.ramp.knots)
        return u, r

    def grid_max(self, theta) -> float:
        """Max of {F,G} over the (q, +-r) grid.

        For the product ansatz ``{F,G}(q,p) = F'(q) G'(r) sign(p) / sqrt(g)``,
        so the 2D grid maximum factorizes into 1D maxima.
        """
        pair = self.pair(theta)
        u, r = self.grids(pair)
        fs = pair.F.slope(u)
        gs = pair.G.ramp.deriv(r)
        gmax, gmin = float(gs.max()), float(gs.min())
        cands = [fs.max() * gmax, fs.min() * gmin, -fs.min() * gmax, -fs.max() * gmin]
        return float(max(cands)) / self.sqrt_g

    def full_grid_max(self, pair) -> float:
        """The same maximum evaluated through poisson_bracket on the full grid."""
        u, r = self.grids(pair)
        q = (pair.F.x + pair.F.orientation * u)[:, None, None]
        pr = np.concatenate([-r[::-1], r]) * self.sqrt_g
        Q = np.broadcast_to(q, (u.size, pr.size, 1))
        P = np.broadcast_to(pr[None, :, None], (u.size, pr.size, 1))
        return float(np.max(poisson_bracket(pair.F, pair.G, Q, P)))

    def exact_max(self, pair) -> float:
        fmax = max(pair.F.rise.max_slope(), pair.F.fall.max_slope())
        return fmax * pair.G.ramp.max_slope() / self.sqrt_g


@dataclass
class PbEstimate:
    quadruple: dict
    upper: float
    grid_upper: float
    lower: float
    gap_ratio: float
    pair: dict
    stagnated: bool
    seed: int
    clamped: bool
    grid_error_bound: float
    restarts: list

    def to_dict(self):
        return asdict(self)


def _coordinate_refine(f, theta, value, sweeps):
    theta = np.array(theta, dtype=float)
    step = 0.1
    for _ in range(sweeps):
        improved = False
        for i in range(theta.size):
            for sgn in (1.0, -1.0):
                trial = theta.copy()
                trial[i] *= 1.0 + sgn * step
                v = f(trial)
                if v < value:
                    theta, value, improved = trial, v, True
                    break
        if not improved:
            step *= 0.5
    return theta, value


def estimate_pb_upper(quadruple: QuadrupleSpec, config: OptimizerConfig | None = None) -> PbEstimate:
    """Minimax upper estimate of pb+ over admissible product pairs.

    Each restart runs a Nelder-Mead descent on the grid maximum from a
    seeded perturbation of uniform spline weights, followed by coordinate
    refinement. The reported ``upper`` is the exact supremum of {F,G} for the
    best pair, hence a genuine upper bound for pb+.
    """
    config = config or OptimizerConfig()
    obj = _Objective(quadruple, config)
    dim = config.f_weights + config.g_weights
    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)

    def restart(i):
        rng = np.random.default_rng(seeds[i])
        theta0 = 1.0 + (0.2 * rng.standard_normal(dim) if i else np.zeros(dim))
        res = minimize(obj.grid_max, theta0, method="Nelder-Mead",
                       options={"maxfev": config.max_evals, "xatol": 1e-6, "fatol": 1e-10, "adaptive": True})
        theta, value = _coordinate_refine(obj.grid_max, res.x, float(res.fun), config.refine_sweeps)
        return i, theta, value, bool(res.success)

    workers = worker_count(config.threads)
    if workers > 1 and config.restarts > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(restart, range(config.restarts)))
    else:
        runs = [restart(i) for i in range(config.restarts)]
    i_best, theta, grid_value, _ = min(runs, key=lambda r: (r[2], r[0]))
    pair = obj.pair(theta)
    exact = obj.exact_max(pair)
    clamped = exact < 0
    upper = max(exact, 0.0)
    lower = bound_report(quadruple).pb_lower
    return PbEstimate(
        quadruple=quadruple.to_dict(),
        upper=upper,
        grid_upper=grid_value,
        lower=lower,
        gap_ratio=upper / lower,
        pair=pair.to_dict(),
        stagnated=not any(r[3] for r in runs),
        seed=config.seed,
        clamped=clamped,
        grid_error_bound=exact - grid_value,
        restarts=[{"index": r[0], "grid_max": r[2], "converged": r[3]} for r in sorted(runs, key=lambda r: r[0])],
    )
