"""Autonomous Hamiltonians on the cotangent bundle of a flat torus.

All families are functions of ``q`` (torus coordinates, any lift) and ``p``
(covector), vectorized over leading axes, with analytic gradients. The fiber
norm is the dual metric ``r = sqrt(p^T G^{-1} p)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import ArgumentError

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# radial profiles h(r)


class RadialProfile:
    def value(self, r):
        raise NotImplementedError

    def deriv(self, r):
        raise NotImplementedError

    def max_slope(self, r_max: float, samples: int = 20001) -> tuple[float, float]:
        """``(max h', argmax)`` over ``[0, r_max]`` on a dense grid."""
        r = np.linspace(0.0, r_max, samples)
        d = self.deriv(r)
        i = int(np.argmax(d))
        return float(d[i]), float(r[i])


@dataclass(frozen=True)
class PowerProfile(RadialProfile):
    """``h(r) = coef * r**power``."""

    coef: float = 1.0
    power: float = 2.0

    def __post_init__(self):
        if self.power < 1:
            raise ArgumentError(f"power profile needs power >= 1, got {self.power}")
        if self.coef < 0:
            raise ArgumentError("power profile must be nondecreasing (coef >= 0)")

    def value(self, r):
        return self.coef * np.power(r, self.power)

    def deriv(self, r):
        if self.power == 1:
            return np.full_like(np.asarray(r, dtype=float), self.coef)
        return self.coef * self.power * np.power(r, self.power - 1)

    def to_dict(self):
        return {"kind": "power", "coef": self.coef, "power": self.power}


class SplineProfile(RadialProfile):
    """Monotone C^2 profile whose slope is a nonnegative clamped cubic B-spline.

    ``h'(r) = sum_i c_i B_i(r)`` on ``[0, r_max]`` with ``c_0 = 0`` (so ``h`` is
    smooth across the zero section) and the last two coefficients equal (so
    ``h''(r_max) = 0``); beyond ``r_max`` the profile continues linearly.
    """

    def __init__(self, coeffs, r_max: float, h0: float = 0.0):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 1 or c.size < 4:
            raise ArgumentError("spline profile needs at least 4 coefficients")
        if (c < 0).any():
            raise ArgumentError("spline slope coefficients must be nonnegative")
        if not r_max > 0:
            raise ArgumentError("r_max must be positive")
        c = c.copy()
        c[0] = 0.0
        c[-1] = c[-2]
        self.coeffs = c
        self.r_max = float(r_max)
        self.h0 = float(h0)
        k = 3
        n_inner = c.size - k - 1
        inner = np.linspace(0.0, self.r_max, n_inner + 2)[1:-1]
        knots = np.concatenate([[0.0] * (k + 1), inner, [self.r_max] * (k + 1)])
        self._slope = BSpline(knots, c, k, extrapolate=False)
        self._anti = self._slope.antiderivative()
        self._slope_end = float(c[-1])
        self._h_end = float(self._anti(self.r_max)) + self.h0

    def value(self, r):
        r = np.asarray(r, dtype=float)
        inside = np.minimum(r, self.r_max)
        out = self._anti(inside) + self.h0
        return np.where(r > self.r_max, self._h_end + self._slope_end * (r - self.r_max), out)

    def deriv(self, r):
        r = np.asarray(r, dtype=float)
        inside = np.minimum(r, self.r_max)
        return np.where(r > self.r_max, self._slope_end, self._slope(inside))

    def to_dict(self):
        return {"kind": "spline", "coeffs": self.coeffs.tolist(), "r_max": self.r_max, "h0": self.h0}


def radial_profile_from_dict(d: dict) -> RadialProfile:
    kind = d.get("kind")
    if kind == "power":
        return PowerProfile(float(d.get("coef", 1.0)), float(d.get("power", 2.0)))
    if kind == "spline":
        return SplineProfile(d["coeffs"], float(d["r_max"]), float(d.get("h0", 0.0)))
    raise ArgumentError(f"unknown radial profile {kind!r}")


# ---------------------------------------------------------------------------
# angular and bump pieces


@dataclass(frozen=True)
class TrigPolynomial:
    """``A(q) = sum_j a_j cos(2 pi m_j . q) + b_j sin(2 pi m_j . q)``."""

    modes: tuple = ()
    cos: tuple = ()
    sin: tuple = ()

    def _arrays(self, n):
        if not self.modes:
            return np.zeros((0, n)), np.zeros(0), np.zeros(0)
        m = np.array(self.modes, dtype=float).reshape(len(self.modes), -1)
        if m.shape[1] != n:
            raise ArgumentError(f"trig modes have dimension {m.shape[1]}, torus has {n}")
        return m, np.asarray(self.cos, dtype=float), np.asarray(self.sin, dtype=float)

    def value(self, q):
        q = np.asarray(q, dtype=float)
        m, a, b = self._arrays(q.shape[-1])
        phase = TWO_PI * q @ m.T
        return np.cos(phase) @ a + np.sin(phase) @ b

    def grad(self, q):
        q = np.asarray(q, dtype=float)
        m, a, b = self._arrays(q.shape[-1])
        phase = TWO_PI * q @ m.T
        w = -np.sin(phase) * a + np.cos(phase) * b
        return TWO_PI * w @ m

    def amplitude(self) -> float:
        return float(sum(math.hypot(a, b) for a, b in zip(self.cos, self.sin)))

    def to_dict(self):
        return {"modes": [list(np.atleast_1d(m).tolist()) for m in self.modes],
                "cos": list(self.cos), "sin": list(self.sin)}

    @classmethod
    def from_dict(cls, d):
        modes = tuple(tuple(int(v) for v in np.atleast_1d(m)) for m in d.get("modes", []))
        return cls(modes, tuple(float(v) for v in d.get("cos", [])), tuple(float(v) for v in d.get("sin", [])))


@dataclass(frozen=True)
class Bump:
    """C^2 bump ``(1 - u^2)^3`` with ``u = (r - center) / width`` on ``|u| < 1``."""

    center: float
    width: float

    def value(self, r):
        u = (np.asarray(r, dtype=float) - self.center) / self.width
        return np.where(np.abs(u) < 1, (1 - u * u) ** 3, 0.0)

    def deriv(self, r):
        u = (np.asarray(r, dtype=float) - self.center) / self.width
        return np.where(np.abs(u) < 1, -6 * u * (1 - u * u) ** 2 / self.width, 0.0)

    def to_dict(self):
        return {"center": self.center, "width": self.width}


# ---------------------------------------------------------------------------
# Hamiltonians


class Hamiltonian:
    """Base class; subclasses provide ``value`` and ``gradients``."""

    def __init__(self, metric):
        G = np.atleast_2d(np.asarray(metric, dtype=float))
        self.metric = G
        self.inverse_metric = np.linalg.inv(G)
        self.n = G.shape[0]

    radial = False

    def fiber_norm(self, p):
        p = np.asarray(p, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", p, self.inverse_metric, p))

    def _norm_and_grad(self, p):
        p = np.asarray(p, dtype=float)
        Gp = p @ self.inverse_metric
        r = np.sqrt(np.einsum("...i,...i->...", Gp, p))
        safe = np.where(r > 0, r, 1.0)
        dr = np.where((r > 0)[..., None], Gp / safe[..., None], 0.0)
        return r, dr

    def value(self, q, p):
        raise NotImplementedError

    def gradients(self, q, p):
        """``(dH/dq, dH/dp)`` with the shapes of ``q`` and ``p``."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class RadialHamiltonian(Hamiltonian):
    """``H(q, p) = h(|p|)``."""

    radial = True

    def __init__(self, profile: RadialProfile, metric=((1.0,),)):
        super().__init__(metric)
        self.profile = profile

    def value(self, q, p):
        return self.profile.value(self.fiber_norm(p))

    def gradients(self, q, p):
        r, dr = self._norm_and_grad(p)
        dHdp = self.profile.deriv(r)[..., None] * dr
        return np.zeros_like(np.asarray(q, dtype=float)), dHdp

    def to_dict(self):
        return {"family": "radial", "profile": self.profile.to_dict(), "metric": self.metric.tolist()}


class PerturbedRadialHamiltonian(Hamiltonian):
    """``H = h(|p|) + eps * A(q) * B(|p|)`` with a trig polynomial ``A`` and a bump ``B``."""

    def __init__(self, profile: RadialProfile, eps: float, angular: TrigPolynomial, bump: Bump, metric=((1.0,),)):
        super().__init__(metric)
        self.profile = profile
        self.eps = float(eps)
        self.angular = angular
        self.bump = bump

    def perturbation_bound(self) -> float:
        return abs(self.eps) * self.angular.amplitude()

    def value(self, q, p):
        r = self.fiber_norm(p)
        return self.profile.value(r) + self.eps * self.angular.value(q) * self.bump.value(r)

    def gradients(self, q, p):
        r, dr = self._norm_and_grad(p)
        A = self.angular.value(q)
        B = self.bump.value(r)
        dHdq = (self.eps * B)[..., None] * self.angular.grad(q)
        dHdp = (self.profile.deriv(r) + self.eps * A * self.bump.deriv(r))[..., None] * dr
        return dHdq, dHdp

    def to_dict(self):
        return {
            "family": "perturbed",
            "profile": self.profile.to_dict(),
            "eps": self.eps,
            "angular": self.angular.to_dict(),
            "bump": self.bump.to_dict(),
            "metric": self.metric.tolist(),
        }


class PotentialHamiltonian(Hamiltonian):
    """``H(q, p) = A(q)``: pure potential, no kinetic term."""

    def __init__(self, angular: TrigPolynomial, metric=((1.0,),)):
        super().__init__(metric)
        self.angular = angular

    def value(self, q, p):
        return self.angular.value(q)

    def gradients(self, q, p):
        return self.angular.grad(q), np.zeros_like(np.asarray(p, dtype=float))

    def to_dict(self):
        return {"family": "potential", "angular": self.angular.to_dict(), "metric": self.metric.tolist()}


def free_hamiltonian(metric=((1.0,),)) -> RadialHamiltonian:
    """``|p|^2 / 2``."""
    return RadialHamiltonian(PowerProfile(0.5, 2.0), metric)


def zero_hamiltonian(metric=((1.0,),)) -> RadialHamiltonian:
    return RadialHamiltonian(PowerProfile(0.0, 2.0), metric)


def hamiltonian_from_dict(d: dict, metric=None) -> Hamiltonian:
    metric = d.get("metric", metric if metric is not None else [[1.0]])
    family = d.get("family")
    if family == "radial":
        return RadialHamiltonian(radial_profile_from_dict(d["profile"]), metric)
    if family == "perturbed":
        b = d["bump"]
        return PerturbedRadialHamiltonian(
            radial_profile_from_dict(d["profile"]),
            float(d["eps"]),
            TrigPolynomial.from_dict(d["angular"]),
            Bump(float(b["center"]), float(b["width"])),
            metric,
        )
    if family == "potential":
        return PotentialHamiltonian(TrigPolynomial.from_dict(d["angular"]), metric)
    raise ArgumentError(f"unknown Hamiltonian family {family!r}")


def _parse_radial_expr(expr: str) -> RadialProfile:
    expr = expr.replace(" ", "")
    coef = 1.0
    if "*" in expr:
        head, expr = expr.split("*", 1)
        coef = float(head)
    if expr == "r":
        return PowerProfile(coef, 1.0)
    if expr.startswith("r^"):
        return PowerProfile(coef, float(expr[2:]))
    raise ArgumentError(f"cannot parse radial profile {expr!r} (expected r, r^k or c*r^k)")


def _parse_modes(text: str, n: int) -> TrigPolynomial:
    modes, cos, sin = [], [], []
    for item in text.split("|"):
        m, a, b = item.split(":")
        vec = tuple(int(v) for v in m.split("x"))
        if len(vec) == 1 and n > 1:
            vec = vec + (0,) * (n - 1)
        modes.append(vec)
        cos.append(float(a))
        sin.append(float(b))
    return TrigPolynomial(tuple(modes), tuple(cos), tuple(sin))


def parse_hamiltonian(text: str, metric=((1.0,),)) -> Hamiltonian:
    """Parse a Hamiltonian from JSON or a shorthand string.

    Shorthands::

        radial:r^2            radial:3*r^2        radial:r
        free                  zero
        spline:0,1,2,2;rmax=3
        perturbed:r^2;eps=0.1;modes=1:0:1;bump=1.5:0.6
        potential:modes=1:0:1

    ``modes`` lists ``m:cos:sin`` entries separated by ``|``; a mode vector
    with several components is written ``1x0``.
    """
    text = text.strip()
    if text.startswith("{"):
        return hamiltonian_from_dict(json.loads(text), metric)
    G = np.atleast_2d(np.asarray(metric, dtype=float))
    n = G.shape[0]
    head, *opts = text.split(";")
    kv = {}
    for o in opts:
        if "=" not in o:
            raise ArgumentError(f"bad option {o!r} in Hamiltonian spec")
        k, v = o.split("=", 1)
        kv[k.strip()] = v.strip()
    kind, _, arg = head.partition(":")
    try:
        if kind == "free":
            return free_hamiltonian(G)
        if kind == "zero":
            return zero_hamiltonian(G)
        if kind == "radial":
            return RadialHamiltonian(_parse_radial_expr(arg), G)
        if kind == "spline":
            coeffs = [float(c) for c in arg.split(",")]
            return RadialHamiltonian(SplineProfile(coeffs, float(kv.get("rmax", 3.0))), G)
        if kind == "perturbed":
            center, width = (float(v) for v in kv.get("bump", "1.5:1.0").split(":"))
            return PerturbedRadialHamiltonian(
                _parse_radial_expr(arg), float(kv.get("eps", 0.1)),
                _parse_modes(kv.get("modes", "1:0:1"), n), Bump(center, width), G,
            )
        if kind == "potential":
            modes = kv.get("modes") or arg.removeprefix("modes=") or "1:0:1"
            return PotentialHamiltonian(_parse_modes(modes, n), G)
    except (ValueError, KeyError) as exc:
        raise ArgumentError(f"cannot parse Hamiltonian {text!r}: {exc}") from exc
    raise ArgumentError(f"unknown Hamiltonian kind {kind!r}")
