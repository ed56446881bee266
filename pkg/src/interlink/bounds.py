"""Poisson-bracket lower bounds, interlinking constants and chord time budgets.

A bar ``(mu, C mu]`` in the wrapped Floer barcode of two fibers gives, for
radii ``0 < a < b`` with ``b / a <= C``,

    pb+(fiber_x, fiber_y, S_a, S_b) >= 1 / (mu (b - a)),

and a semi-infinite bar additionally gives ``pb+(..., core, S_b) >= 1 / (mu b)``.
For cotangent fibers the bar ``(d, inf)`` always exists, ``d = dist(x, y)``.
A lower bound ``1/kappa`` on pb+ means every Hamiltonian that separates the
pair by ``Delta`` has a chord of time at most ``kappa / Delta``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ArgumentError, HypothesisError, InvalidBarError, NotSeparatingError
from .manifolds import Manifold
from .persistence import Bar, find_bar_with_ratio
from .wfh import wfh_barcode

SPHERES = "spheres"
ZERO_SECTION = "zero-section"


@dataclass(frozen=True)
class QuadrupleSpec:
    """Fibers over ``x`` and ``y`` together with a separating pair of sets.

    ``variant == "spheres"``: (S_a, S_b) with ``0 < a < b``.
    ``variant == "zero-section"``: (zero section, S_a); ``b`` is unused.
    """

    manifold: Manifold
    x: tuple
    y: tuple
    a: float
    b: float | None = None
    variant: str = SPHERES

    def __post_init__(self):
        if self.variant not in (SPHERES, ZERO_SECTION):
            raise ArgumentError(f"unknown quadruple variant {self.variant!r}")
        if not self.a > 0:
            raise ArgumentError(f"radius a must be positive, got {self.a}")
        if self.variant == SPHERES and (self.b is None or not self.b > self.a):
            raise ArgumentError(f"need 0 < a < b, got a={self.a}, b={self.b}")
        object.__setattr__(self, "x", tuple(np.atleast_1d(np.asarray(self.x, dtype=float)).tolist()))
        object.__setattr__(self, "y", tuple(np.atleast_1d(np.asarray(self.y, dtype=float)).tolist()))

    @property
    def inner_radius(self) -> float:
        return 0.0 if self.variant == ZERO_SECTION else self.a

    @property
    def outer_radius(self) -> float:
        return self.a if self.variant == ZERO_SECTION else self.b

    def sets(self, reverse: bool = False) -> list[str]:
        y0 = "0_{T*N}" if self.variant == ZERO_SECTION else f"S*_{self.a}"
        y1 = f"S*_{self.outer_radius}"
        if reverse:
            return [y1, y0, "T*_x", "T*_y"]
        return ["T*_x", "T*_y", y0, y1]

    def to_dict(self) -> dict:
        out = {
            "variant": self.variant,
            "manifold": self.manifold.to_dict(),
            "x": list(self.x),
            "y": list(self.y),
            "a": self.a,
        }
        if self.variant == SPHERES:
            out["b"] = self.b
        return out


def _ratio_holds(a: float, b: float, bar: Bar) -> bool:
    if bar.infinite:
        return True
    return Fraction(b) / Fraction(a) <= Fraction(bar.right) / Fraction(bar.left)


def pb_lower_from_bar(bar: Bar, a: float, b: float) -> float:
    """Lower bound ``1 / (mu (b - a))`` from a bar ``(mu, C mu]`` with ``b/a <= C``."""
    if not bar.left > 0:
        raise InvalidBarError(f"bar left endpoint must be positive (pb+ is finite), got {bar.left}")
    if not (0 < a < b):
        raise ArgumentError(f"need 0 < a < b, got a={a}, b={b}")
    if not _ratio_holds(a, b, bar):
        raise HypothesisError(
            f"ratio hypothesis b/a <= C fails: b/a = {b / a} > C = {bar.right / bar.left}"
        )
    return 1.0 / (bar.left * (b - a))


def pb_lower_core(mu: float, b: float) -> float:
    """Lower bound ``1 / (mu b)`` from a semi-infinite bar starting at ``mu``."""
    if not (mu > 0 and b > 0):
        raise ArgumentError(f"need mu > 0 and b > 0, got mu={mu}, b={b}")
    return 1.0 / (mu * b)


def certified_distance_bar(M: Manifold, x, y) -> Bar | None:
    """The ``(d, inf)`` bar, taken from the computed barcode; None if uncertifiable."""
    if not M.check_nonconjugate(x, y):
        return None
    d = M.distance(x, y)
    res = wfh_barcode(M, x, y, 2.0 * d)
    bar = find_bar_with_ratio(res.barcode, math.inf, wrapped_floer=True)
    if bar is None or bar.left != d:
        raise AssertionError(f"expected the bar ({d}, inf) in the barcode, found {bar}")
    return bar


def cotangent_bounds(M: Manifold, x, y, a: float, b: float) -> tuple[float, float]:
    """``(1/(d(b-a)), 1/(d a))`` for the fibers over ``x`` and ``y``."""
    if not (0 < a < b):
        raise ArgumentError(f"need 0 < a < b, got a={a}, b={b}")
    bar = certified_distance_bar(M, x, y)
    if bar is None:
        warnings.warn(
            "x and y are conjugate; barcode certificate skipped, bound obtained "
            "from the distance by semi-continuity",
            RuntimeWarning,
            stacklevel=2,
        )
        bar = Bar(M.distance(x, y), math.inf, 0)
    return pb_lower_from_bar(bar, a, b), pb_lower_core(bar.left, a)


def kappa_from_pb(pb_lower: float) -> float:
    """Interlinking constant from a pb+ lower bound (an upper bound on the tight kappa)."""
    if not pb_lower > 0:
        raise ArgumentError(f"pb lower bound must be positive, got {pb_lower}")
    return 1.0 / pb_lower


def chord_time_budget(kappa: float, delta: float) -> float:
    if not kappa > 0:
        raise ArgumentError(f"kappa must be positive, got {kappa}")
    if not delta > 0:
        raise NotSeparatingError(f"Delta = {delta} <= 0: the Hamiltonian does not separate the pair")
    return kappa / delta


@dataclass(frozen=True)
class BoundReport:
    quadruple: QuadrupleSpec
    d: float
    pb_lower: float
    kappa: float
    bar: Bar
    ratio_ok: bool
    certified: bool

    def to_dict(self) -> dict:
        q = self.quadruple
        forward = {"sets": q.sets(), "pb_lower": self.pb_lower, "kappa": self.kappa}
        # anti-symmetry: pb+(X0,X1,Y0,Y1) = pb+(Y1,Y0,X0,X1)
        reverse = {"sets": q.sets(reverse=True), "pb_lower": self.pb_lower, "kappa": self.kappa}
        swapped = {"sets": ["T*_y", "T*_x"] + q.sets()[2:], "pb_lower": self.pb_lower, "kappa": self.kappa}
        return {
            "quadruple": q.to_dict(),
            "d": self.d,
            "pb_lower": self.pb_lower,
            "kappa": self.kappa,
            "bar": self.bar.to_dict(),
            "ratio_ok": self.ratio_ok,
            "barcode_certified": self.certified,
            "both_orderings": True,
            "orderings": [forward, reverse, swapped],
        }


def bound_report(quadruple: QuadrupleSpec) -> BoundReport:
    M, x, y = quadruple.manifold, quadruple.x, quadruple.y
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        bar = certified_distance_bar(M, x, y)
    certified = bar is not None
    if bar is None:
        warnings.warn("conjugate points: bound from the distance formula without barcode certificate",
                      RuntimeWarning, stacklevel=2)
        bar = Bar(M.distance(x, y), math.inf, 0)
    if quadruple.variant == SPHERES:
        pb = pb_lower_from_bar(bar, quadruple.a, quadruple.b)
        ratio_ok = _ratio_holds(quadruple.a, quadruple.b, bar)
    else:
        pb = pb_lower_core(bar.left, quadruple.a)
        ratio_ok = bar.infinite
    return BoundReport(quadruple, bar.left, pb, kappa_from_pb(pb), bar, ratio_ok, certified)
