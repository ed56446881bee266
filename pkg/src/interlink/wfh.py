"""Filtered Morse complex of the path space and its barcode.

Generators are the geodesics from x to y below a cutoff, graded by Morse
index and filtered by length (the square root of the energy of a geodesic
parametrized proportionally to arc length). The persistence module of this
complex is isomorphic to the wrapped Floer homology of the two cotangent
fibers, so its barcode is reported as theirs.

Both shipped models have a zero Morse differential: on a flat torus every
geodesic has index 0, and on the round sphere there is one geodesic per
degree while the based loop space has rank one homology in every degree.
:func:`path_space_complex` asserts this instead of assuming it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, NonMorseError
from .manifolds import FlatTorus, GeodesicRecord, Manifold, RoundSphere
from .persistence import Bar, Barcode, FilteredComplex, reduce_barcode


@dataclass
class PathSpaceComplex:
    complex: FilteredComplex
    records: list[GeodesicRecord]
    manifold: Manifold
    x: np.ndarray
    y: np.ndarray
    cutoff: float
    distance: float = math.nan

    @property
    def provenance(self) -> dict:
        return {
            "manifold": self.manifold.to_dict(),
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "cutoff": self.cutoff,
        }


def _assert_zero_differential(M: Manifold, records: list[GeodesicRecord]) -> None:
    if isinstance(M, FlatTorus):
        bad = [r for r in records if r.morse_index != 0]
        if bad:
            raise AssertionError(f"flat torus produced geodesics of nonzero index: {bad}")
        return
    if isinstance(M, RoundSphere):
        degrees = sorted(r.morse_index for r in records)
        if degrees != list(range(len(records))):
            raise AssertionError(
                "sphere spectrum should carry exactly one geodesic per degree "
                f"0..m (rank of loop-space homology), got degrees {degrees}"
            )
        return
    raise AssertionError(f"no zero-differential argument for {M!r}; a Morse differential is required")


def path_space_complex(M: Manifold, x, y, cutoff: float) -> PathSpaceComplex:
    """Build the length-filtered Morse complex of geodesics from ``x`` to ``y``."""
    xp, yp = M.point(x), M.point(y)
    if not M.check_nonconjugate(xp, yp):
        raise NonMorseError("x and y are conjugate: the energy functional on the path space is not Morse")
    d = M.distance(xp, yp)
    if not cutoff > d:
        warnings.warn(f"cutoff {cutoff} does not exceed distance {d}; complex is empty", RuntimeWarning, stacklevel=2)
        return PathSpaceComplex(FilteredComplex(), [], M, xp, yp, float(cutoff), d)
    records = M.geodesic_spectrum(xp, yp, cutoff)
    _assert_zero_differential(M, records)
    gens = [(i, r.morse_index, r.length) for i, r in enumerate(records)]
    return PathSpaceComplex(FilteredComplex(gens, {}), records, M, xp, yp, float(cutoff), d)


@dataclass
class WFHResult:
    barcode: Barcode
    distance: float
    cutoff: float
    provenance: dict = field(default_factory=dict)

    def certified_bars(self) -> list[Bar]:
        """Bars whose right endpoint lies strictly below the cutoff."""
        return [b for b in self.barcode if not b.infinite and b.right < self.cutoff]

    def to_dict(self) -> dict:
        out = dict(self.provenance)
        out.update(
            distance=self.distance,
            bars=[b.to_dict() for b in self.barcode],
            certified_to=self.cutoff,
            truncation=(
                'semi-infinite bars ("right": "inf") are only certified to persist '
                "up to certified_to"
            ),
        )
        return out


def wfh_barcode(M: Manifold, x, y, cutoff: float) -> WFHResult:
    """Wrapped Floer barcode of the fibers over ``x`` and ``y`` up to ``cutoff``."""
    psc = path_space_complex(M, x, y, cutoff)
    barcode = reduce_barcode(psc.complex)
    if psc.records:
        lead = [b for b in barcode.in_degree(0) if b.left == psc.distance and b.infinite]
        if not lead:
            raise AssertionError("barcode is missing the bar (d, inf) in degree 0")
    return WFHResult(barcode, psc.distance, psc.cutoff, psc.provenance)


def distance_bar(result: WFHResult) -> Bar:
    """The semi-infinite degree-0 bar starting at the distance."""
    for b in result.barcode.in_degree(0):
        if b.left == result.distance and b.infinite:
            return b
    raise ArgumentError("no (d, inf) bar: cutoff below the distance?")
