"""Persistence modules over Z/2: barcodes of filtered complexes and rank queries.

Sublevels are strict: the chain group at level ``t`` is spanned by generators of
filtration strictly below ``t``. A class born by a generator at ``f`` and killed
by a generator at ``g`` therefore lives exactly on ``(f, g]``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

from .errors import ArgumentError, MalformedInputError

INF = math.inf


@dataclass(frozen=True, order=True)
class Bar:
    """Half-open interval ``(left, right]``; ``right = inf`` means ``(left, inf)``."""

    left: float
    right: float
    degree: int = 0

    def __post_init__(self):
        object.__setattr__(self, "left", float(self.left))
        object.__setattr__(self, "right", float(self.right))
        object.__setattr__(self, "degree", int(self.degree))
        if not self.left > -INF:
            raise ArgumentError(f"bar left endpoint must be finite, got {self.left}")
        if not self.left < self.right:
            raise ArgumentError(f"bar needs left < right, got ({self.left}, {self.right}]")

    @property
    def infinite(self) -> bool:
        return self.right == INF

    @property
    def ratio(self) -> float:
        """Endpoint ratio ``right / left`` (inf for semi-infinite bars)."""
        if self.infinite:
            return INF
        return self.right / self.left

    def contains(self, t: float) -> bool:
        return self.left < t <= self.right

    def to_dict(self) -> dict:
        return {
            "left": self.left,
            "right": "inf" if self.infinite else self.right,
            "degree": self.degree,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Bar":
        right = d["right"]
        right = INF if right == "inf" else float(right)
        return cls(float(d["left"]), right, int(d["degree"]))


@dataclass(frozen=True)
class Barcode:
    """Finite multiset of bars kept in canonical (left, right, degree) order.

    Multiplicity is repetition: two identical bars appear twice in ``bars``.
    """

    bars: tuple[Bar, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "bars", tuple(sorted(self.bars)))

    def __len__(self):
        return len(self.bars)

    def __iter__(self):
        return iter(self.bars)

    def in_degree(self, degree: int) -> list[Bar]:
        return [b for b in self.bars if b.degree == degree]

    @property
    def degrees(self) -> list[int]:
        return sorted({b.degree for b in self.bars})

    def to_json(self) -> str:
        return json.dumps([b.to_dict() for b in self.bars])

    @classmethod
    def from_json(cls, text: str) -> "Barcode":
        return cls(tuple(Bar.from_dict(d) for d in json.loads(text)))


@dataclass
class FilteredComplex:
    """Z/2 chain complex with a real filtration value on every generator.

    ``generators`` holds ``(identifier, degree, filtration)`` triples and
    ``boundary`` maps an identifier to the identifiers in its boundary
    (a sparse Z/2 column; listing an entry twice cancels it).
    """

    generators: list[tuple[Hashable, int, float]] = field(default_factory=list)
    boundary: dict[Hashable, Iterable[Hashable]] = field(default_factory=dict)

    def __len__(self):
        return len(self.generators)

    def index(self) -> dict[Hashable, int]:
        ids = {}
        for i, (gid, _, _) in enumerate(self.generators):
            if gid in ids:
                raise MalformedInputError(f"duplicate generator identifier {gid!r}")
            ids[gid] = i
        return ids

    def columns(self) -> list[set[int]]:
        """Boundary columns as sets of generator positions (mod 2 reduced)."""
        ids = self.index()
        cols: list[set[int]] = [set() for _ in self.generators]
        for gid, faces in self.boundary.items():
            if gid not in ids:
                raise MalformedInputError(f"boundary given for unknown generator {gid!r}")
            col = cols[ids[gid]]
            for face in faces:
                if face not in ids:
                    raise MalformedInputError(f"unknown face {face!r} in boundary of {gid!r}")
                col ^= {ids[face]}
        return cols

    def validate(self) -> list[set[int]]:
        cols = self.columns()
        gens = self.generators
        for j, col in enumerate(cols):
            _, deg, filt = gens[j]
            if not math.isfinite(filt):
                raise MalformedInputError(f"generator {gens[j][0]!r} has non-finite filtration")
            for i in col:
                if gens[i][1] != deg - 1:
                    raise MalformedInputError(
                        f"boundary of {gens[j][0]!r} (degree {deg}) contains "
                        f"{gens[i][0]!r} of degree {gens[i][1]}"
                    )
                if gens[i][2] > filt:
                    raise MalformedInputError(
                        f"boundary of {gens[j][0]!r} increases filtration "
                        f"({gens[i][2]} > {filt})"
                    )
        for j, col in enumerate(cols):
            acc: set[int] = set()
            for i in col:
                acc ^= cols[i]
            if acc:
                raise MalformedInputError(f"d^2 != 0 on generator {gens[j][0]!r}")
        return cols


def reduce_barcode(complex: FilteredComplex) -> Barcode:
    """Barcode of the strict-sublevel persistence module of ``complex``.

    Standard column reduction with lowest-one pairing. Generators are processed
    in (filtration, degree, input position) order, so faces always precede
    cofaces even when filtration values tie.
    """
    cols = complex.validate()
    gens = complex.generators
    order = sorted(range(len(gens)), key=lambda i: (gens[i][2], gens[i][1], i))
    pos = {g: k for k, g in enumerate(order)}

    # columns as python-int bitsets over sorted positions; low = highest set bit
    reduced = []
    for g in order:
        bits = 0
        for i in cols[g]:
            bits |= 1 << pos[i]
        reduced.append(bits)

    low_owner: dict[int, int] = {}
    paired_birth: dict[int, int] = {}
    for j in range(len(order)):
        col = reduced[j]
        while col:
            low = col.bit_length() - 1
            other = low_owner.get(low)
            if other is None:
                break
            col ^= reduced[other]
        reduced[j] = col
        if col:
            low = col.bit_length() - 1
            low_owner[low] = j
            paired_birth[low] = j

    bars = []
    killers = set(paired_birth.values())
    for k, g in enumerate(order):
        if k in killers:
            continue
        _, deg, birth = gens[g]
        if k in paired_birth:
            death = gens[order[paired_birth[k]]][2]
            if death > birth:
                bars.append(Bar(birth, death, deg))
        else:
            bars.append(Bar(birth, INF, deg))
    return Barcode(tuple(bars))


def rank_map(barcode: Barcode, s: float, t: float, degree: int) -> int:
    """Rank of the persistence map from level ``s`` to level ``t`` in ``degree``."""
    if s > t:
        raise ArgumentError(f"rank_map needs s <= t, got s={s}, t={t}")
    return sum(1 for b in barcode.bars if b.degree == degree and b.left < s and t <= b.right)


def shift_barcode(barcode: Barcode, c: float) -> Barcode:
    """Barcode of the shifted module ``V[+c]_t = V_{t+c}``: every bar moves by ``-c``."""
    return Barcode(tuple(Bar(b.left - c, b.right - c, b.degree) for b in barcode.bars))


def find_bar_with_ratio(barcode: Barcode, C: float, *, wrapped_floer: bool = False) -> Bar | None:
    """Bar ``(mu, nu]`` with ``mu > 0`` and ``nu / mu >= C``, smallest ``mu`` first.

    Ties on ``mu`` prefer the longer bar, then the lower degree. With
    ``wrapped_floer=True`` a bar starting at or below zero triggers a warning,
    since such a barcode cannot come from a wrapped Floer module.
    """
    if not C > 1:
        raise ArgumentError(f"ratio threshold must exceed 1, got {C}")
    if wrapped_floer and any(b.left <= 0 for b in barcode.bars):
        warnings.warn(
            "barcode has a bar with left endpoint <= 0; inconsistent with a finite "
            "Poisson bracket invariant",
            RuntimeWarning,
            stacklevel=2,
        )
    eligible = [b for b in barcode.bars if b.left > 0 and b.ratio >= C]
    if not eligible:
        return None
    return min(eligible, key=lambda b: (b.left, -b.right, b.degree))


def witness_rank_gap(
    barcode: Barcode,
    a: float,
    b: float,
    delta: float,
    s: float,
    sigma: float,
    degree: int,
) -> bool:
    """Barcode certificate for a persistent element born just after ``a``.

    True iff the image of level ``a + delta`` at level ``s`` is strictly larger
    than the image of level ``sigma``, i.e. some element of ``V_{a+delta}``
    survives to ``s`` outside the image from ``sigma``.
    """
    if not delta > 0:
        raise ArgumentError(f"delta must be positive, got {delta}")
    if not (a + delta <= s <= b):
        raise ArgumentError(f"need a + delta <= s <= b, got a={a}, delta={delta}, s={s}, b={b}")
    if not sigma <= a:
        raise ArgumentError(f"need sigma <= a, got sigma={sigma}, a={a}")
    return rank_map(barcode, a + delta, s, degree) > rank_map(barcode, sigma, s, degree)


def barcode_from_bars(bars: Sequence[tuple]) -> Barcode:
    """Convenience constructor from ``(left, right[, degree])`` tuples."""
    return Barcode(tuple(Bar(*b) for b in bars))
