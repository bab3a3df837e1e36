"""Proper block collections: peeling a grid density into blocks and recomposing it."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import gcd
from typing import Sequence

from .density import StepDensity, validate_density
from .rational import Q, as_fraction, lcm


class InfeasibleError(ValueError):
    """Block collection violates a feasibility condition."""


class UniformCase(ValueError):
    """The uniform density 1/T has no block representation; it is realised by the single-tent preset."""


class BlockKind(str, Enum):
    BASE = "base"
    LEFT = "left"
    RIGHT = "right"
    CENTRAL = "central"


@dataclass(frozen=True, order=True)
class Block:
    u: Fraction
    v: Fraction
    kind: BlockKind = field(compare=False)

    @property
    def length(self) -> Fraction:
        return self.v - self.u


def classify(u: Q, v: Q, T: Q) -> Block:
    u, v, T = as_fraction(u), as_fraction(v), as_fraction(T)
    if not (0 <= u < v <= T):
        raise InfeasibleError(f"block ({u}, {v}) is not a nonempty subinterval of (0, {T})")
    if u == 0:
        kind = BlockKind.BASE if v == T else BlockKind.LEFT
    else:
        kind = BlockKind.RIGHT if v == T else BlockKind.CENTRAL
    return Block(u, v, kind)


@dataclass(frozen=True)
class BlockCollection:
    T: Fraction
    H: Fraction
    blocks: tuple[Block, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "T", as_fraction(self.T))
        object.__setattr__(self, "H", as_fraction(self.H))
        object.__setattr__(self, "blocks", tuple(self.blocks))
        for b in self.blocks:
            if classify(b.u, b.v, self.T).kind != b.kind:
                raise InfeasibleError(f"block ({b.u}, {b.v}) mislabelled as {b.kind.value}")

    @property
    def m(self) -> int:
        return len(self.blocks)

    @property
    def period(self) -> Fraction:
        return self.H * self.T

    @property
    def d(self) -> Fraction:
        """Spacing ``(HT - total block length) / m``."""
        return (self.period - sum((b.length for b in self.blocks), Fraction(0))) / self.m

    def of_kind(self, kind: BlockKind) -> list[Block]:
        return [b for b in self.blocks if b.kind == kind]

    def count(self, kind: BlockKind) -> int:
        return sum(1 for b in self.blocks if b.kind == kind)


@dataclass(frozen=True)
class FeasibilityReport:
    proper: bool
    has_base: bool
    centrals_within_bases: bool
    positive_spacing: bool

    @property
    def ok(self) -> bool:
        return self.proper and self.has_base and self.centrals_within_bases and self.positive_spacing


def _nested_or_disjoint(a: Block, b: Block) -> bool:
    if a.u <= b.u and b.v <= a.v:
        return True
    if b.u <= a.u and a.v <= b.v:
        return True
    # closures must not even touch
    return a.v < b.u or b.v < a.u


def is_proper(blocks: Sequence[Block]) -> bool:
    return all(_nested_or_disjoint(a, b) for i, a in enumerate(blocks) for b in blocks[i + 1:])


def feasibility(c: BlockCollection) -> FeasibilityReport:
    base = c.count(BlockKind.BASE)
    return FeasibilityReport(
        proper=is_proper(c.blocks),
        has_base=base >= 1,
        centrals_within_bases=c.count(BlockKind.CENTRAL) <= base,
        positive_spacing=c.m > 0 and c.d > 0,
    )


def require_feasible(c: BlockCollection) -> None:
    rep = feasibility(c)
    if not rep.ok:
        failed = [name for name, ok in vars(rep).items() if not ok]
        raise InfeasibleError(f"infeasible block collection: {', '.join(failed)}")


def choose_period(f: StepDensity) -> Fraction:
    """Smallest H > 1 putting every value of ``f`` on the grid ``1/(HT)``.

    HT is a multiple of the smallest length L0 with all ``f_i * L0`` integral.
    """
    if validate_density(f).is_uniform:
        raise UniformCase("uniform case: no block representation needed")
    nonzero = [v for v in f.values if v != 0]
    if not nonzero:
        raise ValueError("identically zero density")
    den = 1
    num = 0
    for v in nonzero:
        den = lcm(den, v.denominator)
        num = gcd(num, v.numerator)
    L0 = Fraction(den, num)
    k = f.T // L0 + 1
    return k * L0 / f.T


def grid_levels(f: StepDensity, H: Q) -> list[int]:
    scale = as_fraction(H) * f.T
    levels = []
    for v in f.values:
        q = v * scale
        if q.denominator != 1:
            raise ValueError(f"value {v} is not on the grid 1/{scale}")
        levels.append(q.numerator)
    return levels


def peel_blocks(f: StepDensity, H: Q) -> BlockCollection:
    """Peel unit layers off the grid levels of ``f``.

    Each pass turns every maximal run of positive levels into one block and
    lowers the run by one. A run is peeled as many times as its minimum level
    in one go, which gives the same blocks as unit passes.
    """
    H = as_fraction(H)
    if H <= 1:
        raise ValueError("H must exceed 1")
    levels = grid_levels(f, H)
    bps = f.breakpoints
    blocks: list[Block] = []
    while any(levels):
        i = 0
        n = len(levels)
        while i < n:
            if levels[i] == 0:
                i += 1
                continue
            j = i
            while j < n and levels[j] > 0:
                j += 1
            depth = min(levels[i:j])
            block = classify(bps[i], bps[j], f.T)
            blocks.extend([block] * depth)
            for k in range(i, j):
                levels[k] -= depth
            i = j
    blocks.sort(key=lambda b: (b.u, -b.v))
    return BlockCollection(f.T, H, tuple(blocks))


def recompose(c: BlockCollection) -> StepDensity:
    """``f(t) = (1/(HT)) * #{blocks containing t}`` as a canonical step density."""
    pts = sorted({Fraction(0), c.T} | {b.u for b in c.blocks} | {b.v for b in c.blocks})
    scale = 1 / c.period
    vals = []
    for s in pts[:-1]:
        vals.append(scale * sum(1 for b in c.blocks if b.u <= s < b.v))
    return StepDensity(c.T, tuple(pts), tuple(vals)).canonical()
