"""Periodic piecewise-linear paths built from block components.

A component is one base block plus at most one central block and some left
and right blocks. Each component lays out a stretch of the path that starts
and ends at value 2; concatenating the stretches gives one period.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .blocks import Block, BlockCollection, BlockKind, require_feasible
from .rational import Q, as_fraction

TOP = Fraction(2)
FLOOR = Fraction(-1)


class FillMode(str, Enum):
    LITERAL = "literal"
    REPAIRED = "repaired"


@dataclass
class Component:
    base: Block
    central: Optional[Block] = None
    lefts: list[Block] = field(default_factory=list)
    rights: list[Block] = field(default_factory=list)

    def sort(self, T: Fraction) -> None:
        self.lefts.sort(key=lambda b: b.v)
        self.rights.sort(key=lambda b: T - b.u)

    @property
    def n_blocks(self) -> int:
        return 1 + len(self.lefts) + len(self.rights) + (self.central is not None)

    @property
    def total_length(self) -> Fraction:
        blocks = [self.base, *self.lefts, *self.rights]
        if self.central is not None:
            blocks.append(self.central)
        return sum((b.length for b in blocks), Fraction(0))

    def length(self, d: Fraction) -> Fraction:
        return d * self.n_blocks + self.total_length


@dataclass(frozen=True)
class PiecewiseLinearPath:
    """One period ``[0, P)`` of a continuous periodic piecewise-linear function.

    ``knots`` are the vertices; the value at ``P`` repeats the value at 0.
    """

    period: Fraction
    knots: tuple[tuple[Fraction, Fraction], ...]
    mode: str = FillMode.REPAIRED.value

    def __post_init__(self) -> None:
        P = as_fraction(self.period)
        knots = tuple((as_fraction(p), as_fraction(v)) for p, v in self.knots)
        object.__setattr__(self, "period", P)
        object.__setattr__(self, "knots", knots)
        if P <= 0:
            raise ValueError("period must be positive")
        if not knots or knots[0][0] != 0:
            raise ValueError("first knot must sit at position 0")
        if any(a[0] >= b[0] for a, b in zip(knots, knots[1:])) or knots[-1][0] >= P:
            raise ValueError("knot positions must increase strictly inside [0, P)")

    @property
    def positions(self) -> list[Fraction]:
        return [p for p, _ in self.knots]

    @property
    def values(self) -> list[Fraction]:
        return [v for _, v in self.knots]

    def closed_knots(self) -> list[tuple[Fraction, Fraction]]:
        """Knots with the wraparound vertex ``(P, x(0))`` appended."""
        return [*self.knots, (self.period, self.knots[0][1])]

    def unrolled(self, copies: int = 2) -> list[tuple[Fraction, Fraction]]:
        out = []
        for c in range(copies):
            out.extend((p + c * self.period, v) for p, v in self.knots)
        out.append((copies * self.period, self.knots[0][1]))
        return out

    def __call__(self, t: Q) -> Fraction:
        t = as_fraction(t) % self.period
        closed = self.closed_knots()
        i = bisect_right([p for p, _ in closed], t) - 1
        (a, ya), (b, yb) = closed[i], closed[i + 1]
        return ya + (yb - ya) * (t - a) / (b - a)

    def segments(self) -> Iterable[tuple[Fraction, Fraction, Fraction, Fraction]]:
        closed = self.closed_knots()
        for (a, ya), (b, yb) in zip(closed, closed[1:]):
            yield a, ya, b, yb

    def slopes(self) -> list[Fraction]:
        return [(yb - ya) / (b - a) for a, ya, b, yb in self.segments()]

    def local_maxima(self) -> list[int]:
        """Indices of knots entered rising and left non-rising.

        On a piecewise-linear function these are exactly the points that can be
        the leftmost maximiser over a window that contains them in its interior.
        """
        s = self.slopes()
        n = len(self.knots)
        return [i for i in range(n) if s[i - 1] > 0 and s[i] <= 0]

    def rotated(self, shift: Q) -> "PiecewiseLinearPath":
        """Re-base the period origin at ``shift`` (``y(t) = x(t + shift)``)."""
        shift = as_fraction(shift) % self.period
        closed = self.closed_knots()
        pts = {(p - shift) % self.period for p, _ in closed[:-1]} | {Fraction(0)}
        knots = tuple((p, self(p + shift)) for p in sorted(pts))
        return PiecewiseLinearPath(self.period, knots, self.mode)


def assign_components(c: BlockCollection) -> list[Component]:
    """Split a feasible collection into one component per base block.

    Centrals go one per component; lefts (sorted by right end) and rights
    (sorted by length) are dealt round-robin so per-component counts differ by
    at most one.
    """
    require_feasible(c)
    T = c.T
    comps = [Component(base=b) for b in c.of_kind(BlockKind.BASE)]
    for comp, blk in zip(comps, sorted(c.of_kind(BlockKind.CENTRAL), key=lambda b: (b.u, b.v))):
        comp.central = blk
    for i, blk in enumerate(sorted(c.of_kind(BlockKind.LEFT), key=lambda b: b.v)):
        comps[i % len(comps)].lefts.append(blk)
    for i, blk in enumerate(sorted(c.of_kind(BlockKind.RIGHT), key=lambda b: T - b.u)):
        comps[i % len(comps)].rights.append(blk)
    for comp in comps:
        comp.sort(T)
    return comps


def layout_order(comps: Sequence[Component], d: Fraction) -> list[Component]:
    """Components with a central block first, each group by decreasing length."""
    indexed = list(enumerate(comps))
    indexed.sort(key=lambda ic: (ic[1].central is None, -ic[1].length(d), ic[0]))
    return [c for _, c in indexed]


def build_component_profile(
    comp: Component, d: Q, T: Q, mode: FillMode | str = FillMode.REPAIRED
) -> list[tuple[Fraction, Fraction]]:
    """Skeleton knots of one component, from ``(0, 2)`` to ``(L, 2)``."""
    d, T = as_fraction(d), as_fraction(T)
    mode = FillMode(mode)
    repaired = mode is FillMode.REPAIRED
    comp.sort(T)
    lefts, rights, central = comp.lefts, comp.rights, comp.central
    l = len(lefts)
    knots = [(Fraction(0), TOP)]
    pos = Fraction(0)

    # Step 1: one equal-value pair per left block, values rising towards 2 - 1 = 1
    for j, blk in enumerate(lefts, 1):
        y = 2 - Fraction(2) ** (j - l)
        start = pos + d
        pos = start + blk.v
        knots += [(start, y), (pos, y)]

    if central is not None:
        # Step 2: the central triple at value 1/2
        a = pos + d
        half = Fraction(1, 2)
        knots += [(a, half), (a + central.v, half), (a + central.v + T - central.u, half)]
        pos = a + central.v + T - central.u
    else:
        if repaired and l == 0 and rights:
            knots.append((d, Fraction(1)))
        # Step 2 skipped; the path still travels an extra T
        pos = pos + T
        if repaired and l > 0 and not rights:
            knots.append((pos, knots[-1][1]))

    # Step 3: one equal-value pair per right block, values 1, 3/2, 7/4, ...
    for j, blk in enumerate(rights, 1):
        y = 2 - Fraction(2) ** (-(j - 1))
        start = pos + d
        pos = start + T - blk.u
        knots += [(start, y), (pos, y)]

    # Step 4
    knots.append((pos + d, TOP))
    return knots


def fill_gaps(knots: Sequence[tuple[Q, Q]], d: Q) -> list[tuple[Fraction, Fraction]]:
    """Insert the interior vertices of the equal-value gaps.

    Unequal neighbours are joined linearly. Equal neighbours at value ``y`` get
    a symmetric valley of slope ``1/d``; if that valley would dip below -1 it is
    flattened into a shallower inner valley that bottoms out at exactly -1.
    """
    d = as_fraction(d)
    pts = [(as_fraction(p), as_fraction(v)) for p, v in knots]
    out = [pts[0]]
    for (a, y), (b, yb) in zip(pts, pts[1:]):
        if b <= a:
            raise ValueError(f"knots at {a} and {b} are not increasing")
        if y == yb:
            mid = (a + b) / 2
            depth = y - (b - a) / (2 * d)
            if depth >= FLOOR:
                out.append((mid, depth))
            else:
                if y <= 0:
                    raise ValueError(f"cannot fill an equal-value gap at level {y} <= 0 within the floor")
                half_inner = (b - a) / 2 - d * y
                tau = min(1 / d, 1 / half_inner)
                out += [(a + d * y, Fraction(0)), (mid, -tau * half_inner), (b - d * y, Fraction(0))]
        out.append((b, yb))
    return out


def build_path(
    layout: Sequence[Component], d: Q, T: Q, H: Q, mode: FillMode | str = FillMode.REPAIRED
) -> PiecewiseLinearPath:
    d, T, H = as_fraction(d), as_fraction(T), as_fraction(H)
    mode = FillMode(mode)
    P = H * T
    skeleton = [(Fraction(0), TOP)]
    offset = Fraction(0)
    for comp in layout:
        prof = build_component_profile(comp, d, T, mode)
        if prof[-1][0] != comp.length(d):
            raise AssertionError(f"component profile ends at {prof[-1][0]}, expected {comp.length(d)}")
        skeleton += [(offset + p, v) for p, v in prof[1:]]
        offset += prof[-1][0]
    if offset != P:
        raise AssertionError(f"component lengths sum to {offset}, period is {P}")
    full = fill_gaps(skeleton, d)
    return PiecewiseLinearPath(P, tuple(full[:-1]), mode.value)


def build_from_collection(c: BlockCollection, mode: FillMode | str = FillMode.REPAIRED) -> PiecewiseLinearPath:
    comps = assign_components(c)
    return build_path(layout_order(comps, c.d), c.d, c.T, c.H, mode)


def uniform_path(T: Q) -> PiecewiseLinearPath:
    """Single-peak path of period exactly T; its argmax location is uniform on (0, T)."""
    T = as_fraction(T)
    return PiecewiseLinearPath(T, ((Fraction(0), TOP), (T / 2, Fraction(1))))


@dataclass
class PathAudit:
    n_local_maxima: int
    min_maxima_gap: Fraction
    maxima_values: frozenset
    min_value: Fraction
    max_value: Fraction
    max_slope: Fraction
    min_slope_positive_part: Fraction
    min_slope_nonpositive_part: Optional[Fraction]
    assumption_L_rate: Fraction
    N: int
    fill_mode: str
    violations: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def audit_path(
    path: PiecewiseLinearPath, layout: Sequence[Component], d: Q, mode: FillMode | str | None = None
) -> PathAudit:
    """Check bounds, Lipschitz constant, slope floors and maxima separation."""
    d = as_fraction(d)
    mode = FillMode(mode if mode is not None else path.mode)
    P = path.period
    N = max([max(len(c.lefts), len(c.rights)) for c in layout], default=0)
    violations: list[str] = []
    notes: list[str] = []

    vals = path.values
    lo, hi = min(vals), max(vals)
    if lo < FLOOR or hi > TOP:
        violations.append(f"values leave [-1, 2]: min {lo}, max {hi}")

    segs = list(path.segments())
    slopes = [(yb - ya) / (b - a) for a, ya, b, yb in segs]
    max_slope = max(abs(s) for s in slopes)
    lip = 3 / (2 * d)
    for (a, ya, b, yb), s in zip(segs, slopes):
        if abs(s) > lip:
            violations.append(f"segment [{a}, {b}] slope {s} exceeds 3/(2d) = {lip}")
        if s == 0:
            violations.append(f"segment [{a}, {b}] is constant")

    floor_pos = 1 / (2 ** N * d)
    pos_part = [abs(s) for (a, ya, b, yb), s in zip(segs, slopes) if max(ya, yb) > 0]
    nonpos_part = [abs(s) for (a, ya, b, yb), s in zip(segs, slopes) if min(ya, yb) <= 0]
    min_pos = min(pos_part) if pos_part else Fraction(0)
    min_nonpos = min(nonpos_part) if nonpos_part else None
    for (a, ya, b, yb), s in zip(segs, slopes):
        if max(ya, yb) > 0 and abs(s) < floor_pos:
            msg = f"segment [{a}, {b}] slope {s} below 1/(2^N d) = {floor_pos} on {{x > 0}}"
            (violations if mode is FillMode.REPAIRED else notes).append(msg)

    maxima = path.local_maxima()
    mpos = [path.knots[i][0] for i in maxima]
    gaps = [b - a for a, b in zip(mpos, mpos[1:])]
    if mpos:
        gaps.append(mpos[0] + P - mpos[-1])
    min_gap = min(gaps) if gaps else P
    if min_gap < d:
        i = gaps.index(min_gap)
        violations.append(f"local maxima at {mpos[i]} and {mpos[(i + 1) % len(mpos)]} closer than d = {d}")
    mvals = frozenset(path.knots[i][1] for i in maxima)
    if len(mvals) > N + 3:
        violations.append(f"{len(mvals)} distinct maxima values exceed N + 3 = {N + 3}")

    return PathAudit(
        n_local_maxima=len(maxima),
        min_maxima_gap=min_gap,
        maxima_values=mvals,
        min_value=lo,
        max_value=hi,
        max_slope=max_slope,
        min_slope_positive_part=min_pos,
        min_slope_nonpositive_part=min_nonpos,
        assumption_L_rate=Fraction(len(maxima)) / P,
        N=N,
        fill_mode=mode.value,
        violations=violations,
        notes=notes,
    )
