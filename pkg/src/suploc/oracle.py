"""Exact law of the leftmost argmax of a uniformly shifted periodic path.

For the process ``X(t) = x(t - U)`` the window ``[0, T]`` of X is the window
``[s, s + T]`` of x with ``s = -U mod P``. The leftmost maximiser of a
piecewise-linear function on a closed window is either the left end, a
local-maximum knot strictly inside, or the right end. Between consecutive
shift breakpoints (knots entering or leaving at either end) the set of inner
knots is fixed, the inner best is a constant, and both end values are affine
in ``s``; splitting at the pairwise crossings gives exact winner intervals.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

import numpy as np

from .assembly import PiecewiseLinearPath
from .blocks import BlockCollection
from .density import StepDensity
from .rational import Q, as_fraction

LEFT, INNER, RIGHT = 0, 1, 2


class Provenance(str, Enum):
    ENVELOPE = "envelope"
    GRID = "grid"
    MONTECARLO = "montecarlo"


@dataclass(frozen=True)
class SupLocationLaw:
    T: Fraction
    atom0: Fraction
    atomT: Fraction
    interior: StepDensity
    provenance: str = Provenance.ENVELOPE.value
    degenerate_ties: int = 0

    @property
    def total_mass(self) -> Fraction:
        return self.atom0 + self.atomT + self.interior.integral()


@dataclass(frozen=True)
class ShiftPiece:
    """On shifts ``s`` in ``(start, end)`` the winner is ``kind``; inner winners sit at ``position``."""

    start: Fraction
    end: Fraction
    kind: int
    position: Optional[Fraction] = None


@dataclass
class ShiftPartition:
    T: Fraction
    period: Fraction
    pieces: list[ShiftPiece] = field(default_factory=list)
    degenerate_ties: int = 0


class _LeftmostMax:
    """Sparse table answering leftmost-argmax queries over a fixed list."""

    def __init__(self, values: list[Fraction]) -> None:
        self.values = values
        n = len(values)
        self.table = [list(range(n))]
        k = 1
        while 2 * k <= n:
            prev = self.table[-1]
            row = []
            for i in range(n - 2 * k + 1):
                a, b = prev[i], prev[i + k]
                row.append(b if values[b] > values[a] else a)
            self.table.append(row)
            k *= 2

    def query(self, lo: int, hi: int) -> int:
        """Index of the leftmost maximum on ``lo..hi`` inclusive."""
        k = (hi - lo + 1).bit_length() - 1
        a, b = self.table[k][lo], self.table[k][hi - (1 << k) + 1]
        va, vb = self.values[a], self.values[b]
        if vb > va or (vb == va and b < a):
            return b
        return a


def _affine_on(knots: list[tuple[Fraction, Fraction]], positions: list[Fraction], lo: Fraction, hi: Fraction, off: Fraction):
    """Coefficients ``(c0, c1)`` with ``x(s + off) = c0 + c1 s`` for ``s`` in ``(lo, hi)``."""
    mid = (lo + hi) / 2 + off
    i = bisect_right(positions, mid) - 1
    (a, ya), (b, yb) = knots[i], knots[i + 1]
    slope = (yb - ya) / (b - a)
    # x(t) = ya + slope (t - a), with t = s + off
    return ya + slope * (off - a), slope


def shift_partition(path: PiecewiseLinearPath, T: Q) -> ShiftPartition:
    """Winner of the leftmost argmax for every shift in ``[0, P)``, as exact intervals."""
    T = as_fraction(T)
    P = path.period
    if T <= 0 or T > P:
        raise ValueError(f"window length must lie in (0, P] = (0, {P}], got {T}")
    ext = path.unrolled(2)
    ext_pos = [p for p, _ in ext]
    maxima = path.local_maxima()
    cand_pos: list[Fraction] = []
    cand_val: list[Fraction] = []
    for c in range(2):
        for i in maxima:
            p, v = path.knots[i]
            cand_pos.append(p + c * P)
            cand_val.append(v)
    rmq = _LeftmostMax(cand_val) if cand_val else None

    cuts = {Fraction(0), P}
    for p in path.positions:
        cuts.add(p)
        cuts.add((p - T) % P)
    cuts_sorted = sorted(cuts)

    part = ShiftPartition(T=T, period=P)
    for a, b in zip(cuts_sorted, cuts_sorted[1:]):
        l0, l1 = _affine_on(ext, ext_pos, a, b, Fraction(0))
        r0, r1 = _affine_on(ext, ext_pos, a, b, T)
        # inner knots: strictly inside (s, s+T) for every s in (a, b)
        lo = bisect_left(cand_pos, b)
        hi = bisect_right(cand_pos, a + T) - 1
        inner_val = inner_pos = None
        if rmq is not None and lo <= hi:
            k = rmq.query(lo, hi)
            inner_val, inner_pos = cand_val[k], cand_pos[k]

        splits = {a, b}
        for c0, c1 in ((l0 - r0, l1 - r1),) + (((l0 - inner_val, l1), (r0 - inner_val, r1)) if inner_val is not None else ()):
            if c1 != 0:
                z = -c0 / c1
                if a < z < b:
                    splits.add(z)
        pts = sorted(splits)
        for c, e in zip(pts, pts[1:]):
            m = (c + e) / 2
            options = [(l0 + l1 * m, LEFT)]
            if inner_val is not None:
                options.append((inner_val, INNER))
            options.append((r0 + r1 * m, RIGHT))
            best = max(v for v, _ in options)
            winners = [k for v, k in options if v == best]
            if len(winners) > 1:
                part.degenerate_ties += 1
            kind = winners[0]
            position = inner_pos if kind == INNER else None
            prev = part.pieces[-1] if part.pieces else None
            if prev is not None and prev.end == c and prev.kind == kind and prev.position == position:
                part.pieces[-1] = ShiftPiece(prev.start, e, kind, position)
            else:
                part.pieces.append(ShiftPiece(c, e, kind, position))
    return part


def law_from_partition(part: ShiftPartition) -> SupLocationLaw:
    T, P = part.T, part.period
    atom0 = atomT = Fraction(0)
    delta: dict[Fraction, int] = defaultdict(int)
    for pc in part.pieces:
        if pc.kind == LEFT:
            atom0 += pc.end - pc.start
        elif pc.kind == RIGHT:
            atomT += pc.end - pc.start
        else:
            # tau = position - s decreases across the piece
            delta[pc.position - pc.end] += 1
            delta[pc.position - pc.start] -= 1
    pts = sorted(set(delta) | {Fraction(0), T})
    vals = []
    level = 0
    for t in pts[:-1]:
        level += delta.get(t, 0)
        vals.append(Fraction(level) / P)
    interior = StepDensity(T, tuple(pts), tuple(vals)).canonical()
    return SupLocationLaw(T, atom0 / P, atomT / P, interior, Provenance.ENVELOPE.value, part.degenerate_ties)


def exact_law(path: PiecewiseLinearPath, T: Q) -> SupLocationLaw:
    """Exact law of the leftmost supremum location on ``[0, T]``."""
    return law_from_partition(shift_partition(path, T))


def atom_identity_check(law: SupLocationLaw, c: BlockCollection) -> bool:
    """Endpoint mass equals ``m d / (HT)``."""
    return law.atom0 + law.atomT == c.m * c.d / c.period


def grid_law(
    path: PiecewiseLinearPath,
    T: Q,
    n_grid: int,
    n_shift: int,
    n_bins: int = 100,
    chunk: int = 64,
    workers: int = 1,
) -> SupLocationLaw:
    """Brute-force law from equispaced shifts and a mesh over each window.

    Each window is sampled at ``n_grid + 1`` mesh points plus every knot inside
    it; the leftmost largest sample is the argmax. Wins at the first or last
    mesh point become the atom estimates, inner wins are binned. Chunks of
    shifts can be spread over ``workers`` threads; results do not depend on it.
    """
    if n_grid < 1 or n_shift < 1:
        raise ValueError("n_grid and n_shift must be positive")
    T = as_fraction(T)
    P = path.period
    if T > P:
        raise ValueError("window longer than the period")
    Tf, Pf = float(T), float(P)
    ext = path.unrolled(2)
    xp = np.array([float(p) for p, _ in ext])
    fp = np.array([float(v) for _, v in ext])
    knot_pos = xp[:-1]
    knot_val = fp[:-1]
    mesh = np.linspace(0.0, Tf, n_grid + 1)
    shifts = np.arange(n_shift, dtype=np.float64) * (Pf / n_shift)

    def tally(start: int) -> tuple[np.ndarray, int, int]:
        s = shifts[start:start + chunk]
        grid_v = np.interp(s[:, None] + mesh[None, :], xp, fp)
        # knots strictly inside each window
        inside = (knot_pos[None, :] > s[:, None]) & (knot_pos[None, :] < s[:, None] + Tf)
        kv = np.where(inside, knot_val[None, :], -np.inf)
        rows = np.arange(len(s))
        g_idx = np.argmax(grid_v, axis=1)
        g_best = grid_v[rows, g_idx]
        k_idx = np.argmax(kv, axis=1)
        k_best = kv[rows, k_idx]
        g_tau = mesh[g_idx]
        k_tau = knot_pos[k_idx] - s
        use_knot = (k_best > g_best) | ((k_best == g_best) & (k_tau < g_tau))
        tau = np.where(use_knot, k_tau, g_tau)
        is_left = (~use_knot) & (g_idx == 0)
        is_right = (~use_knot) & (g_idx == n_grid)
        inner = tau[~(is_left | is_right)]
        b = np.clip((inner / Tf * n_bins).astype(np.int64), 0, n_bins - 1)
        return np.bincount(b, minlength=n_bins), int(is_left.sum()), int(is_right.sum())

    starts = range(0, n_shift, chunk)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(tally, starts))
    else:
        parts = [tally(st) for st in starts]
    # integer sums, so the merge order cannot matter
    counts = np.sum([p[0] for p in parts], axis=0)
    left_wins = sum(p[1] for p in parts)
    right_wins = sum(p[2] for p in parts)
    width = T / n_bins
    edges = tuple(width * i for i in range(n_bins)) + (T,)
    vals = tuple(Fraction(int(cnt)) / (n_shift * width) for cnt in counts)
    interior = StepDensity(T, edges, vals)
    return SupLocationLaw(
        T, Fraction(left_wins, n_shift), Fraction(right_wins, n_shift), interior, Provenance.GRID.value
    )


@dataclass(frozen=True)
class LawDistance:
    atom0_diff: Fraction
    atomT_diff: Fraction
    interior_L1: Fraction
    interior_sup: Fraction


def law_distance(a: SupLocationLaw, b: SupLocationLaw) -> LawDistance:
    """Atom differences plus L1 and sup distance of the interior densities.

    When either side is binned, the other is averaged over the same bins
    before comparing, so an exact density is judged at the bin resolution.
    """
    if a.T != b.T:
        raise ValueError("laws live on different windows")
    fa, fb = a.interior, b.interior
    if b.provenance != Provenance.ENVELOPE.value:
        fa = bin_average(fa, fb.breakpoints)
    elif a.provenance != Provenance.ENVELOPE.value:
        fb = bin_average(fb, fa.breakpoints)
    pts = sorted(set(fa.breakpoints) | set(fb.breakpoints))
    l1 = Fraction(0)
    sup = Fraction(0)
    for s, e in zip(pts, pts[1:]):
        diff = abs(fa(s) - fb(s))
        l1 += diff * (e - s)
        sup = max(sup, diff)
    return LawDistance(abs(a.atom0 - b.atom0), abs(a.atomT - b.atomT), l1, sup)


def bin_average(f: StepDensity, edges) -> StepDensity:
    vals = tuple(f.integral(s, e) / (e - s) for s, e in zip(edges, edges[1:]))
    return StepDensity(f.T, tuple(edges), vals)
