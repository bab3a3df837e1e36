"""Realising general candidate densities through grid-quantised step densities.

Candidate densities are exact piecewise polynomials of degree at most two, so
cell infima, oscillations, total variation and integrals are all rational.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .assembly import FillMode, assign_components, build_path, layout_order, uniform_path
from .blocks import peel_blocks
from .density import StepDensity, total_variation, validate_density
from .oracle import atom_identity_check, exact_law
from .rational import Q, as_fraction

DEFAULT_MAX_CELLS = 4096


class MeshCapError(RuntimeError):
    """The mesh needed more cells than the configured cap."""


@dataclass(frozen=True)
class PolyPiece:
    start: Fraction
    end: Fraction
    coeffs: tuple[Fraction, ...]  # ascending powers of t

    def __call__(self, t: Fraction) -> Fraction:
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * t + c
        return acc

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def critical_points(self, a: Fraction, b: Fraction) -> list[Fraction]:
        """Points of ``[a, b]`` where the extremes over ``[a, b]`` can sit."""
        pts = [a, b]
        if self.degree == 2 and self.coeffs[2] != 0:
            vertex = -self.coeffs[1] / (2 * self.coeffs[2])
            if a < vertex < b:
                pts.append(vertex)
        return pts

    def extremes(self, a: Fraction, b: Fraction) -> tuple[Fraction, Fraction]:
        vals = [self(t) for t in self.critical_points(a, b)]
        return min(vals), max(vals)

    def variation(self, a: Fraction, b: Fraction) -> Fraction:
        pts = sorted(self.critical_points(a, b))
        return sum((abs(self(y) - self(x)) for x, y in zip(pts, pts[1:])), Fraction(0))

    def integral(self, a: Fraction, b: Fraction) -> Fraction:
        return sum(
            (c * (b ** (k + 1) - a ** (k + 1)) / (k + 1) for k, c in enumerate(self.coeffs)),
            Fraction(0),
        )


@dataclass(frozen=True)
class CadlagDensity:
    """Càdlàg candidate density on (0, T) made of polynomial pieces."""

    T: Fraction
    pieces: tuple[PolyPiece, ...]
    name: str = "custom"

    def __post_init__(self) -> None:
        if self.pieces[0].start != 0 or self.pieces[-1].end != self.T:
            raise ValueError("pieces must cover [0, T]")
        for p, q in zip(self.pieces, self.pieces[1:]):
            if p.end != q.start:
                raise ValueError("pieces must be contiguous")
        if self.inf_value() < 0:
            raise ValueError("density must be nonnegative")

    def _piece_at(self, t: Fraction) -> PolyPiece:
        for p in self.pieces:
            if p.start <= t < p.end:
                return p
        return self.pieces[-1]

    def __call__(self, t: Q) -> Fraction:
        return self._piece_at(as_fraction(t))(as_fraction(t))

    @property
    def breakpoints(self) -> list[Fraction]:
        return [p.start for p in self.pieces] + [self.T]

    def f0plus(self) -> Fraction:
        return self.pieces[0](Fraction(0))

    def fTminus(self) -> Fraction:
        return self.pieces[-1](self.T)

    def cell_extremes(self, a: Fraction, b: Fraction) -> tuple[Fraction, Fraction]:
        """Inf and sup over ``[a, b)``, limits included; cells must not straddle a jump."""
        lo = hi = None
        for p in self.pieces:
            s, e = max(a, p.start), min(b, p.end)
            if e > s:
                mn, mx = p.extremes(s, e)
                lo = mn if lo is None else min(lo, mn)
                hi = mx if hi is None else max(hi, mx)
        return lo, hi

    def inf_value(self) -> Fraction:
        return self.cell_extremes(Fraction(0), self.T)[0]

    def sup_value(self) -> Fraction:
        return self.cell_extremes(Fraction(0), self.T)[1]

    def total_variation(self) -> Fraction:
        tv = sum((p.variation(p.start, p.end) for p in self.pieces), Fraction(0))
        for p, q in zip(self.pieces, self.pieces[1:]):
            tv += abs(q(q.start) - p(p.end))
        return tv

    def integral(self) -> Fraction:
        return sum((p.integral(p.start, p.end) for p in self.pieces), Fraction(0))

    def admissibility(self) -> dict[str, bool]:
        integral = self.integral()
        uniform = all(p.coeffs[1:] == () or all(c == 0 for c in p.coeffs[1:]) for p in self.pieces) and all(
            p.coeffs[0] == 1 / self.T for p in self.pieces
        )
        return {
            "a": self.total_variation() <= self.f0plus() + self.fTminus(),
            "b": self.inf_value() > 0,
            "c": uniform or integral < 1,
        }

    @classmethod
    def from_step(cls, f: StepDensity) -> "CadlagDensity":
        return cls(f.T, tuple(PolyPiece(s, e, (v,)) for s, e, v in f.pieces()), "step")


def ramp(a: Q = Fraction(1, 2), b: Q = Fraction(1, 2), T: Q = 1) -> CadlagDensity:
    """``f(t) = a + b t`` on (0, T)."""
    T = as_fraction(T)
    return CadlagDensity(T, (PolyPiece(Fraction(0), T, (as_fraction(a), as_fraction(b))),), "ramp")


def parabola(a: Q = Fraction(1, 4), b: Q = 2, T: Q = 1) -> CadlagDensity:
    """U-shaped ``f(t) = a + b (t - T/2)^2`` on (0, T)."""
    T, a, b = as_fraction(T), as_fraction(a), as_fraction(b)
    c = T / 2
    return CadlagDensity(T, (PolyPiece(Fraction(0), T, (a + b * c * c, -2 * b * c, b)),), "parabola")


def two_level_ramp(lo: Q = Fraction(1, 2), hi: Q = 1, t1: Q = Fraction(1, 4), t2: Q = Fraction(1, 2), T: Q = 1) -> CadlagDensity:
    """Level ``lo`` up to t1, linear rise to ``hi`` at t2, level ``hi`` after."""
    T, lo, hi, t1, t2 = (as_fraction(x) for x in (T, lo, hi, t1, t2))
    slope = (hi - lo) / (t2 - t1)
    return CadlagDensity(
        T,
        (
            PolyPiece(Fraction(0), t1, (lo,)),
            PolyPiece(t1, t2, (lo - slope * t1, slope)),
            PolyPiece(t2, T, (hi,)),
        ),
        "two_level_ramp",
    )


PRESETS = {"ramp": ramp, "parabola": parabola, "two_level_ramp": two_level_ramp}


def mesh_for(f: CadlagDensity | StepDensity, n: int, max_cells: int = DEFAULT_MAX_CELLS) -> list[Fraction]:
    """Partition with oscillation at most ``1/(nT)`` on every cell.

    Constant pieces are kept whole, linear pieces are cut evenly, quadratic
    pieces are bisected until each cell is flat enough.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if isinstance(f, StepDensity):
        f = CadlagDensity.from_step(f)
    eps = 1 / (n * f.T)
    mesh = [Fraction(0)]
    for p in f.pieces:
        if p.degree == 0 or all(c == 0 for c in p.coeffs[1:]):
            cells = [(p.start, p.end)]
        elif p.degree == 1:
            k = max(1, math.ceil(abs(p.coeffs[1]) * (p.end - p.start) / eps))
            if k > max_cells:
                raise MeshCapError(f"linear piece needs {k} cells, cap is {max_cells}")
            w = (p.end - p.start) / k
            cells = [(p.start + i * w, p.start + (i + 1) * w) for i in range(k)]
        else:
            cells = []
            stack = [(p.start, p.end)]
            while stack:
                a, b = stack.pop()
                mn, mx = p.extremes(a, b)
                if mx - mn <= eps:
                    cells.append((a, b))
                else:
                    mid = (a + b) / 2
                    stack += [(mid, b), (a, mid)]
                if len(cells) + len(stack) > max_cells:
                    raise MeshCapError(f"quadratic piece needs more than {max_cells} cells")
        mesh.extend(b for _, b in cells)
    if len(mesh) - 1 > max_cells:
        raise MeshCapError(f"mesh has {len(mesh) - 1} cells, cap is {max_cells}")
    return mesh


@dataclass(frozen=True)
class Quantization:
    n: int
    mesh: tuple[Fraction, ...]
    lower: StepDensity  # largest grid function below f on every cell
    f_n: StepDensity
    H: Fraction

    @property
    def k(self) -> int:
        return len(self.mesh) - 1


def quantize(f: CadlagDensity | StepDensity, n: int, max_cells: int = DEFAULT_MAX_CELLS) -> Quantization:
    if isinstance(f, StepDensity):
        f = CadlagDensity.from_step(f)
    if f.inf_value() <= 0:
        raise ValueError("density is not bounded away from zero")
    mesh = mesh_for(f, n, max_cells)
    k = len(mesh) - 1
    scale = k * n * f.T  # grid is 1/(knT)
    lower_vals = []
    for a, b in zip(mesh, mesh[1:]):
        inf, _ = f.cell_extremes(a, b)
        lower_vals.append(Fraction(math.floor(inf * scale)) / scale)
    lower = StepDensity(f.T, tuple(mesh), tuple(lower_vals))
    lift = 1 / (n * f.T)
    f_n = StepDensity(f.T, tuple(mesh), tuple(v + lift for v in lower_vals))
    return Quantization(n, tuple(mesh), lower, f_n, Fraction(k * n))


def check_sandwich(f: CadlagDensity | StepDensity, q: Quantization) -> bool:
    """``f - 2/(nT) <= lower <= f`` on every cell, compared exactly."""
    if isinstance(f, StepDensity):
        f = CadlagDensity.from_step(f)
    slack = 2 / (q.n * f.T)
    for a, b, v in q.lower.pieces():
        inf, sup = f.cell_extremes(a, b)
        if not (sup - slack <= v <= inf):
            return False
    return True


def check_tv_bound(f: CadlagDensity | StepDensity, q: Quantization) -> bool:
    if isinstance(f, StepDensity):
        f = CadlagDensity.from_step(f)
    return total_variation(q.lower) <= f.total_variation() + 1 / (q.n * f.T)


def sup_distance(f: CadlagDensity, g: StepDensity) -> Fraction:
    """Exact ``sup |f - g|`` over (0, T)."""
    pts = sorted(set(f.breakpoints) | set(g.breakpoints))
    best = Fraction(0)
    for a, b in zip(pts, pts[1:]):
        lo, hi = f.cell_extremes(a, b)
        c = g(a)
        best = max(best, abs(hi - c), abs(c - lo))
    return best


def l1_distance(f: CadlagDensity, g: StepDensity) -> Fraction | float:
    """``∫ |f - g|``; exact when every piece of ``f`` is at most linear."""
    pts = sorted(set(f.breakpoints) | set(g.breakpoints))
    exact = all(p.degree <= 1 for p in f.pieces)
    total: Fraction | float = Fraction(0) if exact else 0.0
    for a, b in zip(pts, pts[1:]):
        p = f._piece_at(a)
        c = g(a)
        diff = PolyPiece(a, b, (p.coeffs[0] - c,) + p.coeffs[1:])
        roots = [r for r in _real_roots(diff.coeffs) if a < r < b]
        cuts = [a, *sorted(roots), b]
        for x, y in zip(cuts, cuts[1:]):
            if exact:
                total += abs(diff.integral(x, y))
            else:
                total += abs(_float_integral(diff.coeffs, float(x), float(y)))
    return total


def _real_roots(coeffs: Sequence[Fraction]) -> list:
    coeffs = list(coeffs)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    if len(coeffs) == 2:
        return [-coeffs[0] / coeffs[1]]
    if len(coeffs) == 3:
        c0, c1, c2 = coeffs
        disc = c1 * c1 - 4 * c2 * c0
        if disc < 0:
            return []
        r = math.sqrt(disc)
        return [(-float(c1) - r) / (2 * float(c2)), (-float(c1) + r) / (2 * float(c2))]
    return []


def _float_integral(coeffs: Sequence[Fraction], a: float, b: float) -> float:
    return sum(float(c) * (b ** (k + 1) - a ** (k + 1)) / (k + 1) for k, c in enumerate(coeffs))


@dataclass
class ConvergenceRow:
    n: int
    k: int
    H: Fraction
    status: str  # "blocks", "uniform" or "inadmissible"
    m: Optional[int] = None
    d_n: Optional[Fraction] = None
    sup_dist: Optional[Fraction] = None
    L1_dist: Optional[Fraction | float] = None
    realized_equals_f_n: Optional[bool] = None
    atom_identity: Optional[bool] = None
    sandwich: bool = False
    tv_bound: bool = False
    max_lefts_per_component: int = 0
    max_rights_per_component: int = 0
    d_in_interval: Optional[bool] = None


@dataclass
class ConvergenceReport:
    name: str
    T: Fraction
    d_interval: tuple[Fraction, Fraction]
    rows: list[ConvergenceRow] = field(default_factory=list)

    @property
    def d_threshold(self) -> Optional[int]:
        """Smallest listed n from which on every d_n lies in the interval."""
        threshold = None
        for row in reversed(self.rows):
            if row.d_in_interval:
                threshold = row.n
            else:
                break
        return threshold


def d_interval(f: CadlagDensity) -> tuple[Fraction, Fraction]:
    """``[(1 - ∫f) / (4 sup f), 2 / inf f]``."""
    return (1 - f.integral()) / (4 * f.sup_value()), 2 / f.inf_value()


def realize_one(f: CadlagDensity, n: int, mode: FillMode | str = FillMode.REPAIRED, max_cells: int = DEFAULT_MAX_CELLS) -> ConvergenceRow:
    q = quantize(f, n, max_cells)
    row = ConvergenceRow(n=n, k=q.k, H=q.H, status="blocks")
    row.sandwich = check_sandwich(f, q)
    row.tv_bound = check_tv_bound(f, q)
    rep = validate_density(q.f_n)
    T = f.T
    if rep.is_uniform:
        row.status = "uniform"
        law = exact_law(uniform_path(T), T)
    elif not rep.admissible:
        row.status = "inadmissible"
        return row
    else:
        coll = peel_blocks(q.f_n, q.H)
        comps = assign_components(coll)
        path = build_path(layout_order(comps, coll.d), coll.d, T, coll.H, mode)
        law = exact_law(path, T)
        row.m = coll.m
        row.d_n = coll.d
        row.atom_identity = atom_identity_check(law, coll)
        row.max_lefts_per_component = max(len(c.lefts) for c in comps)
        row.max_rights_per_component = max(len(c.rights) for c in comps)
        lo, hi = d_interval(f)
        row.d_in_interval = lo <= coll.d <= hi
    row.realized_equals_f_n = law.interior == q.f_n.canonical()
    row.sup_dist = sup_distance(f, law.interior)
    row.L1_dist = l1_distance(f, law.interior)
    return row


def _realize_args(args):
    return realize_one(*args)


def realize_and_compare(
    f: CadlagDensity | StepDensity,
    n_list: Sequence[int],
    mode: FillMode | str = FillMode.REPAIRED,
    workers: int = 1,
    max_cells: int = DEFAULT_MAX_CELLS,
) -> ConvergenceReport:
    """Quantise, peel, assemble and solve exactly for each n; compare with f."""
    if isinstance(f, StepDensity):
        f = CadlagDensity.from_step(f)
    flags = f.admissibility()
    if not all(flags.values()):
        raise ValueError(f"candidate density is not admissible: {flags}")
    jobs = [(f, n, FillMode(mode), max_cells) for n in n_list]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_realize_args, jobs))
    else:
        rows = [_realize_args(j) for j in jobs]
    return ConvergenceReport(f.name, f.T, d_interval(f), rows)


def smallest_valid_n(f: CadlagDensity | StepDensity, n_max: int = 1000) -> int:
    """First n whose quantised density is admissible and not uniform."""
    for n in range(1, n_max + 1):
        q = quantize(f, n)
        if q.H <= 1:
            continue
        rep = validate_density(q.f_n)
        if rep.admissible and not rep.is_uniform:
            return n
    raise ValueError(f"no admissible quantisation up to n={n_max}")
