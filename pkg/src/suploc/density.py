"""Exact step densities on (0, T) and the admissibility checks they must pass."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

from .rational import Q, as_fraction


class StructureError(ValueError):
    """Malformed breakpoints or values."""


@dataclass(frozen=True)
class StepDensity:
    """Piecewise-constant density; ``values[i]`` holds on ``[breakpoints[i], breakpoints[i+1])``."""

    T: Fraction
    breakpoints: tuple[Fraction, ...]
    values: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        bps = tuple(as_fraction(b) for b in self.breakpoints)
        vals = tuple(as_fraction(v) for v in self.values)
        T = as_fraction(self.T)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        if T <= 0:
            raise StructureError(f"window length must be positive, got {T}")
        if len(bps) != len(vals) + 1 or not vals:
            raise StructureError("need k+1 breakpoints for k values")
        if bps[0] != 0 or bps[-1] != T:
            raise StructureError("breakpoints must start at 0 and end at T")
        if any(b >= c for b, c in zip(bps, bps[1:])):
            raise StructureError("breakpoints must be strictly increasing")
        if any(v < 0 for v in vals):
            raise StructureError("density values must be nonnegative")

    @classmethod
    def from_pieces(cls, T: Q, pieces: Iterable[tuple[Q, Q]]) -> "StepDensity":
        """Build from ``(until, value)`` pairs, the JSON piece layout."""
        bps = [Fraction(0)]
        vals = []
        for until, value in pieces:
            bps.append(as_fraction(until))
            vals.append(as_fraction(value))
        return cls(as_fraction(T), tuple(bps), tuple(vals))

    @classmethod
    def constant(cls, T: Q, value: Q) -> "StepDensity":
        T = as_fraction(T)
        return cls(T, (Fraction(0), T), (as_fraction(value),))

    @classmethod
    def uniform(cls, T: Q) -> "StepDensity":
        T = as_fraction(T)
        return cls.constant(T, 1 / T)

    def pieces(self) -> Iterator[tuple[Fraction, Fraction, Fraction]]:
        """Yield ``(start, end, value)`` for every piece."""
        for i, v in enumerate(self.values):
            yield self.breakpoints[i], self.breakpoints[i + 1], v

    def __call__(self, t: Q) -> Fraction:
        t = as_fraction(t)
        if not 0 <= t < self.T:
            raise ValueError(f"t={t} outside [0, T)")
        # rightmost piece whose start is <= t
        lo, hi = 0, len(self.values) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.breakpoints[mid] <= t:
                lo = mid
            else:
                hi = mid - 1
        return self.values[lo]

    def integral(self, a: Q | None = None, b: Q | None = None) -> Fraction:
        a = Fraction(0) if a is None else as_fraction(a)
        b = self.T if b is None else as_fraction(b)
        if b <= a:
            return Fraction(0)
        total = Fraction(0)
        for s, e, v in self.pieces():
            lo, hi = max(s, a), min(e, b)
            if hi > lo:
                total += v * (hi - lo)
        return total

    def canonical(self) -> "StepDensity":
        """Merge neighbouring pieces with equal values."""
        bps = [self.breakpoints[0]]
        vals: list[Fraction] = []
        for s, e, v in self.pieces():
            if vals and vals[-1] == v:
                bps[-1] = e
            else:
                vals.append(v)
                bps.append(e)
        return StepDensity(self.T, tuple(bps), tuple(vals))

    def refine(self, points: Iterable[Q]) -> "StepDensity":
        """Same function with extra breakpoints inserted."""
        extra = {as_fraction(p) for p in points}
        bps = sorted(set(self.breakpoints) | {p for p in extra if 0 < p < self.T})
        vals = tuple(self(s) for s in bps[:-1])
        return StepDensity(self.T, tuple(bps), vals)

    def shifted_restriction(self, delta: Q, length: Q) -> "StepDensity":
        """The density ``t -> self(t + delta)`` on ``(0, length)``."""
        delta, length = as_fraction(delta), as_fraction(length)
        if delta < 0 or delta + length > self.T or length <= 0:
            raise ValueError("restriction window outside (0, T)")
        bps = [Fraction(0)] + [b - delta for b in self.breakpoints if delta < b < delta + length] + [length]
        vals = tuple(self(delta + s) for s in bps[:-1])
        return StepDensity(length, tuple(bps), vals)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StepDensity):
            return NotImplemented
        a, b = self.canonical(), other.canonical()
        return a.T == b.T and a.breakpoints == b.breakpoints and a.values == b.values

    def __hash__(self) -> int:
        c = self.canonical()
        return hash((c.T, c.breakpoints, c.values))

    def to_pieces(self) -> list[tuple[Fraction, Fraction]]:
        return [(e, v) for _, e, v in self.pieces()]


def common_breakpoints(*densities: StepDensity) -> list[Fraction]:
    pts: set[Fraction] = set()
    for f in densities:
        pts.update(f.breakpoints)
    return sorted(pts)


@dataclass(frozen=True)
class DensityReport:
    tv: Fraction
    f0plus: Fraction
    fTminus: Fraction
    inf_value: Fraction
    integral: Fraction
    is_uniform: bool
    passes_a: bool
    passes_b: bool
    passes_c: bool
    passes_universal_bound: bool

    @property
    def admissible(self) -> bool:
        return self.passes_a and self.passes_b and self.passes_c


def total_variation(f: StepDensity) -> Fraction:
    """Sum of the interior jumps; the endpoint levels are not jumps."""
    return sum((abs(b - a) for a, b in zip(f.values, f.values[1:])), Fraction(0))


def check_universal_bound(f: StepDensity) -> bool:
    """Whether ``f(t) <= max(1/t, 1/(T-t))`` on (0, T).

    The envelope decreases up to T/2 and increases after it, so on each piece
    only the piece end closest to T/2 needs checking.
    """
    T = f.T
    half = T / 2
    for a, b, v in f.pieces():
        if a <= half <= b:
            bound = 2 / T
        elif b < half:
            bound = 1 / b
        else:
            bound = 1 / (T - a)
        if v > bound:
            return False
    return True


def validate_density(f: StepDensity) -> DensityReport:
    tv = total_variation(f)
    f0, fT = f.values[0], f.values[-1]
    inf_value = min(f.values)
    integral = f.integral()
    is_uniform = all(v == 1 / f.T for v in f.values)
    return DensityReport(
        tv=tv,
        f0plus=f0,
        fTminus=fT,
        inf_value=inf_value,
        integral=integral,
        is_uniform=is_uniform,
        passes_a=tv <= f0 + fT,
        passes_b=inf_value > 0,
        passes_c=is_uniform or integral < 1,
        passes_universal_bound=check_universal_bound(f),
    )


def _check_lemma_args(T: Fraction, delta_window: Fraction, shift: Fraction) -> None:
    if not (0 <= shift <= delta_window < T):
        raise ValueError(f"need 0 <= delta <= Delta < T, got delta={shift}, Delta={delta_window}, T={T}")


def check_window_monotonicity(law_long, law_short, T: Q, Delta: Q, delta: Q) -> bool:
    """Shrinking the window cannot lower the density: ``f_{T-Delta}(t) >= f_T(t+delta)``.

    Compared exactly on the common refinement of the two step densities.
    """
    T, Delta, delta = as_fraction(T), as_fraction(Delta), as_fraction(delta)
    _check_lemma_args(T, Delta, delta)
    f_long, f_short = _interior(law_long), _interior(law_short)
    if f_long.T != T or f_short.T != T - Delta:
        raise ValueError("law windows do not match T and T - Delta")
    shifted = f_long.shifted_restriction(delta, T - Delta)
    for t in common_breakpoints(shifted, f_short)[:-1]:
        if f_short(t) < shifted(t):
            return False
    return True


def check_integral_inequality(law_long, law_short, T: Q, Delta: Q, delta: Q, eps1: Q, eps2: Q) -> bool:
    T, Delta, delta = as_fraction(T), as_fraction(Delta), as_fraction(delta)
    eps1, eps2 = as_fraction(eps1), as_fraction(eps2)
    _check_lemma_args(T, Delta, delta)
    if eps1 < 0 or eps2 < 0 or eps1 + eps2 >= T - Delta:
        raise ValueError("need eps1, eps2 >= 0 and eps1 + eps2 < T - Delta")
    f_long, f_short = _interior(law_long), _interior(law_short)
    upper = T - Delta - eps2
    lhs = f_short.integral(eps1, upper) - f_long.integral(eps1 + delta, upper + delta)
    rhs = f_long.integral(eps1, eps1 + delta) + f_long.integral(T - Delta - eps2 + delta, T - eps2)
    return lhs <= rhs


def _interior(law) -> StepDensity:
    return law if isinstance(law, StepDensity) else law.interior


def piecewise_max_abs_diff(a: StepDensity, b: StepDensity) -> Fraction:
    if a.T != b.T:
        raise ValueError("densities live on different windows")
    return max(abs(a(t) - b(t)) for t in common_breakpoints(a, b)[:-1])


def piecewise_l1_diff(a: StepDensity, b: StepDensity) -> Fraction:
    if a.T != b.T:
        raise ValueError("densities live on different windows")
    pts = common_breakpoints(a, b)
    return sum((abs(a(s) - b(s)) * (e - s) for s, e in zip(pts, pts[1:])), Fraction(0))

