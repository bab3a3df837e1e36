"""Monte Carlo laws of the supremum location.

Two samplers: the shift process, where each draw is resolved exactly from the
oracle's shift partition, and a moving average of triangular bumps, an
m-dependent (hence strongly mixing) stationary process observed on a grid.

Random numbers come from fixed-size blocks of paths, each with its own Philox
stream keyed by ``(seed, block index)``. Blocks never depend on the worker
count, so serial and threaded runs give identical samples.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .assembly import PiecewiseLinearPath
from .oracle import INNER, LEFT, RIGHT, SupLocationLaw, shift_partition

BLOCK = 4096
GENERATOR_ID = f"philox/seedseq[seed,block]/block={BLOCK}"
INNOVATIONS = ("normal", "uniform", "exponential", "rademacher", "constant")


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _blocks(n_paths: int) -> list[tuple[int, int, int]]:
    return [(b, s, min(s + BLOCK, n_paths)) for b, s in enumerate(range(0, n_paths, BLOCK))]


@dataclass
class EmpiricalLaw:
    T: float
    n_paths: int
    edges: np.ndarray
    counts: np.ndarray
    atom0_count: int = 0
    atomT_count: int = 0
    seed: Optional[int] = None
    generator: str = GENERATOR_ID
    tau: Optional[np.ndarray] = field(default=None, repr=False)
    sup_values: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def masses(self) -> np.ndarray:
        return self.counts / self.n_paths

    @property
    def density(self) -> np.ndarray:
        return self.masses / np.diff(self.edges)

    @property
    def atom0_hat(self) -> float:
        return self.atom0_count / self.n_paths

    @property
    def atomT_hat(self) -> float:
        return self.atomT_count / self.n_paths


def _histogram(tau: np.ndarray, T: float, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(0.0, T, n_bins + 1)
    idx = np.clip((tau / T * n_bins).astype(np.int64), 0, n_bins - 1)
    return edges, np.bincount(idx, minlength=n_bins).astype(np.int64)


def sample_shift_tau(
    path: PiecewiseLinearPath, T, n_paths: int, seed: int, n_bins: int = 100, keep_samples: bool = True
) -> EmpiricalLaw:
    """Draw ``U ~ Unif[0, P)`` and read off the leftmost argmax from the exact shift partition."""
    part = shift_partition(path, T)
    Tf, Pf = float(part.T), float(part.period)
    starts = np.array([float(p.start) for p in part.pieces])
    kinds = np.array([p.kind for p in part.pieces])
    pos = np.array([float(p.position) if p.kind == INNER else 0.0 for p in part.pieces])
    taus = []
    for b, lo, hi in _blocks(n_paths):
        u = block_rng(seed, b).random(hi - lo) * Pf
        s = np.mod(Pf - u, Pf)
        i = np.searchsorted(starts, s, side="right") - 1
        k = kinds[i]
        tau = np.where(k == LEFT, 0.0, np.where(k == RIGHT, Tf, pos[i] - s))
        taus.append(tau)
    tau = np.concatenate(taus)
    left = tau == 0.0
    right = tau == Tf
    edges, counts = _histogram(tau[~(left | right)], Tf, n_bins)
    return EmpiricalLaw(
        T=Tf,
        n_paths=n_paths,
        edges=edges,
        counts=counts,
        atom0_count=int(left.sum()),
        atomT_count=int(right.sum()),
        seed=seed,
        tau=tau if keep_samples else None,
    )


@dataclass(frozen=True)
class MixingProcessSpec:
    """Moving average ``X(t) = sum_k e_k phi((t - k w - V) / w)`` with a unit triangular bump phi.

    The random phase ``V ~ Unif[0, w)`` makes the process stationary in
    continuous time; with it X is the linear interpolant of the innovations
    at the knots ``k w + V``.
    """

    w: float = 1.0
    h: float = 0.01
    innovations: str = "normal"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError("w and h must be positive")
        if self.h > self.w / 10 * (1 + 1e-12):
            raise ValueError("grid step must satisfy h <= w/10")
        if self.innovations not in INNOVATIONS:
            raise ValueError(f"unknown innovation law {self.innovations!r}; choose from {INNOVATIONS}")
        if self.innovations == "constant":
            raise ValueError("constant innovations make the supremum location degenerate")


def _innovations(rng: np.random.Generator, kind: str, size) -> np.ndarray:
    if kind == "normal":
        return rng.standard_normal(size)
    if kind == "uniform":
        return rng.random(size)
    if kind == "exponential":
        return rng.standard_exponential(size)
    if kind == "rademacher":
        return rng.integers(0, 2, size=size) * 2.0 - 1.0
    raise ValueError(kind)


def _eval_ma(t: np.ndarray, eps: np.ndarray, phase: np.ndarray, w: float, k0: int) -> np.ndarray:
    """Evaluate the interpolant at times ``t`` (shape ``(B, M)``) for each of B paths."""
    u = (t - phase[:, None]) / w
    j = np.floor(u)
    frac = u - j
    col = j.astype(np.int64) - k0
    rows = np.arange(eps.shape[0])[:, None]
    return eps[rows, col] * (1.0 - frac) + eps[rows, col + 1] * frac


def _mixing_block(spec: MixingProcessSpec, T: float, block: int, n: int, reverse: bool, dense: bool):
    rng = block_rng(spec.seed, block)
    w, h = spec.w, spec.h
    n_grid = int(round(T / h))
    k0 = -2
    k1 = int(np.ceil(T / w)) + 1
    phase = rng.random(n) * w
    eps = _innovations(rng, spec.innovations, (n, k1 - k0 + 1))
    if dense:
        idx = np.broadcast_to(np.arange(n_grid + 1), (n, n_grid + 1))
    else:
        # on each linear stretch the grid maximum sits at the stretch's first or
        # last grid point, so grid points next to the knots plus both ends suffice
        knots = (np.arange(k0, k1 + 1) * w)[None, :] + phase[:, None]
        base = np.floor(knots / h).astype(np.int64)
        near = np.stack([base - 1, base, base + 1, base + 2], axis=-1).reshape(n, -1)
        ends = np.broadcast_to(np.array([0, n_grid]), (n, 2))
        idx = np.clip(np.concatenate([ends[:, :1], near, ends[:, 1:]], axis=1), 0, n_grid)
    vals = _eval_ma(idx * h, eps, phase, w, k0)
    if reverse:
        # leftmost argmax of X(T - t) is the rightmost argmax of X
        best = vals.shape[1] - 1 - np.argmax(vals[:, ::-1], axis=1)
        i = idx[np.arange(n), best]
        tau = (n_grid - i) * h
    else:
        best = np.argmax(vals, axis=1)
        tau = idx[np.arange(n), best] * h
    sup = vals[np.arange(n), best]
    return tau, sup


def simulate_mixing_tau(
    spec: MixingProcessSpec,
    T: float,
    n_paths: int,
    n_bins: int = 50,
    workers: int = 1,
    reverse: bool = False,
    dense: bool = False,
) -> EmpiricalLaw:
    """Leftmost grid argmax of the moving-average process on ``[0, T]``.

    Edge wins are ordinary samples here: they land in the first and last bins.
    ``dense=True`` evaluates every grid point and is meant for cross-checks.
    """
    if T < 10 * spec.w:
        raise ValueError("window must be at least 10 kernel widths long")
    if spec.innovations == "rademacher":
        warnings.warn("discrete innovations: the supremum law has atoms", stacklevel=2)
    jobs = _blocks(n_paths)

    def run(job):
        b, lo, hi = job
        return _mixing_block(spec, T, b, hi - lo, reverse, dense)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    tau = np.concatenate([r[0] for r in results])
    sup = np.concatenate([r[1] for r in results])
    edges, counts = _histogram(tau, T, n_bins)
    return EmpiricalLaw(T=T, n_paths=n_paths, edges=edges, counts=counts, seed=spec.seed, tau=tau, sup_values=sup)


def ks_uniform(e: EmpiricalLaw) -> float:
    """Kolmogorov-Smirnov distance between ``tau/T`` and Unif(0, 1)."""
    if e.tau is None:
        raise ValueError("raw samples were not kept")
    return float(stats.kstest(e.tau / e.T, "uniform").statistic)


def uniformity_band(e: EmpiricalLaw | SupLocationLaw, eps: float):
    """``sup |T f(t) - 1|`` over the band ``[eps T, (1 - eps) T]``.

    Empirical laws use the bins lying entirely inside the band; exact laws
    are evaluated exactly on every piece meeting it.
    """
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    if isinstance(e, SupLocationLaw):
        eps = Fraction(eps).limit_denominator() if not isinstance(eps, Fraction) else eps
        lo, hi = eps * e.T, (1 - eps) * e.T
        vals = [abs(e.T * v - 1) for s, t, v in e.interior.pieces() if t > lo and s < hi]
        return max(vals)
    lo, hi = eps * e.T, (1 - eps) * e.T
    inside = (e.edges[:-1] >= lo - 1e-12) & (e.edges[1:] <= hi + 1e-12)
    if not inside.any():
        raise ValueError("no bin lies inside the band")
    return float(np.max(np.abs(e.T * e.density[inside] - 1.0)))


@dataclass(frozen=True)
class ConditionalEstimate:
    estimate: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    n_conditioning: int
    target: float

    @property
    def covers_target(self) -> bool:
        return self.estimate is not None and self.ci_low <= self.target <= self.ci_high


def conditional_uniformity(e: EmpiricalLaw | SupLocationLaw, a, a_in, b_in, b, confidence: float = 0.95):
    """``P(tau in (a', b') | tau in (a, b))`` with an exact binomial interval.

    For an exact law the ratio is returned as a Fraction.
    """
    if not (0 <= a <= a_in < b_in <= b <= e.T):
        raise ValueError("need 0 <= a <= a' < b' <= b <= T")
    if isinstance(e, SupLocationLaw):
        whole = e.interior.integral(a, b)
        if whole == 0:
            raise ValueError("conditioning interval has zero mass")
        return e.interior.integral(a_in, b_in) / whole
    if e.tau is None:
        raise ValueError("raw samples were not kept")
    target = (b_in - a_in) / (b - a)
    cond = (e.tau > a) & (e.tau < b)
    n = int(cond.sum())
    if n == 0:
        return ConditionalEstimate(None, None, None, 0, target)
    k = int(((e.tau > a_in) & (e.tau < b_in) & cond).sum())
    ci = stats.binomtest(k, n).proportion_ci(confidence_level=confidence)
    return ConditionalEstimate(k / n, float(ci.low), float(ci.high), n, target)


def atom_proxy(e: EmpiricalLaw | Sequence[float]) -> float:
    """Largest relative frequency of one exactly repeated supremum value."""
    sups = e.sup_values if isinstance(e, EmpiricalLaw) else np.asarray(e)
    if sups is None or len(sups) == 0:
        raise ValueError("no supremum values available")
    _, counts = np.unique(sups, return_counts=True)
    return float(counts.max() / len(sups))


def empirical_vs_exact(e: EmpiricalLaw, law: SupLocationLaw, sigmas: float = 3.0) -> dict:
    """Per-bin comparison of a shift-process sample against its exact law."""
    edges = [Fraction(x).limit_denominator(10**12) for x in e.edges]
    edges[0], edges[-1] = Fraction(0), law.T
    p = np.array([float(law.interior.integral(s, t)) for s, t in zip(edges, edges[1:])])
    n = e.n_paths
    se = np.sqrt(np.maximum(p * (1 - p), 1e-300) / n)
    within = np.abs(e.masses - p) <= sigmas * se + 1.0 / n
    a0, aT = float(law.atom0), float(law.atomT)
    return {
        "bins_within": float(within.mean()),
        "atom0_err": abs(e.atom0_hat - a0),
        "atomT_err": abs(e.atomT_hat - aT),
        "atom0_se": float(np.sqrt(a0 * (1 - a0) / n)),
        "atomT_se": float(np.sqrt(aT * (1 - aT) / n)),
    }
