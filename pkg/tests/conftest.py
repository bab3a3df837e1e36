import random
from fractions import Fraction

import pytest
from hypothesis import strategies as st

from suploc.assembly import build_from_collection
from suploc.blocks import choose_period, peel_blocks
from suploc.density import StepDensity, validate_density

F = Fraction


def e1_density():
    return StepDensity.constant(1, F(1, 2))


def e3_density():
    return StepDensity.from_pieces(1, [(F(1, 2), 1), (1, F(1, 2))])


def random_admissible_density(rng: random.Random, max_den: int = 24, max_pieces: int = 12, T=F(1)):
    """Rejection sampler: T=1, values on grids 1/q with q <= max_den, at most max_pieces pieces."""
    while True:
        q = rng.randint(2, max_den)
        k = rng.randint(1, max_pieces)
        cuts = sorted(rng.sample(range(1, 48), k - 1))
        bps = [F(0)] + [T * F(c, 48) for c in cuts] + [T]
        vals = [F(rng.randint(1, q), q) / T for _ in range(k)]
        f = StepDensity(T, tuple(bps), tuple(vals))
        rep = validate_density(f)
        if rep.admissible and not rep.is_uniform:
            return f


@st.composite
def admissible_densities(draw, max_den=12, max_pieces=6):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_admissible_density(random.Random(seed), max_den, max_pieces)


def brute_tau(path, T, s):
    """Leftmost argmax of ``x`` on ``[s, s+T]`` by direct exact evaluation at every knot inside."""
    P = path.period
    cands = [(path(s), Fraction(0))]
    for c in range(3):
        for p, v in path.knots:
            q = p + c * P
            if s < q < s + T:
                cands.append((v, q - s))
    cands.append((path(s + T), T))
    best = max(v for v, _ in cands)
    return min(t for v, t in cands if v == best)


@pytest.fixture
def e1():
    return e1_density()


@pytest.fixture
def e3():
    return e3_density()


@pytest.fixture
def e3_blocks(e3):
    return peel_blocks(e3, choose_period(e3))


@pytest.fixture
def e1_path():
    f = e1_density()
    return build_from_collection(peel_blocks(f, choose_period(f)))


@pytest.fixture
def e3_repaired(e3_blocks):
    return build_from_collection(e3_blocks, "repaired")


@pytest.fixture
def e3_literal(e3_blocks):
    return build_from_collection(e3_blocks, "literal")


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
