import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings

from suploc.assembly import (
    Component,
    FillMode,
    PiecewiseLinearPath,
    assign_components,
    audit_path,
    build_component_profile,
    build_from_collection,
    build_path,
    fill_gaps,
    layout_order,
)
from suploc.blocks import BlockCollection, BlockKind, InfeasibleError, choose_period, classify, feasibility, peel_blocks

from conftest import admissible_densities


def coll(T, H, *spans):
    return BlockCollection(F(T), F(H), tuple(classify(u, v, T) for u, v in spans))


def eq36_length(comp, d, T):
    """Component length written out term by term."""
    L = d * (1 + len(comp.lefts) + len(comp.rights) + (comp.central is not None)) + T
    L += sum(b.v for b in comp.lefts) + sum(T - b.u for b in comp.rights)
    if comp.central is not None:
        L += comp.central.v - comp.central.u
    return L


def built(f, mode="repaired"):
    c = peel_blocks(f, choose_period(f))
    comps = layout_order(assign_components(c), c.d)
    return c, comps, build_path(comps, c.d, c.T, c.H, mode)


class TestAssign:
    def test_base_only(self):
        c = coll(1, 2, (0, 1))
        (comp,) = assign_components(c)
        assert c.d == 1 and comp.length(c.d) == 2 == c.period

    def test_base_left(self):
        c = coll(1, 2, (0, 1), (0, F(1, 2)))
        (comp,) = assign_components(c)
        assert len(comp.lefts) == 1 and comp.length(c.d) == 2

    def test_two_components(self):
        # a proper variant of the two-base example: the central sits clear of both lefts
        c = coll(1, 4, (0, 1), (0, 1), (F(3, 4), F(7, 8)), (0, F(1, 3)), (0, F(2, 3)))
        comps = assign_components(c)
        assert len(comps) == 2
        assert [len(k.lefts) for k in comps] == [1, 1]
        assert comps[0].central is not None and comps[1].central is None
        assert sum(k.length(c.d) for k in comps) == c.period
        assert all(k.length(c.d) == eq36_length(k, c.d, c.T) for k in comps)

    def test_crossing_variant_rejected(self):
        c = coll(1, 4, (0, 1), (0, 1), (F(1, 4), F(1, 2)), (0, F(1, 3)), (0, F(2, 3)))
        assert not feasibility(c).proper
        with pytest.raises(InfeasibleError):
            assign_components(c)

    @given(admissible_densities(max_den=24, max_pieces=12))
    def test_balanced_and_lengths(self, f):
        c = peel_blocks(f, choose_period(f))
        comps = assign_components(c)
        assert len(comps) == c.count(BlockKind.BASE)
        for attr in ("lefts", "rights"):
            counts = [len(getattr(k, attr)) for k in comps]
            assert max(counts) - min(counts) <= 1
        assert sum(1 for k in comps if k.central) == c.count(BlockKind.CENTRAL)
        assert sum(k.length(c.d) for k in comps) == c.period
        for k in comps:
            assert build_component_profile(k, c.d, c.T)[-1][0] == eq36_length(k, c.d, c.T)


class TestProfile:
    def test_base_only(self):
        comp = Component(base=classify(0, 1, 1))
        assert build_component_profile(comp, 1, 1) == [(0, 2), (2, 2)]

    def test_base_left_literal(self):
        comp = Component(base=classify(0, 1, 1), lefts=[classify(0, F(1, 2), 1)])
        assert build_component_profile(comp, F(1, 4), 1, "literal") == [(0, 2), (F(1, 4), 1), (F(3, 4), 1), (2, 2)]

    def test_base_left_repaired(self):
        comp = Component(base=classify(0, 1, 1), lefts=[classify(0, F(1, 2), 1)])
        prof = build_component_profile(comp, F(1, 4), 1, "repaired")
        assert prof == [(0, 2), (F(1, 4), 1), (F(3, 4), 1), (F(7, 4), 1), (2, 2)]

    def test_base_right_repaired(self):
        comp = Component(base=classify(0, 1, 1), rights=[classify(F(1, 2), 1, 1)])
        prof = build_component_profile(comp, F(1, 4), 1, "repaired")
        # descend to 1 over d, equal-value span of T, then the right pair at 1
        assert prof == [(0, 2), (F(1, 4), 1), (F(5, 4), 1), (F(7, 4), 1), (2, 2)]
        assert build_component_profile(comp, F(1, 4), 1, "literal") == [(0, 2), (F(5, 4), 1), (F(7, 4), 1), (2, 2)]

    def test_full_component(self):
        T = F(1)
        comp = Component(
            base=classify(0, 1, T),
            central=classify(F(1, 4), F(1, 2), T),
            lefts=[classify(0, F(1, 8), T), classify(0, F(1, 10), T)],
            rights=[classify(F(3, 4), 1, T)],
        )
        d = F(1, 5)
        prof = build_component_profile(comp, d, T)
        assert [v for _, v in prof] == [2, F(3, 2), F(3, 2), 1, 1, F(1, 2), F(1, 2), F(1, 2), 1, 1, 2]
        assert prof[1][0] == d and prof[2][0] == d + F(1, 10)  # lefts sorted by v
        assert prof[-1][0] == eq36_length(comp, d, T)
        assert build_component_profile(comp, d, T, "literal") == prof


class TestFillGaps:
    def test_tent_d1(self):
        out = fill_gaps([(0, 2), (2, 2)], 1)
        assert out == [(0, 2), (1, 1), (2, 2)]

    def test_tent_to_zero(self):
        assert fill_gaps([(F(1, 4), 1), (F(3, 4), 1)], F(1, 4)) == [(F(1, 4), 1), (F(1, 2), 0), (F(3, 4), 1)]

    def test_boundary_minus_one(self):
        assert fill_gaps([(F(3, 4), 1), (F(7, 4), 1)], F(1, 4)) == [(F(3, 4), 1), (F(5, 4), -1), (F(7, 4), 1)]

    def test_deep_tent(self):
        out = fill_gaps([(0, 1), (3, 1)], F(1, 4))
        assert out[1] == (F(1, 4), 0) and out[3] == (F(11, 4), 0)
        assert out[2] == (F(3, 2), -1)
        slopes = [(yb - ya) / (b - a) for (a, ya), (b, yb) in zip(out, out[1:])]
        assert max(abs(s) for s in slopes) <= 4 and min(abs(s) for s in slopes) > 0

    def test_unequal_is_linear(self):
        assert fill_gaps([(0, 2), (F(1, 4), 1)], F(1, 4)) == [(0, 2), (F(1, 4), 1)]

    def test_zero_width_gap(self):
        with pytest.raises(ValueError):
            fill_gaps([(0, 1), (0, 1)], 1)


class TestBuild:
    def test_e1(self, e1_path):
        assert e1_path.period == 2 and e1_path.knots == ((0, 2), (1, 1))

    def test_e3_repaired(self, e3_repaired):
        skel = {(F(0), F(2)), (F(1, 4), F(1)), (F(3, 4), F(1)), (F(7, 4), F(1))}
        assert skel <= set(e3_repaired.knots)
        assert (F(1, 2), 0) in e3_repaired.knots and (F(5, 4), -1) in e3_repaired.knots
        assert e3_repaired(2) == 2

    def test_two_components_maxima(self):
        c = coll(1, 4, (0, 1), (0, 1))
        path = build_from_collection(c)
        comps = layout_order(assign_components(c), c.d)
        a = audit_path(path, comps, c.d)
        maxima = [path.knots[i] for i in path.local_maxima()]
        assert maxima == [(0, 2), (2, 2)] and a.ok

    def test_wrong_layout_length(self):
        comp = Component(base=classify(0, 1, 1))
        with pytest.raises(AssertionError):
            build_path([comp], 1, 1, 3)

    @given(admissible_densities())
    def test_left_order_invariance(self, f):
        c, comps, path = built(f)
        for k in comps:
            random.Random(0).shuffle(k.lefts)
            random.Random(1).shuffle(k.rights)
        assert build_path(comps, c.d, c.T, c.H) == path

    @given(admissible_densities(max_den=24, max_pieces=12))
    def test_repair_noop_without_one_sided(self, f):
        c, comps, rep = built(f, "repaired")
        lit = build_path(comps, c.d, c.T, c.H, "literal")
        one_sided = any(k.central is None and bool(k.lefts) != bool(k.rights) for k in comps)
        assert (rep.knots == lit.knots) or one_sided


class TestAudit:
    def test_e1(self, e1, e1_path):
        c = peel_blocks(e1, 2)
        a = audit_path(e1_path, assign_components(c), c.d)
        assert a.ok and a.n_local_maxima == 1 and a.maxima_values == {2}
        assert a.assumption_L_rate == F(1, 2) and a.max_slope == 1

    def test_e3(self, e3_repaired, e3_blocks):
        a = audit_path(e3_repaired, assign_components(e3_blocks), e3_blocks.d)
        assert a.ok
        assert a.maxima_values == {1, 2} and a.min_maxima_gap == F(3, 4)
        assert a.max_slope == 4 and a.min_value == -1

    def test_close_maxima_fail(self):
        d = F(1)
        edited = PiecewiseLinearPath(2, ((0, 2), (F(1, 4), F(3, 2)), (F(1, 2), 2), (F(5, 4), 1)))
        a = audit_path(edited, [Component(base=classify(0, 1, 1))], d)
        assert not a.ok and any("closer than d" in v for v in a.violations)

    def test_out_of_bounds_fail(self):
        edited = PiecewiseLinearPath(2, ((0, 2), (1, -2)))
        a = audit_path(edited, [Component(base=classify(0, 1, 1))], 2)
        assert any("[-1, 2]" in v for v in a.violations)

    @settings(max_examples=60)
    @given(admissible_densities(max_den=24, max_pieces=12))
    def test_all_feasible_paths_pass(self, f):
        for mode in FillMode:
            c, comps, path = built(f, mode)
            a = audit_path(path, comps, c.d)
            assert a.ok, a.violations
            assert path(0) == 2 and path.period == c.period

