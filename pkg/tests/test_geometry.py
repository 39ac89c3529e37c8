import itertools
import random
from fractions import Fraction

import pytest

from riso_kit.errors import InputError
from riso_kit.geometry import (
    Ball,
    BallConfig,
    ComplementFamily,
    LeafTree,
    ball_relate,
    decide_risometry_config,
    rigid_core_1d,
    rigid_core_partition_1d,
    riso_equiv_1d,
    sample_in_ball,
    trees_equal,
)
from riso_kit.valfield import (
    HahnSeries,
    ONE,
    T,
    ZERO,
    rv_vec,
    vec,
    vec_sub,
)


def B(center, radius, kind="closed"):
    pts = tuple(center) if isinstance(center, (tuple, list)) else (center,)
    return Ball(tuple(pts), Fraction(radius), kind)


def P(center):
    pts = tuple(center) if isinstance(center, (tuple, list)) else (center,)
    return Ball.point(tuple(pts))


UNIT = B(ZERO, 0, "closed")  # closed unit ball in K^1


class TestBallRelations:
    def test_nested(self):
        a = B(ZERO, 1)
        b = B(ZERO, 2)
        rel, enc = ball_relate(a, b)
        assert rel == "b_in_a"
        assert enc.same_ball(a)

    def test_disjoint_with_enclosing(self):
        a = B(ZERO, 2)
        b = B(T, 2)
        rel, enc = ball_relate(a, b)
        assert rel == "disjoint"
        assert enc.same_ball(B(ZERO, 1))

    def test_open_inside_closed_same_radius(self):
        a = B(ZERO, 1, "open")
        b = B(ZERO, 1, "closed")
        rel, _ = ball_relate(a, b)
        assert rel == "a_in_b"

    def test_semantic_equality(self):
        # centers are representatives only
        a = B(ZERO, 1)
        b = B(T ** 2, 1)
        assert a.same_ball(b)
        rel, _ = ball_relate(a, b)
        assert rel == "equal"


class TestConfigDecision:
    def test_translation_pair(self):
        amb = UNIT
        c1 = BallConfig.make(amb, (P(ZERO), P(T)))
        c2 = BallConfig.make(amb, (P(T ** 2), P(T + T ** 2)))
        out = decide_risometry_config(c1, c2, [0, 1])
        assert out["answer"] == "yes"

    def test_leading_coefficient_obstruction(self):
        amb = UNIT
        c1 = BallConfig.make(amb, (P(ZERO), P(T)))
        c2 = BallConfig.make(amb, (P(ZERO), P(2 * T)))
        out = decide_risometry_config(c1, c2, [0, 1])
        assert out["answer"] == "no"
        assert out["violation"]["kind"] == "leading_difference_mismatch"

    def test_identity(self):
        amb = UNIT
        c1 = BallConfig.make(amb, (P(ZERO), B(T, 3)))
        out = decide_risometry_config(c1, c1, [0, 1])
        assert out["answer"] == "yes"

    def test_witness_is_risometry_on_samples(self):
        amb = UNIT
        c1 = BallConfig.make(amb, (P(ZERO), P(T)))
        c2 = BallConfig.make(amb, (P(T ** 2), P(T + T ** 3)))
        out = decide_risometry_config(c1, c2, [0, 1])
        assert out["answer"] == "yes"
        w = out["witness"]
        rng = random.Random(12)
        checked = 0
        for _ in range(200):
            x = sample_in_ball(amb, rng)
            y = sample_in_ball(amb, rng)
            d = vec_sub(x, y)
            if all(c.is_exact_zero() for c in d):
                continue
            fx, fy = w.apply(x), w.apply(y)
            assert rv_vec(vec_sub(fx, fy)) == rv_vec(d)
            checked += 1
        assert checked >= 180

    def test_cut_radius_condition(self):
        amb = UNIT
        c1 = BallConfig.make(amb, (B(ZERO, 2, "closed"),))
        c2 = BallConfig.make(amb, (B(ZERO, 2, "open"),))
        out = decide_risometry_config(c1, c2, [0])
        assert out["answer"] == "no"
        assert out["violation"]["kind"] == "cut_radius_mismatch"


def indicator(points, ambient=None):
    amb = ambient or UNIT
    return LeafTree(amb, 0, tuple(LeafTree(P(p), 1) for p in points))


class TestLeafTree:
    def test_color_at(self):
        t = indicator([ZERO, T])
        assert t.color_at(ZERO) == 1
        assert t.color_at(T) == 1
        assert t.color_at(T * 2) == 0

    def test_normalize_drops_trivial(self):
        t = LeafTree(UNIT, 0, (LeafTree(B(ZERO, 3), 0),))
        assert t.normalized().children == ()

    def test_trees_equal(self):
        t1 = indicator([ZERO, T])
        t2 = indicator([T, ZERO])
        assert trees_equal(t1, t2)
        assert not trees_equal(t1, indicator([ZERO]))


class TestRigidCore:
    def test_two_points(self):
        t = indicator([ZERO, T])
        core = rigid_core_1d(t)
        assert len(core) == 2
        assert all(c.kind == "point" for c in core)

    def test_constant(self):
        t = LeafTree.constant(UNIT, 5)
        out = rigid_core_partition_1d(t)
        assert len(out["core"].items) == 0
        assert out["partition"] == [UNIT]

    def test_single_ball_core_regression(self):
        # indicator of the closed ball of radius exponent 2 inside the unit
        # ball: chains of non-constant closed balls stabilize at that ball
        inner = B(ZERO, 2, "closed")
        t = LeafTree(UNIT, 0, (LeafTree(inner, 1),))
        core = rigid_core_1d(t)
        assert len(core) == 1
        assert core[0].same_ball(inner)
        assert core[0].kind == "closed"

    def test_partition_lookup_properties(self):
        t = indicator([ZERO, T])
        out = rigid_core_partition_1d(t)
        rng = random.Random(3)
        for _ in range(40):
            x = sample_in_ball(UNIT, rng)
            piece = out["lookup"](x)
            if piece.kind == "point":
                continue
            # every partition ball away from the core is open and its closed
            # hull meets the core
            assert piece.kind == "open"
            hull = piece.closed_hull()
            assert any(
                hull.contains_point(item.center) for item in out["core"].items
            )

    def test_open_ball_child_gets_closed_hull(self):
        inner = B(ZERO, 2, "open")
        t = LeafTree(UNIT, 0, (LeafTree(inner, 1),))
        core = rigid_core_1d(t)
        assert len(core) == 1
        assert core[0].kind == "closed"
        assert core[0].radius == Fraction(2)


class TestRisoEquiv1d:
    def test_single_point_translation(self):
        t1 = indicator([ZERO])
        t2 = indicator([T * 3])
        assert riso_equiv_1d(t1, t2)["answer"] == "yes"

    def test_two_points_fail(self):
        t1 = indicator([ZERO, T])
        t2 = indicator([ZERO, 2 * T])
        out = riso_equiv_1d(t1, t2)
        assert out["answer"] == "no"

    def test_identity(self):
        t1 = indicator([ZERO, T, T + T ** 2])
        assert riso_equiv_1d(t1, t1)["answer"] == "yes"

    def test_constant_color_mismatch(self):
        t1 = LeafTree.constant(UNIT, 1)
        t2 = LeafTree.constant(UNIT, 2)
        assert riso_equiv_1d(t1, t2)["answer"] == "no"

    def test_different_scales_fail(self):
        t1 = indicator([ZERO, T])
        t2 = indicator([ZERO, T ** 2])
        assert riso_equiv_1d(t1, t2)["answer"] == "no"

    def test_ball_vs_point_core(self):
        t1 = LeafTree(UNIT, 0, (LeafTree(B(ZERO, 2), 1),))
        t2 = indicator([ZERO])
        assert riso_equiv_1d(t1, t2)["answer"] == "no"

    def test_closed_core_inner_translation(self):
        # two marked points inside the closed ball of radius 1, matched
        # against a translated copy: requires the inner translation search
        inner1 = LeafTree(
            B(ZERO, 1, "closed"),
            0,
            (LeafTree(P(T), 1), LeafTree(P(T + T ** 2), 2)),
        )
        t1 = LeafTree(UNIT, 7, (inner1,))
        shift = 3 * T
        inner2 = LeafTree(
            B(ZERO, 1, "closed"),
            0,
            (LeafTree(P(T + shift * T), 1), LeafTree(P(T + T ** 2 + shift * T), 2)),
        )
        t2 = LeafTree(UNIT, 7, (inner2,))
        assert riso_equiv_1d(t1, t2)["answer"] == "yes"

    def test_equivalence_relation_on_corpus(self):
        rng = random.Random(99)
        corpus = []
        for _ in range(8):
            k = rng.randrange(1, 3)
            pts = []
            used = set()
            for _ in range(k):
                e = rng.randrange(1, 4)
                c = rng.randrange(1, 4)
                if (e, c) not in used:
                    used.add((e, c))
                    pts.append(HahnSeries.t_power(e, c))
            corpus.append(indicator(pts))
        results = {}
        for i, j in itertools.product(range(len(corpus)), repeat=2):
            results[(i, j)] = riso_equiv_1d(corpus[i], corpus[j])["answer"]
        for i in range(len(corpus)):
            assert results[(i, i)] == "yes"
            for j in range(len(corpus)):
                assert results[(i, j)] == results[(j, i)]
                for k in range(len(corpus)):
                    if results[(i, j)] == "yes" and results[(j, k)] == "yes":
                        assert results[(i, k)] == "yes"
