"""Ultrametric balls, finite ball configurations and one-dimensional colorings.

Balls in K^n are stored by a representative center, a radius exponent and a
kind (closed/open/point); equality is semantic (mutual containment), never a
comparison of centers.  Finite disjoint configurations can be tested for the
existence of an ambient risometry matching them item by item, with an explicit
piecewise-translation witness.  Colorings of a one-dimensional ball with
finitely many colors are presented as trees of nested balls; for these, the
existence of a risometry carrying one coloring to the other is decidable and
implemented here, together with the rigid core and rigid partition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import InputError, Inconclusive, PrecisionError
from .valfield import (
    INF,
    Coeff,
    HahnSeries,
    RVVec,
    VecK,
    rv_vec,
    vec_sub,
    vec_val,
)

MAX_TREE_DEPTH = 8
MAX_TREE_NODES = 64


# ---------------------------------------------------------------------------
# balls
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    """A valuative ball or a singleton point in K^n.

    ``radius`` is the exponent of the radius (larger exponent = smaller
    ball); it is ignored for points.  Centers are representatives only;
    use :meth:`same_ball` for semantic equality.
    """

    center: tuple
    radius: Optional[Fraction]
    kind: str  # "closed" | "open" | "point"

    def __post_init__(self):
        if self.kind not in ("closed", "open", "point"):
            raise InputError(f"unknown ball kind {self.kind!r}")
        if self.kind != "point" and not isinstance(self.radius, Fraction):
            raise InputError("ball radius must be an exact rational exponent")

    @staticmethod
    def closed(center: Sequence[HahnSeries], radius) -> "Ball":
        return Ball(tuple(center), Fraction(radius), "closed")

    @staticmethod
    def open(center: Sequence[HahnSeries], radius) -> "Ball":
        return Ball(tuple(center), Fraction(radius), "open")

    @staticmethod
    def point(center: Sequence[HahnSeries]) -> "Ball":
        return Ball(tuple(center), None, "point")

    @property
    def n(self) -> int:
        return len(self.center)

    def is_point(self) -> bool:
        return self.kind == "point"

    def contains_point(self, x: Sequence[HahnSeries]) -> bool:
        d = vec_val(vec_sub(tuple(x), self.center))
        if self.kind == "point":
            if d is INF:
                return True
            # d finite: distinct unless every coordinate difference vanished
            return False
        if self.kind == "closed":
            return d >= self.radius
        return d > self.radius

    def contains_ball(self, other: "Ball") -> bool:
        if other.kind == "point":
            return self.contains_point(other.center)
        if self.kind == "point":
            return False
        d = vec_val(vec_sub(other.center, self.center))
        if self.kind == "closed":
            return other.radius >= self.radius and d >= self.radius
        if other.kind == "closed":
            return other.radius > self.radius and d > self.radius
        return other.radius >= self.radius and d > self.radius

    def same_ball(self, other: "Ball") -> bool:
        return self.contains_ball(other) and other.contains_ball(self)

    def closed_hull(self) -> "Ball":
        """The smallest closed ball containing this ball."""
        if self.kind in ("closed", "point"):
            return self
        return Ball(self.center, self.radius, "closed")

    def cut_radius(self) -> "CutRadius":
        if self.kind == "point":
            raise InputError("points have no cut radius")
        return CutRadius(self.radius, inclusive=self.kind == "closed")

    def recentered(self, x: Sequence[HahnSeries]) -> "Ball":
        if not self.contains_point(x):
            raise InputError("new center lies outside the ball")
        return Ball(tuple(x), self.radius, self.kind)

    def translate(self, v: Sequence[HahnSeries]) -> "Ball":
        return Ball(tuple(c + w for c, w in zip(self.center, v)), self.radius, self.kind)

    def __repr__(self):
        if self.kind == "point":
            return f"pt{list(self.center)}"
        sym = "<=" if self.kind == "closed" else "<"
        return f"B[{sym}t^{self.radius}]({list(self.center)})"


@dataclass(frozen=True)
class CutRadius:
    """The set of pairwise distances inside a ball: exponents >= or > bound."""

    bound: Fraction
    inclusive: bool


def ball_relate(a: Ball, b: Ball) -> tuple[str, Ball]:
    """Relation of two balls plus a minimal enclosing ball.

    Returns one of ``equal, a_in_b, b_in_a, disjoint``.  For nested balls
    the enclosing ball is the outer one; for disjoint balls it is the
    closed ball whose radius is their distance.
    """
    if a.n != b.n:
        raise InputError("ambient dimensions differ")
    a_in_b = b.contains_ball(a)
    b_in_a = a.contains_ball(b)
    if a_in_b and b_in_a:
        return "equal", a
    if a_in_b:
        return "a_in_b", b
    if b_in_a:
        return "b_in_a", a
    d = vec_val(vec_sub(a.center, b.center))
    if d is INF:
        raise PrecisionError("cannot separate balls with identical centers")
    return "disjoint", Ball(a.center, d, "closed")


def rv_between(a: Ball, b: Ball) -> RVVec:
    """rv of the difference of the two disjoint items (well defined)."""
    return rv_vec(vec_sub(a.center, b.center))


# ---------------------------------------------------------------------------
# finite configurations and the explicit matching criterion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BallConfig:
    """Finitely many pairwise disjoint balls and points inside an ambient ball."""

    ambient: Ball
    items: tuple

    @staticmethod
    def make(ambient: Ball, items: Iterable[Ball]) -> "BallConfig":
        items = tuple(items)
        for it in items:
            if it.kind == "point":
                if not ambient.contains_point(it.center):
                    raise InputError("configuration item outside the ambient ball")
            elif not ambient.contains_ball(it):
                raise InputError("configuration item outside the ambient ball")
        for i, j in itertools.combinations(range(len(items)), 2):
            if _items_meet(items[i], items[j]):
                raise InputError(f"items {i} and {j} are not disjoint")
        return BallConfig(ambient, items)


def _items_meet(a: Ball, b: Ball) -> bool:
    if a.kind == "point" and b.kind == "point":
        return vec_val(vec_sub(a.center, b.center)) is INF
    if a.kind == "point":
        return b.contains_point(a.center)
    if b.kind == "point":
        return a.contains_point(b.center)
    rel, _ = ball_relate(a, b)
    return rel != "disjoint"


@dataclass(frozen=True)
class RisoWitness:
    """Piecewise translation: items move by their assigned vectors, and every
    complement region follows its nearest item."""

    source: BallConfig
    target: BallConfig
    pairing: tuple
    translations: tuple  # per source item, a coordinate tuple

    def nearest_item(self, x: VecK) -> int:
        best, best_d = None, None
        for idx, item in enumerate(self.source.items):
            d = vec_val(vec_sub(tuple(x), item.center))
            if best is None or d > best_d:
                best, best_d = idx, d
        return best

    def apply(self, x: VecK) -> VecK:
        i = self.nearest_item(x)
        t = self.translations[i]
        return tuple(c + v for c, v in zip(x, t))


def decide_risometry_config(c1: BallConfig, c2: BallConfig, pairing: Sequence[int]) -> dict:
    """Existence of an ambient risometry matching the items along ``pairing``.

    The answer is yes iff paired items have the same cut radius and all
    pairwise leading differences agree; on yes the returned witness is the
    piecewise translation built from item representatives.
    """
    if len(pairing) != len(c1.items) or sorted(pairing) != list(range(len(c2.items))):
        raise InputError("pairing must be a bijection of item indices")
    cr1, cr2 = c1.ambient.cut_radius(), c2.ambient.cut_radius()
    if cr1 != cr2:
        raise InputError("ambient balls must have identical cut radius")

    for i, j in zip(range(len(c1.items)), pairing):
        a, b = c1.items[i], c2.items[j]
        if a.kind != b.kind:
            return {
                "answer": "no",
                "violation": {"kind": "cut_radius_mismatch", "index": i},
            }
        if a.kind != "point" and a.cut_radius() != b.cut_radius():
            return {
                "answer": "no",
                "violation": {"kind": "cut_radius_mismatch", "index": i},
            }
    for i, j in itertools.combinations(range(len(c1.items)), 2):
        lhs = rv_between(c1.items[i], c1.items[j])
        rhs = rv_between(c2.items[pairing[i]], c2.items[pairing[j]])
        if lhs != rhs:
            return {
                "answer": "no",
                "violation": {
                    "kind": "leading_difference_mismatch",
                    "pair": (i, j),
                    "lhs": repr(lhs),
                    "rhs": repr(rhs),
                },
            }
    translations = tuple(
        tuple(
            bc - ac
            for ac, bc in zip(c1.items[i].center, c2.items[pairing[i]].center)
        )
        for i in range(len(c1.items))
    )
    witness = RisoWitness(c1, c2, tuple(pairing), translations)
    return {"answer": "yes", "witness": witness}


def sample_in_ball(ball: Ball, rng, lattice_m: int = 1, terms: int = 3) -> VecK:
    """A pseudo-random point of the ball with exponents in (1/m)Z.

    Offsets from the center use exponents at or above the radius (strictly
    above for open balls), with small rational coefficients drawn from the
    given RNG; the result is deterministic for a fixed RNG state.
    """
    if ball.kind == "point":
        return ball.center
    out = []
    for c in ball.center:
        items = []
        base = ball.radius
        for j in range(terms):
            step = Fraction(rng.randrange(0, 3 * lattice_m) + j * lattice_m, lattice_m)
            g = base + step
            if ball.kind == "open" and g == base:
                g = g + Fraction(1, lattice_m)
            coeff = Coeff(Fraction(rng.randrange(-4, 5)))
            if not coeff.is_zero():
                items.append((g, coeff))
        offset = HahnSeries.make(items)
        out.append(c + offset)
    return tuple(out)


# ---------------------------------------------------------------------------
# colored leaf trees on a line
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LeafTree:
    """A finitely presented coloring of a one-dimensional ball.

    ``region`` is the governed ball (or point), ``color`` the value taken on
    the region minus the children, and ``children`` are pairwise disjoint
    proper subregions with their own trees.  Point regions are leaves.
    """

    region: Ball
    color: object
    children: tuple = ()

    def __post_init__(self):
        if self.region.n != 1:
            raise InputError("leaf trees live on a line")
        if self.region.kind == "point" and self.children:
            raise InputError("point regions cannot have children")

    @staticmethod
    def constant(region: Ball, color) -> "LeafTree":
        return LeafTree(region, color, ())

    def validate(self, depth: int = 0, seen: list | None = None) -> int:
        if depth > MAX_TREE_DEPTH:
            raise InputError("tree depth limit exceeded")
        count = 1
        for a, b in itertools.combinations(self.children, 2):
            if _items_meet(a.region, b.region):
                raise InputError("tree children overlap")
        for c in self.children:
            if c.region.kind == "point":
                if not self.region.contains_point(c.region.center):
                    raise InputError("child outside parent region")
            else:
                if not self.region.contains_ball(c.region) or self.region.same_ball(
                    c.region
                ):
                    raise InputError("child must be strictly inside the parent")
            count += c.validate(depth + 1)
        if depth == 0 and count > MAX_TREE_NODES:
            raise InputError("tree node limit exceeded")
        return count

    def color_at(self, x) -> object:
        x = (x,) if isinstance(x, HahnSeries) else tuple(x)
        for c in self.children:
            if c.region.kind == "point":
                d = vec_val(vec_sub(x, c.region.center))
                if d is INF:
                    return c.color
            elif c.region.contains_point(x):
                return c.color_at(x)
        return self.color

    def normalized(self) -> "LeafTree":
        """Splice out children that repeat the parent color and carry no data."""
        kids = []
        for c in self.children:
            cn = c.normalized()
            if cn.color == self.color and cn.region.kind != "point":
                kids.extend(cn.children)
            elif cn.region.kind == "point" and cn.color == self.color:
                continue
            else:
                kids.append(cn)
        return LeafTree(self.region, self.color, tuple(kids))

    def is_constant(self) -> bool:
        return not self.normalized().children

    def node_count(self) -> int:
        return 1 + sum(c.node_count() for c in self.children)


def tree_translate(t: LeafTree, v: HahnSeries) -> LeafTree:
    return LeafTree(
        t.region.translate((v,)),
        t.color,
        tuple(tree_translate(c, v) for c in t.children),
    )


def restrict_tree(t: LeafTree, region: Ball) -> LeafTree:
    """The coloring of a subregion, as its own tree."""
    node = t
    while True:
        descend = None
        for c in node.children:
            if c.region.kind == "point":
                continue
            if c.region.same_ball(region):
                return LeafTree(region, c.color, c.children)
            if c.region.contains_ball(region):
                descend = c
                break
        if descend is None:
            break
        node = descend
    kids = []
    for c in node.children:
        inside = (
            region.contains_point(c.region.center)
            if c.region.kind == "point"
            else region.contains_ball(c.region)
        )
        if inside:
            kids.append(c)
    return LeafTree(region, node.color, tuple(kids))


def trees_equal(a: LeafTree, b: LeafTree) -> bool:
    """Exact pointwise equality of two colorings of the same region."""
    if a.region.kind == "point" or b.region.kind == "point":
        if a.region.kind != b.region.kind:
            return False
        if vec_val(vec_sub(a.region.center, b.region.center)) is not INF:
            return False
        return a.color == b.color
    if not a.region.same_ball(b.region):
        return False
    a, b = a.normalized(), b.normalized()
    if not a.children and not b.children:
        return a.color == b.color
    if a.color != b.color:
        return False
    for ca in a.children:
        if ca.region.kind == "point":
            if b.color_at(ca.region.center) != ca.color:
                return False
        elif not trees_equal(
            LeafTree(ca.region, ca.color, ca.children), restrict_tree(b, ca.region)
        ):
            return False
    for cb in b.children:
        if cb.region.kind == "point":
            if a.color_at(cb.region.center) != cb.color:
                return False
        elif not trees_equal(
            restrict_tree(a, cb.region), LeafTree(cb.region, cb.color, cb.children)
        ):
            return False
    return True


# ---------------------------------------------------------------------------
# rigid core and rigid partition in dimension one
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComplementFamily:
    """The maximal balls avoiding the rigid core, described by anchor items."""

    ambient: Ball
    anchors: tuple  # the core items


def rigid_core_1d(tree: LeafTree) -> list[Ball]:
    """Ends of maximal chains of non-constant closed balls.

    In dimension one a coloring is 1-riso-trivial on a ball exactly when it
    is constant there, so the relevant tree is the tree of non-constant
    closed balls; its chain ends are closed hulls of color boundaries.
    """
    t = tree.normalized()
    out: list[Ball] = []
    _collect_core(t, out)
    return out


def _collect_core(node: LeafTree, out: list[Ball]) -> None:
    for c in node.children:
        if c.region.kind == "point":
            out.append(c.region)
        else:
            sub = LeafTree(c.region, c.color, c.children).normalized()
            if sub.children:
                _collect_core(sub, out)
            else:
                out.append(c.region.closed_hull())


def rigid_core_partition_1d(tree: LeafTree) -> dict:
    """Rigid core plus the canonical partition into maximal constant balls.

    The partition is returned as the explicit core items (points stay
    points, constant core balls stay whole, non-constant closed core balls
    are refined recursively) together with one descriptor for the family of
    maximal balls avoiding the core.
    """
    tree.validate()
    core = rigid_core_1d(tree)
    if not core:
        return {
            "core": BallConfig.make(tree.region, ()),
            "partition": [tree.region],
            "lookup": lambda x: tree.region,
        }
    pieces: list = []
    for item in core:
        if item.kind == "point":
            pieces.append(item)
        else:
            sub = restrict_tree(tree, item).normalized()
            if not sub.children:
                pieces.append(item)
            else:
                # non-constant closed core ball: its maximal proper subballs
                # refine recursively; keep the descriptor coarse here
                pieces.append(ComplementFamily(item, (item,)))
    family = ComplementFamily(tree.region, tuple(core))
    config = BallConfig.make(tree.region, tuple(core))

    def lookup(x):
        x = (x,) if isinstance(x, HahnSeries) else tuple(x)
        for item in core:
            if item.kind == "point":
                if vec_val(vec_sub(x, item.center)) is INF:
                    return item
            elif item.contains_point(x):
                sub = restrict_tree(tree, item).normalized()
                if not sub.children:
                    return item
                inner = Ball.open(x, item.radius)
                deeper = restrict_tree(tree, inner).normalized()
                if deeper.children:
                    return rigid_core_partition_1d(deeper)["lookup"](x)
                return inner
        # outside the core: the maximal ball around x avoiding every item
        best = None
        for item in core:
            d = vec_val(vec_sub(x, item.center))
            if d is INF:
                raise PrecisionError("cannot separate the point from the core")
            if best is None or d > best:
                best = d
        return Ball.open(x, best)

    return {"core": config, "partition": pieces + [family], "lookup": lookup}


# ---------------------------------------------------------------------------
# riso-equivalence of one-dimensional colorings
# ---------------------------------------------------------------------------


def riso_equiv_1d(t1: LeafTree, t2: LeafTree) -> dict:
    """Decide whether some ambient risometry carries one coloring to the other.

    Matching proceeds along the rigid cores: item types, cut radii and
    approach profiles must agree, pairwise leading differences must agree,
    and paired core balls must be equivalent up to the finitely many
    translations aligned with presented subball centers.
    """
    t1.validate()
    t2.validate()
    a, b = t1.normalized(), t2.normalized()
    if a.region.cut_radius() != b.region.cut_radius():
        raise InputError("ambient balls must have identical cut radius")
    if not a.children and not b.children:
        if a.color == b.color:
            return {"answer": "yes", "core_map": []}
        return {"answer": "no", "reason": "constant colors differ"}
    if not a.children or not b.children:
        return {"answer": "no", "reason": "one side is constant, the other is not"}

    core1, core2 = rigid_core_1d(a), rigid_core_1d(b)
    if len(core1) != len(core2):
        return {"answer": "no", "reason": "rigid core sizes differ"}

    prof1 = [_approach_profile(a, item) for item in core1]
    prof2 = [_approach_profile(b, item) for item in core2]

    n = len(core1)
    candidates = [
        [j for j in range(n) if _item_compatible(a, core1[i], prof1[i], b, core2[j], prof2[j])]
        for i in range(n)
    ]
    for i in range(n):
        if not candidates[i]:
            return {
                "answer": "no",
                "reason": f"core item {i} matches nothing (cut radius or approach profile)",
            }

    for perm in _bijections(candidates):
        ok = True
        for i, j in itertools.combinations(range(n), 2):
            if rv_between(core1[i], core1[j]) != rv_between(core2[perm[i]], core2[perm[j]]):
                ok = False
                break
        if ok:
            return {"answer": "yes", "core_map": list(enumerate(perm))}
    return {"answer": "no", "reason": "no core pairing satisfies the leading-difference conditions"}


def _bijections(candidates):
    n = len(candidates)
    used = [False] * (n)
    out = [None] * n

    def rec(i):
        if i == n:
            yield tuple(out)
            return
        for j in candidates[i]:
            if not used[j]:
                used[j] = True
                out[i] = j
                yield from rec(i + 1)
                used[j] = False

    yield from rec(0)


def _approach_profile(tree: LeafTree, item: Ball) -> tuple:
    """Colors seen on shells around a core item, from the ambient inward."""
    path = []
    node = tree
    while True:
        path.append(node)
        nxt = None
        for c in node.children:
            if c.region.kind == "point":
                continue
            inside = (
                c.region.contains_point(item.center)
                if item.kind == "point"
                else c.region.contains_ball(item) or c.region.same_ball(item)
            )
            if inside:
                nxt = c
                break
        if nxt is None:
            break
        node = LeafTree(nxt.region, nxt.color, nxt.children)
    shells = tuple(
        (
            n.region.radius,
            n.region.kind,
            n.color,
        )
        for n in path
    )
    return shells


def _item_compatible(a, item1, profile1, b, item2, profile2) -> bool:
    if item1.kind != item2.kind:
        return False
    if item1.kind != "point" and item1.cut_radius() != item2.cut_radius():
        return False
    if profile1 != profile2:
        return False
    if item1.kind == "point":
        return a.color_at(item1.center) == b.color_at(item2.center)
    sub1 = restrict_tree(a, item1).normalized()
    sub2 = restrict_tree(b, item2).normalized()
    return _core_ball_equiv(sub1, sub2)


def _core_ball_equiv(sub1: LeafTree, sub2: LeafTree) -> bool:
    """Equivalence of colorings on paired closed core balls.

    A risometry between closed balls acts on their maximal proper subballs
    as a translation, and the translation must carry presented structure to
    presented structure; within each matched subball arbitrary risometries
    remain allowed, so the comparison recurses there.  Only translations
    aligned with differences of presented subball centers can work.
    """
    if not sub1.children and not sub2.children:
        return sub1.color == sub2.color
    if sub1.color != sub2.color:
        return False
    if not sub1.children or not sub2.children:
        return False
    r = sub1.region.radius
    classes1 = _subball_classes(sub1, r)
    classes2 = _subball_classes(sub2, r)
    if len(classes1) != len(classes2):
        return False
    for m2 in classes2:
        for m1 in classes1:
            d = m2.center[0] - m1.center[0]
            if _classes_match(sub1, classes1, sub2, classes2, d):
                return True
    return False


def _subball_classes(node: LeafTree, r: Fraction) -> list[Ball]:
    """Maximal proper subballs of a closed ball that carry presented structure."""
    out: list[Ball] = []
    for c in node.children:
        rep = Ball.open(c.region.center, r)
        if not any(rep.same_ball(m) for m in out):
            out.append(rep)
    return out


def _classes_match(sub1, classes1, sub2, classes2, d: HahnSeries) -> bool:
    used = [False] * len(classes2)
    for m1 in classes1:
        shifted = m1.translate((d,))
        hit = None
        for j, m2 in enumerate(classes2):
            if not used[j] and shifted.same_ball(m2):
                hit = j
                break
        if hit is None:
            return False
        used[hit] = True
        inner1 = tree_translate(restrict_tree(sub1, m1), d)
        inner2 = restrict_tree(sub2, classes2[hit])
        res = riso_equiv_1d(inner1, inner2)
        if res["answer"] != "yes":
            return False
    return all(used)
