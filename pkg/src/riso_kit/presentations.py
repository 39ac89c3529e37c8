"""Finite presentations of definable sets and colorings.

A twisted graph cell is the graph of a contracting polynomial map over a
product of one-dimensional balls sitting inside a coordinate subspace; a
cell complex is a finite disjoint union of such cells.  Colorings are
either cell indicators with a background color or leading-term data of a
short list of polynomials.  The central computational service is tracing a
coloring along an affine line, which turns membership conditions into
univariate equations solved by Newton-polygon iteration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .errors import InputError, Inconclusive, PrecisionError
from .geometry import Ball, LeafTree, sample_in_ball
from .valfield import (
    DEFAULT_PREC,
    INF,
    Coeff,
    HahnSeries,
    PolyK,
    Polynomial,
    VecK,
    ZERO,
    ONE,
    ZERO_C,
    exp_min,
    rv_vec,
    vec_sub,
    vec_val,
)


# ---------------------------------------------------------------------------
# cells
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BaseSpec:
    """Product domain for the horizontal coordinates of a cell.

    ``signs`` restricts coordinates to sign classes in the ordered setting
    (subsets of {-1, 0, 1}); None means no constraint.
    """

    balls: tuple  # tuple[Ball] in axis order, each one-dimensional
    signs: tuple = None  # tuple[frozenset | None] or None

    def __post_init__(self):
        for b in self.balls:
            if b.n != 1:
                raise InputError("base balls are one-dimensional")
        if self.signs is not None and len(self.signs) != len(self.balls):
            raise InputError("one sign constraint per base coordinate")

    def contains(self, w: Sequence[HahnSeries]) -> bool:
        if len(w) != len(self.balls):
            raise InputError("base dimension mismatch")
        for x, b in zip(w, self.balls):
            if not b.contains_point((x,)):
                return False
        if self.signs is not None:
            for x, s in zip(w, self.signs):
                if s is not None and x.sign() not in s:
                    return False
        return True


@dataclass(frozen=True)
class TwistedGraphCell:
    """Graph of a contracting map over a coordinate subspace.

    ``axes`` are the horizontal coordinate indices; the remaining indices
    carry the graph values, listed in increasing coordinate order.  Graph
    maps are polynomials in the named axis variables with series
    coefficients.
    """

    n: int
    axes: tuple
    base: BaseSpec
    graph: tuple  # tuple[PolyK], one per complementary coordinate

    def __post_init__(self):
        if sorted(set(self.axes)) != list(self.axes):
            raise InputError("axes must be strictly increasing indices")
        if len(self.base.balls) != len(self.axes):
            raise InputError("one base ball per axis")
        if len(self.graph) != self.n - len(self.axes):
            raise InputError("one graph map per complementary coordinate")

    @property
    def co_axes(self) -> tuple:
        return tuple(i for i in range(self.n) if i not in self.axes)

    def axis_vars(self) -> tuple:
        return tuple(f"w{i}" for i in self.axes)

    def graph_value(self, w: Sequence[HahnSeries]) -> VecK:
        point = dict(zip(self.axis_vars(), w))
        return tuple(g.eval(point) for g in self.graph)

    def contains_point(self, x: Sequence[HahnSeries]) -> Optional[bool]:
        """Membership; None when precision cannot separate graph values."""
        w = tuple(x[i] for i in self.axes)
        if not self.base.contains(w):
            return False
        values = self.graph_value(w)
        on_cell = True
        for i, v in zip(self.co_axes, values):
            diff = x[i] - v
            if diff.terms:
                return False
            if diff.prec is not INF:
                on_cell = None
        return on_cell if on_cell is not None else None

    def sample_point(self, rng, lattice_m: int = 1) -> VecK:
        while True:
            w = [sample_in_ball(b, rng, lattice_m)[0] for b in self.base.balls]
            if self.base.signs is not None:
                ok = all(
                    s is None or x.sign() in s for x, s in zip(w, self.base.signs)
                )
                if not ok:
                    continue
            values = self.graph_value(w)
            out = [None] * self.n
            for idx, i in enumerate(self.axes):
                out[i] = w[idx]
            for idx, i in enumerate(self.co_axes):
                out[i] = values[idx]
            return tuple(out)

    def exponents_in_lattice(self, m: int) -> bool:
        for b in self.base.balls:
            if (b.radius * m).denominator != 1:
                return False
            if not all(c.exponents_in_lattice(m) for c in b.center):
                return False
        return all(g.exponents_in_lattice(m) for g in self.graph)


def _ball_val_lower_bound(b: Ball) -> tuple:
    """(bound, exclusive): valuations on the ball are >= bound, or > bound."""
    center_val = b.center[0].val_lower_bound()
    if center_val is INF or center_val >= b.radius:
        return b.radius, b.kind == "open"
    return center_val, False


def cell_validate(cell: TwistedGraphCell, rng=None, samples: int = 500) -> dict:
    """Certify strict contraction of the graph map.

    The syntactic criterion bounds every monomial of every partial
    difference quotient by a positive valuation over the base; when that is
    inconclusive, sampled pairs decide probabilistically and the report
    records which check was used.
    """
    bounds = {
        v: _ball_val_lower_bound(b) for v, b in zip(cell.axis_vars(), cell.base.balls)
    }
    syntactic_ok = True
    for g in cell.graph:
        for v in cell.axis_vars():
            for mono, c in g.coeffs:
                i = g.vars.index(v)
                if mono[i] == 0:
                    continue
                lb = c.val_lower_bound()
                if lb is INF:
                    continue
                exclusive = False
                for u, e in zip(g.vars, mono):
                    deg = e - 1 if u == v else e
                    bu, exu = bounds[u]
                    lb = lb + deg * bu
                    if deg > 0 and exu:
                        exclusive = True
                if not (lb > 0 or (lb == 0 and exclusive)):
                    syntactic_ok = False
    if syntactic_ok:
        return {"ok": True, "check": "syntactic"}
    import random as _random

    rng = rng or _random.Random(0)
    for _ in range(samples):
        x = cell.sample_point(rng)
        y = cell.sample_point(rng)
        wx = tuple(x[i] for i in cell.axes)
        wy = tuple(y[i] for i in cell.axes)
        dw = vec_sub(wx, wy)
        if all(c.is_exact_zero() for c in dw):
            continue
        dg = vec_sub(cell.graph_value(wx), cell.graph_value(wy))
        if all(c.is_exact_zero() for c in dg):
            continue
        if not vec_val(dg) > vec_val(dw):
            return {
                "ok": False,
                "check": "probabilistic",
                "witness": {"x": x, "y": y},
            }
    return {"ok": True, "check": "probabilistic"}


@dataclass(frozen=True)
class CellComplex:
    ambient: Ball
    cells: tuple

    @staticmethod
    def make(ambient: Ball, cells: Sequence[TwistedGraphCell], rng=None) -> "CellComplex":
        import random as _random

        rng = rng or _random.Random(1)
        cells = tuple(cells)
        for c in cells:
            if c.n != ambient.n:
                raise InputError("cell dimension mismatch")
        for a, b in itertools.combinations(cells, 2):
            if a.axes == b.axes:
                collisions = 0
                diffs_somewhere = False
                for _ in range(50):
                    x = a.sample_point(rng)
                    w = tuple(x[i] for i in a.axes)
                    if not b.base.contains(w):
                        diffs_somewhere = True
                        continue
                    gb = b.graph_value(w)
                    ga = tuple(x[i] for i in a.co_axes)
                    d = vec_sub(ga, gb)
                    if all(c.is_exact_zero() for c in d):
                        collisions += 1
                    else:
                        diffs_somewhere = True
                if collisions:
                    raise InputError("cells overlap on sampled points")
                if not diffs_somewhere:
                    raise InputError("cells with equal axes must differ somewhere")
        return CellComplex(ambient, cells)

    def dim(self) -> int:
        return max((len(c.axes) for c in self.cells), default=0)


# ---------------------------------------------------------------------------
# colorings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellColoring:
    complex: CellComplex
    cell_colors: tuple
    background: object
    lattice_m: Optional[int] = None

    def __post_init__(self):
        if len(self.cell_colors) != len(self.complex.cells):
            raise InputError("one color per cell")

    @property
    def ambient(self) -> Ball:
        return self.complex.ambient

    @property
    def n(self) -> int:
        return self.ambient.n


@dataclass(frozen=True)
class MonomialRVColoring:
    """Color of a point is the joint leading-term datum of the polynomials."""

    polys: tuple
    ambient: Ball
    lattice_m: Optional[int] = None

    def __post_init__(self):
        if not 1 <= len(self.polys) <= 3:
            raise InputError("between one and three polynomials")
        if self.ambient.n > 3:
            raise InputError("leading-term colorings support ambient dimension <= 3")

    @property
    def n(self) -> int:
        return self.ambient.n


@dataclass(frozen=True)
class HypersurfaceColoring:
    """Indicator of the common zero set of a polynomial list."""

    polys: tuple
    ambient: Ball
    lattice_m: Optional[int] = None

    @property
    def n(self) -> int:
        return self.ambient.n

    def on_set(self, x: Sequence[HahnSeries]) -> bool:
        for f in self.polys:
            v = f.eval(list(x))
            if v.terms:
                return False
            if v.prec is not INF:
                raise PrecisionError("membership undecided at this precision")
        return True


Coloring = object  # CellColoring | MonomialRVColoring | TupleColoring


@dataclass(frozen=True)
class TupleColoring:
    """Pointwise tuple of component colorings on a shared ambient ball."""

    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise InputError("empty tuple coloring")

    @property
    def ambient(self) -> Ball:
        return self.parts[0].ambient

    @property
    def n(self) -> int:
        return self.parts[0].n


def coloring_eval(chi, x: Sequence[HahnSeries]):
    """Value of a coloring at a point; raises on undecidable membership."""
    x = tuple(x)
    if isinstance(chi, TupleColoring):
        return tuple(coloring_eval(p, x) for p in chi.parts)
    if isinstance(chi, CellColoring):
        for cell, color in zip(chi.complex.cells, chi.cell_colors):
            inside = cell.contains_point(x)
            if inside is None:
                raise PrecisionError("membership undecided at this precision")
            if inside:
                return color
        return chi.background
    if isinstance(chi, MonomialRVColoring):
        values = tuple(f.eval(list(x)) for f in chi.polys)
        return rv_vec(values)
    if isinstance(chi, HypersurfaceColoring):
        return 1 if chi.on_set(x) else 0
    raise InputError(f"unknown coloring {type(chi).__name__}")


def coloring_uses_coordinate(chi, i: int) -> bool:
    """Whether the presentation has any syntactic dependence on coordinate i."""
    if isinstance(chi, TupleColoring):
        return any(coloring_uses_coordinate(p, i) for p in chi.parts)
    if isinstance(chi, MonomialRVColoring):
        return any(i < len(f.vars) and f.uses(f.vars[i]) for f in chi.polys)
    if isinstance(chi, HypersurfaceColoring):
        return any(i < len(f.vars) and f.uses(f.vars[i]) for f in chi.polys)
    if isinstance(chi, CellColoring):
        for cell in chi.complex.cells:
            if i not in cell.axes:
                return True  # the graph condition pins coordinate i
            pos = cell.axes.index(i)
            ball = cell.base.balls[pos]
            if not (ball.kind == chi.ambient.kind and ball.radius == chi.ambient.radius):
                return True
            if cell.base.signs is not None and cell.base.signs[pos] is not None:
                return True
            var = cell.axis_vars()[pos]
            if any(g.degree_in(var) > 0 for g in cell.graph):
                return True
        return False
    raise InputError(f"unknown coloring {type(chi).__name__}")


# ---------------------------------------------------------------------------
# subfield restriction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubfieldSpec:
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise InputError("lattice denominator must be positive")


def restrict_subfield(obj, spec: SubfieldSpec):
    """Record the exponent lattice after checking the data lies inside it."""
    m = spec.m
    if isinstance(obj, CellColoring):
        for cell in obj.complex.cells:
            if not cell.exponents_in_lattice(m):
                raise InputError("cell data uses exponents outside the lattice")
        if (obj.ambient.radius * m).denominator != 1:
            raise InputError("ambient radius outside the lattice")
        return CellColoring(obj.complex, obj.cell_colors, obj.background, lattice_m=m)
    if isinstance(obj, MonomialRVColoring):
        if (obj.ambient.radius * m).denominator != 1:
            raise InputError("ambient radius outside the lattice")
        return MonomialRVColoring(obj.polys, obj.ambient, lattice_m=m)
    if isinstance(obj, TupleColoring):
        return TupleColoring(tuple(restrict_subfield(p, spec) for p in obj.parts))
    raise InputError(f"cannot restrict {type(obj).__name__}")


# ---------------------------------------------------------------------------
# univariate roots by Newton-polygon iteration
# ---------------------------------------------------------------------------


def _coeff_poly_roots(coeffs: Sequence[Coeff]):
    """Roots with multiplicity of a polynomial over Q(i), or None.

    Complete for degree <= 2; higher degrees are handled through rational
    root extraction and deflation and give None when that fails.
    """
    cs = list(coeffs)
    while cs and cs[-1].is_zero():
        cs.pop()
    if not cs:
        raise InputError("zero polynomial has no root list")
    deg = len(cs) - 1
    roots: list = []
    mult0 = 0
    while cs[0].is_zero():
        mult0 += 1
        cs = cs[1:]
    if mult0:
        roots.append((ZERO_C, mult0))
    deg = len(cs) - 1
    if deg == 0:
        return roots
    if deg == 1:
        roots.append((-cs[0] / cs[1], 1))
        return _merge_roots(roots)
    if deg == 2:
        a, b, c = cs[2], cs[1], cs[0]
        disc = b * b - Coeff.of(4) * a * c
        sq = disc.sqrts()
        if not sq:
            return None
        if disc.is_zero():
            roots.append((-b / (Coeff.of(2) * a), 2))
        else:
            for s in (sq[0], -sq[0]):
                roots.append(((-b + s) / (Coeff.of(2) * a), 1))
        return _merge_roots(roots)
    # degree >= 3: rational root extraction and deflation
    if all(c.is_rational() for c in cs):
        r = _rational_root(cs)
        if r is not None:
            quotient = _deflate(cs, r)
            rest = _coeff_poly_roots(quotient)
            if rest is None:
                return None
            roots.append((r, 1))
            roots.extend(rest)
            return _merge_roots(roots)
    return None


def _merge_roots(roots):
    acc: dict = {}
    for r, m in roots:
        acc[r] = acc.get(r, 0) + m
    return sorted(acc.items(), key=lambda p: (p[0].re, p[0].im))


def _rational_root(cs):
    lead = cs[-1].re
    const = cs[0].re
    if const == 0:
        return ZERO_C
    num_divs = _divisors(abs(const.numerator * lead.denominator))
    den_divs = _divisors(abs(lead.numerator * const.denominator))
    for p in num_divs:
        for q in den_divs:
            for s in (1, -1):
                cand = Coeff(Fraction(s * p, q))
                val = ZERO_C
                for c in reversed(cs):
                    val = val * cand + c
                if val.is_zero():
                    return cand
    return None


def _divisors(n: int):
    out = []
    d = 1
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            out.append(n // d)
        d += 1
    return sorted(set(out))


def _deflate(cs, root: Coeff):
    out = [ZERO_C] * (len(cs) - 1)
    carry = cs[-1]
    for i in range(len(cs) - 2, -1, -1):
        out[i] = carry
        carry = cs[i] + carry * root
    return out


def _poly_eval_dense(coeffs: Sequence[HahnSeries], x: HahnSeries) -> HahnSeries:
    out = ZERO
    for c in reversed(coeffs):
        out = out * x + c
    return out


def _poly_derivative_dense(coeffs: Sequence[HahnSeries]):
    return [c.scale(Coeff.of(i)) for i, c in enumerate(coeffs)][1:] or [ZERO]


def puiseux_roots(
    coeffs: Sequence[HahnSeries], target_prec: Fraction = DEFAULT_PREC, depth: int = 8
) -> list[HahnSeries]:
    """All roots of a univariate polynomial over K, to the target precision.

    Raises Inconclusive when coefficients would require an algebraic
    extension of the coefficient field, and PrecisionError when coefficient
    precision does not determine the Newton polygon.
    """
    cs = list(coeffs)
    while cs and cs[-1].is_exact_zero():
        cs.pop()
    if not cs:
        raise InputError("the zero polynomial vanishes identically")
    if len(cs) == 1:
        return []
    roots: list[HahnSeries] = []
    lead_zeros = 0
    while cs[lead_zeros].is_exact_zero():
        lead_zeros += 1
    if lead_zeros:
        roots.append(ZERO)
        cs = cs[lead_zeros:]
        if len(cs) == 1:
            return roots
    if cs[0].known_zero():
        raise PrecisionError("constant term undetermined")
    pts = []
    for i, c in enumerate(cs):
        if c.terms:
            pts.append((i, c.val()))
        elif c.prec is not INF:
            pts.append((i, None))  # unknown, bounded below by prec only
    hull = _lower_hull([(i, v) for i, v in pts if v is not None])
    for i, v in pts:
        if v is None and _below_hull(hull, i, cs[i].prec):
            raise PrecisionError("coefficient precision hides a polygon vertex")
    for (i0, v0), (i1, v1) in zip(hull, hull[1:]):
        gamma = (v0 - v1) / (i1 - i0)
        res_cs = [ZERO_C] * (i1 - i0 + 1)
        for i, v in pts:
            if v is None or not i0 <= i <= i1:
                continue
            if v == v0 - (i - i0) * gamma:
                res_cs[i - i0] = cs[i].ac()
        found = _coeff_poly_roots(res_cs)
        if found is None:
            raise Inconclusive("residue equation needs an algebraic extension")
        for z, mult in found:
            if z.is_zero():
                continue
            approx = HahnSeries.t_power(gamma, z)
            if mult == 1:
                roots.append(_newton_refine(cs, approx, target_prec))
            else:
                if depth <= 0:
                    raise Inconclusive("root cluster not separated within depth budget")
                shifted = _shift_poly(cs, approx)
                for r in puiseux_roots(shifted, target_prec, depth - 1):
                    roots.append(approx + r)
    return roots


def _lower_hull(pts):
    pts = sorted(pts)
    if not pts:
        raise PrecisionError("no determined coefficients")
    hull = [pts[0]]
    for p in pts[1:]:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # pop the middle point when it is not strictly below segment 1->p
            if (y2 - y1) * (p[0] - x1) >= (p[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def _below_hull(hull, i, prec) -> bool:
    if prec is INF:
        return False
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        if x1 <= i <= x2:
            edge = y1 + (y2 - y1) * Fraction(i - x1, x2 - x1)
            if prec <= edge:
                return True
    if i < hull[0][0] or i > hull[-1][0]:
        return prec <= min(y for _, y in hull)
    return False


def _shift_poly(cs, a: HahnSeries):
    """Coefficients of p(a + x)."""
    out = [ZERO] * len(cs)
    for i, c in enumerate(cs):
        # expand c * (a + x)^i
        binom = 1
        power = ONE
        row = []
        for k in range(i + 1):
            row.append((k, Coeff.of(binom)))
            binom = binom * (i - k) // (k + 1)
        apow = [ONE]
        for _ in range(i):
            apow.append(apow[-1] * a)
        for k, bc in row:
            out[k] = out[k] + c * apow[i - k].scale(bc)
    return out


def _newton_refine(cs, x0: HahnSeries, target_prec: Fraction) -> HahnSeries:
    deriv = _poly_derivative_dense(cs)
    v0 = x0.val()
    ap = v0 + target_prec  # absolute precision target
    x = x0
    for _ in range(80):
        fx = _poly_eval_dense(cs, x)
        if fx.is_exact_zero():
            return x
        dfx = _poly_eval_dense(deriv, x)
        if fx.known_zero():
            return x.truncate(min(ap, fx.prec - dfx.val()))
        step = fx / dfx
        x = (x - step).truncate(ap)
        if step.val_lower_bound() >= ap:
            return x.truncate(ap)
    raise PrecisionError("root refinement did not converge")


# ---------------------------------------------------------------------------
# line traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Line:
    """x(tau) = point + tau * direction, tau in the parameter ball."""

    point: tuple
    direction: tuple
    params: Ball

    def __post_init__(self):
        if len(self.point) != len(self.direction):
            raise InputError("line data dimension mismatch")
        if self.params.n != 1:
            raise InputError("parameter ball is one-dimensional")

    def at(self, tau: HahnSeries) -> VecK:
        return tuple(p + tau * d for p, d in zip(self.point, self.direction))


@dataclass(frozen=True)
class VaryingColor:
    """Marker for a region where the leading-term color is not constant."""

    data: tuple


def coloring_trace_line(chi, line: Line, depth: int = 6) -> LeafTree:
    """Present the restriction of a coloring to a line as a leaf tree.

    Regions carrying a ``VaryingColor`` are honest markers of non-constant
    leading-term data; all other regions are exactly constant.
    """
    if isinstance(chi, TupleColoring):
        trees = [coloring_trace_line(p, line, depth) for p in chi.parts]
        return _zip_trees(trees, line.params)
    if isinstance(chi, CellColoring):
        return _trace_cells(chi, line)
    if isinstance(chi, MonomialRVColoring):
        return _trace_monomial(chi, line, depth)
    raise InputError(f"unknown coloring {type(chi).__name__}")


def _affine_coordinates(line: Line):
    return [(p, d) for p, d in zip(line.point, line.direction)]


def _tau_region_for_ball(alpha: HahnSeries, beta: HahnSeries, ball: Ball):
    """{tau : alpha + beta*tau in the one-dimensional ball}; None if empty,
    'all' when the condition holds identically on K."""
    c = ball.center[0]
    a = alpha - c
    if beta.is_exact_zero():
        va = a.val() if not a.known_zero() else (INF if a.is_exact_zero() else None)
        if va is None:
            raise PrecisionError("cannot locate the line relative to the base")
        ok = va > ball.radius if ball.kind == "open" else va >= ball.radius
        return "all" if ok else None
    tau0 = -a / beta
    vb = beta.val()
    return Ball((tau0,), ball.radius - vb, ball.kind)


def _intersect_regions(regions, params: Ball):
    """Intersect tau-regions (balls or 'all') with the parameter ball."""
    current = params
    for r in regions:
        if r == "all":
            continue
        if r is None:
            return None
        rel_current_in_r = r.contains_ball(current)
        if rel_current_in_r:
            continue
        if current.contains_ball(r):
            current = r
            continue
        return None
    return current


def _trace_cells(chi: CellColoring, line: Line) -> LeafTree:
    coords = _affine_coordinates(line)
    children = []
    whole_color = None
    for cell, color in zip(chi.complex.cells, chi.cell_colors):
        region_balls = []
        for pos, axis in enumerate(cell.axes):
            alpha, beta = coords[axis]
            region_balls.append(_tau_region_for_ball(alpha, beta, cell.base.balls[pos]))
        region = _intersect_regions(region_balls, line.params)
        if region is None:
            continue
        # sign constraints: decidable only on sign-pure regions
        sign_state = _check_signs(cell, coords, region)
        if sign_state == "mixed":
            raise Inconclusive("line crosses a sign boundary of a cell base")
        if sign_state == "out":
            continue
        # graph conditions: univariate equations for tau
        conds = []
        for idx, co in enumerate(cell.co_axes):
            alpha, beta = coords[co]
            h = _compose_graph_line(cell.graph[idx], cell, coords)
            if len(h) < 2:
                h = h + [ZERO] * (2 - len(h))
            h[0] = h[0] - alpha
            h[1] = h[1] - beta
            while len(h) > 1 and h[-1].is_exact_zero():
                h.pop()
            if len(h) == 1 and h[0].is_exact_zero():
                continue  # identically satisfied
            conds.append(h)
        if not conds:
            children.append((region, color))
            continue
        roots_sets = []
        for h in conds:
            if all(c.is_exact_zero() for c in h):
                continue
            roots_sets.append(puiseux_roots(h))
        commons = None
        for rs in roots_sets:
            pts = []
            for r in rs:
                pts.append(r)
            if commons is None:
                commons = pts
            else:
                commons = [
                    r
                    for r in commons
                    if any((r - s).known_zero() and _same_root(r, s) for s in pts)
                ]
        for r in commons or []:
            if region.contains_point((r,)):
                if _sign_ok_at(cell, coords, r):
                    children.append((Ball.point((r,)), color))
    tree_children = []
    for region, color in children:
        if region.kind == "point":
            tree_children.append(LeafTree(region, color))
        elif region.same_ball(line.params):
            whole_color = color
        else:
            tree_children.append(LeafTree(region, color))
    base_color = whole_color if whole_color is not None else chi.background
    return LeafTree(line.params, base_color, tuple(tree_children))


def _same_root(r: HahnSeries, s: HahnSeries) -> bool:
    d = r - s
    if d.is_exact_zero():
        return True
    if d.terms:
        return False
    # equal up to the available precision
    return True


def _check_signs(cell: TwistedGraphCell, coords, region: Ball) -> str:
    if cell.base.signs is None or all(s is None for s in cell.base.signs):
        return "in"
    for pos, axis in enumerate(cell.axes):
        s = cell.base.signs[pos]
        if s is None:
            continue
        alpha, beta = coords[axis]
        center = region.center[0]
        value_at_center = alpha + beta * center
        if region.kind == "point":
            if value_at_center.sign() not in s:
                return "out"
            continue
        if value_at_center.is_exact_zero():
            if beta.is_exact_zero():
                if 0 not in s:
                    return "out"
                continue
            return "mixed"
        v = value_at_center.val()
        spread = beta.val_lower_bound() + region.radius
        # the sign is pinned by the center value when the variation is smaller
        if spread is INF or v < spread or (v == spread and region.kind == "open"):
            if value_at_center.sign() not in s:
                return "out"
        else:
            return "mixed"
    return "in"


def _sign_ok_at(cell: TwistedGraphCell, coords, tau: HahnSeries) -> bool:
    if cell.base.signs is None:
        return True
    for pos, axis in enumerate(cell.axes):
        s = cell.base.signs[pos]
        if s is None:
            continue
        alpha, beta = coords[axis]
        value = alpha + beta * tau
        if value.sign() not in s:
            return False
    return True


def _compose_graph_line(g: PolyK, cell: TwistedGraphCell, coords) -> list:
    """Dense tau-coefficients of g(w(tau)) along the line."""
    tau_vars = ("tau",)
    acc = PolyK.constant(ZERO, tau_vars)
    for mono, c in g.coeffs:
        term = PolyK.constant(c, tau_vars)
        for var, e in zip(g.vars, mono):
            axis = cell.axes[cell.axis_vars().index(var)]
            alpha, beta = coords[axis]
            aff = PolyK.make(tau_vars, {(0,): alpha, (1,): beta})
            for _ in range(e):
                term = term * aff
        acc = acc + term
    dense = acc.univariate()
    return dense if dense else [ZERO]


def _zip_trees(trees, params: Ball) -> LeafTree:
    """Pointwise tuple of several colorings of the same line."""
    from .geometry import restrict_tree

    def merge(nodes):
        colors = tuple(n.color for n in nodes)
        # overlay boundaries: all child regions, keeping maximal distinct ones
        regions: list[Ball] = []
        for n in nodes:
            for c in n.children:
                regions.append(c.region)
        maximal: list[Ball] = []
        for r in regions:
            if any(_region_inside(r, m) for m in maximal):
                continue
            maximal = [m for m in maximal if not _region_inside(m, r)]
            maximal.append(r)
        kids = []
        for region in maximal:
            subnodes = []
            for n in nodes:
                if region.kind == "point":
                    subnodes.append(LeafTree(region, n.color_at(region.center)))
                else:
                    subnodes.append(restrict_tree(n, region))
            kids.append(merge(subnodes))
        return LeafTree(nodes[0].region, colors, tuple(kids))

    return merge(list(trees))


def _region_inside(a: Ball, b: Ball) -> bool:
    """Whether region a lies inside (or equals) region b."""
    if b.kind == "point":
        return a.kind == "point" and vec_val(vec_sub(a.center, b.center)) is INF
    if a.kind == "point":
        return b.contains_point(a.center)
    return b.contains_ball(a)


def _region_eq(a: Ball, b: Ball) -> bool:
    if a.kind == "point" or b.kind == "point":
        if a.kind != b.kind:
            return False
        return vec_val(vec_sub(a.center, b.center)) is INF
    return a.same_ball(b)


def _trace_monomial(chi: MonomialRVColoring, line: Line, depth: int) -> LeafTree:
    coords = _affine_coordinates(line)
    hs = []
    for f in chi.polys:
        dense = _compose_poly_line(f, coords)
        hs.append(dense)
    return _monomial_region_tree(hs, line.params, depth)


def _compose_poly_line(f: Polynomial, coords) -> list:
    tau_vars = ("tau",)
    acc = PolyK.constant(ZERO, tau_vars)
    for mono, c in f.coeffs:
        term = PolyK.constant(HahnSeries.const(c), tau_vars)
        for (alpha, beta), e in zip(coords, mono):
            aff = PolyK.make(tau_vars, {(0,): alpha, (1,): beta})
            for _ in range(e):
                term = term * aff
        acc = acc + term
    dense = acc.univariate()
    return dense if dense else [ZERO]


def _recenter(dense, center: HahnSeries):
    return _shift_poly(list(dense), center)


def _rv_constant_on(dense, region: Ball):
    """The constant value (with constant leading term) on the region, or None."""
    cs = _recenter(dense, region.center[0])
    if all(c.is_exact_zero() for c in cs):
        return ZERO
    c0 = cs[0]
    if c0.is_exact_zero():
        return None
    if c0.known_zero():
        raise PrecisionError("leading behavior undetermined on the region")
    v0 = c0.val()
    for k in range(1, len(cs)):
        ck = cs[k]
        if ck.is_exact_zero():
            continue
        bound = ck.val_lower_bound() + k * region.radius
        # the offset term must stay strictly below the constant term
        if region.kind == "closed" and not bound > v0:
            return None
        if region.kind == "open" and bound < v0:
            return None
    return c0


def _monomial_region_tree(hs, region: Ball, depth: int) -> LeafTree:
    consts = []
    constant = True
    for dense in hs:
        c = _rv_constant_on(dense, region)
        if c is None:
            constant = False
            break
        consts.append(c)
    if constant:
        color = rv_vec(tuple(consts))
        return LeafTree(region, color)
    if depth <= 0:
        return LeafTree(region, VaryingColor(_germ_data(hs, region)))
    # refine around the critical points: roots of each component
    crit: list[HahnSeries] = []
    for dense in hs:
        nonzero = [c for c in dense if not c.is_exact_zero()]
        if len(nonzero) <= 1 and not dense[0].is_exact_zero():
            continue
        try:
            for r in puiseux_roots(dense):
                if region.contains_point((r,)):
                    crit.append(r)
        except Inconclusive:
            return LeafTree(region, VaryingColor(_germ_data(hs, region)))
    clusters: list[HahnSeries] = []
    for r in crit:
        if not any((r - s).known_zero() for s in clusters):
            clusters.append(r)
    if not clusters:
        return LeafTree(region, VaryingColor(_germ_data(hs, region)))
    children = []
    for rho in clusters:
        radius = _next_level(hs, rho, region)
        if radius is None or radius <= region.radius:
            child_region = Ball.open((rho,), region.radius + 1)
        else:
            child_region = Ball.closed((rho,), radius)
        children.append(_monomial_region_tree(hs, child_region, depth - 1))
    return LeafTree(region, VaryingColor(_germ_data(hs, region)), tuple(children))


def _next_level(hs, rho: HahnSeries, region: Ball):
    """The next radius at which the dominant term pattern can change."""
    best = None
    for dense in hs:
        cs = _recenter(dense, rho)
        vals = [(k, c.val()) for k, c in enumerate(cs) if c.terms]
        for (k1, v1), (k2, v2) in itertools.combinations(vals, 2):
            if k1 == k2:
                continue
            s = (v1 - v2) / (k2 - k1)
            if s > region.radius:
                if best is None or s < best:
                    best = s
    return best


def _germ_data(hs, region: Ball) -> tuple:
    out = []
    for dense in hs:
        cs = _recenter(dense, region.center[0])
        entry = tuple(
            (k, c.val(), c.ac()) for k, c in enumerate(cs) if c.terms
        )
        out.append(entry)
    return (region.radius, region.kind, tuple(out))
