"""Motivic measures and local Poincare series with exact value-ring arithmetic.

The value ring is Z[L, L^-1] (Laurent polynomials in the Lefschetz symbol),
and generating series in T are carried either truncated (TSeries) or as
rational functions whose denominators are products of factors 1 - L^a T^b
(TRational).  Lattice-region sums turn valuation-bucket decompositions into
closed forms; an F_p jet-counting oracle provides independent integer checks
via the specialization L -> p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import InputError, Inconclusive
from .valfield import Coeff, Polynomial

# ---------------------------------------------------------------------------
# Laurent polynomials in L
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LPoly:
    """Laurent polynomial in L with integer coefficients."""

    coeffs: tuple  # tuple[(int exponent, int coeff), ...] sorted

    @staticmethod
    def make(items: Mapping[int, int] | Iterable) -> "LPoly":
        if isinstance(items, Mapping):
            items = items.items()
        acc: dict = {}
        for e, c in items:
            acc[int(e)] = acc.get(int(e), 0) + int(c)
        return LPoly(tuple(sorted((e, c) for e, c in acc.items() if c)))

    @staticmethod
    def zero() -> "LPoly":
        return LPoly(())

    @staticmethod
    def one() -> "LPoly":
        return LPoly(((0, 1),))

    @staticmethod
    def L(e: int = 1, c: int = 1) -> "LPoly":
        return LPoly.make({e: c})

    @staticmethod
    def integer(n: int) -> "LPoly":
        return LPoly.make({0: n})

    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other) -> "LPoly":
        o = _lcoerce(other)
        acc = dict(self.coeffs)
        for e, c in o.coeffs:
            acc[e] = acc.get(e, 0) + c
        return LPoly.make(acc)

    __radd__ = __add__

    def __neg__(self) -> "LPoly":
        return LPoly(tuple((e, -c) for e, c in self.coeffs))

    def __sub__(self, other) -> "LPoly":
        return self + (-_lcoerce(other))

    def __rsub__(self, other) -> "LPoly":
        return _lcoerce(other) + (-self)

    def __mul__(self, other) -> "LPoly":
        o = _lcoerce(other)
        acc: dict = {}
        for e1, c1 in self.coeffs:
            for e2, c2 in o.coeffs:
                acc[e1 + e2] = acc.get(e1 + e2, 0) + c1 * c2
        return LPoly.make(acc)

    __rmul__ = __mul__

    def shift(self, e: int) -> "LPoly":
        return LPoly(tuple((k + e, c) for k, c in self.coeffs))

    def specialize(self, x) -> Fraction:
        """Value at L = x (exact)."""
        x = Fraction(x)
        return sum((Fraction(c) * x ** e for e, c in self.coeffs), Fraction(0))

    def __repr__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for e, c in reversed(self.coeffs):
            if e == 0:
                parts.append(f"{c}")
            elif e == 1:
                parts.append(f"{c}*L" if c != 1 else "L")
            else:
                parts.append(f"{c}*L^{e}" if c != 1 else f"L^{e}")
        return " + ".join(parts).replace("+ -", "- ")

    def to_json(self) -> dict:
        return {str(e): c for e, c in self.coeffs}


def _lcoerce(x) -> LPoly:
    if isinstance(x, LPoly):
        return x
    if isinstance(x, int):
        return LPoly.integer(x)
    raise InputError(f"cannot coerce {x!r} into Z[L, L^-1]")


def lpoly_div_exact(num: LPoly, den: LPoly) -> LPoly | None:
    """Exact quotient num/den in Z[L, L^-1], or None when it does not divide."""
    if den.is_zero():
        raise ZeroDivisionError("division by zero in Z[L, L^-1]")
    if num.is_zero():
        return LPoly.zero()
    shift_n = num.coeffs[0][0]
    shift_d = den.coeffs[0][0]
    n = {e - shift_n: c for e, c in num.coeffs}
    d = {e - shift_d: c for e, c in den.coeffs}
    dn = max(n)
    dd = max(d)
    lead = d[dd]
    out = {}
    work = dict(n)
    for e in range(dn - dd, -1, -1):
        c = work.get(e + dd, 0)
        if c == 0:
            continue
        if c % lead:
            return None
        q = c // lead
        out[e] = q
        for k, v in d.items():
            work[e + k] = work.get(e + k, 0) - q * v
            if work[e + k] == 0:
                del work[e + k]
    if work:
        return None
    return LPoly.make(out).shift(shift_n - shift_d)


L = LPoly.L()
LINV = LPoly.L(-1)
ONE_L = LPoly.one()
ONE_MINUS_LINV = ONE_L - LINV


# ---------------------------------------------------------------------------
# truncated series and rational functions in T
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TSeries:
    """Coefficients of T^1 .. T^rmax over Z[L, L^-1]."""

    coeffs: tuple  # tuple[LPoly, ...]

    @property
    def rmax(self) -> int:
        return len(self.coeffs)

    @staticmethod
    def make(coeffs: Sequence[LPoly]) -> "TSeries":
        return TSeries(tuple(_lcoerce(c) for c in coeffs))

    def coeff(self, r: int) -> LPoly:
        if not 1 <= r <= self.rmax:
            raise InputError(f"coefficient T^{r} outside truncation 1..{self.rmax}")
        return self.coeffs[r - 1]

    def __add__(self, other: "TSeries") -> "TSeries":
        n = min(self.rmax, other.rmax)
        return TSeries.make([self.coeffs[i] + other.coeffs[i] for i in range(n)])

    def __sub__(self, other: "TSeries") -> "TSeries":
        n = min(self.rmax, other.rmax)
        return TSeries.make([self.coeffs[i] - other.coeffs[i] for i in range(n)])

    def first_difference(self, other: "TSeries") -> int | None:
        n = min(self.rmax, other.rmax)
        for i in range(n):
            if self.coeffs[i] != other.coeffs[i]:
                return i + 1
        return None

    def specialize(self, x) -> tuple:
        return tuple(c.specialize(x) for c in self.coeffs)

    def to_json(self) -> list:
        return [c.to_json() for c in self.coeffs]


def _tpoly_mul(a: dict, b: dict) -> dict:
    acc: dict = {}
    for e1, c1 in a.items():
        for e2, c2 in b.items():
            k = e1 + e2
            acc[k] = acc.get(k, LPoly.zero()) + c1 * c2
    return {k: v for k, v in acc.items() if not v.is_zero()}


@dataclass(frozen=True)
class TRational:
    """num / prod (1 - L^a T^b); num a polynomial in T over Z[L, L^-1]."""

    num: tuple  # tuple[(int T-exp, LPoly)], sorted
    den: tuple  # tuple[(int a, int b)], sorted, each meaning (1 - L^a T^b)

    @staticmethod
    def make(num: Mapping[int, LPoly], den: Iterable = ()) -> "TRational":
        n = tuple(sorted((int(k), v) for k, v in num.items() if not _lcoerce(v).is_zero()))
        d = tuple(sorted((int(a), int(b)) for a, b in den))
        for a, b in d:
            if b < 1:
                raise InputError("denominator factors must involve T")
        return TRational(tuple((k, _lcoerce(v)) for k, v in n), d)

    @staticmethod
    def zero() -> "TRational":
        return TRational.make({})

    @staticmethod
    def monomial(texp: int, coeff: LPoly) -> "TRational":
        return TRational.make({texp: coeff})

    def is_zero(self) -> bool:
        return not self.num

    def _num_dict(self) -> dict:
        return dict(self.num)

    def __add__(self, other: "TRational") -> "TRational":
        from collections import Counter

        d1, d2 = Counter(self.den), Counter(other.den)
        common = d1 & d2
        extra1 = list((d2 - common).elements())  # factors missing from self
        extra2 = list((d1 - common).elements())
        n1 = self._num_dict()
        for a, b in extra1:
            n1 = _tpoly_mul(n1, {0: ONE_L, b: -LPoly.L(a)})
        n2 = other._num_dict()
        for a, b in extra2:
            n2 = _tpoly_mul(n2, {0: ONE_L, b: -LPoly.L(a)})
        acc = dict(n1)
        for k, v in n2.items():
            acc[k] = acc.get(k, LPoly.zero()) + v
        den = sorted(((d1 | d2)).elements())
        return TRational.make(acc, den)

    def __sub__(self, other: "TRational") -> "TRational":
        return self + other.scale(LPoly.integer(-1))

    def __mul__(self, other: "TRational") -> "TRational":
        return TRational.make(
            _tpoly_mul(self._num_dict(), other._num_dict()),
            tuple(self.den) + tuple(other.den),
        )

    def scale(self, c: LPoly) -> "TRational":
        return TRational.make({k: v * c for k, v in self.num}, self.den)

    def substitute_LdT(self, d: int) -> "TRational":
        """T |-> L^d * T."""
        num = {k: v * LPoly.L(d * k) for k, v in self.num}
        den = [(a + d * b, b) for a, b in self.den]
        return TRational.make(num, den)

    def divide_L_exact(self, den: LPoly) -> "TRational":
        out = {}
        for k, v in self.num:
            q = lpoly_div_exact(v, den)
            if q is None:
                raise Inconclusive("a pure-L geometric factor does not divide exactly")
            out[k] = q
        return TRational.make(out, self.den)

    def expand(self, rmax: int) -> TSeries:
        out = dict(self.num)
        out = {k: v for k, v in out.items() if k <= rmax}
        for a, b in self.den:
            geo = {}
            j = 0
            while j * b <= rmax:
                geo[j * b] = LPoly.L(a * j)
                j += 1
            out = _tpoly_mul(out, geo)
            out = {k: v for k, v in out.items() if k <= rmax}
        if any(k < 0 for k in out):
            raise InputError("negative T-exponents in expansion")
        coeffs = [out.get(r, LPoly.zero()) for r in range(1, rmax + 1)]
        if not out.get(0, LPoly.zero()).is_zero():
            raise InputError("series has a nonzero constant term")
        return TSeries.make(coeffs)

    def equals(self, other: "TRational") -> bool:
        """Exact equality by cross multiplication."""
        lhs = self._num_dict()
        for a, b in other.den:
            lhs = _tpoly_mul(lhs, {0: ONE_L, b: -LPoly.L(a)})
        rhs = other._num_dict()
        for a, b in self.den:
            rhs = _tpoly_mul(rhs, {0: ONE_L, b: -LPoly.L(a)})
        return lhs == rhs

    def __repr__(self):
        num = " + ".join(f"({c})T^{k}" for k, c in self.num) or "0"
        den = "".join(f"(1 - ({LPoly.L(a)})T^{b})" for a, b in self.den)
        return f"[{num}] / {den}" if den else f"[{num}]"

    def to_json(self) -> dict:
        return {
            "numerator": {str(k): c.to_json() for k, c in self.num},
            "denominator_factors": [{"L_exp": a, "T_exp": b} for a, b in self.den],
        }


# ---------------------------------------------------------------------------
# affine forms and lattice regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Aff:
    """Integer affine form  const + sum coefs[i] * s_i."""

    const: int
    coefs: tuple

    @staticmethod
    def make(const: int, coefs: Sequence[int]) -> "Aff":
        return Aff(int(const), tuple(int(c) for c in coefs))

    def __add__(self, other: "Aff") -> "Aff":
        return Aff(self.const + other.const, tuple(a + b for a, b in zip(self.coefs, other.coefs)))

    def __sub__(self, other: "Aff") -> "Aff":
        return Aff(self.const - other.const, tuple(a - b for a, b in zip(self.coefs, other.coefs)))

    def scale(self, k: int) -> "Aff":
        return Aff(self.const * k, tuple(c * k for c in self.coefs))

    def shift(self, k: int) -> "Aff":
        return Aff(self.const + k, self.coefs)

    def eval(self, point: Sequence[int]) -> int:
        return self.const + sum(c * p for c, p in zip(self.coefs, point))

    def substitute(self, var: int, value: "Aff") -> "Aff":
        """Replace s_var by an affine form in the remaining variables."""
        c = self.coefs[var]
        rest = tuple(x for i, x in enumerate(self.coefs) if i != var)
        out = Aff(self.const, rest) + value.scale(c)
        return out

    def drop(self, var: int) -> "Aff":
        return Aff(self.const, tuple(x for i, x in enumerate(self.coefs) if i != var))


@dataclass(frozen=True)
class LatticeRegion:
    """Integer points s in Z^k with s_i >= 1 and affine constraints >= 0.

    ``r_forms``, when present, defines the derived value r(s) = min of the
    two affine forms; weight forms may refer to it via their last slot.
    """

    k: int
    constraints: tuple = ()
    r_forms: tuple | None = None

    @staticmethod
    def quadrant(k: int, constraints: Iterable[Aff] = (), r_forms=None) -> "LatticeRegion":
        if k > 2:
            raise InputError("regions support at most 2 variables")
        return LatticeRegion(k, tuple(constraints), tuple(r_forms) if r_forms else None)


def region_sum(
    region: LatticeRegion,
    weight: tuple,
    coef: LPoly = ONE_L,
    validate_to: int | None = 10,
) -> TRational:
    """Exact generating function  sum over the region of coef * L^l(s) T^t(s).

    ``weight`` is a pair (l_form, t_form) of Aff over the region variables,
    extended by one trailing slot referring to r(s) when the region carries
    min-forms.  The T-form must increase strictly in every unbounded
    direction.  The result is cross-checked against direct summation of all
    lattice points with T-exponent <= validate_to.
    """
    l_form, t_form = weight
    k = region.k
    pieces: list[tuple[tuple, Aff, Aff]] = []
    base = [Aff.make(-1, [1 if i == j else 0 for j in range(k)]) for i in range(k)]
    cons = tuple(base) + tuple(region.constraints)
    if region.r_forms is not None and len(region.r_forms) == 1:
        r_aff = region.r_forms[0]
        pieces.append((cons, _resolve_r(l_form, r_aff, k), _resolve_r(t_form, r_aff, k)))
    elif region.r_forms is not None:
        if len(region.r_forms) != 2:
            raise InputError("min-forms support one or two branches")
        f, g = region.r_forms
        for r_aff, extra in ((f, g - f), (g, f - g + Aff.make(-1, [0] * k))):
            lf = _resolve_r(l_form, r_aff, k)
            tf = _resolve_r(t_form, r_aff, k)
            pieces.append((cons + (extra,), lf, tf))
    else:
        lf = Aff(l_form.const, l_form.coefs[:k])
        tf = Aff(t_form.const, t_form.coefs[:k])
        pieces.append((cons, lf, tf))

    total = TRational.zero()
    for cs, lf, tf in pieces:
        total = total + _sum_rec(list(cs), lf, tf, coef, k)

    if validate_to and _enumerable(region, t_form):
        direct = _direct_sum(region, (l_form, t_form), coef, validate_to)
        got = total.expand(validate_to)
        if direct.coeffs != got.coeffs:
            raise InputError("closed form disagrees with direct summation")
    return total


def _enumerable(region: LatticeRegion, t_form: Aff) -> bool:
    """Whether each T-coefficient receives only finitely many lattice points."""
    k = region.k
    for i in range(k):
        ci = t_form.coefs[i]
        if region.r_forms is not None and len(t_form.coefs) > k and t_form.coefs[k]:
            ci = ci + min(f.coefs[i] for f in region.r_forms) * t_form.coefs[k]
        if ci < 1:
            return False
    return True


def _resolve_r(form: Aff, r_aff: Aff, k: int) -> Aff:
    if len(form.coefs) == k:
        return form
    if len(form.coefs) != k + 1:
        raise InputError("weight form has the wrong arity")
    rc = form.coefs[k]
    return Aff(form.const, form.coefs[:k]) + r_aff.scale(rc)


def _sum_rec(cons: list, l_form: Aff, t_form: Aff, coef: LPoly, k: int) -> TRational:
    if coef.is_zero():
        return TRational.zero()
    if k == 0:
        if any(c.const < 0 for c in cons):
            return TRational.zero()
        return TRational.monomial(t_form.const, coef * LPoly.L(l_form.const))

    # drop constraints that hold everywhere on the positive box and prune
    # regions where some constraint can never hold
    pruned = []
    for c in cons:
        lo_val = c.const + sum(x for x in c.coefs if x > 0)  # min over s >= 1
        hi_unbounded = any(x > 0 for x in c.coefs)
        hi_val = c.const + sum(x for x in c.coefs if x < 0) + sum(
            x for x in c.coefs if x > 0
        )  # value at the all-ones corner
        if not hi_unbounded and hi_val < 0:
            return TRational.zero()
        if lo_val >= 0 and all(x >= 0 for x in c.coefs):
            continue  # redundant on the whole box
        pruned.append(c)
    cons = pruned

    var = k - 1
    lowers: list[Aff] = []
    uppers: list[Aff] = []
    free: list[Aff] = []
    for c in cons:
        a = c.coefs[var]
        if a == 0:
            free.append(c.drop(var))
        elif a == 1:
            lowers.append(c.drop(var).scale(-1))  # s_var >= -rest
        elif a == -1:
            uppers.append(c.drop(var))  # s_var <= rest
        else:
            raise Inconclusive("region constraints must have unit coefficients")

    # split until a single lower (and at most a single upper) bound remains
    one = Aff.make(1, [0] * (k - 1))
    if len(lowers) > 1:
        a, b = lowers[0], lowers[1]
        rest = lowers[2:]
        ge = _reinsert(var, [a] + rest, uppers, free, extra=a - b)
        lt = _reinsert(var, [b] + rest, uppers, free, extra=b - a - one)
        return _sum_rec(ge, l_form, t_form, coef, k) + _sum_rec(lt, l_form, t_form, coef, k)
    if len(uppers) > 1:
        a, b = uppers[0], uppers[1]
        rest = uppers[2:]
        le = _reinsert(var, lowers, [a] + rest, free, extra=b - a)
        gt = _reinsert(var, lowers, [b] + rest, free, extra=a - b - one)
        return _sum_rec(le, l_form, t_form, coef, k) + _sum_rec(gt, l_form, t_form, coef, k)

    lo = lowers[0] if lowers else Aff.make(1, [0] * (k - 1))
    a_l, b_t = l_form.coefs[var], t_form.coefs[var]
    lo_l = l_form.substitute(var, lo)
    lo_t = t_form.substitute(var, lo)

    if not uppers:
        if b_t >= 1:
            inner = _sum_rec([c for c in free], lo_l, lo_t, coef, k - 1)
            return TRational.make(inner._num_dict(), tuple(inner.den) + ((a_l, b_t),))
        if b_t == 0 and a_l < 0:
            # pure-L geometric tail; exactness keeps coefficients in Z[L, L^-1]
            inner = _sum_rec([c for c in free], lo_l, lo_t, coef, k - 1)
            return inner.divide_L_exact(ONE_L - LPoly.L(a_l))
        raise InputError("T-exponent must increase in unbounded directions")

    hi = uppers[0]
    # empty unless hi >= lo - 1; on hi <= lo - 2 the sum is zero
    nonempty = hi - lo + Aff.make(1, [0] * (k - 1))
    hi1_l = l_form.substitute(var, hi.shift(1))
    hi1_t = t_form.substitute(var, hi.shift(1))
    new_free = [c for c in free] + [nonempty]
    head = _sum_rec(list(new_free), lo_l, lo_t, coef, k - 1)
    tail = _sum_rec(list(new_free), hi1_l, hi1_t, coef, k - 1)
    diff = head - tail
    if b_t >= 1:
        return TRational.make(diff._num_dict(), tuple(diff.den) + ((a_l, b_t),))
    if b_t == 0 and a_l != 0:
        return diff.divide_L_exact(ONE_L - LPoly.L(a_l))
    raise Inconclusive("bounded sums with constant weight are outside the fragment")


def _reinsert(var, lowers, uppers, free, extra):
    out = []
    for lo in lowers:
        c = Aff(-lo.const, tuple(-x for x in lo.coefs))
        out.append(_insert_var(c, var, 1))
    for up in uppers:
        out.append(_insert_var(up, var, -1))
    for f in free:
        out.append(_insert_var(f, var, 0))
    out.append(_insert_var(extra, var, 0))
    return out


def _insert_var(aff: Aff, var: int, coef_at_var: int) -> Aff:
    coefs = list(aff.coefs)
    coefs.insert(var, coef_at_var)
    return Aff(aff.const, tuple(coefs))


def _direct_sum(region: LatticeRegion, weight: tuple, coef: LPoly, rmax: int) -> TSeries:
    l_form, t_form = weight
    k = region.k
    out = [LPoly.zero() for _ in range(rmax)]
    if k == 0:
        pts = [()]
    else:
        bounds = []
        for i in range(k):
            ci = t_form.coefs[i]
            rc = t_form.coefs[k] if len(t_form.coefs) > k else 0
            if region.r_forms is not None and rc:
                ci = ci + min(f.coefs[i] for f in region.r_forms) * rc
            if ci < 1:
                raise InputError("T-exponent must increase in every direction")
            bounds.append(max(0, (rmax - t_form.const) // ci) + 2)
        pts = _box(bounds)
    for p in pts:
        if any(v < 1 for v in p):
            continue
        if any(c.eval(p) < 0 for c in region.constraints):
            continue
        if region.r_forms is not None:
            r = min(f.eval(p) for f in region.r_forms)
            ext = tuple(p) + (r,)
        else:
            ext = tuple(p)
        t = t_form.eval(ext) if len(t_form.coefs) > k else t_form.eval(p)
        le = l_form.eval(ext) if len(l_form.coefs) > k else l_form.eval(p)
        if 1 <= t <= rmax:
            out[t - 1] = out[t - 1] + coef * LPoly.L(le)
    return TSeries.make(out)


def _box(bounds):
    if not bounds:
        return [()]
    rest = _box(bounds[1:])
    return [(i,) + r for i in range(1, bounds[0] + 1) for r in rest]


# ---------------------------------------------------------------------------
# cylinder sets and their measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Coset:
    """{a in (tF[[t]])^n : a = offset mod t^level}; offset given per level."""

    level: int
    offsets: tuple  # tuple of per-coordinate tuples of coefficient tags (hashable)


@dataclass(frozen=True)
class ValRegion:
    """{a : (val a_1, ..., val a_n) lies in the region}, truncated at level."""

    level: int
    n: int
    constraints: tuple  # tuple[Aff over n val-variables]


@dataclass(frozen=True)
class CylinderSet:
    items: tuple

    @staticmethod
    def make(items: Iterable) -> "CylinderSet":
        return CylinderSet(tuple(items))


def bucket_weight(s: int, level: int) -> LPoly:
    """Measure of {val = s} for s < level, of {val >= level} at the top bucket."""
    if s < level:
        return ONE_MINUS_LINV * LPoly.L(-s)
    return LPoly.L(-level)


def val_region_measure(item: ValRegion) -> LPoly:
    level, n = item.level, item.n
    total = LPoly.zero()
    for combo in _box([level] * n):
        # bucket s = level encodes "val >= level"
        ok = True
        for c in item.constraints:
            if all(co >= 0 for co in c.coefs):
                if c.eval(combo) < 0:
                    ok = False
                    break
            else:
                # negative coefficients are only sound when no top bucket is involved
                if any(combo[i] == level and c.coefs[i] < 0 for i in range(n)):
                    raise InputError(
                        "valuation region is not measurable at this truncation level"
                    )
                if c.eval(combo) < 0:
                    ok = False
                    break
        if ok:
            w = ONE_L
            for s in combo:
                w = w * bucket_weight(s, level)
            total = total + w
    return total


def cylinder_measure(c: CylinderSet, n: int) -> LPoly:
    """Measure of a finite union; the valuation ring has measure 1."""
    cosets = [it for it in c.items if isinstance(it, Coset)]
    regions = [it for it in c.items if isinstance(it, ValRegion)]
    if len(c.items) != len(cosets) + len(regions):
        raise InputError("unknown cylinder item")
    # drop cosets contained in another coset
    kept: list[Coset] = []
    for it in sorted(cosets, key=lambda x: x.level):
        redundant = False
        for other in kept:
            if _coset_contains(other, it):
                redundant = True
                break
        if not redundant:
            kept.append(it)
    if regions and kept:
        raise InputError("mixed coset/region unions are not supported")
    if len(regions) > 1:
        raise InputError("at most one valuation region per union")
    total = LPoly.zero()
    for it in kept:
        if len(it.offsets) != n:
            raise InputError("coset dimension mismatch")
        total = total + LPoly.L(-n * it.level)
    for reg in regions:
        if reg.n != n:
            raise InputError("region dimension mismatch")
        total = total + val_region_measure(reg)
    return total


def _coset_contains(big: Coset, small: Coset) -> bool:
    if big.level > small.level:
        return False
    cut = big.level - 1
    return all(
        tuple(s[:cut]) == tuple(b[:cut]) for s, b in zip(small.offsets, big.offsets)
    )


# ---------------------------------------------------------------------------
# F_p jet counting
# ---------------------------------------------------------------------------


def _poly_to_int_coeffs(f: Polynomial, p: int):
    out = {}
    for mono, c in f.coeffs:
        if not c.is_rational():
            raise InputError("jet counting requires rational coefficients")
        if c.re.denominator % p == 0:
            raise InputError(f"prime {p} divides a coefficient denominator")
        num = c.re.numerator % p
        den_inv = pow(c.re.denominator % p, -1, p)
        v = (num * den_inv) % p
        if v:
            out[mono] = v
    return out


def _trunc_mul(a, b, r, p):
    out = [0] * r
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                if bj and i + j < r:
                    out[i + j] = (out[i + j] + ai * bj) % p
    return out


def _eval_jet(fint, jet, r, p):
    """Evaluate an integer-coefficient polynomial at a jet, mod (p, t^r)."""
    out = [0] * r
    for mono, c in fint.items():
        term = [0] * r
        term[0] = c
        for var_i, e in enumerate(mono):
            for _ in range(e):
                term = _trunc_mul(term, jet[var_i], r, p)
        for i in range(r):
            out[i] = (out[i] + term[i]) % p
    return out


def jets_count_fp(
    polys: Sequence[Polynomial],
    a0: Sequence[int],
    p: int,
    r: int,
    budget: int = 10 ** 8,
) -> int:
    """Number of jets a in (a0 + t F_p[t] / t^r)^n with all polys = 0 mod t^r.

    Enumerates level by level, pruning any partial jet whose value is
    already nonzero at the known truncation order.
    """
    if r < 1:
        raise InputError("jet order must be >= 1")
    if not polys:
        n = len(a0)
        return p ** ((r - 1) * n)
    n = len(polys[0].vars)
    if len(a0) != n:
        raise InputError("point dimension mismatch")
    fints = [_poly_to_int_coeffs(f, p) for f in polys]
    used = [any(mono[i] for fint in fints for mono in fint) for i in range(n)]
    free = [i for i in range(n) if not used[i]]
    active = [i for i in range(n) if used[i]]
    factor = p ** ((r - 1) * len(free))
    if not active:
        consts = [_eval_jet(fint, [[v % p] + [0] * (r - 1) for v in a0], r, p) for fint in fints]
        return factor if all(all(x == 0 for x in c) for c in consts) else 0

    state = {"nodes": 0, "count": 0}
    jet = [[v % p] + [0] * (r - 1) for v in a0]

    def level_ok(upto: int) -> bool:
        for fint in fints:
            vals = _eval_jet(fint, jet, upto, p)
            if any(v for v in vals):
                return False
        return True

    def rec(level: int):
        if level == r:
            state["count"] += 1
            return
        for combo in _box_mod(p, len(active)):
            state["nodes"] += 1
            if state["nodes"] > budget:
                raise InputError("jet enumeration budget exceeded")
            for idx, var_i in enumerate(active):
                jet[var_i][level] = combo[idx]
            if level_ok(level + 1):
                rec(level + 1)
        for var_i in active:
            jet[var_i][level] = 0

    if not level_ok(1):
        total = 0
    else:
        if r == 1:
            total = 1
        else:
            state["count"] = 0
            rec(1)
            total = state["count"]
    return total * factor


def _box_mod(p, k):
    if k == 0:
        return [()]
    rest = _box_mod(p, k - 1)
    return [(i,) + r for i in range(p) for r in rest]


# ---------------------------------------------------------------------------
# local Poincare series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiberModel:
    """A set presented fiberwise over a coordinate frame.

    The base variables have valuations s in Z_{>=1}^k with the standard
    product measure; over each base point the set meets the fiber in
    ``points`` many points (1 or 2), of mutual valuative distance
    t^r(s) with r(s) = min of the given affine forms.
    """

    ambient_n: int
    base_dim: int
    points: int
    dist_forms: tuple = ()  # tuple[Aff over base_dim vars], used when points == 2
    label: str = ""

    def __post_init__(self):
        if self.points not in (1, 2):
            raise InputError("fiber models support 1 or 2 points per fiber")
        if self.points == 2 and not self.dist_forms:
            raise InputError("two-point fiber model needs a distance form")
        if self.base_dim > 2:
            raise InputError("fiber models support at most 2 base variables")
        for f in self.dist_forms:
            if f.const < 0 or any(c < 0 for c in f.coefs):
                raise InputError("distance forms must have nonnegative coefficients")


def two_point_fiber_series(r: int) -> TRational:
    """(T + T^{r+1}) / (1 - T): the series of two points at distance t^r."""
    return TRational.make({1: ONE_L, r + 1: ONE_L}, [(0, 1)])


def poincare_p(model: FiberModel, rmax: int = 10) -> tuple[TSeries, TRational]:
    """Local Poincare series of liftable jets for a fiber-model presentation."""
    k = model.base_dim
    # total base weight over the full quadrant is L^{-k}, cancelling the L^{kj}
    part_a = TRational.make({1: ONE_L}, [(k, 1)])
    closed = part_a
    if model.points == 2:
        coef = ONE_L
        for _ in range(k):
            coef = coef * ONE_MINUS_LINV
        region = LatticeRegion.quadrant(k, r_forms=model.dist_forms)
        # weight: L^{-sum s + k (r+1)} T^{r+1}
        l_form = Aff.make(k, [-1] * k + [k])
        t_form = Aff.make(1, [0] * k + [1])
        inner = region_sum(region, (l_form, t_form), coef, validate_to=min(rmax, 8))
        part_b = TRational.make(inner._num_dict(), tuple(inner.den) + ((k, 1),))
        closed = part_a + part_b
    series = closed.expand(rmax)
    # independent truncated check against the defining fiberwise sum
    direct = _poincare_p_direct(model, rmax)
    if series.coeffs != direct.coeffs:
        raise InputError("fiber-model closed form disagrees with direct summation")
    return series, closed


def _poincare_p_direct(model: FiberModel, rmax: int) -> TSeries:
    k = model.base_dim
    out = [LPoly.zero() for _ in range(rmax)]
    # base weight: product over coordinates of bucket weights at level rmax+1;
    # fibers beyond that level contribute identically by monotonicity of r(s)
    level = rmax + 1
    for combo in _box([level] * k):
        w = ONE_L
        for s in combo:
            w = w * bucket_weight(s, level)
        if model.points == 2:
            r = min(f.eval(combo) for f in model.dist_forms)
        else:
            r = None
        for j in range(1, rmax + 1):
            c = LPoly.L(k * j)
            mult = 1 if (r is None or j <= r) else 2
            out[j - 1] = out[j - 1] + w * c * LPoly.integer(mult)
    return TSeries.make(out)


def poincare_tilde(
    polys: Sequence[Polynomial],
    a0: Sequence[int],
    rmax: int = 10,
    mode: str = "exact-monomial",
    primes: Sequence[int] = (2, 3, 5),
    budget: int = 10 ** 8,
):
    """Series counting all jets; exact for monomial conditions, else F_p.

    Returns a dict with 'series' (TSeries, exact mode), 'closed_form'
    (TRational or None) and 'fp' (per-prime integer coefficient lists).
    """
    n = len(polys[0].vars) if polys else len(a0)
    out: dict = {"series": None, "closed_form": None, "fp": {}}
    if mode not in ("exact-monomial", "fp-oracle", "both"):
        raise InputError(f"unknown mode {mode!r}")
    exact_wanted = mode in ("exact-monomial", "both")
    fp_wanted = mode in ("fp-oracle", "both")
    if exact_wanted:
        shifted = _translate_polys(polys, a0)
        if all(len(f.coeffs) <= 1 for f in shifted):
            coeffs = [_monomial_tilde_coeff(shifted, n, r) for r in range(1, rmax + 1)]
            out["series"] = TSeries.make(coeffs)
            out["closed_form"] = _monomial_closed_form(shifted, n)
        elif fp_wanted:
            out["note"] = "exact mode unsupported for these conditions; oracle only"
        else:
            raise Inconclusive(
                "exact mode requires monomial conditions after recentering"
            )
    if fp_wanted:
        for p in primes:
            out["fp"][p] = [
                jets_count_fp(polys, a0, p, r, budget=budget) for r in range(1, rmax + 1)
            ]
        if out["series"] is not None:
            for p in primes:
                want = [c.specialize(p) for c in out["series"].coeffs]
                if [Fraction(v) for v in out["fp"][p]] != want:
                    raise InputError("F_p specialization check failed")
    return out


def _translate_polys(polys, a0):
    out = []
    for f in polys:
        vars = f.vars
        assignment = {}
        from .valfield import PolyK, HahnSeries

        for name, c in zip(vars, a0):
            assignment[name] = PolyK.make(
                vars, {tuple(1 if v == name else 0 for v in vars): HahnSeries.const(1)}
            ) + PolyK.constant(HahnSeries.const(int(c)), vars)
        g = f.substitute_affine(assignment, vars)
        mono_form = {}
        ok = True
        for m, c in g.coeffs:
            cc = c
            if cc.is_exact_zero():
                continue
            if cc.val() != 0 or len(cc.terms) != 1:
                ok = False
                break
            mono_form[m] = cc.terms[0][1]
        if ok:
            out.append(Polynomial.make(vars, mono_form))
        else:
            # keep a marker that translation left non-constant series coefficients
            out.append(None)
    if any(f is None for f in out):
        raise Inconclusive("recentering produced non-monomial data")
    return out


def _monomial_tilde_coeff(monos: Sequence[Polynomial], n: int, r: int) -> LPoly:
    conditions = []
    for f in monos:
        if f.is_zero():
            continue
        (mono, c), = f.coeffs
        if sum(mono) == 0:
            return LPoly.zero()  # unit condition: no jets
        conditions.append(mono)
    total = LPoly.zero()
    for combo in _box([r] * n):
        if all(sum(a * s for a, s in zip(mono, combo)) >= r for mono in conditions):
            w = ONE_L
            for s in combo:
                w = w * bucket_weight(s, r)
            total = total + w
    return total * LPoly.L(r * n)


def _monomial_closed_form(monos: Sequence[Polynomial], n: int):
    conds = [f for f in monos if not f.is_zero()]
    if not conds:
        # no condition: c_r = L^{rn} * L^{-n} = L^{n(r-1)}
        return TRational.make({1: ONE_L}, [(n, 1)])
    if len(conds) != 1:
        return None
    (mono, _), = conds[0].coeffs
    nz = [e for e in mono if e]
    if len(nz) != 1:
        return None
    kpow = nz[0]
    out = TRational.zero()
    for j in range(1, kpow + 1):
        out = out + TRational.make({j: LPoly.L(n * (j - 1))}, [(kpow * n - 1, kpow)])
    return out


def verify_transversal_identity(
    lhs, rhs_slice, d: int, rmax: int = 10, mode: str = "exact"
) -> dict:
    """Compare P_X(T) with L^-d * P_slice(L^d T) coefficientwise.

    In exact mode both arguments are FiberModel instances; in fp mode they
    are (polys, a0) pairs and the comparison is done on jet counts per prime.
    """
    report: dict = {"mode": mode, "d": d, "rmax": rmax}
    if mode == "exact":
        series_x, closed_x = poincare_p(lhs, rmax)
        series_w, closed_w = poincare_p(rhs_slice, rmax)
        rhs_closed = closed_w.substitute_LdT(d).scale(LPoly.L(-d))
        rhs_series = rhs_closed.expand(rmax)
        idx = series_x.first_difference(rhs_series)
        report["equal"] = idx is None
        report["first_difference"] = idx
        if idx is not None:
            report["lhs_coeff"] = series_x.coeff(idx).to_json()
            report["rhs_coeff"] = rhs_series.coeff(idx).to_json()
        report["lhs_closed"] = closed_x.to_json()
        report["rhs_closed"] = rhs_closed.to_json()
        return report
    if mode == "fp":
        (polys_x, a0_x), (polys_w, a0_w) = lhs, rhs_slice
        primes = report["primes"] = list(report.get("primes", (2, 3, 5)))
        report["per_prime"] = {}
        equal = True
        for p in primes:
            lhs_counts = [jets_count_fp(polys_x, a0_x, p, r) for r in range(1, rmax + 1)]
            rhs_counts = [
                p ** (d * (r - 1)) * jets_count_fp(polys_w, a0_w, p, r)
                for r in range(1, rmax + 1)
            ]
            idx = next((r for r in range(1, rmax + 1) if lhs_counts[r - 1] != rhs_counts[r - 1]), None)
            report["per_prime"][p] = {
                "lhs": lhs_counts,
                "rhs": rhs_counts,
                "first_difference": idx,
            }
            equal = equal and idx is None
        report["equal"] = equal
        return report
    raise InputError(f"unknown mode {mode!r}")


# built-in fiber models ------------------------------------------------------

MOSTOWSKI_FULL = FiberModel(
    ambient_n=4,
    base_dim=2,
    points=2,
    dist_forms=(Aff.make(0, [3, 0]), Aff.make(0, [1, 1])),
    label="two sheets over the x-w frame",
)

MOSTOWSKI_SLICE = FiberModel(
    ambient_n=3,
    base_dim=1,
    points=2,
    dist_forms=(Aff.make(0, [3]),),
    label="two curves over the x axis",
)

LINE_IN_PLANE = FiberModel(ambient_n=2, base_dim=1, points=1, label="coordinate line")

POINT_IN_LINE = FiberModel(ambient_n=1, base_dim=0, points=1, label="origin")
