"""Exact arithmetic in truncated Hahn/Puiseux series fields F((t^Q)).

Elements are finite sums  sum_g c_g * t^g  with rational exponents g and
coefficients in F (= Q or Q(i)), together with a precision exponent: all
terms with exponent >= prec are unknown.  Valuations are written
additively, so larger exponent means smaller norm; ``INF`` plays the role
of the valuation of an exact zero.

The module also provides the leading-term (rv) data of scalars and
vectors, multivariate polynomials over F, polynomials with series
coefficients (used for graph maps of cells), and a small infix parser
for polynomial input.
"""

from __future__ import annotations

import re as _re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

from .errors import InputError, PrecisionError


# ---------------------------------------------------------------------------
# exponents
# ---------------------------------------------------------------------------

class _Infinity:
    """The exponent of an exact zero; larger than every rational."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("riso_kit.INF")

    def __add__(self, other):
        return self

    __radd__ = __add__

    def __neg__(self):
        raise InputError("cannot negate the infinite exponent")

    def __repr__(self):
        return "INF"


INF = _Infinity()

Exponent = Union[Fraction, _Infinity]


def exp(num, den=1) -> Fraction:
    """Build an exact exponent from integers or a string like '3/2'."""
    return Fraction(num, den) if den != 1 else Fraction(num)


def exp_min(values: Iterable[Exponent]) -> Exponent:
    m: Exponent = INF
    for v in values:
        if v < m:
            m = v
    return m


# ---------------------------------------------------------------------------
# coefficients: the field F = Q(i), with Q as the im == 0 subfield
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Coeff:
    """An exact element a + b*i of Q(i).  Plain rationals have b == 0."""

    re: Fraction
    im: Fraction = Fraction(0)

    @staticmethod
    def of(value) -> "Coeff":
        if isinstance(value, Coeff):
            return value
        if isinstance(value, (int, Fraction)):
            return Coeff(Fraction(value))
        if isinstance(value, str):
            return parse_coeff(value)
        raise InputError(f"cannot coerce {value!r} to a field element")

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def is_rational(self) -> bool:
        return self.im == 0

    def __add__(self, other) -> "Coeff":
        o = Coeff.of(other)
        return Coeff(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self) -> "Coeff":
        return Coeff(-self.re, -self.im)

    def __sub__(self, other) -> "Coeff":
        return self + (-Coeff.of(other))

    def __rsub__(self, other) -> "Coeff":
        return Coeff.of(other) + (-self)

    def __mul__(self, other) -> "Coeff":
        o = Coeff.of(other)
        return Coeff(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def inv(self) -> "Coeff":
        n = self.re * self.re + self.im * self.im
        if n == 0:
            raise ZeroDivisionError("inverse of zero coefficient")
        return Coeff(self.re / n, -self.im / n)

    def __truediv__(self, other) -> "Coeff":
        return self * Coeff.of(other).inv()

    def conj(self) -> "Coeff":
        return Coeff(self.re, -self.im)

    def sign(self) -> int:
        """Sign in the ordered subfield Q; defined only for rational values."""
        if self.im != 0:
            raise InputError("sign of a non-rational coefficient is undefined")
        return (self.re > 0) - (self.re < 0)

    def sqrts(self) -> list["Coeff"]:
        """All square roots of this element inside Q(i) (possibly none)."""
        if self.is_zero():
            return [ZERO_C]
        a, b = self.re, self.im
        n = a * a + b * b
        s = _frac_sqrt(n)
        if s is None:
            return []
        roots = []
        for x2 in ((a + s) / 2,):
            x = _frac_sqrt(x2)
            if x is None:
                continue
            if x != 0:
                y = b / (2 * x)
                roots = [Coeff(x, y), Coeff(-x, -y)]
            elif b == 0:
                y = _frac_sqrt(-a)
                if y is not None:
                    roots = [Coeff(Fraction(0), y), Coeff(Fraction(0), -y)]
        return roots

    def nth_roots(self, k: int) -> list["Coeff"]:
        """Roots of z^k = self inside Q(i); exhaustive for k in {1, 2, 3, 4}."""
        if k == 1:
            return [self]
        if k == 2:
            return self.sqrts()
        if k == 4:
            out = []
            for r in self.sqrts():
                out.extend(r.sqrts())
            return out
        if k == 3:
            out = []
            if self.is_rational():
                r = _frac_cbrt(self.re)
                if r is not None:
                    out.append(Coeff(r))
            return out
        raise InputError(f"{k}-th roots not supported")

    def __repr__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}i"
        return f"{self.re}{'+' if self.im > 0 else '-'}{abs(self.im)}i"


ZERO_C = Coeff(Fraction(0))
ONE_C = Coeff(Fraction(1))
I_C = Coeff(Fraction(0), Fraction(1))


def _int_root(n: int, k: int):
    if n < 0:
        return None
    if n in (0, 1):
        return n
    lo, hi = 0, 1 << ((n.bit_length() // k) + 2)
    while lo < hi:
        mid = (lo + hi) // 2
        if mid ** k < n:
            lo = mid + 1
        else:
            hi = mid
    return lo if lo ** k == n else None


def _frac_sqrt(q: Fraction):
    if q < 0:
        return None
    a = _int_root(q.numerator, 2)
    b = _int_root(q.denominator, 2)
    if a is None or b is None:
        return None
    return Fraction(a, b)


def _frac_cbrt(q: Fraction):
    neg = q < 0
    q = abs(q)
    a = _int_root(q.numerator, 3)
    b = _int_root(q.denominator, 3)
    if a is None or b is None:
        return None
    r = Fraction(a, b)
    return -r if neg else r


def parse_coeff(text: str) -> Coeff:
    """Parse '3', '-1/2', 'i', '2i', '1+2i', '1/2-3/4i'."""
    s = text.strip().replace(" ", "")
    if not s:
        raise InputError("empty coefficient")
    m = _re.fullmatch(
        r"(?P<re>[+-]?\d+(?:/\d+)?)?(?P<im>[+-]?(?:\d+(?:/\d+)?)?i)?", s
    )
    if not m or (m.group("re") is None and m.group("im") is None):
        raise InputError(f"cannot parse coefficient {text!r}")
    re_part = Fraction(m.group("re")) if m.group("re") else Fraction(0)
    im_part = Fraction(0)
    if m.group("im"):
        body = m.group("im")[:-1]
        if body in ("", "+"):
            im_part = Fraction(1)
        elif body == "-":
            im_part = Fraction(-1)
        else:
            im_part = Fraction(body)
    return Coeff(re_part, im_part)


# ---------------------------------------------------------------------------
# truncated Hahn series
# ---------------------------------------------------------------------------

DEFAULT_PREC = Fraction(48)


@dataclass(frozen=True)
class HahnSeries:
    """A truncated series sum c_g t^g + O(t^prec), exponents strictly increasing.

    ``prec is INF`` means the element is known exactly.  All term exponents
    are < prec and all stored coefficients are nonzero.
    """

    terms: tuple  # tuple[(Fraction, Coeff), ...]
    prec: Exponent = INF

    def __post_init__(self):
        last = None
        for g, c in self.terms:
            if not isinstance(g, Fraction):
                raise InputError("term exponents must be exact rationals")
            if last is not None and g <= last:
                raise InputError("term exponents must be strictly increasing")
            if Coeff.of(c).is_zero():
                raise InputError("zero coefficients may not be stored")
            if g >= self.prec:
                raise InputError("term exponent beyond stated precision")
            last = g

    # -- constructors ------------------------------------------------------

    @staticmethod
    def make(items: Mapping | Iterable, prec: Exponent = INF) -> "HahnSeries":
        if isinstance(items, Mapping):
            items = items.items()
        acc: dict = {}
        for g, c in items:
            g = Fraction(g)
            c = Coeff.of(c)
            acc[g] = acc.get(g, ZERO_C) + c
        terms = tuple(
            (g, acc[g]) for g in sorted(acc) if not acc[g].is_zero() and g < prec
        )
        return HahnSeries(terms, prec)

    @staticmethod
    def zero(prec: Exponent = INF) -> "HahnSeries":
        return HahnSeries((), prec)

    @staticmethod
    def const(c, prec: Exponent = INF) -> "HahnSeries":
        c = Coeff.of(c)
        if c.is_zero():
            return HahnSeries((), prec)
        return HahnSeries(((Fraction(0), c),), prec)

    @staticmethod
    def t_power(g, coeff=1, prec: Exponent = INF) -> "HahnSeries":
        c = Coeff.of(coeff)
        if c.is_zero():
            return HahnSeries((), prec)
        return HahnSeries(((Fraction(g), c),), prec)

    # -- basic queries ------------------------------------------------------

    def is_exact_zero(self) -> bool:
        return not self.terms and self.prec is INF

    def known_zero(self) -> bool:
        """True when no terms are known (zero up to the stated precision)."""
        return not self.terms

    def val_lower_bound(self) -> Exponent:
        return self.terms[0][0] if self.terms else self.prec

    def val(self) -> Exponent:
        """Leading exponent.  INF for exact zero, error when undetermined."""
        if self.terms:
            return self.terms[0][0]
        if self.prec is INF:
            return INF
        raise PrecisionError(
            f"leading term undetermined: zero up to O(t^{self.prec})"
        )

    def leading_coeff(self) -> Coeff:
        if not self.terms:
            raise PrecisionError("no leading coefficient: series has no known term")
        return self.terms[0][1]

    def coeff_at(self, g) -> Coeff:
        g = Fraction(g)
        if g >= self.prec:
            raise PrecisionError(f"coefficient at t^{g} is beyond precision")
        for h, c in self.terms:
            if h == g:
                return c
        return ZERO_C

    def residue(self) -> Coeff:
        """Coefficient at t^0 for elements of the valuation ring."""
        v = self.val()
        if v is not INF and v < 0:
            raise InputError("residue of an element of negative valuation")
        if self.prec <= 0:
            raise PrecisionError("residue beyond precision")
        return self.coeff_at(0)

    def ac(self) -> Coeff:
        """Angular component: the leading coefficient (0 for exact zero)."""
        if self.is_exact_zero():
            return ZERO_C
        return self.leading_coeff()

    def sign(self) -> int:
        """Sign in the ordered field Q((t^Q)) with t positive infinitesimal."""
        if self.is_exact_zero():
            return 0
        return self.leading_coeff().sign()

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other) -> "HahnSeries":
        o = _coerce(other)
        prec = exp_min([self.prec, o.prec])
        return HahnSeries.make(list(self.terms) + list(o.terms), prec)

    __radd__ = __add__

    def __neg__(self) -> "HahnSeries":
        return HahnSeries(tuple((g, -c) for g, c in self.terms), self.prec)

    def __sub__(self, other) -> "HahnSeries":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "HahnSeries":
        return _coerce(other) + (-self)

    def __mul__(self, other) -> "HahnSeries":
        o = _coerce(other)
        if self.is_exact_zero() or o.is_exact_zero():
            return HahnSeries.zero()
        prec = exp_min(
            [
                self.val_lower_bound() + o.prec,
                o.val_lower_bound() + self.prec,
                self.prec + o.prec,
            ]
        )
        acc: dict = {}
        for g1, c1 in self.terms:
            for g2, c2 in o.terms:
                g = g1 + g2
                if g < prec:
                    acc[g] = acc.get(g, ZERO_C) + c1 * c2
        return HahnSeries.make(acc, prec)

    __rmul__ = __mul__

    def scale(self, c) -> "HahnSeries":
        c = Coeff.of(c)
        if c.is_zero():
            return HahnSeries.zero(self.prec)
        return HahnSeries(tuple((g, k * c) for g, k in self.terms), self.prec)

    def shift(self, g) -> "HahnSeries":
        """Multiply by t^g."""
        g = Fraction(g)
        return HahnSeries(
            tuple((h + g, c) for h, c in self.terms),
            self.prec if self.prec is INF else self.prec + g,
        )

    def inv(self) -> "HahnSeries":
        if self.is_exact_zero():
            raise ZeroDivisionError("inverse of exact zero")
        if not self.terms:
            raise PrecisionError("inverse of a series with no known term")
        v, c0 = self.terms[0]
        target = self.prec if self.prec is INF else self.prec - 2 * v
        # write self = c0 t^v (1 + u) and invert the unit part iteratively
        unit = self.shift(-v).scale(c0.inv())
        rel = unit.prec  # = prec - v, relative precision of the unit part
        u = unit - ONE
        if u.is_exact_zero():
            out = ONE
        else:
            cap = rel if rel is not INF else _geometric_cap(u)
            out = ONE
            power = ONE
            uv = u.val_lower_bound()
            k = 1
            while k * uv < cap:
                power = (power * (-u)).truncate(cap)
                out = out + power
                k += 1
            out = out.truncate(cap)
        out = out.scale(c0.inv()).shift(-v)
        if target is not INF:
            out = out.truncate(target)
        return out

    def __truediv__(self, other) -> "HahnSeries":
        return self * _coerce(other).inv()

    def __pow__(self, k: int) -> "HahnSeries":
        if k < 0:
            return self.inv() ** (-k)
        out = ONE
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def truncate(self, prec: Exponent) -> "HahnSeries":
        prec = exp_min([self.prec, prec])
        return HahnSeries(tuple((g, c) for g, c in self.terms if g < prec), prec)

    def root(self, k: int, branch: Coeff | None = None) -> "HahnSeries":
        """A k-th root with the same relative precision; Hensel iteration.

        ``branch`` selects the leading coefficient among the k-th roots of
        the leading coefficient of self; by default the first one found.
        Raises InputError when no k-th root exists inside Q(i).
        """
        if self.is_exact_zero():
            return self
        v = self.val()
        c0 = self.leading_coeff()
        roots = c0.nth_roots(k)
        if not roots:
            raise InputError(
                f"leading coefficient {c0} has no {k}-th root in the coefficient field"
            )
        lead = branch if branch is not None else roots[0]
        if branch is not None and not any(r == branch for r in roots):
            raise InputError("requested branch is not a root of the leading coefficient")
        # normalize to a 1-unit: self = c0 t^v (1+u), take (1+u)^{1/k} by Newton
        unit = self.shift(-v).scale(c0.inv())
        rel = unit.prec if unit.prec is not INF else _geometric_cap(unit - ONE)
        y = ONE
        # Newton for y^k = unit: y <- y - (y^k - unit)/(k y^{k-1})
        for _ in range(64):
            err = (y ** k - unit).truncate(rel)
            if err.known_zero():
                break
            y = (y - err / (y ** (k - 1)).scale(Coeff.of(k))).truncate(rel)
        else:
            raise PrecisionError("root iteration did not stabilize")
        out = y.scale(lead).shift(v / k)
        return out

    # -- structure -----------------------------------------------------------

    def rv(self) -> "RVElem":
        if self.is_exact_zero():
            return RVElem.zero()
        return RVElem(self.val(), self.leading_coeff())

    def exponents_in_lattice(self, m: int) -> bool:
        return all((g * m).denominator == 1 for g, _ in self.terms)

    def __repr__(self):
        if not self.terms:
            body = "0"
        else:
            body = " + ".join(
                f"({c})t^{g}" if g != 0 else f"({c})" for g, c in self.terms
            )
        if self.prec is INF:
            return body
        return f"{body} + O(t^{self.prec})"


ZERO = HahnSeries.zero()
ONE = HahnSeries.const(1)
T = HahnSeries.t_power(1)


def _coerce(x) -> HahnSeries:
    if isinstance(x, HahnSeries):
        return x
    if isinstance(x, (int, Fraction, Coeff)):
        return HahnSeries.const(x)
    raise InputError(f"cannot coerce {x!r} to a series")


def _geometric_cap(u: HahnSeries) -> Fraction:
    # exact 1-units are inverted up to the default working precision
    uv = u.val_lower_bound()
    if uv is INF:
        return DEFAULT_PREC
    return max(DEFAULT_PREC, Fraction(uv) * 48)


def hs_arith(op: str, a: HahnSeries, b: HahnSeries | None = None) -> HahnSeries:
    """Dispatch-style field arithmetic entry point."""
    if op == "add":
        return a + b
    if op == "neg":
        return -a
    if op == "mul":
        return a * b
    if op == "inv":
        return a.inv()
    raise InputError(f"unknown operation {op!r}")


# ---------------------------------------------------------------------------
# leading term structures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RVElem:
    """Leading-term class of a scalar: (valuation, leading coefficient)."""

    lead_exp: Exponent
    lead_coeff: Coeff

    @staticmethod
    def zero() -> "RVElem":
        return RVElem(INF, ZERO_C)

    def is_zero(self) -> bool:
        return self.lead_exp is INF

    def __mul__(self, other: "RVElem") -> "RVElem":
        if self.is_zero() or other.is_zero():
            return RVElem.zero()
        return RVElem(self.lead_exp + other.lead_exp, self.lead_coeff * other.lead_coeff)

    def __repr__(self):
        if self.is_zero():
            return "rv(0)"
        return f"rv({self.lead_coeff}*t^{self.lead_exp})"


@dataclass(frozen=True)
class RVVec:
    """Leading-term class of a vector under the sup norm.

    Stores the minimal coordinate valuation together with the residues of
    all coordinates after dividing by t^lead_exp.
    """

    lead_exp: Exponent
    lead_res: tuple  # tuple[Coeff, ...]

    @staticmethod
    def zero(n: int) -> "RVVec":
        return RVVec(INF, tuple([ZERO_C] * n))

    def is_zero(self) -> bool:
        return self.lead_exp is INF

    def __repr__(self):
        if self.is_zero():
            return "rv(0)"
        return f"rv(t^{self.lead_exp}*{list(self.lead_res)})"


VecK = tuple  # tuple[HahnSeries, ...]


def vec(*entries) -> VecK:
    return tuple(_coerce(e) for e in entries)


def vec_sub(a: VecK, b: VecK) -> VecK:
    return tuple(x - y for x, y in zip(a, b))


def vec_add(a: VecK, b: VecK) -> VecK:
    return tuple(x + y for x, y in zip(a, b))


def vec_val(a: VecK) -> Exponent:
    """Valuation of the sup norm; PrecisionError when undetermined."""
    bound = exp_min([x.val_lower_bound() for x in a])
    known = exp_min([x.val() for x in a if x.terms])
    if known is INF:
        # no coordinate has a known term
        if all(x.is_exact_zero() for x in a):
            return INF
        raise PrecisionError("vector valuation undetermined")
    if any((not x.terms) and x.prec <= known for x in a):
        raise PrecisionError("vector valuation undetermined")
    return known


def rv_vec(a: VecK) -> RVVec:
    v = vec_val(a)
    if v is INF:
        return RVVec.zero(len(a))
    res = []
    for x in a:
        if x.prec is not INF and x.prec <= v:
            raise PrecisionError("coordinate residue undetermined at the leading scale")
        res.append(x.coeff_at(v) if (x.terms or x.prec > v) else ZERO_C)
    return RVVec(v, tuple(res))


def hs_leading(a):
    """Leading data of a scalar or vector.

    Returns a dict with val, rv, ac and (when val >= 0) res.
    """
    if isinstance(a, HahnSeries):
        v = a.val()
        out = {"val": v, "rv": a.rv(), "ac": a.ac()}
        if v is INF or v >= 0:
            out["res"] = a.residue() if v is not INF else ZERO_C
        return out
    a = tuple(a)
    v = vec_val(a)
    out = {"val": v, "rv": rv_vec(a), "ac": tuple(x.ac() for x in a)}
    if v is INF or v >= 0:
        out["res"] = tuple(x.residue() for x in a) if v is not INF else tuple(
            ZERO_C for _ in a
        )
    return out


# ---------------------------------------------------------------------------
# multivariate polynomials over F
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Polynomial:
    """Sparse polynomial over Q(i) in named variables."""

    vars: tuple  # tuple[str, ...]
    coeffs: tuple  # tuple[(exponent tuple, Coeff), ...] sorted

    @staticmethod
    def make(vars: Sequence[str], coeffs: Mapping) -> "Polynomial":
        vars = tuple(vars)
        acc: dict = {}
        for mono, c in coeffs.items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != len(vars):
                raise InputError("monomial length does not match variable list")
            if any(e < 0 for e in mono):
                raise InputError("negative exponents are not allowed")
            c = Coeff.of(c)
            if not c.is_zero():
                acc[mono] = acc.get(mono, ZERO_C) + c
        items = tuple(sorted((m, c) for m, c in acc.items() if not c.is_zero()))
        return Polynomial(vars, items)

    @staticmethod
    def variable(name: str, vars: Sequence[str]) -> "Polynomial":
        vars = tuple(vars)
        mono = tuple(1 if v == name else 0 for v in vars)
        if name not in vars:
            raise InputError(f"unknown variable {name!r}")
        return Polynomial.make(vars, {mono: 1})

    @staticmethod
    def constant(c, vars: Sequence[str]) -> "Polynomial":
        return Polynomial.make(vars, {tuple([0] * len(vars)): c})

    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "Polynomial") -> "Polynomial":
        acc = dict(self.coeffs)
        for m, c in other.coeffs:
            acc[m] = acc.get(m, ZERO_C) + c
        return Polynomial.make(self.vars, acc)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.vars, tuple((m, -c) for m, c in self.coeffs))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        acc: dict = {}
        for m1, c1 in self.coeffs:
            for m2, c2 in other.coeffs:
                m = tuple(a + b for a, b in zip(m1, m2))
                acc[m] = acc.get(m, ZERO_C) + c1 * c2
        return Polynomial.make(self.vars, acc)

    def scale(self, c) -> "Polynomial":
        c = Coeff.of(c)
        return Polynomial.make(self.vars, {m: k * c for m, k in self.coeffs})

    def __pow__(self, k: int) -> "Polynomial":
        out = Polynomial.constant(1, self.vars)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def eval(self, point: Mapping[str, HahnSeries] | Sequence[HahnSeries]) -> HahnSeries:
        if not isinstance(point, Mapping):
            point = dict(zip(self.vars, point))
        missing = [v for v in self.vars if v not in point and self.degree_in(v) > 0]
        if missing:
            raise InputError(f"missing variable bindings: {missing}")
        out = ZERO
        for mono, c in self.coeffs:
            term = HahnSeries.const(c)
            for name, e in zip(self.vars, mono):
                if e:
                    term = term * (_coerce(point[name]) ** e)
            out = out + term
        return out

    def eval_coeff(self, point: Sequence[Coeff]) -> Coeff:
        """Evaluation at residue-field points."""
        out = ZERO_C
        for mono, c in self.coeffs:
            term = c
            for val, e in zip(point, mono):
                for _ in range(e):
                    term = term * Coeff.of(val)
            out = out + term
        return out

    def degree_in(self, name: str) -> int:
        if name not in self.vars:
            return 0
        i = self.vars.index(name)
        return max((m[i] for m, _ in self.coeffs), default=0)

    def total_degree(self) -> int:
        return max((sum(m) for m, _ in self.coeffs), default=0)

    def partial(self, name: str) -> "Polynomial":
        i = self.vars.index(name)
        acc: dict = {}
        for m, c in self.coeffs:
            if m[i] > 0:
                m2 = list(m)
                m2[i] -= 1
                acc[tuple(m2)] = acc.get(tuple(m2), ZERO_C) + c * Coeff.of(m[i])
        return Polynomial.make(self.vars, acc)

    def gradient(self) -> list["Polynomial"]:
        return [self.partial(v) for v in self.vars]

    def uses(self, name: str) -> bool:
        return self.degree_in(name) > 0

    def rename(self, new_vars: Sequence[str]) -> "Polynomial":
        if len(new_vars) != len(self.vars):
            raise InputError("variable count mismatch")
        return Polynomial(tuple(new_vars), self.coeffs)

    def substitute_affine(self, assignment: Mapping[str, "PolyK"], out_vars: Sequence[str]) -> "PolyK":
        """Substitute series-coefficient polynomials for the variables."""
        out = PolyK.constant(ZERO, out_vars)
        for mono, c in self.coeffs:
            term = PolyK.constant(HahnSeries.const(c), out_vars)
            for name, e in zip(self.vars, mono):
                for _ in range(e):
                    term = term * assignment[name]
            out = out + term
        return out

    def __repr__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for mono, c in self.coeffs:
            body = "*".join(
                f"{v}^{e}" if e > 1 else v
                for v, e in zip(self.vars, mono)
                if e
            )
            parts.append(f"({c}){'*' + body if body else ''}")
        return " + ".join(parts)


def poly_eval(f: Polynomial, x: Sequence[HahnSeries]) -> HahnSeries:
    return f.eval(list(x))


# ---------------------------------------------------------------------------
# polynomials with series coefficients (graph maps of cells, line traces)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolyK:
    """Sparse polynomial in named variables with HahnSeries coefficients."""

    vars: tuple
    coeffs: tuple  # tuple[(mono, HahnSeries), ...]

    @staticmethod
    def make(vars: Sequence[str], coeffs: Mapping) -> "PolyK":
        vars = tuple(vars)
        acc: dict = {}
        for mono, c in coeffs.items():
            mono = tuple(int(e) for e in mono)
            c = _coerce(c)
            if mono in acc:
                acc[mono] = acc[mono] + c
            else:
                acc[mono] = c
        items = tuple(sorted(
            ((m, c) for m, c in acc.items() if not c.is_exact_zero()),
            key=lambda p: p[0],
        ))
        return PolyK(vars, items)

    @staticmethod
    def constant(c: HahnSeries, vars: Sequence[str]) -> "PolyK":
        return PolyK.make(vars, {tuple([0] * len(vars)): c})

    @staticmethod
    def variable(name: str, vars: Sequence[str]) -> "PolyK":
        vars = tuple(vars)
        mono = tuple(1 if v == name else 0 for v in vars)
        return PolyK.make(vars, {mono: ONE})

    @staticmethod
    def from_polynomial(f: Polynomial) -> "PolyK":
        return PolyK.make(f.vars, {m: HahnSeries.const(c) for m, c in f.coeffs})

    def __add__(self, other: "PolyK") -> "PolyK":
        acc = {m: c for m, c in self.coeffs}
        for m, c in other.coeffs:
            acc[m] = acc[m] + c if m in acc else c
        return PolyK.make(self.vars, acc)

    def __neg__(self) -> "PolyK":
        return PolyK(self.vars, tuple((m, -c) for m, c in self.coeffs))

    def __sub__(self, other: "PolyK") -> "PolyK":
        return self + (-other)

    def __mul__(self, other: "PolyK") -> "PolyK":
        acc: dict = {}
        for m1, c1 in self.coeffs:
            for m2, c2 in other.coeffs:
                m = tuple(a + b for a, b in zip(m1, m2))
                prod = c1 * c2
                acc[m] = acc[m] + prod if m in acc else prod
        return PolyK.make(self.vars, acc)

    def scale(self, c: HahnSeries) -> "PolyK":
        return PolyK.make(self.vars, {m: k * c for m, k in self.coeffs})

    def eval(self, point: Mapping[str, HahnSeries] | Sequence[HahnSeries]) -> HahnSeries:
        if not isinstance(point, Mapping):
            point = dict(zip(self.vars, point))
        out = ZERO
        for mono, c in self.coeffs:
            term = c
            for name, e in zip(self.vars, mono):
                if e:
                    term = term * (_coerce(point[name]) ** e)
            out = out + term
        return out

    def partial(self, name: str) -> "PolyK":
        i = self.vars.index(name)
        acc: dict = {}
        for m, c in self.coeffs:
            if m[i] > 0:
                m2 = list(m)
                m2[i] -= 1
                key = tuple(m2)
                add = c.scale(Coeff.of(m[i]))
                acc[key] = acc[key] + add if key in acc else add
        return PolyK.make(self.vars, acc)

    def degree_in(self, name: str) -> int:
        if name not in self.vars:
            return 0
        i = self.vars.index(name)
        return max((m[i] for m, _ in self.coeffs), default=0)

    def is_constant(self) -> bool:
        return all(sum(m) == 0 for m, _ in self.coeffs)

    def constant_term(self) -> HahnSeries:
        for m, c in self.coeffs:
            if sum(m) == 0:
                return c
        return ZERO

    def univariate(self) -> list:
        """Dense coefficient list [c0, c1, ...] for single-variable polynomials."""
        if len(self.vars) != 1:
            raise InputError("not univariate")
        deg = max((m[0] for m, _ in self.coeffs), default=0)
        out = [ZERO] * (deg + 1)
        for m, c in self.coeffs:
            out[m[0]] = c
        return out

    def exponents_in_lattice(self, m: int) -> bool:
        return all(c.exponents_in_lattice(m) for _, c in self.coeffs)

    def __repr__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for mono, c in self.coeffs:
            body = "*".join(
                f"{v}^{e}" if e > 1 else v for v, e in zip(self.vars, mono) if e
            )
            parts.append(f"({c}){'*' + body if body else ''}")
        return " + ".join(parts)


# ---------------------------------------------------------------------------
# infix parser for polynomials
# ---------------------------------------------------------------------------

_TOKEN = _re.compile(r"\s*(\d+/\d+|\d+|[A-Za-z_][A-Za-z_0-9]*|\*\*|[()+\-*^])")


def parse_poly(text: str, vars: Sequence[str] | None = None) -> Polynomial:
    """Parse conventional infix syntax: ``y^2 + z^2 - x^3``, ``2*x*y``.

    Exponents are nonnegative integers; ``i`` denotes the imaginary unit.
    When ``vars`` is omitted the variables are the identifiers encountered,
    in first-appearance order.
    """
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise InputError(f"cannot tokenize {text[pos:]!r}")
            break
        tokens.append(m.group(1))
        pos = m.end()
    seen: list = []
    for tok in tokens:
        if _re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", tok) and tok != "i":
            if tok not in seen:
                seen.append(tok)
    names = tuple(vars) if vars is not None else tuple(seen)
    for tok in seen:
        if tok not in names:
            raise InputError(f"unknown variable {tok!r}")

    state = {"i": 0}

    def peek():
        return tokens[state["i"]] if state["i"] < len(tokens) else None

    def take(expected=None):
        tok = peek()
        if tok is None:
            raise InputError("unexpected end of expression")
        if expected is not None and tok != expected:
            raise InputError(f"expected {expected!r}, found {tok!r}")
        state["i"] += 1
        return tok

    def parse_sum() -> Polynomial:
        sign = 1
        if peek() in ("+", "-"):
            sign = -1 if take() == "-" else 1
        node = parse_product()
        if sign < 0:
            node = -node
        while peek() in ("+", "-"):
            op = take()
            rhs = parse_product()
            node = node + (-rhs if op == "-" else rhs)
        return node

    def parse_product() -> Polynomial:
        node = parse_power()
        while True:
            tok = peek()
            if tok == "*":
                take()
                node = node * parse_power()
            elif tok is not None and (
                _re.fullmatch(r"\d+(/\d+)?", tok)
                or _re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", tok)
                or tok == "("
            ):
                node = node * parse_power()
            else:
                return node

    def parse_power() -> Polynomial:
        node = parse_atom()
        if peek() in ("^", "**"):
            take()
            e = take()
            if not _re.fullmatch(r"\d+", e):
                raise InputError("exponents must be nonnegative integers")
            node = node ** int(e)
        return node

    def parse_atom() -> Polynomial:
        tok = take()
        if tok == "(":
            node = parse_sum()
            take(")")
            return node
        if tok == "-":
            return -parse_atom()
        if _re.fullmatch(r"\d+(/\d+)?", tok):
            return Polynomial.constant(Coeff(Fraction(tok)), names)
        if tok == "i":
            return Polynomial.constant(I_C, names)
        if _re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", tok):
            return Polynomial.variable(tok, names)
        raise InputError(f"unexpected token {tok!r}")

    if not tokens:
        raise InputError("empty polynomial expression")
    out = parse_sum()
    if peek() is not None:
        raise InputError(f"trailing tokens starting at {peek()!r}")
    return out


def series_from_triples(triples: Iterable, prec) -> HahnSeries:
    """Build a series from [exp_num, exp_den, coeff] triples plus a precision."""
    items = []
    for t in triples:
        if len(t) != 3:
            raise InputError("series term must be [exp_num, exp_den, coeff]")
        num, den, c = t
        if int(den) == 0:
            raise InputError("exponent denominator must be nonzero")
        items.append((Fraction(int(num), int(den)), Coeff.of(c)))
    p = INF if prec in (None, "inf", "INF") else Fraction(prec)
    return HahnSeries.make(items, p)
