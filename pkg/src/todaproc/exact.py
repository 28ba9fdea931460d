"""Exact arithmetic substrate.

Carriers used throughout the package:

  * rational scalars        -- gmpy2.mpq, always lowest terms, denominator > 0
  * Poly                    -- dense univariate polynomial with rational
                               coefficients (used both for the Laplace variable
                               s and the time variable t)
  * RationalFn              -- rational function of s whose denominator is kept
                               in factored form ``lead * prod (s - root)^mult``;
                               the recursions that produce these only ever
                               multiply by 1/(s + integer), so factored form is
                               free and no polynomial factorization is needed
  * ExpPoly                 -- exponential polynomial  sum_p e^{-p t} P_p(t)
                               with rational decay rates p >= 0

Everything here is immutable value data; results are deterministic and safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import gmpy2
from gmpy2 import mpq, mpz

__all__ = [
    "as_q",
    "qstr",
    "Poly",
    "RationalFn",
    "ExpPoly",
    "partial_fractions",
    "laplace_invert",
    "exp_poly_eval",
    "ExactError",
    "ImproperFractionError",
    "IrreducibleDenominatorError",
    "NotCdfTransformError",
]

Q0 = mpq(0)
Q1 = mpq(1)


class ExactError(ValueError):
    """Base class for structured errors raised by this module."""


class ImproperFractionError(ExactError):
    """deg(numerator) >= deg(denominator): not a proper rational function."""


class IrreducibleDenominatorError(ExactError):
    """A denominator factor has no rational root."""


class NotCdfTransformError(ExactError):
    """A pole with positive real part: cannot be the transform of a CDF."""


def as_q(x) -> mpq:
    """Coerce int/str("a/b")/Fraction/mpq to an exact rational."""
    if isinstance(x, mpq):
        return x
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, float):
        raise TypeError("refusing float -> exact rational; pass str or Fraction")
    return mpq(x)


def qstr(x) -> str:
    """Serialize a rational as "num/den" (denominator always explicit)."""
    q = as_q(x)
    return f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------


class Poly:
    """Dense univariate polynomial over the rationals.

    Coefficients are indexed by degree; the zero polynomial has an empty
    coefficient tuple and degree -1.  Instances are immutable and hashable.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        cs = [as_q(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))

    def __setattr__(self, *a):  # immutability
        raise AttributeError("Poly is immutable")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def const(c) -> "Poly":
        return Poly([as_q(c)])

    @staticmethod
    def monomial(c, k: int) -> "Poly":
        return Poly([Q0] * k + [as_q(c)])

    # -- structure ---------------------------------------------------------

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __getitem__(self, k: int) -> mpq:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else Q0

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "Poly") -> "Poly":
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] += c
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly([-c for c in self.coeffs])

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            c = as_q(other)
            return Poly([ci * c for ci in self.coeffs])
        a, b = self.coeffs, other.coeffs
        if not a or not b:
            return Poly()
        out = [Q0] * (len(a) + len(b) - 1)
        for i, ai in enumerate(a):
            if ai:
                for j, bj in enumerate(b):
                    out[i + j] += ai * bj
        return Poly(out)

    __rmul__ = __mul__

    def scale(self, c) -> "Poly":
        return self * as_q(c)

    def __call__(self, x):
        """Horner evaluation; x may be mpq (exact) or mpfr (high precision)."""
        acc = x - x  # zero of the right type
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def shift(self, a) -> "Poly":
        """Return p(x + a), exactly (Taylor shift by synthetic division)."""
        a = as_q(a)
        cs = list(self.coeffs)
        n = len(cs)
        for i in range(n - 1):
            for j in range(n - 2, i - 1, -1):
                cs[j] += a * cs[j + 1]
        return Poly(cs)

    def deflate_root(self, root) -> "Poly":
        """Divide exactly by (x - root); requires p(root) == 0."""
        root = as_q(root)
        cs = self.coeffs
        out = [Q0] * (len(cs) - 1)
        acc = Q0
        for k in range(len(cs) - 1, 0, -1):
            acc = cs[k] + acc * root
            out[k - 1] = acc
        if cs[0] + acc * root != 0:
            raise ExactError("deflate_root: value at root is nonzero")
        return Poly(out)

    # -- presentation --------------------------------------------------------

    def __repr__(self) -> str:
        if not self.coeffs:
            return "Poly(0)"
        terms = [f"{c}*x^{k}" for k, c in enumerate(self.coeffs) if c != 0]
        return "Poly(" + " + ".join(terms) + ")"

    def to_json(self) -> dict:
        return {f"t^{k}": qstr(c) for k, c in enumerate(self.coeffs) if c != 0}

    @staticmethod
    def from_json(d: Mapping[str, str]) -> "Poly":
        if not d:
            return Poly()
        deg = max(int(k.split("^")[1]) for k in d)
        cs = [Q0] * (deg + 1)
        for k, v in d.items():
            cs[int(k.split("^")[1])] = as_q(v)
        return Poly(cs)


def poly_series_div(num: Poly, den: Poly, order: int) -> Poly:
    """Power-series quotient num/den mod x^(order+1); den(0) must be nonzero."""
    if not den or den[0] == 0:
        raise ZeroDivisionError("series division by a polynomial vanishing at 0")
    inv0 = 1 / den[0]
    out = [Q0] * (order + 1)
    for k in range(order + 1):
        acc = num[k]
        for j in range(1, k + 1):
            acc -= den[j] * out[k - j]
        out[k] = acc * inv0
    return Poly(out)


# ---------------------------------------------------------------------------
# Rational functions of s with factored denominator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RationalFn:
    """num(s) / prod (s - root)^mult, denominator monic and factored.

    Roots are distinct exact rationals; gcd(num, den) = 1 is maintained by the
    constructor (common (s - root) factors are cancelled).  Any overall
    constant lives in the numerator, so printed forms like
    2*(3s+5) / (5 (s+1)^3 (s+2)) are stored with numerator (6s+10)/5.
    """

    num: Poly
    poles: tuple  # tuple of (root: mpq, mult: int), sorted by root descending

    def __init__(self, num: Poly, poles):
        if isinstance(poles, Mapping):
            items = list(poles.items())
        else:
            items = list(poles)
        norm: dict = {}
        for root, mult in items:
            root = as_q(root)
            mult = int(mult)
            if mult < 0:
                raise ExactError("negative pole multiplicity")
            if mult:
                norm[root] = norm.get(root, 0) + mult
        # cancel common factors with the numerator
        p = num
        for root in list(norm):
            while norm[root] > 0 and p.degree >= 1 and p(root) == 0:
                p = p.deflate_root(root)
                norm[root] -= 1
            if norm[root] == 0:
                del norm[root]
        object.__setattr__(self, "num", p)
        object.__setattr__(
            self, "poles", tuple(sorted(norm.items(), key=lambda kv: kv[0], reverse=True))
        )

    # -- construction helpers ----------------------------------------------

    @staticmethod
    def one() -> "RationalFn":
        return RationalFn(Poly.const(1), ())

    @staticmethod
    def zero() -> "RationalFn":
        return RationalFn(Poly(), ())

    @staticmethod
    def from_unfactored(num: Poly, den: Poly) -> "RationalFn":
        """Factor the denominator by rational-root extraction.

        Raises IrreducibleDenominatorError if a non-rational factor remains.
        """
        if not den:
            raise ZeroDivisionError("zero denominator")
        lead = den.coeffs[-1]
        den = den * (1 / lead)
        num = num * (1 / lead)
        poles: dict = {}
        d = den
        while d.degree >= 1:
            root = _rational_root(d)
            if root is None:
                raise IrreducibleDenominatorError(
                    "irreducible denominator: no rational root found"
                )
            d = d.deflate_root(root)
            poles[root] = poles.get(root, 0) + 1
        return RationalFn(num, poles)

    # -- structure -----------------------------------------------------------

    @property
    def den_degree(self) -> int:
        return sum(m for _, m in self.poles)

    def den_poly(self) -> Poly:
        p = Poly.const(1)
        for root, mult in self.poles:
            f = Poly([-root, Q1])
            for _ in range(mult):
                p = p * f
        return p

    def __call__(self, s):
        d = s - s + 1
        for root, mult in self.poles:
            d = d * (s - root) ** mult
        return self.num(s) / d

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalFn):
            return NotImplemented
        return self.num == other.num and self.poles == other.poles

    def __hash__(self):
        return hash((self.num, self.poles))

    # -- arithmetic (only what the recursions need) --------------------------

    def __add__(self, other: "RationalFn") -> "RationalFn":
        pa, pb = dict(self.poles), dict(other.poles)
        roots = set(pa) | set(pb)
        lcm = {r: max(pa.get(r, 0), pb.get(r, 0)) for r in roots}
        na = self.num
        for r in roots:
            k = lcm[r] - pa.get(r, 0)
            if k:
                na = na * _linear_power(r, k)
        nb = other.num
        for r in roots:
            k = lcm[r] - pb.get(r, 0)
            if k:
                nb = nb * _linear_power(r, k)
        return RationalFn(na + nb, lcm)

    def scale(self, c) -> "RationalFn":
        return RationalFn(self.num * as_q(c), dict(self.poles))

    def mul_simple_pole(self, root) -> "RationalFn":
        """Multiply by 1/(s - root)."""
        root = as_q(root)
        poles = dict(self.poles)
        poles[root] = poles.get(root, 0) + 1
        return RationalFn(self.num, poles)

    # -- presentation --------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "num": {f"s^{k}": qstr(c) for k, c in enumerate(self.num.coeffs) if c != 0},
            "poles": [[qstr(r), m] for r, m in self.poles],
        }

    def __repr__(self) -> str:
        den = " ".join(
            f"(s - {r})^{m}" if m > 1 else f"(s - {r})" for r, m in self.poles
        )
        return f"RationalFn(({self.num!r}) / {den or '1'})"


def _linear_power(root, k: int) -> Poly:
    f = Poly([-as_q(root), Q1])
    p = Poly.const(1)
    for _ in range(k):
        p = p * f
    return p


def _rational_root(p: Poly):
    """One rational root of p, or None.  p has rational coefficients."""
    den_lcm = mpz(1)
    for c in p.coeffs:
        den_lcm = gmpy2.lcm(den_lcm, c.denominator)
    ints = [mpz(c * den_lcm) for c in p.coeffs]
    if ints and ints[0] == 0:
        return mpq(0)
    a0, an = abs(ints[0]), abs(ints[-1])
    for pnum in _divisors(a0):
        for pden in _divisors(an):
            for sign in (1, -1):
                cand = mpq(sign * pnum, pden)
                if p(cand) == 0:
                    return cand
    return None


def _divisors(n: mpz):
    n = mpz(n)
    out = []
    d = mpz(1)
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            out.append(n // d)
        d += 1
    return sorted(set(out))


# ---------------------------------------------------------------------------
# Partial fractions and Laplace inversion
# ---------------------------------------------------------------------------


def partial_fractions(f: RationalFn) -> list:
    """Decompose a proper rational function into [(pole, order, coeff), ...].

    The returned triples satisfy  f(s) = sum coeff / (s - pole)^order  exactly.
    Orders run 1..mult for each pole; zero coefficients are kept out.
    """
    if f.num.degree >= f.den_degree:
        raise ImproperFractionError(
            f"improper fraction: deg num {f.num.degree} >= deg den {f.den_degree}"
        )
    out = []
    for root, mult in f.poles:
        # Taylor-expand num(s)/(rest of denominator) around s = root.
        num_sh = f.num.shift(root)
        rest = Poly.const(1)
        for r2, m2 in f.poles:
            if r2 != root:
                rest = rest * _linear_power(r2 - root, m2)
        taylor = poly_series_div(num_sh, rest, mult - 1)
        # coefficient of (s-root)^j in the Taylor series pairs with order mult-j
        for j in range(mult):
            c = taylor[j]
            if c != 0:
                out.append((root, mult - j, c))
    return out


def recombine(parts: Sequence) -> RationalFn:
    """Sum of coeff/(s-pole)^order triples, as a RationalFn (test oracle)."""
    acc = RationalFn.zero()
    for pole, order, coeff in parts:
        acc = acc + RationalFn(Poly.const(coeff), {as_q(pole): order})
    return acc


# ---------------------------------------------------------------------------
# Exponential polynomials
# ---------------------------------------------------------------------------


class ExpPoly:
    """Finite sum over decay rates p >= 0 of e^{-p t} * P_p(t), exactly.

    terms maps the rational rate p to the Poly P_p; zero polynomials are not
    stored.  This is the exact carrier of every CDF in the package: rates are
    the values of the quadratic form P at visited lattice points.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping = ()):
        d = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for rate, poly in items:
            rate = as_q(rate)
            if rate < 0:
                raise ExactError("negative decay rate in ExpPoly")
            if not isinstance(poly, Poly):
                poly = Poly.const(poly) if not isinstance(poly, (list, tuple)) else Poly(poly)
            if poly:
                d[rate] = d.get(rate, Poly()) + poly
        object.__setattr__(self, "terms", {r: p for r, p in d.items() if p})

    def __setattr__(self, *a):
        raise AttributeError("ExpPoly is immutable")

    @staticmethod
    def const(c) -> "ExpPoly":
        return ExpPoly({Q0: Poly.const(c)})

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExpPoly):
            return NotImplemented
        return self.terms == other.terms

    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        items = list(self.terms.items()) + list(other.terms.items())
        return ExpPoly(items)

    def __sub__(self, other: "ExpPoly") -> "ExpPoly":
        items = list(self.terms.items()) + [(r, -p) for r, p in other.terms.items()]
        return ExpPoly(items)

    def scale(self, c) -> "ExpPoly":
        c = as_q(c)
        return ExpPoly({r: p * c for r, p in self.terms.items()})

    def at_zero(self) -> mpq:
        """Exact value at t = 0 (sum of constant coefficients)."""
        return sum((p[0] for p in self.terms.values()), Q0)

    def limit_at_infinity(self) -> mpq:
        """Exact t -> oo limit; requires the rate-0 part to be constant."""
        p0 = self.terms.get(Q0, Poly())
        if p0.degree > 0:
            raise ExactError("rate-0 polynomial is nonconstant: no finite limit")
        return p0[0]

    def forward_laplace(self) -> RationalFn:
        """Exact Laplace transform: c t^j e^{-pt} -> c j! / (s+p)^(j+1)."""
        acc = RationalFn.zero()
        for rate, poly in self.terms.items():
            for j, c in enumerate(poly.coeffs):
                if c:
                    acc = acc + RationalFn(
                        Poly.const(c * _factorial(j)), {-rate: j + 1}
                    )
        return acc

    def eval_float(self, t: float) -> float:
        import math

        return sum(
            _poly_float(poly, t) * math.exp(-float(rate) * t)
            for rate, poly in self.terms.items()
        )

    def to_json(self) -> dict:
        return {qstr(r): p.to_json() for r, p in sorted(self.terms.items())}

    @staticmethod
    def from_json(d: Mapping) -> "ExpPoly":
        return ExpPoly({as_q(r): Poly.from_json(pd) for r, pd in d.items()})

    def __repr__(self) -> str:
        bits = []
        for r, p in sorted(self.terms.items()):
            bits.append(f"({p!r})*e^(-{r}t)")
        return "ExpPoly(" + " + ".join(bits) + ")" if bits else "ExpPoly(0)"


def _poly_float(poly: Poly, t: float) -> float:
    acc = 0.0
    for c in reversed(poly.coeffs):
        acc = acc * t + float(c)
    return acc


def _factorial(n: int) -> mpz:
    return gmpy2.fac(n)


def laplace_invert(f: RationalFn) -> ExpPoly:
    """Invert a proper rational Laplace transform with poles on (-oo, 0].

    Each partial fraction c/(s+a)^m maps to c t^{m-1} e^{-a t} / (m-1)!.
    """
    for root, _ in f.poles:
        if root > 0:
            raise NotCdfTransformError(f"pole at s = {root} > 0: not a CDF transform")
    out: dict = {}
    for pole, order, coeff in partial_fractions(f):
        rate = -pole
        poly = Poly.monomial(coeff / _factorial(order - 1), order - 1)
        out[rate] = out.get(rate, Poly()) + poly
    return ExpPoly(out)


def exp_poly_eval(f: ExpPoly, t, precision: int = 30):
    """Evaluate sum_p e^{-p t} P_p(t) at t >= 0 to `precision` decimal digits.

    Returns a gmpy2.mpfr carrying ~precision digits.
    """
    prec_bits = int(precision * 3.33) + 24
    with gmpy2.context(precision=prec_bits):
        tv = gmpy2.mpfr(as_q(t)) if not isinstance(t, float) else gmpy2.mpfr(t)
        if tv < 0:
            raise ExactError("t must be nonnegative")
        acc = gmpy2.mpfr(0)
        for rate, poly in f.terms.items():
            acc += poly(tv) * gmpy2.exp(-gmpy2.mpfr(rate) * tv)
        return acc
