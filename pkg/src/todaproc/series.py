"""Truncated multivariate Laurent series for iterated singular limits.

The limits computed in limits.py are iterated scalar limits: the lattice
argument u approaches the special point x one coordinate at a time
(u_1 -> x_1 innermost, then u_2, ...), and finally the pattern scale xi -> 0.
Writing u_i = x_i - eps_i, the working ring is Laurent series in eps_1 whose
coefficients are Laurent series in eps_2, and so on, with xi outermost; i.e.
eps_1 << eps_2 << ... << eps_r << xi.  A monomial dominates another iff its
exponent tuple is lexicographically smaller (innermost variable major).  For
example

    1/(a*eps_1 + b*eps_2) = (1/(b*eps_2)) sum_j (-a/b)^j (eps_1/eps_2)^j,

the expansion consistent with eps_1 -> 0 first.

Exponent tuples are packed into a single integer, 7 bits per coordinate with
a bias of 64 (legal exponents are -48..48, far beyond anything the kernels
produce), innermost coordinate in the highest bits.  Packed keys add like
exponents and compare like the lexicographic order, which makes the hot
multiply loop pure integer arithmetic.

Scalars are duck-typed: gmpy2.mpq for exact runs, gmpy2.mpfr (or a mix;
gmpy2 promotes) when Gamma-series coefficients enter.  Products are capped
componentwise and in total degree by caller-supplied bounds; lower exponents
stay bounded because every input has a finite pole part.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import gmpy2
from gmpy2 import mpfr, mpq

__all__ = [
    "Ring",
    "Series",
    "GammaContext",
    "PowSeries",
    "gamma_series",
    "series_sin_pi",
    "SeriesError",
]

Series = Dict[int, object]

_BITS = 7
_HALF = 64
_RANGE = 48


class SeriesError(ArithmeticError):
    pass


class Ring:
    """Laurent-series ring in nv iterated variables with packed exponents."""

    def __init__(self, nv: int):
        self.nv = nv
        bias = 0
        for _ in range(nv):
            bias = (bias << _BITS) | _HALF
        self.bias = bias
        self._dec: Dict[int, Tuple[int, ...]] = {}

    # -- exponent packing --------------------------------------------------

    def enc(self, exps: Sequence[int]) -> int:
        key = 0
        for e in exps:
            if not -_RANGE <= e <= _RANGE:
                raise SeriesError(f"exponent {e} out of packed range")
            key = (key << _BITS) | (e + _HALF)
        return key

    def dec(self, key: int) -> Tuple[int, ...]:
        t = self._dec.get(key)
        if t is None:
            out = []
            k = key
            for _ in range(self.nv):
                out.append((k & 0x7F) - _HALF)
                k >>= _BITS
            t = tuple(reversed(out))
            self._dec[key] = t
        return t

    def lex_negative(self, key: int) -> bool:
        """True iff the first nonzero exponent is negative: a blocking pole
        under the iterated limits (lex-positive monomials vanish instead)."""
        for x in self.dec(key):
            if x:
                return x < 0
        return False

    # -- constructors --------------------------------------------------------

    def const(self, c) -> Series:
        return {self.bias: c} if c else {}

    def monomial(self, c, exps: Sequence[int]) -> Series:
        return {self.enc(exps): c} if c else {}

    def form(self, const, coeffs: Sequence) -> Series:
        """const + sum_i coeffs[i] * v_i."""
        out: Series = {}
        if const:
            out[self.bias] = const
        for i, a in enumerate(coeffs):
            if a:
                e = [0] * self.nv
                e[i] = 1
                out[self.enc(e)] = a
        return out

    # -- arithmetic ----------------------------------------------------------

    @staticmethod
    def add(a: Series, b: Series) -> Series:
        out = dict(a)
        for k, v in b.items():
            w = out.get(k)
            if w is None:
                out[k] = v
            else:
                w = w + v
                if w:
                    out[k] = w
                else:
                    del out[k]
        return out

    @staticmethod
    def scale(a: Series, c) -> Series:
        if not c:
            return {}
        return {k: v * c for k, v in a.items()}

    def filt(
        self, a: Series, caps: Optional[Tuple[int, ...]], total_cap: Optional[int]
    ) -> Series:
        if caps is None and total_cap is None:
            return a
        dec = self.dec
        out: Series = {}
        for k, v in a.items():
            e = dec(k)
            if caps is not None:
                ok = True
                for i in range(self.nv):
                    if e[i] > caps[i]:
                        ok = False
                        break
                if not ok:
                    continue
            if total_cap is not None and sum(e) > total_cap:
                continue
            out[k] = v
        return out

    def mul(
        self,
        a: Series,
        b: Series,
        caps: Optional[Tuple[int, ...]] = None,
        total_cap: Optional[int] = None,
    ) -> Series:
        """Product, then window filter.  The pair loop is pure int + dict."""
        if not a or not b:
            return {}
        if len(a) > len(b):
            a, b = b, a
        bias = self.bias
        out: Series = {}
        get = out.get
        bi = list(b.items())
        for ka, av in a.items():
            k0 = ka - bias
            for kb, bv in bi:
                e = k0 + kb
                w = get(e)
                if w is None:
                    out[e] = av * bv
                else:
                    w = w + av * bv
                    if w:
                        out[e] = w
                    else:
                        del out[e]
        return self.filt(out, caps, total_cap)

    def min_orders(self, a: Series) -> Tuple[int, ...]:
        if not a:
            return (0,) * self.nv
        dec = self.dec
        mins = [99] * self.nv
        for k in a:
            e = dec(k)
            for i in range(self.nv):
                if e[i] < mins[i]:
                    mins[i] = e[i]
        return tuple(mins)

    def min_total(self, a: Series) -> int:
        if not a:
            return 0
        dec = self.dec
        return min(sum(dec(k)) for k in a)

    def inv(
        self,
        a: Series,
        caps: Tuple[int, ...],
        total_cap: Optional[int] = None,
        max_iter: int = 600,
    ) -> Series:
        """Invert by leading-monomial extraction.

        The leading monomial is the lex minimum of the support (the dominant
        monomial under the iterated limits); every other monomial divided by
        it is lex-positive, so the Neumann series terminates in the window.
        """
        if not a:
            raise ZeroDivisionError("inverting the zero series")
        lead = min(a)
        c = a[lead]
        bias = self.bias
        shift = bias - lead
        nb: Series = {}
        for k, v in a.items():
            if k != lead:
                nb[k + shift] = -v / c
        lexp = self.dec(lead)
        gen_caps = tuple(caps[i] + abs(lexp[i]) + 1 for i in range(self.nv))
        gen_total = None if total_cap is None else total_cap + abs(sum(lexp)) + 1
        out: Series = {bias: 1 / c}
        term: Series = {bias: 1 / c}
        for _ in range(max_iter):
            term = self.mul(term, nb, gen_caps, gen_total)
            if not term:
                break
            out = Ring.add(out, term)
        else:
            raise SeriesError("series inversion did not terminate in the window")
        shifted = {k + shift - bias: v for k, v in out.items()}
        return self.filt(shifted, caps, total_cap)

    def inv_form(
        self,
        const,
        coeffs: Sequence,
        caps: Tuple[int, ...],
        total_cap: Optional[int] = None,
    ) -> Series:
        return self.inv(self.form(const, coeffs), caps, total_cap)

    def product(
        self,
        factors: Sequence[Series],
        caps: Tuple[int, ...],
        total_cap: Optional[int] = None,
    ) -> Series:
        """Product of many series, exact on the capped window.

        Intermediates are capped at the window minus the summed minimum
        orders (componentwise and total) of the factors still to come, so
        every term that can re-enter the window after later pole factors
        survives.  Most-singular factors are multiplied first.
        """
        nv = self.nv
        facts = sorted(factors, key=lambda f: min(f) if f else self.bias)
        mins = [self.min_orders(f) for f in facts]
        tmins = [self.min_total(f) for f in facts]
        suffix = [(0,) * nv] * (len(facts) + 1)
        tsuffix = [0] * (len(facts) + 1)
        for i in range(len(facts) - 1, -1, -1):
            suffix[i] = tuple(suffix[i + 1][k] + mins[i][k] for k in range(nv))
            tsuffix[i] = tsuffix[i + 1] + tmins[i]
        acc: Series = {self.bias: mpq(1)}
        for i, f in enumerate(facts):
            step = tuple(caps[k] - suffix[i + 1][k] for k in range(nv))
            step_total = None if total_cap is None else total_cap - tsuffix[i + 1]
            acc = self.mul(acc, f, step, step_total)
            if not acc:
                break
        return acc

    # -- Gamma factors -------------------------------------------------------

    def gamma_form(
        self,
        ctx: "GammaContext",
        const: int,
        coeffs: Sequence,
        caps: Tuple[int, ...],
        total_cap: Optional[int] = None,
    ) -> Series:
        """Gamma(const + L) for integer const and linear form L, capped.

        const >= 1:  Gamma(1+L) * prod_{j=1}^{const-1} (j + L)
        const <= 0:  Gamma(1+L) / prod_{j=const}^{0} (j + L); the j = 0
                     factor carries the pole.  Results are cached on
                     (const, coeffs, caps, total_cap).
        """
        key = (self.nv, const, tuple(coeffs), caps, total_cap)
        cached = ctx.cache.get(key)
        if cached is not None:
            return cached
        order = (total_cap if total_cap is not None else sum(c for c in caps if c > 0)) + 2
        g = ctx.gamma1_taylor(order)
        L = self.form(0, coeffs)
        gen_total = None if total_cap is None else total_cap + 1
        out: Series = {self.bias: g[0]}
        Lk: Series = {self.bias: mpq(1)}
        for k in range(1, order + 1):
            Lk = self.mul(Lk, L, caps, gen_total)
            if not Lk:
                break
            out = Ring.add(out, Ring.scale(Lk, g[k]))
        if const >= 1:
            for j in range(1, const):
                out = self.mul(out, self.form(mpq(j), coeffs), caps, gen_total)
        else:
            for j in range(const, 0):
                out = self.mul(
                    out, self.inv_form(mpq(j), coeffs, caps, gen_total), caps, gen_total
                )
            out = self.mul(out, self.inv_form(0, coeffs, caps, gen_total), caps, gen_total)
        out = self.filt(out, caps, total_cap)
        ctx.cache[key] = out
        return out


# ---------------------------------------------------------------------------
# Gamma-function Taylor data
# ---------------------------------------------------------------------------


class GammaContext:
    """Cached transcendental constants and the Taylor series of Gamma(1+w).

    Built once per precision; the series comes from exponentiating the
    classical logarithmic series -gamma*w + sum_{k>=2} (-1)^k zeta(k) w^k/k.
    """

    def __init__(self, precision_digits: int = 60):
        self.digits = precision_digits
        self.bits = int(precision_digits * 3.33) + 48
        with gmpy2.context(precision=self.bits):
            self.euler = gmpy2.const_euler()
        self._taylor: List = []
        self.cache: Dict = {}

    def zeta(self, k: int):
        with gmpy2.context(precision=self.bits):
            return gmpy2.zeta(mpfr(k))

    def gamma1_taylor(self, order: int) -> Tuple:
        """Coefficients g_0..g_order of Gamma(1 + w) = sum g_k w^k."""
        if len(self._taylor) > order:
            return tuple(self._taylor[: order + 1])
        with gmpy2.context(precision=self.bits):
            log_coeffs = [mpfr(0), -self.euler]
            for k in range(2, order + 1):
                log_coeffs.append((-1) ** k * self.zeta(k) / k)
            exp_coeffs = [mpfr(1)]
            for n in range(1, order + 1):
                acc = mpfr(0)
                for k in range(1, n + 1):
                    if k < len(log_coeffs):
                        acc += k * log_coeffs[k] * exp_coeffs[n - k]
                exp_coeffs.append(acc / n)
        self._taylor = exp_coeffs
        return tuple(exp_coeffs)

    def tolerance(self) -> float:
        """Vanishing threshold scaled with the working precision."""
        return 10.0 ** (-(self.digits // 3))


# ---------------------------------------------------------------------------
# Univariate expansions of Gamma around a point (public helpers)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowSeries:
    """sum_{k>=offset} c_k x^k with high-precision coefficients; offset may be
    negative (Laurent with finite pole part)."""

    offset: int
    coeffs: Tuple

    def coeff(self, k: int):
        i = k - self.offset
        if 0 <= i < len(self.coeffs):
            return self.coeffs[i]
        return mpfr(0)

    def __mul__(self, other: "PowSeries") -> "PowSeries":
        n = len(self.coeffs) + len(other.coeffs) - 1
        out = [mpfr(0)] * n
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return PowSeries(self.offset + other.offset, tuple(out))

    def truncate(self, order: int) -> "PowSeries":
        keep = order - self.offset + 1
        return PowSeries(self.offset, self.coeffs[: max(keep, 0)])


def gamma_series(a, order: int, precision: int = 60) -> PowSeries:
    """Expansion of Gamma(a + x) in x to the requested order.

    At a nonpositive integer the result is a Laurent series with a simple
    pole; elsewhere it is the Taylor series built from log-Gamma derivatives.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    ctx = GammaContext(precision)
    is_int = isinstance(a, int) or (isinstance(a, mpq) and a.denominator == 1)
    if is_int:
        m = int(a)
        g = ctx.gamma1_taylor(order + abs(m) + 2)
        with gmpy2.context(precision=ctx.bits):
            ser = PowSeries(0, tuple(g))
            if m >= 1:
                for j in range(1, m):
                    ser = _mul_linear(ser, mpfr(j))
            else:
                for j in range(m, 0):
                    ser = _div_linear(ser, mpfr(j))
                ser = PowSeries(ser.offset - 1, ser.coeffs)  # divide by x
            return ser.truncate(order)
    # non-integer a: Taylor from polygamma values
    import mpmath

    with gmpy2.context(precision=ctx.bits):
        mpmath.mp.prec = ctx.bits
        av = mpmath.mpf(str(a))
        log_coeffs = [mpmath.loggamma(av)]
        for k in range(1, order + 1):
            log_coeffs.append(mpmath.psi(k - 1, av) / mpmath.factorial(k))
        exp_coeffs = [mpmath.exp(log_coeffs[0])]
        for n in range(1, order + 1):
            acc = mpmath.mpf(0)
            for k in range(1, n + 1):
                acc += k * log_coeffs[k] * exp_coeffs[n - k]
            exp_coeffs.append(acc / n)
        return PowSeries(0, tuple(mpfr(str(c)) for c in exp_coeffs))


def _mul_linear(ser: PowSeries, c) -> PowSeries:
    """(c + x) * ser."""
    out = [c * v for v in ser.coeffs] + [mpfr(0)]
    for i, v in enumerate(ser.coeffs):
        out[i + 1] += v
    return PowSeries(ser.offset, tuple(out))


def _div_linear(ser: PowSeries, c) -> PowSeries:
    """ser / (c + x) with c != 0."""
    inv = 1 / c
    out = []
    carry = mpfr(0)
    for v in ser.coeffs:
        w = (v - carry) * inv
        out.append(w)
        carry = w
    return PowSeries(ser.offset, tuple(out))


def series_sin_pi(shift, order: int, precision: int = 60) -> PowSeries:
    """sin(pi (shift + x)) as a series in x (for reflection-identity tests)."""
    ctx = GammaContext(precision)
    with gmpy2.context(precision=ctx.bits):
        pi = gmpy2.const_pi()
        s0 = gmpy2.sin(pi * mpfr(shift))
        c0 = gmpy2.cos(pi * mpfr(shift))
        out = []
        fact = mpfr(1)
        for k in range(order + 1):
            if k:
                fact *= k
            pk = pi**k / fact
            if k % 4 == 0:
                out.append(s0 * pk)
            elif k % 4 == 1:
                out.append(c0 * pk)
            elif k % 4 == 2:
                out.append(-s0 * pk)
            else:
                out.append(-c0 * pk)
        return PowSeries(0, tuple(out))
