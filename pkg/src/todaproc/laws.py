"""Absorption-time laws of the Doob chain, exactly.

The Laplace transform G_n(s) = E_n e^{-sT} of the absorption time satisfies

    G_n(s) = 1/(s + P(n)) * sum_i rate_i(n) G_{n-e_i}(s),     G_0 = 1,

where rate_i are the Doob jump rates and P the quadratic form; the recursion
only ever adds simple poles at -P(m) for visited lattice points m, so the
denominator stays factored for free.  F_n(t) = P_n(T <= t) is the exact
inverse transform of G_n(s)/s, an exponential polynomial.

For r = 1 the chain is the pure death process with rates k^2 and everything
is classical: the transition kernel has a terminating spectral expansion in
the eigenfunctions phi_k(n) = n!^2/((n-k)!(n+k)!) with dual family
phi*_k(m) = (-1)^k (-k)_m (k)_m / m!^2.  For r = 2 the CDF has the closed form

    F_{n,m}(t) = sum_k [Ht_k(n,m) - 2 k^2 H_k(n,m) t] e^{-k^2 t}

with H_k a ratio of factorials and Ht_k carrying harmonic numbers (or, on the
branch n >= k > m, a single Gamma factor); both families are eigenfunctions of
the rank-2 generator.
"""

from __future__ import annotations

from typing import Callable, Dict, Tuple

import gmpy2
from gmpy2 import mpq, mpz

from .coeffs import CoeffTable, doob_rates, quad_form
from .exact import ExpPoly, Poly, RationalFn, as_q, laplace_invert

__all__ = [
    "gfun",
    "absorption_cdf",
    "r1_gfun",
    "r1_cdf",
    "r1_phi",
    "r1_phi_star",
    "r1_transition",
    "r2_closed_cdf",
    "r2_H",
    "r2_Ht",
    "generator_apply",
]


class _GMemo:
    """Memoized recursion for G_n over the lower set of query points."""

    def __init__(self, table: CoeffTable):
        self.table = table
        self.memo: Dict[Tuple[int, ...], RationalFn] = {}

    def get(self, n: Tuple[int, ...]) -> RationalFn:
        if all(x == 0 for x in n):
            return RationalFn.one()
        if n in self.memo:
            return self.memo[n]
        rates = doob_rates(self.table, n)
        acc = RationalFn.zero()
        for i, rate in enumerate(rates):
            if rate == 0:
                continue
            m = list(n)
            m[i] -= 1
            acc = acc + self.get(tuple(m)).scale(rate)
        out = acc.mul_simple_pole(-quad_form(n))
        self.memo[n] = out
        return out


_memos: Dict[int, _GMemo] = {}


def gfun(table: CoeffTable, n: Tuple[int, ...]) -> RationalFn:
    """Exact Laplace transform G_n(s), with factored denominator."""
    memo = _memos.get(id(table))
    if memo is None or memo.table is not table:
        memo = _GMemo(table)
        _memos[id(table)] = memo
    return memo.get(tuple(int(x) for x in n))


def absorption_cdf(table: CoeffTable, n: Tuple[int, ...]) -> ExpPoly:
    """F_n(t) as an exact exponential polynomial: invert G_n(s)/s."""
    g = gfun(table, n)
    return laplace_invert(g.mul_simple_pole(0))


# ---------------------------------------------------------------------------
# r = 1: death process with quadratic rates
# ---------------------------------------------------------------------------


def r1_gfun(n: int) -> RationalFn:
    """G_n(s) = prod_{k<=n} k^2/(s+k^2) (independent product form)."""
    num = mpz(1)
    poles = {}
    for k in range(1, n + 1):
        num *= k * k
        poles[mpq(-k * k)] = 1
    return RationalFn(Poly.const(num), poles)


def r1_cdf(n: int) -> ExpPoly:
    return laplace_invert(r1_gfun(n).mul_simple_pole(0))


def r1_phi(k: int, n: int) -> mpq:
    """phi_k(n) = n!^2 / ((n-k)!(n+k)!); vanishes for |k| > n."""
    k = abs(k)
    if k > n:
        return mpq(0)
    f = gmpy2.fac
    return mpq(f(n) * f(n), f(n - k) * f(n + k))


def r1_phi_star(k: int, m: int) -> mpq:
    """phi*_k(m) = (-1)^k (-k)_m (k)_m / m!^2; vanishes for |k| < m."""
    acc = mpq((-1) ** k)
    prod = mpz(1)
    for j in range(m):
        prod *= (j - k) * (j + k)
    f = gmpy2.fac(m)
    return acc * mpq(prod, f * f)


def r1_transition(n: int, m: int) -> ExpPoly:
    """p_t(n, m) = sum_{|k|<=n} phi_k(n) phi*_k(m) e^{-k^2 t} (terminating)."""
    terms: Dict[mpq, Poly] = {}
    for k in range(-n, n + 1):
        c = r1_phi(k, n) * r1_phi_star(k, m)
        if c:
            rate = mpq(k * k)
            terms[rate] = terms.get(rate, Poly()) + Poly.const(c)
    return ExpPoly(terms)


# ---------------------------------------------------------------------------
# r = 2: closed-form CDF
# ---------------------------------------------------------------------------


def r2_H(k: int, n: int, m: int) -> mpq:
    """H_k(n,m) = n!^2 m!^2 / ((n-k)!(n+k)!(m-k)!(m+k)!); 0 unless |k| <= n ^ m."""
    k = abs(k)
    if k > n or k > m:
        return mpq(0)
    f = gmpy2.fac
    return mpq(f(n) ** 2 * f(m) ** 2, f(n - k) * f(n + k) * f(m - k) * f(m + k))


def _harmonic(n: int) -> mpq:
    acc = mpq(0)
    for j in range(1, n + 1):
        acc += mpq(1, j)
    return acc


def r2_Ht(k: int, n: int, m: int) -> mpq:
    """The companion coefficient Ht_k(n,m) of the rank-2 closed form.

    Symmetric under k -> -k and (n,m) -> (m,n); zero for |k| > max(n,m);
    harmonic-number expression on |k| <= min(n,m) and a Gamma(k-m) branch for
    n >= k > m.
    """
    k = abs(k)
    if n < m:
        n, m = m, n
    if k > n:
        return mpq(0)
    f = gmpy2.fac
    if k <= m:
        h = _harmonic
        bracket = 1 + k * (h(n - k) - h(n + k) + h(m - k) - h(m + k))
        return bracket * r2_H(k, n, m)
    # n >= k > m:  (-1)^{m+k} k Gamma(k-m) n!^2 m!^2 / ((n-k)!(n+k)!(m+k)!)
    return mpq(
        (-1) ** (m + k) * k * f(k - m - 1) * f(n) ** 2 * f(m) ** 2,
        f(n - k) * f(n + k) * f(m + k),
    )


def r2_closed_cdf(n: int, m: int) -> ExpPoly:
    """F_{n,m}(t) = sum_k [Ht_k - 2 k^2 H_k t] e^{-k^2 t}, exactly."""
    terms: Dict[mpq, Poly] = {}
    for k in range(-max(n, m), max(n, m) + 1):
        ht = r2_Ht(k, n, m)
        h = r2_H(k, n, m)
        poly = Poly([ht, -2 * k * k * h])
        if poly:
            rate = mpq(k * k)
            terms[rate] = terms.get(rate, Poly()) + poly
    return ExpPoly(terms)


def generator_apply(table: CoeffTable, f: Callable, n: Tuple[int, ...]) -> mpq:
    """(L f)(n) = sum_i rate_i(n) [f(n - e_i) - f(n)] for the Doob chain."""
    rates = doob_rates(table, n)
    acc = mpq(0)
    fn = f(n)
    for i, rate in enumerate(rates):
        if rate == 0:
            continue
        m = list(n)
        m[i] -= 1
        acc += rate * (f(tuple(m)) - fn)
    return acc
