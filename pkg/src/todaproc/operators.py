"""Commuting difference operators from the tridiagonal characteristic polynomial.

With a tridiagonal matrix carrying diagonal p_1..p_{r+1}, superdiagonal -1 and
subdiagonal q_1..q_r, the characteristic polynomial expands as

    det(lam - L) = sum_{l=0}^{r+1} (-1)^l lam^{r-l+1} eta_{r,l}(p, q),

and eta_{r,l} is the sum of the products p_{i_1}..p_{i_s} q_{j_1}..q_{j_d}
over index sets with s + 2d = l, the i's avoiding {j, j+1} for every chosen j,
and no two chosen j's adjacent.  Substituting difference/shift operators for
p and q turns each eta_{r,l} into a lattice operator; the admissibility
conditions make every term a product of mutually commuting factors, so the
terms are unambiguous.

Three quantizations act on functions of n in Z_+^r (p_i = n_i - n_{i-1} with
n_0 = n_{r+1} = 0 in all of them):

    backward   q_i f(n) = f(n - e_i)
    weighted   q_i f(n) = n_i^2 f(n - e_i)
    forward    q_i f(n) = f(n + e_i)         (the formal adjoint)
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, FrozenSet, Tuple

from gmpy2 import mpq

__all__ = [
    "TodaTerm",
    "eta_terms",
    "eta_terms_from_minors",
    "apply_operator",
    "toda_char_poly",
    "TableTooSmallError",
    "QUANTIZATIONS",
]

QUANTIZATIONS = ("backward", "weighted", "forward")


class TableTooSmallError(LookupError):
    """An operator term needs a lattice value outside the tabulated box."""


@dataclass(frozen=True)
class TodaTerm:
    """One admissible monomial p_{i_1}..p_{i_s} q_{j_1}..q_{j_d}."""

    p_indices: Tuple[int, ...]
    q_indices: Tuple[int, ...]

    def weight(self) -> int:
        return len(self.p_indices) + 2 * len(self.q_indices)


@lru_cache(maxsize=None)
def eta_terms(r: int, l: int) -> FrozenSet[TodaTerm]:
    """All admissible terms of eta_{r,l}; eta_{r,0} is the empty product.

    Raises ValueError unless 0 <= l <= r+1.
    """
    if not (0 <= l <= r + 1):
        raise ValueError(f"l = {l} out of range 0..{r + 1}")
    terms = []
    for d in range(l // 2 + 1):
        s = l - 2 * d
        for q_sel in itertools.combinations(range(1, r + 1), d):
            if any(b - a == 1 for a, b in zip(q_sel, q_sel[1:])):
                continue
            blocked = set(q_sel) | {j + 1 for j in q_sel}
            free = [i for i in range(1, r + 2) if i not in blocked]
            for p_sel in itertools.combinations(free, s):
                terms.append(TodaTerm(p_sel, q_sel))
    return frozenset(terms)


def eta_terms_from_minors(r: int, l: int) -> FrozenSet[TodaTerm]:
    """Independent reconstruction of eta_{r,l} via the principal-minor recursion

        delta_k = (lam - p_{k+1}) delta_{k-1} + q_k delta_{k-2},
        delta_{-1} = 1, delta_{-2} = 0,

    expanded in commuting formal symbols; used as the oracle for eta_terms.
    """
    if not (0 <= l <= r + 1):
        raise ValueError(f"l = {l} out of range 0..{r + 1}")
    # monomial: (lam_power, p_set, q_set) -> integer coefficient
    delta_m1: Dict = {(0, frozenset(), frozenset()): 1}
    delta_m2: Dict = {}
    prev, prev2 = delta_m1, delta_m2
    for k in range(r + 1):
        cur: Dict = {}
        for (lp, ps, qs), c in prev.items():
            key = (lp + 1, ps, qs)
            cur[key] = cur.get(key, 0) + c
            key = (lp, ps | {k + 1}, qs)
            cur[key] = cur.get(key, 0) - c
        if k >= 1:
            for (lp, ps, qs), c in prev2.items():
                key = (lp, ps, qs | {k})
                cur[key] = cur.get(key, 0) + c
        prev, prev2 = cur, prev
    out = []
    for (lp, ps, qs), c in prev.items():
        weight = len(ps) + 2 * len(qs)
        if weight != l:
            continue
        assert lp == r + 1 - l, "lambda power inconsistent with term weight"
        assert c == (-1) ** len(ps), "unexpected minor-expansion coefficient"
        out.append(TodaTerm(tuple(sorted(ps)), tuple(sorted(qs))))
    return frozenset(out)


def _term_value(term: TodaTerm, quant: str, f: Callable, n: Tuple[int, ...], r: int):
    """Value of one term at n.  The p factors are evaluated at the unshifted
    point; this is exactly the written order since the factors commute."""
    pprod = 1
    for i in term.p_indices:
        lo = n[i - 2] if i >= 2 else 0
        hi = n[i - 1] if i <= r else 0
        pprod *= hi - lo
        if pprod == 0:
            return 0
    if quant == "forward":
        shift = 1
    else:
        shift = -1
    m = list(n)
    coeff = 1
    for j in term.q_indices:
        if quant == "weighted":
            coeff *= n[j - 1] * n[j - 1]
        m[j - 1] += shift
    if quant == "weighted" and coeff == 0:
        return 0
    return pprod * coeff * f(tuple(m))


def apply_operator(r: int, l: int, quant: str, f: Callable, n: Tuple[int, ...]):
    """Evaluate (eta_{r,l}(p,q) f)(n) for the chosen quantization.

    f is a callable on integer tuples implementing its own zero convention
    below the lattice and raising TableTooSmallError above its box.
    """
    if quant not in QUANTIZATIONS:
        raise ValueError(f"unknown quantization {quant!r}")
    acc = 0
    for term in eta_terms(r, l):
        acc += _term_value(term, quant, f, n, r)
    return acc


def toda_char_poly(r: int, quant: str, f: Callable, n: Tuple[int, ...], lam):
    """Alternating lambda-weighted sum sum_l (-1)^l lam^{r-l+1} (eta_{r,l} f)(n)."""
    lam = lam if isinstance(lam, mpq) else mpq(lam)
    acc = mpq(0)
    for l in range(r + 2):
        v = apply_operator(r, l, quant, f, n)
        if v != 0:
            acc += (-1) ** l * lam ** (r - l + 1) * v
    return acc
