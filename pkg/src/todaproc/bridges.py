"""Maximum laws of non-intersecting bridge ensembles via Hermite determinants.

Writing t = 2h^2, the distribution functions of twice the squared maximum of
N non-intersecting reflected bridges (M) and excursions (H) are theta-like
lattice sums

    P(2M^2 <= t) = sum_{k in Z^N} P_k(t) e^{-sum k_i^2 t},
    P(2H^2 <= t) = sum_{k in Z^N} Q_k(t) e^{-sum k_i^2 t},

whose coefficients are symmetrized determinants of even Hermite polynomials:
orders 2(i+j-1) for the excursion law and 2(i+j-2) for the reflected-bridge
law, evaluated at k_i sqrt(t).  Even Hermite polynomials are polynomials in
k^2 t, so every coefficient is an exact rational polynomial in t.

Normalization constants are never taken from outside: they are fixed by
requiring the k = 0 coefficient to be the constant 1 (which forces the t->oo
limit 1).  The reflected-bridge law carries an explicit global sign
(-1)^{sum k_i}; without it the N = 1 coefficient could not equal (-1)^k.

The same laws are also partition functions of discrete Gaussian ensembles
(squared Vandermonde-type weights on Z^N, resp. (Z - 1/2)^N), which gives the
independent consistency check ensemble_ratio_check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Sequence, Tuple

import gmpy2
from gmpy2 import mpfr, mpq, mpz

from .exact import Poly, as_q

__all__ = [
    "BridgeLaw",
    "M_LAW",
    "H_LAW",
    "law_for_rank",
    "hermite_poly_in_t",
    "sym_coeff",
    "normalization_divisor",
    "bridge_cdf",
    "choose_truncation",
    "cp_coeff",
    "ensemble_ratio_check",
]


@dataclass(frozen=True)
class BridgeLaw:
    """N non-intersecting paths; parity 'M' = reflected bridges, 'H' = excursions."""

    N: int
    parity: str  # 'M' or 'H'

    def __post_init__(self):
        if self.parity not in ("M", "H"):
            raise ValueError("parity must be 'M' or 'H'")
        if self.N < 1:
            raise ValueError("N must be >= 1")


def M_LAW(N: int) -> BridgeLaw:
    return BridgeLaw(N, "M")


def H_LAW(N: int) -> BridgeLaw:
    return BridgeLaw(N, "H")


def law_for_rank(r: int) -> BridgeLaw:
    """The bridge law matched to the rank-r absorption time.

    Odd r pairs with reflected bridges M_{(r+1)/2}, even r with excursions
    H_{r/2}; this matches every case computed exactly (r = 1..4).
    """
    return M_LAW((r + 1) // 2) if r % 2 else H_LAW(r // 2)


# ---------------------------------------------------------------------------
# Hermite polynomials in t
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _hermite_coeffs(n: int) -> Tuple[int, ...]:
    """Integer coefficients of the physicists' Hermite polynomial H_n(x)."""
    if n == 0:
        return (1,)
    if n == 1:
        return (0, 2)
    a = _hermite_coeffs(n - 1)
    b = _hermite_coeffs(n - 2)
    out = [0] * (n + 1)
    for i, c in enumerate(a):
        out[i + 1] += 2 * c
    for i, c in enumerate(b):
        out[i] -= 2 * (n - 1) * c
    return tuple(out)


def hermite_poly_in_t(order: int, k: int) -> Poly:
    """H_order(k sqrt(t)) as an exact polynomial in t; order must be even."""
    if order < 0 or order % 2:
        raise ValueError("order must be a nonnegative even integer")
    cs = _hermite_coeffs(order)
    k2 = mpz(k) * k
    out = []
    pw = mpz(1)
    for j in range(order // 2 + 1):
        out.append(cs[2 * j] * pw)
        pw *= k2
    return Poly(out)


def _det_poly(mat: List[List[Poly]]) -> Poly:
    """Determinant by permutation expansion (the matrices here are tiny)."""
    n = len(mat)
    acc = Poly()
    for perm in itertools.permutations(range(n)):
        sign = 1
        seen = list(perm)
        for i in range(n):  # count inversions
            for j in range(i + 1, n):
                if seen[i] > seen[j]:
                    sign = -sign
        term = Poly.const(sign)
        for i in range(n):
            term = term * mat[i][perm[i]]
        acc = acc + term
    return acc


def _order(law: BridgeLaw, i: int, j: int) -> int:
    return 2 * (i + j - 1) if law.parity == "H" else 2 * (i + j - 2)


@lru_cache(maxsize=None)
def normalization_divisor(parity: str, N: int) -> mpz:
    """det at k = 0, the divisor that makes the k = 0 coefficient equal 1."""
    law = BridgeLaw(N, parity)
    mat = [
        [hermite_poly_in_t(_order(law, i, j), 0) for j in range(1, N + 1)]
        for i in range(1, N + 1)
    ]
    d = _det_poly(mat)
    assert d.degree == 0
    return mpz(d[0])


@lru_cache(maxsize=None)
def _sym_coeff_cached(parity: str, N: int, kabs: Tuple[int, ...]) -> Poly:
    law = BridgeLaw(N, parity)
    acc = Poly()
    for perm in itertools.permutations(kabs):
        mat = [
            [hermite_poly_in_t(_order(law, i, j), perm[i - 1]) for j in range(1, N + 1)]
            for i in range(1, N + 1)
        ]
        acc = acc + _det_poly(mat)
    denom = mpq(1, normalization_divisor(parity, N) * gmpy2.fac(N))
    acc = acc * denom
    if parity == "M" and sum(kabs) % 2:
        acc = -acc
    return acc


def sym_coeff(law: BridgeLaw, k: Sequence[int]) -> Poly:
    """Symmetrized, normalized Hermite-determinant coefficient at k in Z^N.

    Depends on k only through the multiset {|k_i|}; the M parity includes the
    global sign (-1)^{sum k_i}.
    """
    if len(k) != law.N:
        raise ValueError(f"k must have length N = {law.N}")
    kabs = tuple(sorted(abs(int(x)) for x in k))
    return _sym_coeff_cached(law.parity, law.N, kabs)


# ---------------------------------------------------------------------------
# Series CDFs
# ---------------------------------------------------------------------------


def choose_truncation(law: BridgeLaw, t: float, target: float = 1e-12, kmax: int = 400) -> int:
    """Smallest K with Gaussian tail bound below target at this t."""
    for K in range(1, kmax):
        if _tail_bound(law, t, K) < target:
            return K
    return kmax


def _poly_bound_at(law: BridgeLaw, kmag: int, t: float) -> float:
    """Crude upper bound for |sym_coeff| at |k_i| <= kmag: sum of |coeffs| t^j."""
    worst = 0.0
    p = _sym_coeff_cached(law.parity, law.N, (kmag,) * law.N)
    val = sum(abs(float(c)) * t**j for j, c in enumerate(p.coeffs))
    return max(worst, val)


def _tail_bound(law: BridgeLaw, t: float, K: int) -> float:
    """Gaussian-decay bound on the mass beyond the box |k_i| <= K."""
    import math

    N = law.N
    # terms with some |k_i| = K+1, others <= K+1, bounded by shell count times
    # the largest coefficient on the shell, then a geometric tail in the shell
    # index because the exponent grows by at least (2k+1) t per shell.
    bound = 0.0
    ratio = math.exp(-(2 * K + 3) * t)
    shell = K + 1
    term = (
        (2 * shell + 1) ** N
        * _poly_bound_at(law, shell, t)
        * math.exp(-(shell * shell) * t)
        * N
    )
    if ratio < 1.0:
        bound = term / (1.0 - ratio)
    else:
        bound = float("inf")
    return bound


def bridge_cdf(law: BridgeLaw, t, truncation: int | None = None, precision: int = 30):
    """Lattice-sum value of P(2 max^2 <= t) and a Gaussian tail bound.

    Returns (value, tail_bound) as mpfr at ~precision digits; the value is not
    clamped to [0,1].  With truncation None the box is chosen adaptively.
    """
    tf = float(t)
    if tf <= 0:
        raise ValueError("t must be positive (series diverges slowly at 0)")
    K = truncation if truncation is not None else choose_truncation(law, tf)
    prec_bits = int(precision * 3.33) + 24
    with gmpy2.context(precision=prec_bits):
        tv = mpfr(as_q(t)) if not isinstance(t, float) else mpfr(t)
        acc = mpfr(0)
        for k in itertools.product(range(-K, K + 1), repeat=law.N):
            p = sym_coeff(law, k)
            if p:
                expo = -sum(x * x for x in k) * tv
                acc += p(tv) * gmpy2.exp(expo)
        return acc, mpfr(_tail_bound(law, tf, K))


def cp_coeff(r: int, p: int) -> Poly:
    """Shell-summed coefficient at decay rate p for rank r in {3, 4}:
    sum over (k,l) in Z^2 with k^2 + l^2 = p of the N = 2 coefficient."""
    if r not in (3, 4):
        raise ValueError("cp_coeff is defined for r = 3 and r = 4")
    law = law_for_rank(r)
    acc = Poly()
    kmax = int(p**0.5) + 1
    for k in range(-kmax, kmax + 1):
        for l in range(-kmax, kmax + 1):
            if k * k + l * l == p:
                acc = acc + sym_coeff(law, (k, l))
    return acc


# ---------------------------------------------------------------------------
# Discrete-ensemble cross-check
# ---------------------------------------------------------------------------


def _ensemble_sum(law: BridgeLaw, h, precision_bits: int) -> mpfr:
    """Squared-Vandermonde Gaussian lattice sum, times the h prefactor.

    H parity: sum over x in Z^N of (prod x_i)^2 prod (x_i^2-x_j^2)^2 e^{-pi^2 |x|^2/(2h^2)}
    times h^{-2N^2-N}; M parity: half-integer lattice, no prod x_i, h^{-2N^2+N}.
    """
    import math

    N = law.N
    hv = mpfr(h)
    pi = gmpy2.const_pi()
    digits = precision_bits / 3.4
    reach = float(hv) * math.sqrt(2.0 * (digits + 8) * math.log(10.0)) / math.pi
    K = int(reach) + 3
    acc = mpfr(0)
    if law.parity == "H":
        lattice: Iterable = itertools.product(range(-K, K + 1), repeat=N)
    else:
        lattice = itertools.product([i + 0.5 for i in range(-K - 1, K + 1)], repeat=N)
    for x in lattice:
        xs = [mpfr(2 * xi) / 2 if isinstance(xi, float) else mpfr(xi) for xi in x]
        van = mpfr(1)
        for i in range(N):
            for j in range(i + 1, N):
                van *= xs[i] * xs[i] - xs[j] * xs[j]
        if law.parity == "H":
            for xi in xs:
                van *= xi
        if van == 0:
            continue
        norm2 = sum((xi * xi for xi in xs), mpfr(0))
        acc += van * van * gmpy2.exp(-pi * pi * norm2 / (2 * hv * hv))
    power = -2 * N * N - N if law.parity == "H" else -2 * N * N + N
    return acc * hv**power


def ensemble_ratio_check(
    law: BridgeLaw, h_values: Sequence[float], truncation: int = 8, precision: int = 40
) -> dict:
    """Compare the ensemble form and the Hermite form at t = 2h^2 across h.

    The unknown normalisation constants cancel in the ratio, which must be
    h-independent; reports the maximum relative deviation from the mean ratio.
    """
    prec_bits = int(precision * 3.33) + 48
    ratios = []
    with gmpy2.context(precision=prec_bits):
        for h in h_values:
            hv = mpfr(as_q(h)) if not isinstance(h, float) else mpfr(h)
            if hv <= 0:
                raise ValueError("h must be positive")
            t = 2 * hv * hv
            hermite, _ = bridge_cdf(law, t, truncation=truncation, precision=precision + 15)
            ens = _ensemble_sum(law, hv, prec_bits)
            ratios.append(ens / hermite)
        mean = sum(ratios, mpfr(0)) / len(ratios)
        dev = max(abs(rt / mean - 1) for rt in ratios)
    return {
        "law": f"{law.parity}_{law.N}",
        "h": [float(h) for h in h_values],
        "ratios": [str(rt) for rt in ratios],
        "max_rel_dev": float(dev),
    }
