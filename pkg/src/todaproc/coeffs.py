"""Coefficient tables for the quadratic-rate lattice recursion.

The integer table A_r solves

    P(n) A_r(n) = sum_i n_i^2 A_r(n - e_i),   A_r(0) = 1,
    P(n) = sum n_i^2 - sum n_i n_{i+1},

with A_r(n) = 0 off the nonnegative orthant; every division in the dynamic
program is asserted exact.  The normalized a_r(n) = A_r(n) / prod n_i!^2 is
the weight-sum over monotone triangular arrays with boundary n, and the rates
n_i^2 A_r(n-e_i)/A_r(n) are the jump rates of the Doob-transformed chain.

The shifted family f_{r,nu} lives on nu' + Z_+^r (nu' the partial sums of nu)
and is built from the nested-sum recursion

    f_{r,nu}(n) = sum_k Lambda^theta_r(n, k) f_{r-1,mu}(k),
    mu_i = nu_i + theta/r,  theta = nu_{r+1},

whose kernel is a product of reciprocal factorials; with integer nu every
factorial argument is an integer and the table is exact.  The reciprocal
factorial of a negative integer is zero, which silently enforces all the
support conventions.

Special arguments: with the interleaved sequence n_1, n_2, ... =
n, m, n+m, 2m, n+2m, 3m, ... the value f_{r,nu}(n_1..n_r) factorizes as

    n_{r+1}! * prod_i 1/(n - nu_i)! * prod_{i<j} 1/(m - nu_i - nu_j)!,

and at nu = 0 this collapses to products of binomial coefficients.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import gmpy2
from gmpy2 import mpq, mpz

from .exact import as_q, qstr
from .operators import TableTooSmallError

__all__ = [
    "quad_form",
    "CoeffTable",
    "build_table",
    "doob_rates",
    "LogCoeffTable",
    "build_log_table",
    "ShiftedCoeffTable",
    "build_shifted_table",
    "eigen_recursion_residual",
    "special_args",
    "factorized_value",
    "binomial_F",
    "apery",
    "apery_by_recurrence",
    "a3_closed",
    "a4_closed",
    "boundary_weight_sum",
    "normalizer",
    "BoxTooLargeError",
]

MEMORY_CAP_BYTES = 2 << 30  # default build_table cap: 2 GiB estimated


class BoxTooLargeError(MemoryError):
    """Estimated table memory exceeds the configured cap."""


def quad_form(n: Sequence[int]) -> int:
    """P(n) = sum n_i^2 - sum n_i n_{i+1}; positive definite on Z^r \\ {0}."""
    p = sum(x * x for x in n)
    for a, b in zip(n, n[1:]):
        p -= a * b
    return p


def _strides(box: Tuple[int, ...]) -> Tuple[int, ...]:
    st = [1] * len(box)
    for i in range(len(box) - 2, -1, -1):
        st[i] = st[i + 1] * (box[i + 1] + 1)
    return tuple(st)


# ---------------------------------------------------------------------------
# Integer tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoeffTable:
    """Dense exact-integer table of A_r over the box [0, box_1] x ... x [0, box_r]."""

    r: int
    box: Tuple[int, ...]
    values: tuple  # flat, C-order

    def index(self, n: Tuple[int, ...]) -> int:
        idx = 0
        for x, b, s in zip(n, self.box, self._st):
            if not (0 <= x <= b):
                raise TableTooSmallError(f"point {n} outside box {self.box}")
            idx += x * s
        return idx

    @property
    def _st(self) -> Tuple[int, ...]:
        return _strides(self.box)

    def value(self, n: Tuple[int, ...]):
        """A_r(n); zero convention off the nonnegative orthant."""
        if any(x < 0 for x in n):
            return 0
        return self.values[self.index(n)]

    def a_value(self, n: Tuple[int, ...]) -> mpq:
        """a_r(n) = A_r(n) / prod n_i!^2."""
        if any(x < 0 for x in n):
            return mpq(0)
        return mpq(self.value(n), normalizer(n))

    def func(self):
        """Callable view with the zero convention (for operator application)."""
        return self.value

    def a_func(self):
        return self.a_value

    def to_json(self) -> str:
        return json.dumps(
            {"r": self.r, "box": list(self.box), "values": [str(v) for v in self.values]}
        )

    @staticmethod
    def from_json(s: str) -> "CoeffTable":
        d = json.loads(s)
        return CoeffTable(d["r"], tuple(d["box"]), tuple(mpz(v) for v in d["values"]))

    def to_binary(self) -> bytes:
        """Compact dump: header, then little-endian length-prefixed magnitudes."""
        out = [struct.pack("<4sB", b"ATBL", self.r)]
        out.append(struct.pack("<%dI" % self.r, *self.box))
        out.append(struct.pack("<Q", len(self.values)))
        for v in self.values:
            raw = gmpy2.to_binary(mpz(v))
            out.append(struct.pack("<I", len(raw)))
            out.append(raw)
        return b"".join(out)

    @staticmethod
    def from_binary(blob: bytes) -> "CoeffTable":
        magic, r = struct.unpack_from("<4sB", blob, 0)
        if magic != b"ATBL":
            raise ValueError("not a coefficient-table dump")
        off = 5
        box = struct.unpack_from("<%dI" % r, blob, off)
        off += 4 * r
        (count,) = struct.unpack_from("<Q", blob, off)
        off += 8
        vals = []
        for _ in range(count):
            (ln,) = struct.unpack_from("<I", blob, off)
            off += 4
            vals.append(gmpy2.from_binary(blob[off : off + ln]))
            off += ln
        return CoeffTable(r, tuple(box), tuple(vals))


def build_table(r: int, box: Sequence[int], memory_cap: int = MEMORY_CAP_BYTES) -> CoeffTable:
    """Fill A_r on the box by dynamic programming; every division asserted exact."""
    box = tuple(int(b) for b in box)
    if len(box) != r or any(b < 0 for b in box):
        raise ValueError("box must have r nonnegative entries")
    nentries = 1
    for b in box:
        nentries *= b + 1
    if nentries * 96 > memory_cap:
        raise BoxTooLargeError(
            f"estimated {nentries * 96} bytes exceeds cap {memory_cap}; "
            "use the log-float backend for boxes this large"
        )
    st = _strides(box)
    vals: List = [0] * nentries
    vals[0] = mpz(1)
    # C-order iteration visits n after every n - e_i
    point = [0] * r
    for idx in range(1, nentries):
        k = r - 1
        while point[k] == box[k]:
            point[k] = 0
            k -= 1
        point[k] += 1
        acc = mpz(0)
        for i in range(r):
            ni = point[i]
            if ni:
                acc += ni * ni * vals[idx - st[i]]
        q, rem = divmod(acc, quad_form(point))
        if rem != 0:
            raise AssertionError(f"divisibility failed at {tuple(point)}")
        vals[idx] = q
    return CoeffTable(r, box, tuple(vals))


def normalizer(n: Sequence[int]) -> mpz:
    """prod n_i!^2, the integer normalization between a_r and A_r."""
    out = mpz(1)
    for x in n:
        f = gmpy2.fac(x)
        out *= f * f
    return out


def doob_rates(table: CoeffTable, n: Tuple[int, ...]) -> Tuple[mpq, ...]:
    """Jump rates n_i^2 A(n - e_i)/A(n) of the Doob chain; empty at n = 0."""
    if all(x == 0 for x in n):
        return ()
    an = table.value(n)
    rates = []
    for i, ni in enumerate(n):
        if ni == 0:
            rates.append(mpq(0))
        else:
            m = list(n)
            m[i] -= 1
            rates.append(mpq(ni * ni * table.value(tuple(m)), an))
    return tuple(rates)


# ---------------------------------------------------------------------------
# Log-space floating backend for large boxes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogCoeffTable:
    """log A_r as float64, built by the same recursion in log space."""

    r: int
    box: Tuple[int, ...]
    logs: tuple

    def log_value(self, n: Tuple[int, ...]) -> float:
        idx = 0
        for x, b, s in zip(n, self.box, _strides(self.box)):
            if not (0 <= x <= b):
                raise TableTooSmallError(f"point {n} outside box {self.box}")
            idx += x * s
        return self.logs[idx]

    def rates(self, n: Tuple[int, ...]) -> Tuple[float, ...]:
        import math

        if all(x == 0 for x in n):
            return ()
        ln = self.log_value(n)
        out = []
        for i, ni in enumerate(n):
            if ni == 0:
                out.append(0.0)
            else:
                m = list(n)
                m[i] -= 1
                out.append(math.exp(2.0 * math.log(ni) + self.log_value(tuple(m)) - ln))
        return tuple(out)


def build_log_table(r: int, box: Sequence[int]) -> LogCoeffTable:
    import math

    box = tuple(int(b) for b in box)
    st = _strides(box)
    nentries = 1
    for b in box:
        nentries *= b + 1
    logs = [0.0] * nentries
    point = [0] * r
    for idx in range(1, nentries):
        k = r - 1
        while point[k] == box[k]:
            point[k] = 0
            k -= 1
        point[k] += 1
        terms = []
        for i in range(r):
            ni = point[i]
            if ni:
                terms.append(2.0 * math.log(ni) + logs[idx - st[i]])
        hi = max(terms)
        s = sum(math.exp(t - hi) for t in terms)
        logs[idx] = hi + math.log(s) - math.log(quad_form(point))
    return LogCoeffTable(r, box, tuple(logs))


# ---------------------------------------------------------------------------
# Shifted tables f_{r,nu}
# ---------------------------------------------------------------------------


@lru_cache(maxsize=4096)
def _invfact(m: int) -> mpq:
    """1/m! for m >= 0, zero for negative integer m."""
    return mpq(1, gmpy2.fac(m)) if m >= 0 else mpq(0)


def _check_integer(x: mpq, what: str) -> int:
    if x.denominator != 1:
        raise ValueError(f"{what} = {x} is not an integer; exact mode needs integer nu"
                         " (use float mode)")
    return int(x)


@dataclass(frozen=True)
class ShiftedCoeffTable:
    """Exact table of f_{r,nu} on the offset grid nu' + [0, box].

    Entries are indexed by the offset kappa = n - nu'; the zero convention
    f_{r,nu}(n) = 0 whenever some n_i < nu'_i is part of value().
    """

    r: int
    nu: Tuple[mpq, ...]
    box: Tuple[int, ...]
    values: tuple  # flat over kappa, C-order

    @property
    def nu_prime(self) -> Tuple[mpq, ...]:
        acc = mpq(0)
        out = []
        for x in self.nu[: self.r]:
            acc += x
            out.append(acc)
        return tuple(out)

    def value_at_offset(self, kappa: Tuple[int, ...]) -> mpq:
        if any(k < 0 for k in kappa):
            return mpq(0)
        st = _strides(self.box)
        idx = 0
        for x, b, s in zip(kappa, self.box, st):
            if x > b:
                raise TableTooSmallError(f"offset {kappa} outside box {self.box}")
            idx += x * s
        return self.values[idx]

    def value(self, n: Tuple[int, ...]) -> mpq:
        """f_{r,nu}(n) for n on the shifted integer grid."""
        np = self.nu_prime
        kappa = tuple(_check_integer(as_q(x) - w, "n - nu'") for x, w in zip(n, np))
        return self.value_at_offset(kappa)

    def func(self):
        """Callable on actual lattice points n (shifted zero convention)."""
        return self.value


def _shifted_level(nu: Tuple[mpq, ...], box: Tuple[int, ...]) -> list:
    """One level of the nested-sum recursion, filled over the whole box.

    Returns the flat list of f_{rho,nu}(nu' + kappa) for kappa in the box,
    where rho = len(box) = len(nu) - 1.
    """
    rho = len(box)
    if rho == 1:
        d = _check_integer(nu[0] - nu[1], "nu_1 - nu_2")
        return [_invfact(k) * _invfact(k + d) for k in range(box[0] + 1)]

    theta = nu[rho]
    mu = tuple(nu[i] + theta / rho for i in range(rho))
    prev = _shifted_level(mu, box[: rho - 1])
    prev_st = _strides(box[: rho - 1])
    # integer offsets delta_i = nu_i - theta entering the second kernel factor
    delta = [_check_integer(nu[i] - theta, "nu_i - theta") for i in range(rho)]

    st = _strides(box)
    nentries = 1
    for b in box:
        nentries *= b + 1
    vals = [mpq(0)] * nentries
    kappa = [0] * rho
    idx = 0
    while True:
        # weight = IF[d1+k1] * IF[k_rho] * prod_{i=1..rho-1} w_i(lam_i),
        # w_i(l) = IF[kappa_i - l] * IF[delta_{i+1} + kappa_{i+1} - l]
        head = _invfact(delta[0] + kappa[0]) * _invfact(kappa[rho - 1])
        if head != 0:
            w = [
                [
                    _invfact(kappa[i] - l) * _invfact(delta[i + 1] + kappa[i + 1] - l)
                    for l in range(kappa[i] + 1)
                ]
                for i in range(rho - 1)
            ]
            acc = _contract(w, prev, prev_st, 0, 0, head)
            vals[idx] = acc
        idx += 1
        k = rho - 1
        while k >= 0 and kappa[k] == box[k]:
            kappa[k] = 0
            k -= 1
        if k < 0:
            break
        kappa[k] += 1
    return vals


def _contract(w: list, prev: list, prev_st: Tuple[int, ...], depth: int, base: int, pp: mpq) -> mpq:
    """Sum over lambda of prod w_i(lambda_i) * prev[lambda], with partial products."""
    wd = w[depth]
    if depth == len(w) - 1:
        acc = mpq(0)
        stride = prev_st[depth]
        for l, wl in enumerate(wd):
            if wl:
                acc += wl * prev[base + l * stride]
        return pp * acc
    acc = mpq(0)
    stride = prev_st[depth]
    for l, wl in enumerate(wd):
        if wl:
            acc += _contract(w, prev, prev_st, depth + 1, base + l * stride, pp * wl)
    return acc


def build_shifted_table(r: int, nu: Sequence, box: Sequence[int]) -> ShiftedCoeffTable:
    """Exact f_{r,nu} table over nu' + [0, box], via the nested-sum recursion.

    nu must sum to zero and have integral pairwise differences (in particular
    integer nu).  Raises ValueError otherwise.
    """
    nuq = tuple(as_q(x) for x in nu)
    if len(nuq) != r + 1:
        raise ValueError("nu must have r + 1 entries")
    if sum(nuq, mpq(0)) != 0:
        raise ValueError("nu must sum to zero")
    box = tuple(int(b) for b in box)
    vals = _shifted_level(nuq, box)
    return ShiftedCoeffTable(r, nuq, box, tuple(vals))


def eigen_recursion_residual(table: ShiftedCoeffTable) -> mpq:
    """Max |P(n) - P(nu')| f(n) - sum_i f(n - e_i)| over the box (0 if the
    nested-sum table satisfies the shifted eigen-recursion, as it must)."""
    r = table.r
    np_ = table.nu_prime
    pnu = quad_form([as_q(x) for x in np_])
    worst = mpq(0)
    st = _strides(table.box)
    kappa = [0] * r
    idx = 0
    total = len(table.values)
    while idx < total:
        n = tuple(as_q(k) + w for k, w in zip(kappa, np_))
        lhs = (quad_form(n) - pnu) * table.values[idx]
        rhs = mpq(0)
        for i in range(r):
            if kappa[i] > 0:
                rhs += table.values[idx - st[i]]
        worst = max(worst, abs(lhs - rhs))
        idx += 1
        k = r - 1
        while k >= 0 and kappa[k] == table.box[k]:
            kappa[k] = 0
            k -= 1
        if k < 0:
            break
        kappa[k] += 1
    return worst


# ---------------------------------------------------------------------------
# Special arguments and factorized values
# ---------------------------------------------------------------------------


def special_args(r: int, n, m) -> Tuple:
    """(n_1, ..., n_{r+1}) with n_i = i/2 * m for even i, n + (i-1)/2 * m odd i."""
    n, m = as_q(n), as_q(m)
    out = []
    for i in range(1, r + 2):
        out.append((i // 2) * m if i % 2 == 0 else n + ((i - 1) // 2) * m)
    return tuple(out)


def factorized_value(r: int, nu: Sequence, n, m) -> mpq:
    """Closed form of f_{r,nu} at the interleaved special arguments.

    Requires integer factorial arguments (exact mode); raises ValueError when
    the argument constraints are violated.
    """
    nuq = tuple(as_q(x) for x in nu)
    if sum(nuq, mpq(0)) != 0:
        raise ValueError("nu must sum to zero")
    args = special_args(r, n, m)
    n, m = as_q(n), as_q(m)
    acc = mpq(0)
    for i in range(r):
        acc += nuq[i]
        off = _check_integer(args[i] - acc, "n_i - nu'_i")
        if off < 0:
            raise ValueError(f"argument {i + 1} lies below the shifted orthant")
    last = _check_integer(args[r], "n_{r+1}")
    if last < 0:
        raise ValueError("n_{r+1} must be a nonnegative integer in exact mode")
    val = mpq(gmpy2.fac(last))
    for x in nuq:
        val *= _invfact(_check_integer(n - x, "n - nu_i"))
    for i in range(r + 1):
        for j in range(i + 1, r + 1):
            val *= _invfact(_check_integer(m - nuq[i] - nuq[j], "m - nu_i - nu_j"))
    return val


def binomial_F(r: int, n: int, m: int) -> mpz:
    """F_r(n, m) as the product G_r * G_{r-1}^2 * ... * G_2^2 of multinomials.

    G_{2k-1} = prod_{j<=k} C(j m, m) and G_{2k} = C(n + k m, n) G_{2k-1};
    equals A_r evaluated at the interleaved special arguments.
    """
    if r < 2:
        raise ValueError("binomial corollary needs r >= 2")

    def G(i: int) -> mpz:
        k = (i + 1) // 2
        g = mpz(1)
        for j in range(1, k + 1):
            g *= gmpy2.bincoef(j * m, m)
        if i % 2 == 0:
            g *= gmpy2.bincoef(n + k * m, n)
        return g

    out = G(r)
    for i in range(2, r):
        gi = G(i)
        out *= gi * gi
    return out


def apery(n: int) -> mpz:
    """Diagonal values A_3(n,n,n) as the classical binomial double-square sum."""
    acc = mpz(0)
    for k in range(n + 1):
        acc += (gmpy2.bincoef(n, k) * gmpy2.bincoef(n + k, k)) ** 2
    return acc


def apery_by_recurrence(nmax: int) -> List[mpz]:
    """a_0..a_nmax via n^3 a_n = (34n^3-51n^2+27n-5) a_{n-1} - (n-1)^3 a_{n-2}."""
    out = [mpz(1), mpz(5)]
    for n in range(2, nmax + 1):
        num = (34 * n**3 - 51 * n**2 + 27 * n - 5) * out[-1] - (n - 1) ** 3 * out[-2]
        q, rem = divmod(num, mpz(n) ** 3)
        if rem != 0:
            raise AssertionError(f"recurrence division failed at n={n}")
        out.append(q)
    return out[: nmax + 1]


# ---------------------------------------------------------------------------
# Closed binomial sums (independent oracles)
# ---------------------------------------------------------------------------


def _binom(a: int, b: int) -> mpz:
    """C(a, b) with the lattice-sum convention: zero outside 0 <= b <= a."""
    if b < 0 or a < 0 or b > a:
        return mpz(0)
    return gmpy2.bincoef(a, b)


def a3_closed(n: int, m: int, l: int) -> mpz:
    """A_3(n,m,l) = sum_k C(m,k)^2 C(n+k,m) C(l+k,m)."""
    acc = mpz(0)
    for k in range(m + 1):
        acc += _binom(m, k) ** 2 * _binom(n + k, m) * _binom(l + k, m)
    return acc


def a4_closed(n1: int, n2: int, n3: int, n4: int) -> mpz:
    """A_4 as the double sum of binomial products."""
    acc = mpz(0)
    for i in range(n2 + 1):
        for j in range(n3 + 1):
            acc += (
                _binom(n2, i) ** 2
                * _binom(n1 + n2 - i, n2)
                * _binom(n3, j) ** 2
                * _binom(n3 + n4 - j, n3)
                * _binom(n2 + n3 - i - j, n2 - j)
                * _binom(i + j, i)
            )
    return acc


def boundary_weight_sum(r: int, n: Tuple[int, ...]) -> mpz:
    """A_r(n) as the binomial weight sum over monotone triangular arrays with
    boundary n (exponential enumeration; small cases only)."""
    cells = [(i, j) for d in range(2, r + 2) for i in range(1, d) for j in (d - i,)]
    # boundary cells are those with i + j = r + 1, fixed to n
    fixed = {}
    for i in range(1, r + 1):
        fixed[(i, r + 1 - i)] = n[i - 1]
    interior = [(i, j) for (i, j) in cells if i + j <= r]
    interior.sort(key=lambda ij: -(ij[0] + ij[1]))  # fill inward from the boundary

    def weight_cell(pi: Dict, i: int, j: int) -> mpz:
        v = pi[(i, j)]
        left = pi.get((i, j - 1), 0)
        up = pi.get((i - 1, j), 0)
        if v < left or v < up:
            return mpz(0)
        return gmpy2.bincoef(v, up) * gmpy2.bincoef(v, left)

    total = mpz(0)

    def rec(k: int, pi: Dict):
        nonlocal total
        if k == len(interior):
            w = mpz(1)
            for i, j in cells:
                w *= weight_cell(pi, i, j)
                if w == 0:
                    return
            total += w
            return
        i, j = interior[k]
        cap = min(pi.get((i + 1, j), 10**9), pi.get((i, j + 1), 10**9))
        for v in range(0, cap + 1):
            pi[(i, j)] = v
            rec(k + 1, pi)
        del pi[(i, j)]

    rec(0, dict(fixed))
    return total
