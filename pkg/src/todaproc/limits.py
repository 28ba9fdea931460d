"""Spectral-expansion coefficients by iterated singular limits.

The infinite-start CDF has the proposed expansion

    F(t) = sum_{classes} c_{kappa'}(t) e^{-P(kappa') t},

where each class coefficient is a nested limit: substitute the special
pattern x = (xi, xi, 2 xi, 2 xi, ...), move the lattice argument to
u = x - eps coordinatewise, multiply by prod_i (x_i - u_i), sum the
Gamma-product kernel over an orbit class, then send eps_1 -> 0, eps_2 -> 0,
..., eps_r -> 0, and finally xi -> 0.  The inner limits are genuinely
iterated (coordinate by coordinate, innermost first): along generic straight
lines the r >= 3 class sums keep uncancelled poles, while the iterated order
reproduces every closed form the expansion is known to have.  Orbit classes
are the sets of lattice points whose increment vectors are permutations of
one another; the quadratic form P is constant along a class.

The kernel for a member rho' is

    C = h(nu) Gamma(x_{r+1})^{-1} prod_i Gamma(xi - nu_i)
        prod_{i<j} Gamma(xi - nu_i - nu_j) e^{-P(nu') t},

with nu' = u + rho', nu its increment vector, h the Vandermonde product.
Everything expands in the iterated Laurent ring of series.py; the kernel is
multiplied by e^{P(rho') t}, so the exponential factor becomes exp(-DP t)
with DP = P(nu') - P(rho') free of constant term, and the t-degree-d part of
the answer is the limit of (scalar kernel series) * (-DP)^d / d!.

The finite-start expansion replaces the Gamma factors by reciprocal
Pochhammer products; it is fully rational, runs in exact mpq arithmetic, and
its residual poles must cancel exactly.  The rank-2 transition kernel at
general integer points is handled the same way.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import gmpy2
from gmpy2 import mpfr, mpq

from .coeffs import quad_form
from .exact import ExpPoly, Poly, as_q
from .series import GammaContext, Ring, Series

__all__ = [
    "OrbitClass",
    "orbit",
    "shell_points",
    "orbit_classes",
    "HPoly",
    "limit_coeff",
    "limit_cp",
    "finite_start_cdf",
    "r2_kernel",
    "mellin_check",
    "bilinear_identity_check",
    "theta_identity",
    "LimitError",
    "recognize_rational",
]


class LimitError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# Orbit classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrbitClass:
    representative: Tuple[int, ...]
    members: Tuple[Tuple[int, ...], ...]  # sorted

    @property
    def p_value(self) -> int:
        return quad_form(self.representative)


def _increments(kp: Sequence[int]) -> Tuple[int, ...]:
    prev = 0
    out = []
    for x in kp:
        out.append(x - prev)
        prev = x
    out.append(-prev)
    return tuple(out)


def orbit(r: int, kappa_prime: Sequence[int]) -> OrbitClass:
    """All rho' in Z_+^r whose increment vector is a permutation of that of
    kappa' (the reversal clause is subsumed: a reversal is a permutation)."""
    kp = tuple(int(x) for x in kappa_prime)
    if len(kp) != r or any(x < 0 for x in kp):
        raise ValueError("kappa' must lie in Z_+^r")
    inc = _increments(kp)
    members = set()
    for perm in set(itertools.permutations(inc)):
        acc = 0
        partial = []
        good = True
        for v in perm[:r]:
            acc += v
            if acc < 0:
                good = False
                break
            partial.append(acc)
        if good:
            members.add(tuple(partial))
    mem = tuple(sorted(members))
    p = quad_form(kp)
    assert all(quad_form(m) == p for m in mem), "P not constant on orbit class"
    return OrbitClass(mem[0], mem)


def shell_points(r: int, p: int) -> List[Tuple[int, ...]]:
    """All kappa' in Z_+^r with P(kappa') = p."""
    if p == 0:
        return [(0,) * r]
    bound = int((2 * p) ** 0.5 + 1) * ((r + 1) // 2) + 1
    return [
        pt
        for pt in itertools.product(range(bound + 1), repeat=r)
        if quad_form(pt) == p
    ]


def orbit_classes(r: int, p: int) -> List[OrbitClass]:
    """The orbit classes partitioning the shell P = p."""
    seen: Dict[Tuple[int, ...], OrbitClass] = {}
    covered = set()
    for pt in shell_points(r, p):
        if pt in covered:
            continue
        cls = orbit(r, pt)
        seen[cls.representative] = cls
        covered.update(cls.members)
    return [seen[k] for k in sorted(seen)]


# ---------------------------------------------------------------------------
# High-precision polynomials in t
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HPoly:
    """Polynomial in t with high-precision (or exact) coefficients."""

    coeffs: Tuple

    def __call__(self, t):
        acc = mpfr(0)
        for c in reversed(self.coeffs):
            acc = acc * t + c
        return acc

    def trimmed(self, tol: float) -> "HPoly":
        cs = list(self.coeffs)
        while cs and abs(cs[-1]) < tol:
            cs.pop()
        return HPoly(tuple(cs))

    def close_to(self, other: Poly, tol: float) -> bool:
        n = max(len(self.coeffs), other.degree + 1)
        for k in range(n):
            a = self.coeffs[k] if k < len(self.coeffs) else mpfr(0)
            b = mpfr(other[k])
            if abs(a - b) > tol * max(1.0, abs(float(b))):
                return False
        return True

    def recognized(self, digits: int = 60) -> Optional[Poly]:
        """Exact rational polynomial if every coefficient is recognized."""
        out = []
        for c in self.coeffs:
            q = recognize_rational(c, digits)
            if q is None:
                return None
            out.append(q)
        return Poly(out)


def recognize_rational(x, digits: int = 60, den_bound: int = 10**12) -> Optional[mpq]:
    """Continued-fraction recognition of an HP value as a small rational.

    Returns None when no denominator <= den_bound reproduces x to within
    10^-(digits-10) relative; never rounds silently.
    """
    if isinstance(x, mpq):
        return x
    target = mpfr(x)
    p0, q0, p1, q1 = 0, 1, 1, 0
    v = target
    for _ in range(80):
        ai = int(gmpy2.floor(v))
        p0, p1 = p1, ai * p1 + p0
        q0, q1 = q1, ai * q1 + q0
        if q1 > den_bound:
            return None
        cand = mpq(p1, q1)
        if abs(target - mpfr(cand)) < mpfr(10) ** (-(digits - 10)) * max(
            mpfr(1), abs(target)
        ):
            return cand
        frac = v - ai
        if frac == 0:
            return None
        v = 1 / frac
    return None


# ---------------------------------------------------------------------------
# Shared limit engine
# ---------------------------------------------------------------------------
#
# Variable layout: nv = r + 1 series variables, index i < r is eps_{i+1}
# (innermost limit first), index r is xi (outermost).


def _x_coeff(i: int) -> int:
    """xi-coefficient of x_i in the special pattern (xi, xi, 2xi, 2xi, ...)."""
    return (i + 1) // 2


def _nu_forms(r: int, rho: Sequence[int], scales: Sequence) -> List[Tuple]:
    """Linear forms (const, coeff-tuple over (eps_1..eps_r, xi)) of the
    increments nu_1..nu_{r+1} of nu' = x - eps + rho'.

    scales multiplies eps_i (used by the rescaling-invariance check; the
    iterated limit must not depend on them).
    """
    nv = r + 1
    forms = []
    prev_rho, prev_x = 0, 0
    for i in range(1, r + 1):
        coeffs = [mpq(0)] * nv
        coeffs[i - 1] = -scales[i - 1]
        if i >= 2:
            coeffs[i - 2] = scales[i - 2]
        coeffs[r] = mpq(_x_coeff(i) - prev_x)
        forms.append((rho[i - 1] - prev_rho, tuple(coeffs)))
        prev_rho, prev_x = rho[i - 1], _x_coeff(i)
    coeffs = [mpq(0)] * nv
    coeffs[r - 1] = scales[r - 1]
    coeffs[r] = mpq(-_x_coeff(r))
    forms.append((-prev_rho, tuple(coeffs)))
    return forms


def _gamma_args(r: int, nus: List[Tuple]) -> List[Tuple]:
    """Arguments xi - nu_i and xi - nu_i - nu_j as (const, coeff-tuple)."""
    nv = r + 1
    unit_xi = tuple(mpq(1) if k == r else mpq(0) for k in range(nv))
    args = []
    for con, coeffs in nus:
        args.append((-con, tuple(unit_xi[k] - coeffs[k] for k in range(nv))))
    for i in range(r + 1):
        for j in range(i + 1, r + 1):
            ci, ai = nus[i]
            cj, aj = nus[j]
            args.append(
                (-(ci + cj), tuple(unit_xi[k] - ai[k] - aj[k] for k in range(nv)))
            )
    return args


def _h_factors(ring: Ring, nus: List[Tuple]) -> List[Series]:
    out = []
    n = len(nus)
    for i in range(n):
        for j in range(i + 1, n):
            ci, ai = nus[i]
            cj, aj = nus[j]
            out.append(ring.form(mpq(ci - cj), tuple(x - y for x, y in zip(ai, aj))))
    return out


def _delta_p_series(ring: Ring, r: int, rho: Sequence[int], scales, caps) -> Series:
    """P(nu') - P(rho') with nu' = rho' + delta, delta_i = x_i - eps_i:
    the bilinear cross term B(rho', delta) plus P(delta)."""
    nv = r + 1
    deltas = []
    for i in range(r):
        coeffs = [mpq(0)] * nv
        coeffs[i] = -scales[i]
        coeffs[r] = mpq(_x_coeff(i + 1))
        deltas.append(ring.form(0, tuple(coeffs)))
    acc: Series = {}
    for i in range(r):
        coef = 2 * rho[i]
        if i > 0:
            coef -= rho[i - 1]
        if i < r - 1:
            coef -= rho[i + 1]
        if coef:
            acc = Ring.add(acc, Ring.scale(deltas[i], mpq(coef)))
    for i in range(r):
        acc = Ring.add(acc, ring.mul(deltas[i], deltas[i], caps))
        if i < r - 1:
            acc = Ring.add(
                acc, Ring.scale(ring.mul(deltas[i], deltas[i + 1], caps), mpq(-1))
            )
    return acc


def _leading_var(coeffs: Sequence) -> int:
    """Index of the dominant variable of a linear form: the latest (largest)
    variable present, since eps_1 << ... << eps_r << xi."""
    for k in range(len(coeffs) - 1, -1, -1):
        if coeffs[k]:
            return k
    raise LimitError("linear form with no variable part")


POLE_TOTAL_CAP = 2  # total-degree slack kept above the answer cell


class _MemberChain:
    """Per-member state for the t-degree iteration."""

    __slots__ = ("ring", "series", "ndp", "caps")

    def __init__(self, ring: Ring, series: Series, dp: Series, caps):
        self.ring = ring
        self.series = series
        self.ndp = Ring.scale(dp, mpq(-1))
        self.caps = caps

    def advance(self, d: int):
        self.series = Ring.scale(
            self.ring.mul(self.series, self.ndp, self.caps, POLE_TOTAL_CAP), mpq(1, d)
        )


def _run_limit(r, members, factor_builder, ring: Ring, max_tdeg: int = 64):
    """Common driver.

    factor_builder(rho) returns (factors, dp) where the factors already
    include the regularizer prod_i eps_i, so the answer is the all-zero cell
    and residual poles are the lex-negative cells.  Returns (t-coefficients,
    residual, norm).
    """
    nv = r + 1
    caps = (2,) * nv
    chains = []
    for rho in sorted(members):
        factors, dp = factor_builder(rho)
        series = ring.product(factors, caps, POLE_TOTAL_CAP)
        chains.append(_MemberChain(ring, series, dp, caps))
    zero_cell = ring.bias
    coeffs: List = []
    residual = mpfr(0)
    norm = mpfr(0)
    for d in range(max_tdeg + 1):
        total: Series = {}
        alive = False
        for ch in chains:
            if ch.series:
                alive = True
                total = Ring.add(total, ch.series)
        if not alive:
            break
        val = total.get(zero_cell, mpq(0))
        coeffs.append(val)
        norm = max(norm, abs(mpfr(val)))
        for e, v in total.items():
            if ring.lex_negative(e):
                residual = max(residual, abs(mpfr(v)))
            else:
                norm = max(norm, abs(mpfr(v)))
        for ch in chains:
            if ch.series:
                ch.advance(d + 1)
    else:
        raise LimitError("t-degree iteration did not terminate")
    return coeffs, residual, norm


# ---------------------------------------------------------------------------
# Infinite-start class coefficients
# ---------------------------------------------------------------------------


def _infinite_factor_builder(ring: Ring, r: int, ctx: GammaContext, scales, slack: int):
    nv = r + 1

    def build(rho: Tuple[int, ...]):
        nus = _nu_forms(r, rho, scales)
        args = _gamma_args(r, nus)
        # analytic minimum total degrees: total degree is conserved by the
        # eps/xi pole trades, so these exactly bound which factor cells can
        # reach the answer window (total <= POLE_TOTAL_CAP)
        n_singular = sum(1 for con, _ in args if con <= 0)
        h_zero = sum(
            1
            for i in range(r + 1)
            for j in range(i + 1, r + 1)
            if nus[i][0] == nus[j][0]
        )
        total_min = r + 1 + h_zero - n_singular
        depth = [0] * nv
        for con, coeffs in args:
            if con <= 0:
                depth[_leading_var(coeffs)] += 1
        gen_caps = tuple(2 + depth[k] + slack for k in range(nv))

        def allow(own_min: int) -> int:
            return POLE_TOTAL_CAP + slack - 2 - (total_min - own_min)

        factors: List[Series] = list(_h_factors(ring, nus))
        # the regularizer prod eps_i (with the rescaling constants)
        mono = mpq(1)
        for sc in scales:
            mono *= sc
        factors.append(ring.monomial(mono, tuple([1] * r + [0])))
        # 1/Gamma(x_{r+1}) = xc*xi / Gamma(1 + xc*xi)
        xc = _x_coeff(r + 1)
        xi_form = tuple(mpq(xc) if k == r else mpq(0) for k in range(nv))
        g1 = ring.gamma_form(ctx, 1, xi_form, gen_caps, allow(0))
        factors.append(ring.monomial(mpq(xc), tuple([0] * r + [1])))
        factors.append(ring.inv(g1, gen_caps, allow(0)))
        for con, coeffs in args:
            own = -1 if con <= 0 else 0
            factors.append(ring.gamma_form(ctx, int(con), coeffs, gen_caps, allow(own)))
        dp = _delta_p_series(ring, r, rho, scales, gen_caps)
        return factors, dp

    return build


def limit_coeff(
    r: int,
    kappa_prime: Sequence[int],
    order: Optional[int] = None,
    precision: int = 60,
    check_rescaling: bool = True,
) -> HPoly:
    """The class coefficient c_{kappa'}(t) as a polynomial in t.

    Asserts that residual poles vanish to the precision-scaled tolerance and
    (by default) that rescaling each inner variable by a positive rational
    leaves the answer unchanged, which the iterated limit must satisfy.
    """
    if order is None:
        order = r + 4
    slack = max(2, order - r)
    ctx = GammaContext(precision)
    cls = orbit(r, kappa_prime)
    tol = ctx.tolerance()

    def run(scales):
        builder = _infinite_factor_builder(r, ctx, scales, slack)
        with gmpy2.context(precision=ctx.bits):
            return _run_limit(r, cls.members, builder)

    coeffs, residual, norm = run((mpq(1),) * r)
    scale = max(1.0, float(norm))
    if float(residual) > tol * scale:
        raise LimitError(
            f"residual pole {float(residual):.3e} exceeds tolerance for class "
            f"{cls.representative}"
        )
    if check_rescaling:
        alt = tuple(mpq(2 + i, 2) for i in range(r))
        coeffs2, residual2, _ = run(alt)
        if float(residual2) > tol * scale:
            raise LimitError("residual pole under rescaled inner variables")
        for k in range(max(len(coeffs), len(coeffs2))):
            a = mpfr(coeffs[k]) if k < len(coeffs) else mpfr(0)
            b = mpfr(coeffs2[k]) if k < len(coeffs2) else mpfr(0)
            if abs(a - b) > tol * scale:
                raise LimitError("limit not invariant under variable rescaling")
    return HPoly(tuple(mpfr(v) for v in coeffs)).trimmed(tol * scale)


def limit_cp(
    r: int,
    p: int,
    order: Optional[int] = None,
    precision: int = 60,
    check_rescaling: bool = False,
) -> HPoly:
    """c_p(t) = sum over orbit classes with P = p of the class coefficients."""
    total: List = []
    for cls in orbit_classes(r, p):
        hp = limit_coeff(
            r, cls.representative, order, precision, check_rescaling=check_rescaling
        )
        for k, v in enumerate(hp.coeffs):
            if k < len(total):
                total[k] += v
            else:
                total.append(v)
    ctx = GammaContext(precision)
    return HPoly(tuple(total)).trimmed(ctx.tolerance())


# ---------------------------------------------------------------------------
# Finite-start CDF (exact)
# ---------------------------------------------------------------------------


def _finite_factor_builder(r: int, n: int, m: int, slack: int):
    nv = r + 1
    fac = gmpy2.fac
    pref = mpq(fac(n)) ** (r + 1) * mpq(fac(m)) ** (r * (r + 1) // 2)
    scales = (mpq(1),) * r

    def build(rho: Tuple[int, ...]):
        nus = _nu_forms(r, rho, scales)
        args = _gamma_args(r, nus)
        singles, pairs = args[: r + 1], args[r + 1 :]
        depth = [0] * nv
        n_singular = 0
        for (con, coeffs), reach in [(f, n) for f in singles] + [(f, m) for f in pairs]:
            if -reach <= con <= 0:
                depth[_leading_var(coeffs)] += 1
                n_singular += 1
        h_zero = sum(
            1
            for i in range(r + 1)
            for j in range(i + 1, r + 1)
            if nus[i][0] == nus[j][0]
        )
        total_min = r + 1 + h_zero - n_singular
        gen_caps = tuple(2 + depth[k] + slack for k in range(nv))

        def allow(own_min: int) -> int:
            return POLE_TOTAL_CAP + slack - 2 - (total_min - own_min)

        factors: List[Series] = list(_h_factors(nus))
        factors.append(s_monomial(pref * _x_coeff(r + 1), tuple([0] * r + [1])))
        factors.append(s_monomial(mpq(1), tuple([1] * r + [0])))
        # 1/(arg)_{n+1} = prod_{j=0}^{n} 1/(arg + j), likewise m for the pairs
        for con, coeffs in singles:
            for j in range(n + 1):
                own = -1 if con + j == 0 else 0
                factors.append(s_inv_form(mpq(con + j), coeffs, gen_caps, allow(own)))
        for con, coeffs in pairs:
            for j in range(m + 1):
                own = -1 if con + j == 0 else 0
                factors.append(s_inv_form(mpq(con + j), coeffs, gen_caps, allow(own)))
        dp = _delta_p_series(r, rho, scales, gen_caps)
        return factors, dp

    return build


def finite_start_cdf(
    r: int, n: int, m: int, slack: int = 2, extra_shells: int = 2
) -> ExpPoly:
    """F at the special start (n, m, n+m, 2m, ...) via the exact limit engine.

    Sums the shell contribution for every p up to the largest P value on the
    lower orthant of the start (the largest rate the exact CDF can contain),
    plus extra_shells beyond it, which are asserted to vanish.  Residual
    poles must cancel exactly; raises LimitError otherwise.
    """
    if n < 0 or m < 0:
        raise ValueError("n, m must be nonnegative integers")
    from .coeffs import special_args

    start = tuple(int(x) for x in special_args(r, n, m)[:r])
    pmax = 0
    for pt in itertools.product(*[range(x + 1) for x in start]):
        pmax = max(pmax, quad_form(pt))
    builder = _finite_factor_builder(r, n, m, slack)
    terms: Dict[mpq, Poly] = {}
    for p in range(pmax + extra_shells + 1):
        pts = shell_points(r, p)
        if not pts:
            continue
        coeffs, residual, _ = _run_limit(r, pts, builder)
        if residual != 0:
            raise LimitError(f"residual pole at shell p={p} did not cancel exactly")
        poly = Poly(coeffs)
        if poly:
            if p > pmax:
                raise LimitError(f"unexpected nonzero shell beyond pmax: p={p}")
            terms[mpq(p)] = poly
    return ExpPoly(terms)


# ---------------------------------------------------------------------------
# Rank-2 transition kernel at general integer points (exact)
# ---------------------------------------------------------------------------


def r2_kernel(
    nprime: Tuple[int, int], delta: Tuple[int, int], slack: int = 2
) -> ExpPoly:
    """p_t((n'+n, m'+m), (n', m')) for the rank-2 chain, exactly.

    Expands the double-sum kernel around (x, y) = (n', m') in the iterated
    ring x-deviation << y-deviation and removes the confluent poles; the
    result is an exponential polynomial whose rates are the values of P at
    the visited points (powers of log q become powers of t).
    """
    np_, mp_ = (int(x) for x in nprime)
    n, m = (int(x) for x in delta)
    if min(np_, mp_, n, m) < 0:
        raise ValueError("all four entries must be nonnegative integers")
    fac = gmpy2.fac
    pref = mpq(fac(np_ + n)) ** 3 * mpq(fac(mp_ + m)) ** 3
    pref /= mpq(fac(np_)) ** 3 * mpq(fac(mp_)) ** 3
    nv = 2  # (ex, ey): x = n' + ex, y = m' + ey, ex << ey

    groups: Dict[int, List[Tuple[int, int]]] = {}
    for k in range(n + 1):
        for l in range(m + 1):
            groups.setdefault(quad_form((np_ + k, mp_ + l)), []).append((k, l))

    terms: Dict[mpq, Poly] = {}
    for rate, pts in sorted(groups.items()):
        chains = []
        for k, l in pts:
            lin: List[Tuple[mpq, Tuple[mpq, mpq]]] = []
            lin.append((mpq(np_ + mp_ + k + l), (mpq(1), mpq(1))))
            for a in range(n + 1):
                if a == k:
                    continue
                lin.append((mpq(2 * np_ - mp_ + a + k - l), (mpq(2), mpq(-1))))
                lin.append((mpq(np_ + mp_ + a + l), (mpq(1), mpq(1))))
            for b in range(m + 1):
                if b == l:
                    continue
                lin.append((mpq(2 * mp_ - np_ + b + l - k), (mpq(-1), mpq(2))))
                lin.append((mpq(np_ + mp_ + b + k), (mpq(1), mpq(1))))
            depth = sum(1 for con, _ in lin if con == 0)
            gen_caps = (depth + slack, depth + slack)
            total_allow = POLE_TOTAL_CAP + depth
            scal = pref
            for a in range(n + 1):
                if a != k:
                    scal /= a - k
            for b in range(m + 1):
                if b != l:
                    scal /= b - l
            factors: List[Series] = [s_form(mpq(np_ + mp_), (mpq(1), mpq(1)))]
            factors.append(s_monomial(scal, (0, 0)))
            for con, coeffs in lin:
                factors.append(s_inv_form(con, coeffs, gen_caps, total_allow))
            # DP = P(x+k, y+l) - P(n'+k, m'+l), quadratic in (ex, ey)
            u1, u2 = np_ + k, mp_ + l
            dx = s_form(0, (mpq(1), mpq(0)))
            dy = s_form(0, (mpq(0), mpq(1)))
            dp = s_scale(dx, mpq(2 * u1 - u2))
            dp = s_add(dp, s_scale(dy, mpq(2 * u2 - u1)))
            dp = s_add(dp, s_mul(dx, dx, gen_caps))
            dp = s_add(dp, s_mul(dy, dy, gen_caps))
            dp = s_add(dp, s_scale(s_mul(dx, dy, gen_caps), mpq(-1)))
            series = product_with_caps(factors, (1, 1), POLE_TOTAL_CAP)
            chains.append(_MemberChain(series, dp, (1, 1)))
        coeffs = []
        for d in range(65):
            total: Series = {}
            alive = False
            for ch in chains:
                if ch.series:
                    alive = True
                    total = s_add(total, ch.series)
            if not alive:
                break
            for e, v in total.items():
                if lex_negative(e) and v != 0:
                    raise LimitError("confluent pole did not cancel exactly")
            coeffs.append(total.get((0, 0), mpq(0)))
            for ch in chains:
                if ch.series:
                    ch.advance(d + 1)
        else:
            raise LimitError("t-degree iteration did not terminate")
        poly = Poly(coeffs)
        if poly:
            terms[mpq(rate)] = terms.get(mpq(rate), Poly()) + poly
    return ExpPoly(terms)


# ---------------------------------------------------------------------------
# Mellin-transform checks (r <= 2)
# ---------------------------------------------------------------------------


def _elementary(nu: Sequence, l: int):
    acc = 0
    for comb in itertools.combinations(nu, l):
        p = 1
        for x in comb:
            p = p * x
        acc = acc + p
    return acc if l else 1


def mellin_check(r: int, nu: Sequence, s: Sequence, precision: int = 60) -> dict:
    """Difference-equation and factorization residuals of the explicit
    rank-1/rank-2 Mellin transforms at high precision.

    nu sums to zero; s is the evaluation point (length r).  Raises on pole
    proximity.  Residuals are relative and should sit near 10^-(precision-10).
    """
    if r not in (1, 2):
        raise ValueError("explicit Mellin transforms are available for r <= 2")
    bits = int(precision * 3.33) + 48
    from .operators import apply_operator

    with gmpy2.context(precision=bits):
        nuv = [mpfr(as_q(x)) if isinstance(x, str) else mpfr(x) for x in nu]
        sv = [mpfr(as_q(x)) if isinstance(x, str) else mpfr(x) for x in s]
        if abs(sum(nuv)) > mpfr(10) ** (-precision + 5):
            raise ValueError("nu must sum to zero")

        def guard(z):
            if abs(z - gmpy2.rint(z)) < mpfr("1e-6") and z < mpfr("0.5"):
                raise LimitError(f"Gamma argument {z} too close to a pole")
            return z

        def gammaf(z):
            return gmpy2.gamma(guard(z))

        if r == 1:

            def M(svec):
                return gammaf(svec[0] + nuv[0]) * gammaf(svec[0] + nuv[1])

        else:

            def M(svec):
                acc = 1 / gammaf(svec[0] + svec[1])
                for x in nuv:
                    acc *= gammaf(svec[0] + x) * gammaf(svec[1] - x)
                return acc

        def Mneg(svec):
            return M(tuple(-x for x in svec))

        base = Mneg(tuple(sv))
        report = {"r": r, "nu": [str(x) for x in nuv], "s": [str(x) for x in sv]}
        worst = mpfr(0)
        for l in range(2, r + 2):
            lhs = apply_operator(r, l, "backward", Mneg, tuple(sv))
            rhs = _elementary(nuv, l) * base
            worst = max(worst, abs(lhs - rhs) / max(mpfr(1), abs(base)))
        report["difference_eq_residual"] = float(worst)

        # factorization at the interleaved s-pattern (s1, s2, s1+s2, ...)
        s1 = sv[0]
        s2 = sv[1] if r == 2 else sv[0] + mpfr("0.7")
        pattern = [s1, s2, s1 + s2]
        lhs = gammaf(pattern[r]) * (M((s1,)) if r == 1 else M((s1, s2)))
        rhs = mpfr(1)
        for x in nuv:
            rhs *= gammaf(s1 + x)
        for i in range(r + 1):
            for j in range(i + 1, r + 1):
                rhs *= gammaf(s2 + nuv[i] + nuv[j])
        report["factorization_residual"] = float(
            abs(lhs - rhs) / max(mpfr(1), abs(rhs))
        )
        return report


# ---------------------------------------------------------------------------
# Bilinear rational identity (exact)
# ---------------------------------------------------------------------------


def bilinear_identity_check(lam: Sequence, mu: Sequence) -> mpq:
    """Exact value of the double rational sum; zero whenever n + m >= 1.

    lam has n+1 entries, mu has m+1; every factor in every term must be
    nonzero (checked up front; degenerate configurations raise ValueError).
    """
    lamq = [as_q(x) for x in lam]
    muq = [as_q(x) for x in mu]
    n, m = len(lamq) - 1, len(muq) - 1
    for k in range(n + 1):
        for l in range(m + 1):
            if lamq[k] + muq[l] == 0:
                raise ValueError("degenerate configuration: lam_k + mu_l = 0")
            for a in range(n + 1):
                if a != k and (
                    lamq[a] == lamq[k]
                    or lamq[a] + lamq[k] - muq[l] == 0
                    or lamq[a] + muq[l] == 0
                ):
                    raise ValueError("degenerate configuration in lambda factors")
            for b in range(m + 1):
                if b != l and (
                    muq[b] == muq[l]
                    or muq[b] + muq[l] - lamq[k] == 0
                    or muq[b] + lamq[k] == 0
                ):
                    raise ValueError("degenerate configuration in mu factors")
    total = mpq(0)
    for k in range(n + 1):
        for l in range(m + 1):
            term = 1 / (lamq[k] + muq[l])
            for a in range(n + 1):
                if a == k:
                    continue
                term /= (
                    (lamq[a] - lamq[k])
                    * (lamq[a] + lamq[k] - muq[l])
                    * (lamq[a] + muq[l])
                )
            for b in range(m + 1):
                if b == l:
                    continue
                term /= (
                    (muq[b] - muq[l])
                    * (muq[b] + muq[l] - lamq[k])
                    * (muq[b] + lamq[k])
                )
            total += term
    return total


def theta_identity(xs: Sequence) -> mpq:
    """sum_i prod_{j != i} 1/(x_j - x_i); zero for N >= 2 distinct points."""
    xq = [as_q(x) for x in xs]
    total = mpq(0)
    for i in range(len(xq)):
        term = mpq(1)
        for j in range(len(xq)):
            if j != i:
                term /= xq[j] - xq[i]
        total += term
    return total
