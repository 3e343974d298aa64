"""Modular arithmetic, exponential sums and Hecke coefficient tables.

Everything that can be exact is exact: tau(n) is a Python int, Hecke
relations are checked on integers, and inverses come from the extended
Euclidean algorithm (non-units raise).
"""

from __future__ import annotations

import cmath
import math
import os
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

try:  # GMP multiplication is far faster for the packed series products
    from gmpy2 import mpz as _big
except ImportError:  # pragma: no cover
    _big = int

__all__ = [
    "NonUnitError",
    "modinv",
    "e",
    "e_frac",
    "mobius",
    "divisors",
    "num_divisors",
    "d3",
    "euler_phi",
    "ramanujan_sum",
    "kloosterman",
    "DirichletCharacter",
    "gauss_twisted_sum",
    "ramanujan_expansion",
    "character_sum_C",
    "character_sum_C_bruteforce",
    "CoefficientTable",
    "build_tau_table",
    "tau_naive",
    "write_tau_cache",
    "read_tau_cache",
    "sym_square_coeffs",
    "sym_square_exact",
    "sym_square_array",
    "gl2_hecke_check",
    "sym_hecke_check",
    "deligne_check",
    "synthetic_hecke_sequence",
    "CongruenceSystem",
    "enumerate_congruences",
    "enumerate_congruences_dual",
    "eps_factor",
    "CACHE_VERSION",
]

CACHE_VERSION = 1
TUPLE_BUDGET = 10 ** 8


class EnumerationBudgetError(RuntimeError):
    pass


class NonUnitError(ZeroDivisionError):
    pass


def modinv(a, m):
    """Inverse of a mod m by extended Euclid; raises NonUnitError."""
    if m <= 0:
        raise ValueError("modulus must be positive")
    if m == 1:
        return 0
    r0, r1 = a % m, m
    s0, s1 = 1, 0
    while r1:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    if r0 != 1:
        raise NonUnitError(f"{a} is not invertible mod {m}")
    return s0 % m


def e_frac(num, den):
    """e(num/den) = exp(2 pi i num/den), reduced mod 1 first."""
    r = num % den
    return cmath.exp(2j * math.pi * r / den)


def e(x):
    if isinstance(x, Fraction):
        return e_frac(x.numerator, x.denominator)
    return cmath.exp(2j * math.pi * x)


@lru_cache(maxsize=None)
def _factor(n):
    n = abs(n)
    out = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return tuple(sorted(out.items()))


def factor(n):
    return dict(_factor(n))


def mobius(n):
    f = _factor(n)
    if any(k > 1 for _, k in f):
        return 0
    return -1 if len(f) % 2 else 1


@lru_cache(maxsize=None)
def divisors(n):
    n = abs(n)
    ds = [1]
    for p, k in _factor(n):
        ds = [d * p ** j for d in ds for j in range(k + 1)]
    return tuple(sorted(ds))


def num_divisors(n):
    out = 1
    for _, k in _factor(n):
        out *= k + 1
    return out


def d3(n):
    out = 1
    for _, k in _factor(n):
        out *= (k + 1) * (k + 2) // 2
    return out


def euler_phi(n):
    out = n
    for p, _ in _factor(n):
        out = out // p * (p - 1)
    return out


def is_prime(n):
    return n >= 2 and _factor(n) == ((n, 1),)


def ramanujan_sum(b, c):
    """c_c(b) = sum_{d | (b,c)} mu(c/d) d."""
    g = math.gcd(b, c)
    return sum(mobius(c // d) * d for d in divisors(g))


def kloosterman(a, b, c):
    """S(a,b;c) by enumeration over units alpha mod c."""
    if c < 1:
        raise ValueError("c must be positive")
    total = 0j
    for alpha in range(c):
        if math.gcd(alpha, c) != 1:
            continue
        total += e_frac(a * alpha + b * modinv(alpha, c), c)
    return total


# --------------------------------------------------------------------------
# characters

@dataclass(frozen=True)
class DirichletCharacter:
    modulus: int
    values: tuple
    label: str = ""

    def __post_init__(self):
        q = self.modulus
        if len(self.values) != q:
            raise ValueError("need one value per residue")
        for a in range(q):
            unit = math.gcd(a, q) == 1
            if not unit and self.values[a] != 0:
                raise ValueError("character must vanish off units")
            if unit and abs(abs(self.values[a]) - 1) > 1e-12:
                raise ValueError("character values on units must have modulus 1")
        if abs(self.values[1 % q] - 1) > 1e-12 and q > 1:
            raise ValueError("chi(1) must be 1")

    def __call__(self, a):
        return self.values[a % self.modulus]

    @property
    def is_trivial(self):
        return all(abs(v - 1) < 1e-12 for v in self.values if v != 0)

    @classmethod
    def trivial(cls, q):
        return cls(q, tuple(1 if math.gcd(a, q) == 1 else 0 for a in range(q)), "trivial")

    @classmethod
    def from_generator(cls, p, r=1):
        """chi(g^j) = e(r j/(p-1)) for a primitive root g mod the prime p."""
        if not is_prime(p):
            raise ValueError("modulus must be prime")
        g = primitive_root(p)
        vals = [0] * p
        x = 1
        for j in range(p - 1):
            vals[x] = e_frac(r * j, p - 1)
            x = x * g % p
        vals[1] = 1
        return cls(p, tuple(vals), f"gen^{r} mod {p}")

    def is_multiplicative(self):
        q = self.modulus
        for a in range(q):
            for b in range(q):
                if abs(self(a * b) - self(a) * self(b)) > 1e-9:
                    return False
        return True


def primitive_root(p):
    if p == 2:
        return 1
    ps = [q for q, _ in _factor(p - 1)]
    for g in range(2, p):
        if all(pow(g, (p - 1) // q, p) != 1 for q in ps):
            return g
    raise ValueError("no primitive root")


# --------------------------------------------------------------------------
# character sums

def gauss_twisted_sum(chi, m, b, P, d_b, beta, n1, b_d, v=1):
    """sum*_{alpha mod bP^v} conj(chi(alpha))^v e(conj(alpha P^(1-v)) m/(bP^v)
    + n1 conj(alpha d_b beta)/(b_d P^v)).

    The inner inverse is taken mod b_d P^v / n1, which is all the second
    phase depends on.
    """
    mod = b * P ** v
    inner = b_d * P ** v
    if inner % n1:
        raise ValueError("n1 must divide b_d P^v")
    inner_mod = inner // n1
    if mod % inner_mod:
        raise ValueError("b_d P^v / n1 must divide b P^v")
    p1 = P ** (1 - v)
    total = 0j
    for alpha in range(mod):
        if math.gcd(alpha, mod) != 1:
            continue
        w = 1 if v == 0 else chi(alpha).conjugate()
        t1 = modinv(alpha * p1, mod) * m
        t2 = modinv(alpha * d_b * beta, inner_mod)
        total += w * e_frac(t1, mod) * e_frac(t2, inner_mod)
    return total


def ramanujan_expansion(x, q):
    """sum*_{alpha mod q} e(alpha x/q) via sum_{u1 u2 = q} mu(u1) u2 [u2 | x]."""
    return sum(mobius(q // u2) * u2 for u2 in divisors(q) if x % u2 == 0)


def _check_C_args(b, P, v, d, n1):
    if v not in (0, 1):
        raise ValueError("v must be 0 or 1")
    g = math.gcd(b, d)
    b_d = b // g
    d_b = d // g
    inner = b_d * P ** v
    if inner % n1:
        raise ValueError("n1 must divide b_d P^v")
    return d_b, b_d, inner // n1


def character_sum_C(m, n_sign, n, b, P, v, d, n1, chi=None):
    """The sum over alpha mod bP^v of conj(chi(alpha))^v e(conj(alpha P^(1-v)) m / bP^v)
    times S(conj(alpha d_b), +-n; b_d P^v / n1)."""
    d_b, b_d, kmod = _check_C_args(b, P, v, d, n1)
    mod = b * P ** v
    p1 = P ** (1 - v)
    kl = {}
    total = 0j
    for alpha in range(mod):
        if math.gcd(alpha, mod) != 1:
            continue
        w = 1 if (v == 0 or chi is None) else chi(alpha).conjugate()
        first = modinv(alpha * p1, mod) * m
        a_in = modinv(alpha * d_b, kmod) if kmod > 1 else 0
        if a_in not in kl:
            kl[a_in] = kloosterman(a_in, n_sign * n, kmod)
        total += w * e_frac(first, mod) * kl[a_in]
    return total


def character_sum_C_bruteforce(m, n_sign, n, b, P, v, d, n1, chi=None):
    """Same sum, opened into a double loop over (beta, alpha) with beta outermost."""
    d_b, b_d, kmod = _check_C_args(b, P, v, d, n1)
    mod = b * P ** v
    total = 0j
    for beta in range(kmod):
        if math.gcd(beta, kmod) != 1:
            continue
        for alpha in range(mod):
            if math.gcd(alpha, mod) != 1:
                continue
            w = 1 if (v == 0 or chi is None) else chi(alpha).conjugate()
            x = modinv(alpha, mod)
            if v == 0:
                x = x * modinv(P, mod) % mod
            # S(a, c; q) = sum_beta e((a beta^-1 + c beta)/q) after beta -> beta^-1
            a_in = modinv(alpha * d_b, kmod) if kmod > 1 else 0
            binv = modinv(beta, kmod) if kmod > 1 else 0
            phase = Fraction(x * m, mod) + Fraction(a_in * beta + n_sign * n * binv, kmod)
            total += w * e(phase)
    return total


# --------------------------------------------------------------------------
# tau and coefficient tables

def _pentagonal(n_max):
    """Coefficients of prod_{n>=1} (1 - q^n) up to q^n_max."""
    c = [0] * (n_max + 1)
    k = 0
    while True:
        made = False
        for kk in ((k, ) if k == 0 else (k, -k)):
            g = kk * (3 * kk - 1) // 2
            if g <= n_max:
                c[g] += -1 if kk % 2 else 1
                made = True
        if not made and k > 0:
            break
        k += 1
    return c


def _pack(coeffs, K):
    # sum a_i 2^(K i), assembled from byte strings of the two sign parts
    nb = K // 8
    pos = b"".join(max(a, 0).to_bytes(nb, "little") for a in coeffs)
    neg = b"".join(max(-a, 0).to_bytes(nb, "little") for a in coeffs)
    return int.from_bytes(pos, "little") - int.from_bytes(neg, "little")


def _unpack(x, K, n):
    """Signed base-2^K digits of x, lowest n of them."""
    half = 1 << (K - 1)
    nbytes = K // 8
    # the low K*n bits of a negative x are its two's complement window
    raw = (x & ((1 << (K * n)) - 1)).to_bytes(nbytes * n, "little")
    out = []
    carry = 0
    for i in range(n):
        r = int.from_bytes(raw[i * nbytes:(i + 1) * nbytes], "little") + carry
        carry = 0
        if r >= half:
            r -= 1 << K
            carry = 1
        out.append(r)
    return out


def _mul_trunc(a, b, n, K):
    x = int(_big(_pack(a, K)) * _big(_pack(b, K)))
    return _unpack(x, K, n)


def build_tau_table(n_max):
    """tau(1..n_max) from q prod (1-q^n)^24 by big-integer series products."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    n = n_max  # coefficients of E^24 needed: q^0 .. q^(n_max-1)
    K = 8 * math.ceil((40 + 6 * math.log2(n + 2)) / 8)
    E = _pentagonal(n)[:n]
    E2 = _mul_trunc(E, E, n, K)
    E4 = _mul_trunc(E2, E2, n, K)
    E8 = _mul_trunc(E4, E4, n, K)
    E16 = _mul_trunc(E8, E8, n, K)
    E24 = _mul_trunc(E16, E8, n, K)
    limit = 1 << (K - 2)
    if any(abs(c) >= limit for c in E24):
        raise OverflowError("coefficient exceeded the packing width")
    tau = [0] + E24  # tau[n] is the coefficient of q^n
    return CoefficientTable(tuple(tau), n_max)


def tau_naive(n_max):
    """Reference tau by the recurrence n a_n = -24 sum sigma(k) a_{n-k}."""
    sigma = [0] * (n_max + 1)
    for d in range(1, n_max + 1):
        for mlt in range(d, n_max + 1, d):
            sigma[mlt] += d
    a = [0] * n_max
    a[0] = 1
    for n in range(1, n_max):
        s = 0
        for k in range(1, n + 1):
            s += sigma[k] * a[n - k]
        a[n] = -24 * s // n
    return [0] + a


@dataclass
class CoefficientTable:
    tau: tuple
    n_max: int
    _a_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.tau[1] != 1:
            raise ValueError("tau(1) must be 1")

    def tau_at(self, n, extend=False):
        """tau(n); with extend=True, n beyond the table is reached through
        multiplicativity and tau(p^(k+1)) = tau(p)tau(p^k) - p^11 tau(p^(k-1)),
        provided every prime factor of n lies in the table."""
        if 1 <= n <= self.n_max:
            return self.tau[n]
        if not extend or n < 1:
            raise IndexError(f"n={n} outside table range 1..{self.n_max}")
        out = 1
        for p, k in _factor(n):
            if p > self.n_max:
                raise IndexError(f"prime {p} of n={n} outside table range")
            out *= _tau_prime_power(self, p, k)
        return out

    def lambda_f(self, n):
        return self.tau_at(n) / n ** 5.5

    @property
    def lambda_list(self):
        return [0.0] + [self.tau[n] / n ** 5.5 for n in range(1, self.n_max + 1)]

    def a_F(self, m, n, convention="sym2"):
        key = (abs(m), abs(n), convention)
        if key not in self._a_cache:
            self._a_cache[key] = sym_square_coeffs(self, m, n, convention)
        return self._a_cache[key]


def _tau_prime_power(table, p, k):
    prev, cur = 1, table.tau[p]
    for _ in range(k - 1):
        prev, cur = cur, table.tau[p] * cur - p ** 11 * prev
    return cur if k >= 1 else 1


def write_tau_cache(path, table):
    """Write "n,tau(n)" lines.  The version lives in the file name."""
    with open(path, "w") as fh:
        for n in range(1, table.n_max + 1):
            fh.write(f"{n},{table.tau[n]}\n")


def read_tau_cache(path):
    tau = [0]
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            n, t = line.split(",")
            if int(n) != i:
                raise ValueError(f"cache line {i} is out of order")
            tau.append(int(t))
    return CoefficientTable(tuple(tau), len(tau) - 1)


def cache_path(directory):
    return os.path.join(directory, f"tau_cache.v{CACHE_VERSION}.txt")


# A_F coefficients.  "literal" is the divisor sum sum_{m l = n} lambda(m^2);
# "sym2" is the Dirichlet series of zeta(2s) sum lambda(n^2) n^-s, i.e.
# sum_{m^2 l = n} lambda(l^2).  Only "sym2" satisfies the GL(3) Voronoi
# formula numerically, so it is the default.

def _lam2_exact(table, m):
    # lambda(m^2) = tau(m^2) / m^11 as a Fraction
    return Fraction(table.tau_at(m * m, extend=True), m ** 11)


def sym_square_exact(table, m, n, convention="sym2"):
    m, n = abs(m), abs(n)
    if m == 0 or n == 0:
        return Fraction(0)
    if m == 1 or n == 1:
        r = max(m, n)
        if convention == "literal":
            return sum((_lam2_exact(table, a) for a in divisors(r)), Fraction(0))
        if convention == "sym2":
            return sum((_lam2_exact(table, r // (s * s)) for s in divisors(r)
                        if r % (s * s) == 0), Fraction(0))
        raise ValueError(f"unknown convention {convention}")
    out = Fraction(0)
    for dd in divisors(math.gcd(m, n)):
        mu = mobius(dd)
        if mu:
            out += mu * sym_square_exact(table, m // dd, 1, convention) * \
                sym_square_exact(table, 1, n // dd, convention)
    return out


def sym_square_array(table, n_max, convention="sym2"):
    """Floats A_F(1, n) for n = 0..n_max (index 0 unused) by multiplicativity."""
    if n_max > table.n_max:
        raise IndexError(f"table holds tau up to {table.n_max}, need {n_max}")
    if convention not in ("literal", "sym2"):
        raise ValueError(f"unknown convention {convention}")
    spf = list(range(n_max + 1))
    for p in range(2, int(n_max ** 0.5) + 1):
        if spf[p] == p:
            for m in range(p * p, n_max + 1, p):
                if spf[m] == m:
                    spf[m] = p
    out = [0.0] * (n_max + 1)
    if n_max >= 1:
        out[1] = 1.0
    for n in range(2, n_max + 1):
        p = spf[n]
        m, e = n, 0
        while m % p == 0:
            m //= p
            e += 1
        if m > 1:
            out[n] = out[m] * out[n // m]
            continue
        # n = p^e: lambda(p^j) by the Hecke recursion
        l1 = table.tau[p] / p ** 5.5
        lam = [1.0, l1]
        for _ in range(2 * e - 1):
            lam.append(l1 * lam[-1] - lam[-2])
        if convention == "literal":
            out[n] = sum(lam[2 * j] for j in range(e + 1))
        else:
            out[n] = sum(lam[2 * (e - 2 * s)] for s in range(e // 2 + 1))
    return out


def sym_square_coeffs(table, m, n, convention="sym2"):
    """A_F(m,n) from the table.  Raises IndexError when out of range."""
    return float(sym_square_exact(table, m, n, convention))


def gl2_hecke_check(table, m, n, chi=None, rational=True):
    """|lambda(mn) - sum_{d|(m,n)} mu(d) chi(d) lambda(m/d) lambda(n/d)|.

    In rational mode both sides are scaled by (mn)^(11/2), which turns the
    identity into one between integers.
    """
    if chi is not None and not chi.is_trivial:
        raise ValueError("level-1 check needs the trivial character")
    g = math.gcd(m, n)
    if rational:
        lhs = table.tau_at(m * n)
        rhs = sum(mobius(dd) * dd ** 11 * table.tau_at(m // dd) * table.tau_at(n // dd)
                  for dd in divisors(g))
        return abs(lhs - rhs)
    lhs = table.lambda_f(m * n)
    rhs = sum(mobius(dd) * table.lambda_f(m // dd) * table.lambda_f(n // dd) for dd in divisors(g))
    return abs(lhs - rhs)


def sym_hecke_check(table, m, n, convention="sym2"):
    """Exact residual of A(m,1) A(1,n) = sum_{d|(m,n)} A(m/d, n/d), with the
    left-hand A(m,n) built from the Moebius form of the Hecke relation."""
    lhs = sym_square_exact(table, m, 1, convention) * sym_square_exact(table, 1, n, convention)
    rhs = Fraction(0)
    for dd in divisors(math.gcd(m, n)):
        rhs += sym_square_exact(table, m // dd, n // dd, convention)
    return abs(lhs - rhs)


@dataclass
class DeligneReport:
    worst_ratio: float
    worst_n: int
    sym_worst_ratio: float
    sym_worst_n: int


def deligne_check(table, n_max=None, sym_n_max=None, convention="sym2"):
    """max |lambda_f(n)|/d(n), plus max |A_F(1,n)|/d3(n) where the table allows."""
    n_max = table.n_max if n_max is None else min(n_max, table.n_max)
    worst, wn = 0.0, 1
    for n in range(1, n_max + 1):
        r = abs(table.tau[n]) / n ** 5.5 / num_divisors(n)
        if r > worst:
            worst, wn = r, n
    lim = math.isqrt(table.n_max)
    sym_n_max = lim if sym_n_max is None else min(sym_n_max, lim)
    sworst, sn = 0.0, 1
    for n in range(1, sym_n_max + 1):
        r = abs(sym_square_coeffs(table, 1, n, convention)) / d3(n)
        if r > sworst:
            sworst, sn = r, n
    return DeligneReport(worst, wn, sworst, sn)


def eps_factor(x):
    """Stand-in for x^eps in measured-constant reports."""
    return math.log(2 + x) ** 10


def synthetic_hecke_sequence(P, chi, n_max, seed=0):
    """Multiplicative lambda with lambda(m)lambda(n) = sum chi(d) lambda(mn/d^2).

    For p != P the Satake pair (a, b) has |a| = |b| = 1 and ab = chi(p);
    at p = P the sequence is completely multiplicative with |lambda(P)|^2 = 1/P.
    """
    rng = random.Random(seed)
    lam = [0j] * (n_max + 1)
    lam[1] = 1 + 0j
    primes = [p for p in range(2, n_max + 1) if is_prime(p)]
    prime_pows = {}
    for p in primes:
        seq = [1 + 0j]
        if p == P:
            lp = cmath.exp(2j * math.pi * rng.random()) / math.sqrt(P)
            pk = p
            while pk <= n_max:
                seq.append(seq[-1] * lp)
                pk *= p
        else:
            theta = 2 * math.pi * rng.random()
            c = chi(p) if chi is not None else 1
            half = cmath.sqrt(c)
            a = half * cmath.exp(1j * theta)
            bb = half * cmath.exp(-1j * theta)
            pk, k = p, 1
            while pk <= n_max:
                seq.append(sum(a ** i * bb ** (k - i) for i in range(k + 1)))
                pk *= p
                k += 1
        prime_pows[p] = seq
    for n in range(2, n_max + 1):
        val = 1 + 0j
        for p, k in _factor(n):
            val *= prime_pows[p][k]
        lam[n] = val
    return lam


# --------------------------------------------------------------------------
# congruence systems

@dataclass(frozen=True)
class CongruenceSystem:
    b1: int
    b2: int
    d: int
    P: int
    v: int
    n1: int
    n2: int
    u1: int
    u2: int
    m1_range: tuple
    m2_range: tuple
    n_range: tuple
    sign: int = 1
    m_sign: int = 1
    n_only: bool = False

    def __post_init__(self):
        if self.v not in (0, 1):
            raise ValueError("v must be 0 or 1")
        if self.X1 * self.n1 != self.b1d * self.P ** self.v:
            raise ValueError("n1 must divide b_{1,d} P^v")
        if self.X2 * self.n2 != self.b2d * self.P ** self.v:
            raise ValueError("n2 must divide b_{2,d} P^v")
        if not self.n_only:
            if (self.b1 * self.P ** self.v) % self.u1 or (self.b2 * self.P ** self.v) % self.u2:
                raise ValueError("u_j must divide b_j P^v")

    @property
    def g1(self):
        return math.gcd(self.b1, self.d)

    @property
    def g2(self):
        return math.gcd(self.b2, self.d)

    @property
    def b1d(self):
        return self.b1 // self.g1

    @property
    def b2d(self):
        return self.b2 // self.g2

    @property
    def X1(self):
        return self.b1d * self.P ** self.v // self.n1

    @property
    def X2(self):
        return self.b2d * self.P ** self.v // self.n2

    def units(self, j):
        X = self.X1 if j == 1 else self.X2
        return [x for x in range(X) if math.gcd(x, X) == 1]

    def m_residue(self, j, beta):
        """Residue class of m_j mod u_j forced by beta_j."""
        b, g, n, u, X = ((self.b1, self.g1, self.n1, self.u1, self.X1) if j == 1
                         else (self.b2, self.g2, self.n2, self.u2, self.X2))
        d_b = self.d // g
        inv = modinv(d_b * beta, X) if X > 1 else 0
        return self.m_sign * inv * self.P ** (1 - self.v) * n * g % u

    def n_residue(self, beta1, beta2):
        mod = self.X1 * self.X2
        r = -self.sign * beta1 * self.X2 + self.sign * beta2 * self.X1
        return r % mod, mod

    def band_value(self, m1, m2):
        return abs(self.b1 * m1 * self.g2 ** 3 * self.n2 ** 2 - self.b2 * m2 * self.g1 ** 3 * self.n1 ** 2)


def _in_band(val, H):
    if H is None:
        return True
    if H == 0:
        return val == 0
    return H <= val <= 2 * H


def enumerate_congruences(sys, H=None, max_witnesses=20, budget=TUPLE_BUDGET):
    """Exhaustive count of (beta1, beta2, m1, m2, n) solving the system.

    H=None drops the band; H=0 asks for exact equality; H>0 asks for
    H <= |b1 m1 (b2,d)^3 n2^2 - b2 m2 (b1,d)^3 n1^2| <= 2H.
    """
    U1, U2 = sys.units(1), sys.units(2)
    m1s = range(sys.m1_range[0], sys.m1_range[1] + 1)
    m2s = range(sys.m2_range[0], sys.m2_range[1] + 1)
    ns = range(sys.n_range[0], sys.n_range[1] + 1)
    total = len(U1) * len(U2) * len(m1s) * len(m2s) * len(ns)
    if total > budget:
        raise EnumerationBudgetError(f"{total} tuples exceeds the enumeration budget {budget}")
    count = 0
    witnesses = []
    for b1 in U1:
        for b2 in U2:
            r, mod = sys.n_residue(b1, b2)
            if not sys.n_only:
                r1 = sys.m_residue(1, b1)
                r2 = sys.m_residue(2, b2)
            for m1 in m1s:
                if not sys.n_only and (m1 - r1) % sys.u1:
                    continue
                for m2 in m2s:
                    if not sys.n_only and (m2 - r2) % sys.u2:
                        continue
                    if not _in_band(sys.band_value(m1, m2), H):
                        continue
                    for n in ns:
                        if (n - r) % mod == 0:
                            count += 1
                            if len(witnesses) < max_witnesses:
                                witnesses.append((b1, b2, m1, m2, n))
    return count, witnesses


def _ap_count(lo, hi, r, q):
    """#{x in [lo, hi] : x = r mod q}."""
    if hi < lo:
        return 0
    return (hi - r) // q - (lo - 1 - r) // q


def enumerate_congruences_dual(sys, H=None):
    """Independent count: arithmetic-progression counting in m2 and n."""
    lo1, hi1 = sys.m1_range
    lo2, hi2 = sys.m2_range
    A = sys.b1 * sys.g2 ** 3 * sys.n2 ** 2
    Bc = sys.b2 * sys.g1 ** 3 * sys.n1 ** 2
    count = 0
    for b1 in sys.units(1):
        r1 = 0 if sys.n_only else sys.m_residue(1, b1)
        q1 = 1 if sys.n_only else sys.u1
        for b2 in sys.units(2):
            r, mod = sys.n_residue(b1, b2)
            n_count = _ap_count(sys.n_range[0], sys.n_range[1], r, mod)
            if n_count == 0:
                continue
            r2 = 0 if sys.n_only else sys.m_residue(2, b2)
            q2 = 1 if sys.n_only else sys.u2
            m_pairs = 0
            first = lo1 + (r1 - lo1) % q1
            for m1 in range(first, hi1 + 1, q1):
                x = A * m1
                if H is None:
                    m_pairs += _ap_count(lo2, hi2, r2, q2)
                    continue
                if H == 0:
                    if x % Bc == 0:
                        m2 = x // Bc
                        if lo2 <= m2 <= hi2 and (m2 - r2) % q2 == 0:
                            m_pairs += 1
                    continue
                # H <= |x - Bc m2| <= 2H splits into two m2 windows
                up_lo = -(-(x + H) // Bc)
                up_hi = (x + 2 * H) // Bc
                dn_lo = -(-(x - 2 * H) // Bc)
                dn_hi = (x - H) // Bc
                m_pairs += _ap_count(max(lo2, up_lo), min(hi2, up_hi), r2, q2)
                m_pairs += _ap_count(max(lo2, dn_lo), min(hi2, dn_hi), r2, q2)
            count += m_pairs * n_count
    return count
