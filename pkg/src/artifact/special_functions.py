"""Complex Gamma machinery and Bessel J evaluation.

log_gamma uses upward recursion into Re z >= 10 followed by the Stirling
series in the form  Gamma(z) = sqrt(2 pi) z^(z-1/2) e^(-z) sum (-1)^n g_n z^-n.
The Stirling coefficients are generated exactly from Bernoulli numbers.

bessel_j switches from the power series to the Hankel expansion at
x = 2*order + 20.  The series is summed in decimal arithmetic when the
terms would cancel badly in double precision.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "PoleProximityError",
    "StirlingSeries",
    "GammaRatioResult",
    "BesselEval",
    "stirling_series",
    "log_gamma",
    "gamma",
    "rgamma",
    "gamma_ratio",
    "gk_factor",
    "f_pm_decay",
    "bessel_j",
    "bessel_eval",
    "bessel_j_array",
    "bessel_series",
    "bessel_hankel",
]

RECURSION_THRESHOLD = 10.0
DEFAULT_ORDER = 16
POLE_TOL = 1e-8
LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


class PoleProximityError(ValueError):
    """Raised when an argument sits within POLE_TOL of a pole of Gamma."""


@dataclass(frozen=True)
class StirlingSeries:
    coefficients: tuple
    order: int
    exact: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.order < 1 or len(self.coefficients) != self.order:
            raise ValueError("coefficient list length must equal the order")
        if self.coefficients[0] != 1.0:
            raise ValueError("gamma_0 must be 1")

    def evaluate(self, z):
        """sum_{n<N} (-1)^n gamma_n z^-n, Horner in w = 1/z."""
        w = 1.0 / z
        acc = 0.0
        for n in range(self.order - 1, -1, -1):
            c = self.coefficients[n] * (-1) ** n
            acc = acc * w + c
        return acc


@lru_cache(maxsize=None)
def _bernoulli(n_max):
    # B_0..B_n_max via the standard recurrence, B_1 = -1/2
    B = [Fraction(0)] * (n_max + 1)
    B[0] = Fraction(1)
    for m in range(1, n_max + 1):
        s = Fraction(0)
        for j in range(m):
            s += math.comb(m + 1, j) * B[j]
        B[m] = -s / (m + 1)
    return tuple(B)


@lru_cache(maxsize=None)
def _stirling_exact(order):
    """Exact g_n with Gamma(z) ~ sqrt(2pi) z^(z-1/2) e^-z sum g_n z^-n."""
    B = _bernoulli(order + 2)
    # log of the series: sum_k B_2k / (2k(2k-1)) w^(2k-1)
    log_series = [Fraction(0)] * order
    for k in range(1, order + 1):
        p = 2 * k - 1
        if p >= order:
            break
        log_series[p] = B[2 * k] / (2 * k * (2 * k - 1))
    # exponentiate: g' = (log_series)' g
    g = [Fraction(0)] * order
    g[0] = Fraction(1)
    for n in range(1, order):
        s = Fraction(0)
        for j in range(1, n + 1):
            s += j * log_series[j] * g[n - j]
        g[n] = s / n
    return tuple(g)


@lru_cache(maxsize=None)
def stirling_series(order=DEFAULT_ORDER):
    """Stirling coefficients gamma_n (sign convention (-1)^n gamma_n)."""
    g = _stirling_exact(order)
    gam = tuple((-1) ** n * c for n, c in enumerate(g))
    return StirlingSeries(tuple(float(c) for c in gam), order, gam)


def _pole_check(z):
    z = np.asarray(z, dtype=complex)
    re = np.round(z.real)
    near = (re <= 0) & (np.abs(z - re) < POLE_TOL)
    if np.any(near):
        bad = z[near].ravel()[0] if z.ndim else complex(z)
        raise PoleProximityError(f"argument {bad} is within {POLE_TOL} of a pole of Gamma")


def log_gamma(z, order=DEFAULT_ORDER):
    """A logarithm of Gamma(z); exp(result) = Gamma(z).

    Works on scalars and numpy arrays.  The branch is the one produced by
    summing principal logarithms, which is the principal log Gamma for
    Re z > 0.
    """
    scalar = np.ndim(z) == 0
    za = np.asarray(z, dtype=complex)
    _pole_check(za)
    shift = int(max(0, math.ceil(RECURSION_THRESHOLD - float(np.min(za.real)))))
    corr = np.zeros_like(za)
    for j in range(shift):
        corr = corr + np.log(za + j)
    w = za + shift
    series = stirling_series(order).evaluate(w)
    out = (w - 0.5) * np.log(w) - w + LOG_SQRT_2PI + np.log(series) - corr
    if scalar:
        return complex(out)
    return out


def gamma(z, order=DEFAULT_ORDER):
    return np.exp(log_gamma(z, order)) if np.ndim(z) else cmath.exp(log_gamma(z, order))


def rgamma(z):
    """1/Gamma(z); exactly zero at the poles."""
    za = np.asarray(z, dtype=complex)
    re = np.round(za.real)
    at_pole = (re <= 0) & (np.abs(za - re) < POLE_TOL)
    safe = np.where(at_pole, 1.0 + 0j, za)
    out = np.where(at_pole, 0.0, np.exp(-log_gamma(safe)))
    if np.ndim(z) == 0:
        return complex(out)
    return out


@dataclass
class GammaRatioResult:
    value: complex
    modulus_defect: float
    asymptotic: complex = 0j

    def __iter__(self):
        yield self.value
        yield self.asymptotic


def gamma_ratio(nu, tau, order=6):
    """Gamma(nu+i tau)/Gamma(nu-i tau), exact and Stirling main term.

    Iterating the result gives (exact, asymptotic).
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    lg = log_gamma(complex(nu, tau))
    # Gamma(conj z) = conj Gamma(z), so the ratio is exp(2i Im log Gamma)
    exact = cmath.exp(2j * lg.imag)
    st = stirling_series(order)
    z, zb = complex(nu, tau), complex(nu, -tau)
    flat = st.evaluate(z) / st.evaluate(zb)
    main = cmath.exp(1j * tau * (math.log(nu * nu + tau * tau) - 2.0))
    main *= cmath.exp(1j * (2 * nu - 1) * math.atan2(tau, nu))
    return GammaRatioResult(exact, abs(exact) - 1.0, main * flat)


def _poles(z):
    re = np.round(z.real)
    return (re <= 0) & (np.abs(z - re) < POLE_TOL)


def _ratio(num, den):
    """Gamma(num)/Gamma(den) with den allowed at a pole (gives 0).

    Formed in log space so that large imaginary parts do not overflow.
    """
    num = np.asarray(num, dtype=complex)
    den = np.asarray(den, dtype=complex)
    hit = _poles(den)
    safe = np.where(hit, 1.0 + 0j, den)
    return np.where(hit, 0.0, np.exp(log_gamma(num) - log_gamma(safe)))


def gk_first_factor(s, sign):
    s = np.asarray(s, dtype=complex)
    a = _ratio((2 + s) / 2, (1 - s) / 2)
    b = _ratio((1 + s) / 2, -s / 2)
    return a - sign * 1j * b


def gk_second_factor(s, k):
    s = np.asarray(s, dtype=complex)
    d1, d2 = (k - s - 1) / 2, (k - s) / 2
    hit = _poles(d1) | _poles(d2)
    d1 = np.where(hit, 1.0 + 0j, d1)
    d2 = np.where(hit, 1.0 + 0j, d2)
    lg = log_gamma((k + s) / 2) + log_gamma((k + 1 + s) / 2)
    return np.where(hit, 0.0, np.exp(lg - log_gamma(d1) - log_gamma(d2)))


def gk_factor(s, k, sign):
    """G_k^sign(s); sign=+1 takes the minus-i combination."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if k < 4 or k % 2:
        raise ValueError("k must be an even integer >= 4")
    out = gk_first_factor(s, sign) * gk_second_factor(s, k)
    if np.ndim(s) == 0:
        return complex(out)
    return out


def f_pm_decay(B, sign, method="reflection"):
    """F^sign(B) = G(3/4+iB)/G(3/4-iB) -+ i G(1/4+iB)/G(1/4-iB).

    method="reflection" rewrites both ratios over the common factor
    Gamma(3/4-iB)Gamma(1/4-iB) sin(pi(3/4+iB)) sin(pi(3/4-iB)) so that the
    cancellation happens in closed form.  method="direct" subtracts.
    """
    if B == 0:
        raise ValueError("B must be nonzero")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if method == "direct":
        r1 = gamma_ratio(0.75, B).value
        r2 = gamma_ratio(0.25, B).value
        return r1 - sign * 1j * r2
    z1 = complex(0.75, B)
    z2 = complex(0.75, -B)
    # 2i (sin z2' - sign*i sin z1') has one surviving exponential
    pb = math.pi * B
    if sign == 1:
        log_num = complex(-pb, -0.75 * math.pi) + cmath.log(-1.0)
    else:
        log_num = complex(pb, 0.75 * math.pi)
    log_num += math.log(2.0) - cmath.log(2j)
    log_den = log_gamma(complex(0.75, -B)) + log_gamma(complex(0.25, -B))
    log_den += _log_sin(math.pi * z1) + _log_sin(math.pi * z2)
    return math.pi * cmath.exp(log_num - log_den)


def _log_sin(w):
    # log sin(w) without overflow for large |Im w|
    y = w.imag
    if abs(y) < 30:
        return cmath.log(cmath.sin(w))
    # sin(w) = (e^{iw} - e^{-iw})/(2i); keep the dominant exponential
    if y > 0:
        return -1j * w - cmath.log(2j) + cmath.log(-1 + cmath.exp(2j * w))
    return 1j * w - cmath.log(2j) + cmath.log(1 - cmath.exp(-2j * w))


# --------------------------------------------------------------------------
# Bessel J

@dataclass(frozen=True)
class BesselEval:
    order: float
    argument: float
    value: float
    regime: str  # "series" or "asymptotic"


def switch_point(order):
    return 2.0 * order + 20.0


def bessel_series(order, x):
    """Power series sum (-1)^m (x/2)^(2m+nu) / (m! Gamma(m+nu+1))."""
    x = float(x)
    if x == 0:
        return 1.0 if order == 0 else 0.0
    half = 0.5 * x
    lead = order * math.log(half) - math.lgamma(order + 1.0)
    if x < 8.0:
        term = math.exp(lead)
        total = term
        q = half * half
        m = 0
        while abs(term) > 1e-18 * abs(total) or m < 3:
            m += 1
            term *= -q / (m * (m + order))
            total += term
            if m > 400:
                break
        return total
    # the terms peak near exp(x); carry enough digits to absorb the cancellation
    digits = 20 + int(x / math.log(10)) + 5
    with localcontext() as ctx:
        ctx.prec = digits
        q = Decimal(repr(half)) ** 2
        nu = Decimal(repr(float(order)))
        term = Decimal(1)
        total = Decimal(1)
        m = 0
        tiny = Decimal(10) ** (-digits)
        while True:
            m += 1
            term = -term * q / (m * (m + nu))
            total += term
            if abs(term) < tiny and m > half:
                break
        return float(total) * math.exp(lead)


def _hankel_pq(order, x, max_terms=80):
    mu = 4.0 * order * order
    P = np.ones_like(x, dtype=float)
    Q = np.zeros_like(x, dtype=float)
    a = np.ones_like(x, dtype=float)
    active = np.ones_like(x, dtype=bool)
    prev = np.full_like(x, np.inf, dtype=float)
    for k in range(1, max_terms):
        a = a * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        mag = np.abs(a)
        active = active & ((mag < prev) | ((2 * k - 1) ** 2 < mu)) & (mag > 0)
        if k % 2 == 1:
            sgn = (-1) ** ((k - 1) // 2)
            Q = Q + np.where(active, sgn * a, 0.0)
        else:
            sgn = (-1) ** (k // 2)
            P = P + np.where(active, sgn * a, 0.0)
        prev = np.where(active, mag, prev)
        if not np.any(active & (mag > 1e-18)):
            break
    return P, Q


def bessel_hankel(order, x):
    """Hankel expansion sqrt(2/(pi x)) (P cos w - Q sin w)."""
    xa = np.asarray(x, dtype=float)
    P, Q = _hankel_pq(order, xa)
    w = xa - 0.5 * order * math.pi - 0.25 * math.pi
    out = np.sqrt(2.0 / (math.pi * xa)) * (P * np.cos(w) - Q * np.sin(w))
    if np.ndim(x) == 0:
        return float(out)
    return out


def bessel_eval(order, x):
    if order < 0 or x < 0:
        raise ValueError("order and argument must be non-negative")
    if x < switch_point(order):
        return BesselEval(order, x, bessel_series(order, x), "series")
    return BesselEval(order, x, bessel_hankel(order, x), "asymptotic")


def bessel_j(order, x):
    """J_order(x) for real order >= 0 and x >= 0."""
    return bessel_eval(order, x).value


def bessel_j_array(order, x):
    """Vectorised J_order over an array of non-negative arguments."""
    xa = np.asarray(x, dtype=float)
    out = np.empty_like(xa)
    big = xa >= switch_point(order)
    if np.any(big):
        out[big] = bessel_hankel(order, xa[big])
    small_idx = np.nonzero(~big)
    for idx in zip(*small_idx):
        out[idx] = bessel_series(order, float(xa[idx]))
    return out
