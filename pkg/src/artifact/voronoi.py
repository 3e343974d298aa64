"""GL(2) and GL(3) Voronoi summation checked as numerical identities.

Both sides of each formula are computed independently: the left side is a
finite twisted sum over the support of the test function, the right side is
the dual sum with its integral transform (a Bessel integral for GL(2), the
contour transform Psi_+- for GL(3)), truncated by octaves until the last
octave no longer moves the total.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .arithmetic import DirichletCharacter, divisors, kloosterman, modinv, mobius, sym_square_array
from .delta_method import SmoothWindow
from .oscillatory import (
    DEFAULT_STEP,
    CostGuardError,
    ContourSampler,
    TailError,
    panel_rule,
    y_transform_grid,
)
from .special_functions import bessel_j_array, gk_factor

GL2_TOL = 1e-6
GL3_TOL = 1e-3
DUAL_BUDGET = 2 * 10 ** 6
PSI_CORE_TOL = 1e-14
PSI_PAD = 1 << 22
PSI_INTERP = 10


@dataclass
class VoronoiInstance:
    """a/c twist and test window; level data only matters for GL(2)."""

    a: int
    c: int
    window: SmoothWindow = SmoothWindow("inert_V", 50.0)
    N: int = 1
    kappa: int = 12
    eta: complex = 1.0
    chi: DirichletCharacter = None
    chi_N1: DirichletCharacter = None
    chi_N2: DirichletCharacter = None

    def __post_init__(self):
        if self.c < 1:
            raise ValueError("c must be a positive integer")
        if math.gcd(self.a, self.c) != 1:
            raise ValueError(f"gcd(a, c) = {math.gcd(self.a, self.c)}, need 1")
        if self.window.support[0] <= 0:
            raise ValueError("the test window must live on (0, oo)")
        if self.N < 1:
            raise ValueError("level must be positive")
        if self.N > 1 and self.chi is not None and self.chi_N1 is None:
            raise ValueError("give the decomposition chi = chi_N1 chi_N2 for level N > 1")

    @property
    def N1(self):
        return math.gcd(self.c, self.N)

    @property
    def N2(self):
        return self.N // self.N1

    @property
    def abar(self):
        return modinv(self.a, self.c) if self.c > 1 else 0

    def params(self):
        lo, hi = self.window.support
        return {"a": self.a, "c": self.c, "N": self.N, "kappa": self.kappa,
                "window": self.window.kind, "support": [lo, hi]}


def _cjson(z):
    z = complex(z)
    return [z.real, z.imag]


@dataclass
class VoronoiCheck:
    lemma: str
    params: dict
    lhs: complex
    rhs: complex
    gap: float
    tolerance: float
    dual_terms: int = 0
    tail: float = 0.0
    octaves: list = field(default_factory=list)

    @property
    def scale(self):
        return max(abs(self.lhs), 1.0)

    @property
    def passed(self):
        return self.gap <= self.tolerance * self.scale

    def to_dict(self):
        return {"lemma": self.lemma, "params": self.params, "lhs": _cjson(self.lhs),
                "rhs": _cjson(self.rhs), "gap": self.gap, "tolerance": self.tolerance,
                "pass": bool(self.passed)}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _support_ints(window):
    lo, hi = window.support
    return np.arange(int(math.ceil(lo)), int(math.floor(hi)) + 1)


# ---------------------------------------------------------------- GL(2)


def gl2_bessel_integrals(ns, c, window, kappa=12, N2=1, fraction=0.5, omega_min=0.0):
    """int F(y) J_(kappa-1)(4 pi sqrt(n y) / (c sqrt N2)) dy for each n.

    With y = u^2 the Bessel argument is linear in u, so one panel rule sized
    for the largest n serves the whole block.  omega_min (per unit y) keeps
    panels short enough for F itself.
    """
    ns = np.asarray(ns, dtype=float)
    lo, hi = window.support
    a, b = math.sqrt(lo), math.sqrt(hi)
    k = 4 * math.pi / (c * math.sqrt(N2))
    omega = max(k * math.sqrt(ns.max()), omega_min * 2 * b)
    u, w = panel_rule(a, b, omega, fraction)
    g = np.asarray(window(u * u)) * 2 * u * w
    live = g != 0
    u, g = u[live], g[live]
    out = np.empty(len(ns))
    for i in range(0, len(ns), 64):
        arg = k * np.sqrt(ns[i:i + 64])[:, None] * u[None, :]
        out[i:i + 64] = bessel_j_array(kappa - 1, arg) @ g
    return out


def _gl2_coeffs(table, n_max):
    return np.array([0.0] + [table.tau[n] / n ** 5.5 for n in range(1, n_max + 1)])


def gl2_lhs(inst, lam):
    ns = _support_ints(inst.window)
    if ns[-1] >= len(lam):
        raise IndexError("coefficient table exhausted on the left side")
    ph = np.exp(2j * math.pi * ((inst.a * ns) % inst.c) / inst.c)
    return complex(np.sum(np.asarray(lam)[ns] * ph * inst.window(ns.astype(float))))


def gl2_factor(inst):
    """2 pi i^kappa chi_N1(abar) chi_N2(-c) eta / (c sqrt N2)."""
    f = 2 * math.pi * (1j ** inst.kappa) * inst.eta / (inst.c * math.sqrt(inst.N2))
    if inst.chi_N1 is not None:
        f *= inst.chi_N1(inst.abar)
    if inst.chi_N2 is not None:
        f *= inst.chi_N2(-inst.c)
    return f


def gl2_voronoi_check(inst, table=None, tol=GL2_TOL, lam=None, lam_dual=None,
                      n_start=None, n_max=None, budget=DUAL_BUDGET, omega_min=0.0):
    """Both sides of the GL(2) Voronoi formula for lambda(n) e(an/c) F(n).

    With `table` the coefficients are tau(n)/n^(11/2) (level 1, self dual).
    Otherwise pass `lam` and `lam_dual` (index n holds the n-th value).
    The dual sum grows by octaves until one octave changes it by less than
    tol/10 relative to max(|lhs|, 1), or stops at n_max when given.
    """
    if lam is None:
        if table is None:
            raise ValueError("need a coefficient table or explicit coefficients")
        lam = _gl2_coeffs(table, table.n_max)
    if lam_dual is None:
        lam_dual = lam
    lhs = gl2_lhs(inst, lam)
    scale = max(abs(lhs), 1.0)
    pref = gl2_factor(inst)
    twist = modinv(inst.a * inst.N2, inst.c) if inst.c > 1 else 0
    n_avail = len(lam_dual) - 1
    hi = n_start or max(16, 16 * inst.c * inst.c * inst.N2)
    lo = 0
    total = 0j
    octaves = []
    while True:
        if n_max is not None:
            hi = min(hi, n_max)
        if hi > n_avail:
            raise TailError(f"dual sum needs n up to {hi}, table has {n_avail}", total, None)
        if hi > budget:
            raise CostGuardError(f"dual sum length {hi} exceeds the budget {budget}")
        ns = np.arange(lo + 1, hi + 1)
        I = gl2_bessel_integrals(ns, inst.c, inst.window, inst.kappa, inst.N2,
                                 omega_min=omega_min)
        ph = np.exp(-2j * math.pi * ((twist * ns) % inst.c) / inst.c)
        part = pref * complex(np.sum(np.asarray(lam_dual)[ns] * ph * I))
        total += part
        octaves.append((int(hi), abs(part)))
        done = n_max is not None and hi >= n_max
        if lo > 0 and abs(part) < tol / 10 * scale or done:
            break
        lo, hi = hi, 2 * hi
    return VoronoiCheck("GL2", inst.params(), lhs, total, abs(lhs - total), tol,
                        int(hi), octaves[-1][1], octaves)


# ---------------------------------------------------------------- Psi_+-


class PsiTransform:
    """Psi_+-(x) = 1/(4 pi^(5/2) i) int_(sigma) (pi^3 x)^(-s) G_k(s) psi~(-s) ds.

    On s = sigma + i tau the integrand core G(s) psi~(-s) does not depend on x.
    It is sampled once on the FFT grid shared with the I(B, C) transform, cut
    where it has decayed to PSI_CORE_TOL of its peak, and then

      direct(x)    sums the trapezoid rule for each x;
      __call__(x)  reads the same sum off a zero padded FFT in v = log(pi^3 x)
                   with local Lagrange interpolation, for long dual sums.
    """

    def __init__(self, k, window, sign, sigma=-0.5, h=DEFAULT_STEP, reach=8000.0):
        if not -1 < sigma < 1:
            raise ValueError("sigma must lie in (-1, 1)")
        self.k, self.window, self.sign, self.sigma, self.h = k, window, sign, sigma, h
        tau, F = y_transform_grid(0.0, window, sigma, h, reach)
        core = gk_factor(sigma + 1j * tau, k, sign) * F
        mag = np.abs(core)
        outside = np.nonzero(mag > PSI_CORE_TOL * mag.max())[0]
        self.t_max = float(np.max(np.abs(tau[outside])))
        if self.t_max > 0.9 * tau[-1]:
            raise TailError("G psi~ has not decayed inside the grid")
        keep = np.abs(tau) <= self.t_max
        self.tau = tau[keep]
        self.core = core[keep]
        self._fft = None

    def direct(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        v = np.log(math.pi ** 3 * x)
        out = np.empty(len(x), dtype=complex)
        for i in range(0, len(x), 16):
            out[i:i + 16] = np.exp(-1j * np.outer(v[i:i + 16], self.tau)) @ self.core
        return out * self._scale(x)

    def _scale(self, x):
        return self.h * (math.pi ** 3 * x) ** (-self.sigma) / (4 * math.pi ** 2.5)

    def _table(self):
        if self._fft is None:
            M = PSI_PAD
            n = len(self.core)
            while M < 8 * n:
                M *= 2
            buf = np.zeros(M, dtype=complex)
            buf[:n] = self.core
            self._fft = (np.fft.fft(buf), 2 * math.pi / (M * self.h), self.tau[0])
        return self._fft

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        S, dv, t0 = self._table()
        M = len(S)
        pos = np.log(math.pi ** 3 * x) / dv
        i0 = np.floor(pos).astype(int) - PSI_INTERP // 2 + 1
        out = np.zeros(len(x), dtype=complex)
        for j in range(PSI_INTERP):
            wj = np.ones(len(x))
            for m in range(PSI_INTERP):
                if m != j:
                    wj *= (pos - (i0 + m)) / (j - m)
            node = i0 + j
            # sum_l core_l exp(-i (t0 + l h) v) at v = node dv
            out += wj * S[node % M] * np.exp(-1j * t0 * node * dv)
        return out * self._scale(x)


@lru_cache(maxsize=32)
def psi_transform(k, window, sign, sigma=-0.5):
    """Memoised PsiTransform; keyed by (k, window, sign, sigma)."""
    return PsiTransform(k, window, sign, sigma)


def psi_pm(x, k, psi, sign, sigma=-0.5, tol=1e-9, t_max=None):
    """Psi_+-(x) by the adaptive contour sampler used for I(B, C).

    The sampler's (C/pi^3)^s at C = 1/x is (pi^3 x)^(-s), and its prefactor
    1/(2 pi) differs from 1/(4 pi^(5/2)) by 2 pi^(3/2).
    """
    if x <= 0:
        raise ValueError("x must be positive")
    lo, hi = psi.support
    base = 2 * math.pi * (x * hi) ** (1 / 3) + 200.0
    reach = None if t_max is None else t_max + 10
    sampler = ContourSampler(0.0, k, sign, psi, sigma, DEFAULT_STEP, reach)
    value, _tail, _used = sampler.evaluate(1.0 / x, t_max, tol, base=base)
    return complex(value) / (2 * math.pi ** 1.5)


# ---------------------------------------------------------------- GL(3)


def _a_pair(A1, m, n):
    """A_F(m, n) from A_F(1, .) through the Hecke relation."""
    out = 0.0
    for d in divisors(math.gcd(m, n)):
        mu = mobius(d)
        if mu:
            out += mu * A1[m // d] * A1[n // d]
    return out


def gl3_lhs(inst, A1):
    ns = _support_ints(inst.window)
    if ns[-1] >= len(A1):
        raise IndexError("coefficient table exhausted on the left side")
    ph = np.exp(2j * math.pi * ((inst.a * ns) % inst.c) / inst.c)
    return complex(np.sum(np.asarray(A1)[ns] * ph * inst.window(ns.astype(float))))


def gl3_voronoi_check(inst, table, k=12, tol=GL3_TOL, convention="sym2", x_start=64.0,
                      x_max=None, budget=DUAL_BUDGET, sigma=-0.5):
    """Both sides of the GL(3) Voronoi formula for A_F(1, n) e(na/c) psi(n).

    The right side is truncated in x = n2 n1^2 / c^3 by octaves until the last
    octave moves it by less than tol/100 relative to max(|lhs|, 1).
    """
    c = inst.c
    if c > 3:
        raise ValueError("desk scale GL(3) checks take c in {1, 2, 3}")
    abar = inst.abar
    A1 = sym_square_array(table, table.n_max, convention)
    lhs = gl3_lhs(inst, A1)
    scale = max(abs(lhs), 1.0)
    psis = {sg: psi_transform(k, inst.window, sg, sigma) for sg in (1, -1)}
    total = 0j
    octaves = []
    lo, hi = 0.0, x_start
    while True:
        if x_max is not None:
            hi = min(hi, x_max)
        part = 0j
        count = 0
        for n1 in divisors(c):
            q = c // n1
            n2_lo = int(math.floor(lo * c ** 3 / n1 ** 2)) + 1
            n2_hi = int(math.floor(hi * c ** 3 / n1 ** 2))
            if n2_hi < n2_lo:
                continue
            if n2_hi * n1 > table.n_max:
                raise TailError(f"dual sum needs A_F up to {n2_hi * n1}, table has {table.n_max}",
                                total, None)
            n2 = np.arange(n2_lo, n2_hi + 1)
            count += len(n2)
            A = np.array([_a_pair(A1, int(m), n1) for m in n2]) if n1 > 1 else np.asarray(A1)[n2]
            x = n2 * n1 * n1 / c ** 3
            for sg in (1, -1):
                S = np.array([kloosterman(abar, sg * int(m), q) for m in n2]) if q > 1 else 1.0
                part += c * complex(np.sum(A / (n1 * n2) * S * psis[sg](x)))
        if count > budget:
            raise CostGuardError(f"octave with {count} dual terms exceeds the budget {budget}")
        total += part
        octaves.append((hi, abs(part)))
        done = x_max is not None and hi >= x_max
        if lo > 0 and abs(part) < tol / 100 * scale or done:
            break
        lo, hi = hi, 2 * hi
    params = inst.params()
    params.update({"k": k, "convention": convention, "sigma": sigma})
    return VoronoiCheck("GL3", params, lhs, total, abs(lhs - total), tol,
                        int(hi * c ** 3), octaves[-1][1], octaves)


def report(checks):
    """JSON lines, one per check."""
    return "\n".join(ch.to_json() for ch in checks)
