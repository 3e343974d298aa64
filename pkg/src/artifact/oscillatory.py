"""Oscillatory integrals.

Contents:
  * an adaptive Gauss-Legendre oracle whose panels are kept shorter than a
    fixed fraction of the local period 2 pi / |phi'|
  * the stationary phase main term and its two bound checks
  * Mellin transforms of compactly supported windows
  * the transform

        I(B, C) = 1/(2 pi i) int_(sigma) (C/pi^3)^s G_k(s) int V(y) e(B sqrt y) y^(-s-1) dy ds

    evaluated on a contour, together with its stationary phase asymptotic
    and the correlation integral J built from two copies of I.

On the contour s = sigma + i tau the inner y-integral is a Fourier transform
in u = log y, so it is sampled on a uniform tau grid with a single FFT and the
tau integral is done by the trapezoid rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .delta_method import SmoothWindow
from .special_functions import gk_factor

TWO_PI = 2.0 * math.pi
GL_LO = np.polynomial.legendre.leggauss(16)
GL_HI = np.polynomial.legendre.leggauss(32)
PANEL_FRACTION = 0.5

FLAT_MAX = 3.0
DEFAULT_STEP = 0.05
TAIL_REACH = 3300.0


class QuadratureError(RuntimeError):
    def __init__(self, msg, estimate=None, error=None):
        super().__init__(msg)
        self.estimate = estimate
        self.error = error


class NoStationaryPointError(ValueError):
    """phi' has no root on the support; use nonstationary_decay_check."""


class HypothesisError(ValueError):
    pass


class TailError(RuntimeError):
    def __init__(self, msg, estimate=None, tail=None):
        super().__init__(msg)
        self.estimate = estimate
        self.tail = tail


class CostGuardError(RuntimeError):
    pass


# ---------------------------------------------------------------- quadrature


def _gl(f, a, b, rule):
    x, w = rule
    half = 0.5 * (b - a)
    return half * np.dot(w, f(half * x + 0.5 * (a + b)))


def quad_adaptive(f, a, b, tol=1e-10, freq=None, max_panels=20000):
    """Integral of the complex function f over [a, b] to absolute error tol.

    freq(t) -> local angular frequency; initial panels are cut so that each is
    at most PANEL_FRACTION of a local period.  Each panel is then refined by
    comparing 16 and 32 point Gauss-Legendre.
    """
    if b <= a:
        return 0j
    edges = [a]
    if freq is None:
        edges.append(b)
    else:
        probe = np.linspace(a, b, 513)
        om = np.abs(np.asarray(freq(probe), dtype=float))
        t = a
        while t < b:
            i = min(int((t - a) / (b - a) * 512), 511)
            local = max(om[i], om[i + 1], 1e-300)
            step = PANEL_FRACTION * TWO_PI / local
            t = min(b, t + step)
            edges.append(t)
            if len(edges) > max_panels:
                raise QuadratureError("too many initial panels", None, None)
    stack = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)][::-1]
    total = 0j
    err = 0.0
    used = 0
    width = b - a
    while stack:
        lo, hi = stack.pop()
        coarse = _gl(f, lo, hi, GL_LO)
        fine = _gl(f, lo, hi, GL_HI)
        e = abs(fine - coarse)
        if e <= tol * (hi - lo) / width or hi - lo < 1e-12 * width:
            total += fine
            err += e
            continue
        used += 1
        if used > max_panels:
            raise QuadratureError(
                f"no convergence after {max_panels} subdivisions", total + fine, err + e
            )
        mid = 0.5 * (lo + hi)
        stack.append((mid, hi))
        stack.append((lo, mid))
    return complex(total)


def panel_rule(a, b, omega, fraction=PANEL_FRACTION, points=32):
    """Composite Gauss-Legendre nodes and weights on [a, b] for integrands
    oscillating at angular frequency at most omega: every panel is shorter
    than `fraction` of a period.  Used where one node set serves many
    integrands at once."""
    width = b - a
    panels = max(1, int(math.ceil(width * abs(omega) / (TWO_PI * fraction))))
    x, w = np.polynomial.legendre.leggauss(points)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (half[:, None] * x + mid[:, None]).ravel()
    weights = (half[:, None] * w).ravel()
    return nodes, weights


@dataclass
class PhaseIntegral:
    """int w(t) exp(i phi(t)) dt with w supported on [Z, 2Z] (or `support`).

    dphi(t, j) returns the j-th derivative of phi for j = 1..4.
    """

    w: Callable
    phi: Callable
    dphi: Callable
    Z: float = 1.0
    X: float = 1.0
    Y: float = 1.0
    support: tuple = None

    def __post_init__(self):
        if self.support is None:
            self.support = (self.Z, 2.0 * self.Z)

    @property
    def R(self):
        return self.Y / self.X ** 2

    def amplitude(self, t):
        return np.asarray(self.w(t), dtype=float)

    def integrand(self, t):
        return self.amplitude(t) * np.exp(1j * np.asarray(self.phi(t), dtype=float))

    def derivative_defect(self, j, samples=33, h=1e-4):
        """Max relative gap between dphi(., j) and a central difference of dphi(., j-1)."""
        a, b = self.support
        ts = np.linspace(a + 0.05 * (b - a), b - 0.05 * (b - a), samples)
        prev = self.phi if j == 1 else (lambda t: self.dphi(t, j - 1))
        fd = (np.asarray(prev(ts + h)) - np.asarray(prev(ts - h))) / (2 * h)
        ex = np.asarray(self.dphi(ts, j), dtype=float)
        scale = max(np.max(np.abs(ex)), 1.0)
        return float(np.max(np.abs(fd - ex)) / scale)


def oscillatory_quadrature(pi, tol=1e-10, max_panels=20000):
    a, b = pi.support
    return quad_adaptive(pi.integrand, a, b, tol, lambda t: pi.dphi(t, 1), max_panels)


@dataclass
class StationaryPhase:
    main: complex
    t0: float

    def __iter__(self):
        yield self.main
        yield self.t0


def stationary_point(dphi1, a, b, samples=2049):
    ts = np.linspace(a, b, samples)
    d = np.asarray(dphi1(ts), dtype=float)
    roots = []
    for i in np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0)[0]:
        if d[i] == 0:
            roots.append(float(ts[i]))
        elif d[i + 1] != 0:
            roots.append(brentq(lambda t: float(dphi1(t)), ts[i], ts[i + 1], xtol=1e-14))
    return sorted(set(roots))


def stationary_phase_main(pi):
    """Leading term exp(i phi(t0)) sqrt(2 pi / |phi''(t0)|) exp(+-i pi/4) w(t0)."""
    a, b = pi.support
    roots = stationary_point(lambda t: pi.dphi(t, 1), a, b)
    if not roots:
        raise NoStationaryPointError(
            "phi' has no zero on the support; use nonstationary_decay_check"
        )
    ts = np.linspace(a, b, 257)
    d2 = np.asarray(pi.dphi(ts, 2), dtype=float)
    if not (np.all(d2 > 0) or np.all(d2 < 0)):
        raise HypothesisError("phi'' changes sign on the support")
    t0 = roots[0]
    p2 = float(pi.dphi(t0, 2))
    main = (
        float(pi.w(t0))
        * math.sqrt(TWO_PI / abs(p2))
        * np.exp(1j * (float(pi.phi(t0)) + math.copysign(math.pi / 4, p2)))
    )
    return StationaryPhase(complex(main), t0)


def nonstationary_decay_check(pi, tol=1e-12):
    """|oracle| against Z R^-3 when |phi'| >= Y/Z on the support."""
    a, b = pi.support
    ts = np.linspace(a, b, 1025)
    slope = float(np.min(np.abs(pi.dphi(ts, 1))))
    value = oscillatory_quadrature(pi, tol)
    bound = pi.Z * pi.R ** -3
    return {
        "min_phi1": slope,
        "hypothesis": slope >= pi.Y / pi.Z,
        "value": abs(value),
        "bound": bound,
        "pass": abs(value) <= bound,
    }


def second_derivative_bound_check(pi, R, samples=2049, tol=1e-10):
    """|int w e(phi)| sqrt(R) / int |w'|, with phi'' >= R checked by sampling.

    Here the phase is e(phi) = exp(2 pi i phi).
    """
    a, b = pi.support
    ts = np.linspace(a, b, samples)
    if np.min(pi.dphi(ts, 2)) < R:
        raise HypothesisError("phi'' >= R fails on the support")
    value = quad_adaptive(
        lambda t: pi.amplitude(t) * np.exp(TWO_PI * 1j * np.asarray(pi.phi(t))),
        a,
        b,
        tol,
        lambda t: TWO_PI * np.asarray(pi.dphi(t, 1)),
    )
    if hasattr(pi.w, "derivative"):
        dw = lambda t: np.abs(pi.w.derivative(1, t))
    else:
        dw = lambda t: np.abs((pi.amplitude(t + 1e-6) - pi.amplitude(t - 1e-6)) / 2e-6)
    variation = quad_adaptive(lambda t: dw(t) + 0j, a, b, 1e-12).real
    return abs(value) * math.sqrt(R) / variation


def mellin_transform(psi, s, tol=1e-12):
    """int_0^oo psi(y) y^(s-1) dy for psi supported in (0, oo)."""
    a, b = psi.support
    if a <= 0:
        raise ValueError("psi must be supported in (0, oo)")
    s = complex(s)
    f = lambda y: np.asarray(psi(y)) * np.exp((s - 1) * np.log(y))
    return quad_adaptive(f, a, b, tol, lambda y: s.imag / y)


# ---------------------------------------------------------------- I(B, C)


def classify_regime(B, k):
    b = abs(B)
    if b <= FLAT_MAX:
        return "flat"
    if b <= k / 3:
        return "below_k"
    if b < 3 * k:
        return "transitional"
    return "above_k"


def dominant_sign(B):
    """The G_k sign whose first factor is not exponentially small on the
    stationary range tau ~ B; G^+ survives for tau < 0, G^- for tau > 0."""
    return 1 if B < 0 else -1


@dataclass
class TransformParams:
    B: float
    C: float
    k: int = 12
    sign: int = None
    regime: str = None

    def __post_init__(self):
        if self.k < 12 or self.k % 2:
            raise ValueError("k must be even and at least 12")
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.sign is None:
            self.sign = dominant_sign(self.B)
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        expected = classify_regime(self.B, self.k)
        if self.regime is None:
            self.regime = expected
        elif self.regime != expected:
            raise ValueError(f"regime {self.regime} disagrees with classifier ({expected})")


def _window(V):
    return V if V is not None else SmoothWindow("inert_V")


def y_transform_grid(B, V=None, sigma=-0.5, h=DEFAULT_STEP, reach=None):
    """tau grid (ascending, step h) and F(tau) = int V(y) e(B sqrt y) y^(-sigma-1-i tau) dy.

    Trapezoid rule in u = log y, which is spectrally accurate for the
    compactly supported smooth integrand, summed for all tau by one FFT.
    The grid covers |tau| <= N h / 2 with N h >= 2 reach.
    """
    V = _window(V)
    a, b = V.support
    if reach is None:
        reach = TAIL_REACH
    reach = max(reach, 4.5 * abs(B) + TAIL_REACH)
    N = 1 << int(math.ceil(math.log2(2 * reach / h)))
    du = TWO_PI / (N * h)
    j = np.arange(int(math.floor(math.log(a) / du)), int(math.ceil(math.log(b) / du)) + 1)
    u = j * du
    y = np.exp(u)
    g = np.asarray(V(y)) * np.exp(TWO_PI * 1j * B * np.sqrt(y) - sigma * u)
    buf = np.zeros(N, dtype=complex)
    buf[j % N] = g
    F = np.fft.fftshift(np.fft.fft(buf)) * du
    tau = (np.arange(N) - N // 2) * h
    return tau, F


@dataclass
class ContourSampler:
    """Samples of (C/pi^3)^s G(s) Ftilde(s) along s = sigma + i tau.

    Shared between direct evaluations of I(B, C) for many C.
    """

    B: float
    k: int
    sign: int
    V: SmoothWindow = None
    sigma: float = -0.5
    h: float = DEFAULT_STEP
    reach: float = None
    tau: np.ndarray = field(default=None, repr=False)
    core: np.ndarray = field(default=None, repr=False)
    _filled: float = field(default=-1.0, repr=False)

    def __post_init__(self):
        self.V = _window(self.V)
        tau, F = y_transform_grid(self.B, self.V, self.sigma, self.h, self.reach)
        self.tau = tau
        self.F = F
        self.core = np.zeros_like(F)
        self.limit = float(tau[-1])

    def _fill(self, t_max):
        if t_max <= self._filled:
            return
        if t_max > self.limit:
            raise TailError(f"t_max {t_max} exceeds the FFT grid reach {self.limit}")
        sel = (np.abs(self.tau) <= t_max) & (np.abs(self.tau) > self._filled)
        s = self.sigma + 1j * self.tau[sel]
        self.core[sel] = gk_factor(s, self.k, self.sign) * self.F[sel]
        self._filled = t_max

    def partial(self, C, t_max):
        """Trapezoid sum over |tau| <= t_max, for scalar or array C."""
        self._fill(t_max)
        sel = np.abs(self.tau) <= t_max
        tau = self.tau[sel]
        core = self.core[sel]
        Cs = np.atleast_1d(np.asarray(C, dtype=float))
        L = np.log(Cs / math.pi ** 3)
        out = np.empty(len(Cs), dtype=complex)
        for i0 in range(0, len(Cs), 32):
            ph = np.exp(1j * np.outer(L[i0:i0 + 32], tau))
            out[i0:i0 + 32] = ph @ core
        out *= np.exp(self.sigma * L) * self.h / TWO_PI
        return out if np.ndim(C) else complex(out[0])

    def noise_floor(self, C, t_max):
        """Rounding level of the trapezoid sum: 1e3 eps times its L1 norm."""
        sel = np.abs(self.tau) <= t_max
        l1 = float(np.sum(np.abs(self.core[sel]))) * self.h / TWO_PI
        Cmin = float(np.min(np.atleast_1d(C)))
        return 1e3 * np.finfo(float).eps * l1 * (Cmin / math.pi ** 3) ** self.sigma

    def evaluate(self, C, t_max=None, tol=1e-9, base=None):
        """Returns (value, tail, t_max); tol is relative to max(1, |value|).

        Past the stationary range |tau| <= base (default 4.5|B|) the cut is
        pushed out by a doubling margin until the last extension changes the
        value by less than tol/10.
        """
        if t_max is not None:
            return self.partial(C, t_max), float("nan"), t_max
        if base is None:
            base = 4.5 * abs(self.B)
        margin = 100.0
        prev = self.partial(C, base + margin)
        while True:
            margin *= 2
            t2 = base + margin
            if t2 > self.limit:
                raise TailError("tail did not settle inside the grid", prev, None)
            cur = self.partial(C, t2)
            tail = float(np.max(np.abs(np.asarray(cur) - np.asarray(prev))))
            scale = max(1.0, float(np.max(np.abs(cur))))
            if tail < max(tol / 10 * scale, self.noise_floor(C, t2)):
                return cur, tail, t2
            prev = cur


@dataclass
class TransformResult:
    value: complex
    tail: float
    t_max: float
    sigma: float = -0.5


def transform_I_direct(p, V=None, t_max=None, tol=1e-9, sigma=-0.5, h=DEFAULT_STEP):
    """Contour evaluation of I(B, C) on Re s = sigma (default -1/2).

    G_k has no poles in Re s > -1, so any sigma in (-1, 1) gives the same value.
    """
    if not -1 < sigma < 1:
        raise ValueError("sigma must lie in (-1, 1)")
    reach = None if t_max is None else t_max + 10
    sampler = ContourSampler(p.B, p.k, p.sign, V, sigma, h, reach)
    value, tail, used = sampler.evaluate(p.C, t_max, tol)
    return TransformResult(complex(value), tail, used, sigma)


def transform_I_many(B, Cs, k=12, sign=None, V=None, tol=1e-9, sigma=-0.5):
    sign = dominant_sign(B) if sign is None else sign
    sampler = ContourSampler(B, k, sign, V, sigma)
    value, tail, used = sampler.evaluate(np.asarray(Cs, dtype=float), None, tol)
    return value, tail


# closed forms in the rescaled variable t = |tau| / |B|


def stationary_t0(B, C, k, branch):
    """(4 pi / (|B|^3 C)) (1 + branch sqrt(1 - x^2)), x = B^2 C k / (4 pi).

    None when x > 1 (no real stationary point)."""
    x = B * B * C * k / (4 * math.pi)
    if x > 1:
        return None
    return 4 * math.pi / (abs(B) ** 3 * C) * (1 + branch * math.sqrt(1 - x * x))


def c_for_stationary(B, k, y0):
    """The C that puts the true stationary point at y = y0 (tau0 = pi |B| sqrt(y0))."""
    tau = math.pi * abs(B) * math.sqrt(y0)
    return 8 * math.pi * tau / (B * B * (k * k + tau * tau))


def g_phase(t, B, C, k, sign):
    """The rescaled t-phase g(t) (in units of full turns, e(g))."""
    s = 1 if sign == 1 else -1
    b = abs(B)
    return -s * (b * t / TWO_PI * math.log(b * C * (k * k + b * b * t * t) / (8 * math.pi * math.e * t))) - s * (
        k / math.pi
    ) * math.atan(b * t / k)


def g_prime(t, B, C, k, sign):
    s = 1 if sign == 1 else -1
    b = abs(B)
    return -s * b / TWO_PI * math.log(b * C * (k * k + b * b * t * t) / (8 * math.pi * t))


def closed_phase(B, C, k, sign, branch):
    """2 pi g(t0) from the closed form, in radians; None without a real t0."""
    x = B * B * C * k / (4 * math.pi)
    if x > 1:
        return None
    r = 1 + branch * math.sqrt(1 - x * x)
    s = 1 if sign == 1 else -1
    turns = s * (2 / (B * B * C) * r) - s * (k / math.pi) * math.atan(4 * math.pi / (B * B * C * k) * r)
    return TWO_PI * turns


def _phi_parts(tau, B, C, k, sign, V):
    """Amplitude and phase of the t-integrand after the y-integral is replaced
    by its stationary phase main term (y0 = tau^2 / (pi B)^2)."""
    tau = np.asarray(tau, dtype=float)
    y0 = (tau / (math.pi * B)) ** 2
    fpp = math.pi ** 3 * B ** 4 / (4 * np.abs(tau) ** 3)
    G = gk_factor(-0.5 + 1j * tau, k, sign)
    amp = np.asarray(V(y0)) / np.sqrt(y0 * fpp) * np.abs(G) / (TWO_PI * math.sqrt(C / math.pi ** 3))
    phase = (
        tau * math.log(C / math.pi ** 3)
        + 2 * tau * np.log(math.pi * math.e * abs(B) / np.abs(tau))
        + math.copysign(math.pi / 4, B)
        + np.angle(G)
    )
    return amp, phase


def _phi1(tau, B, C, k, sign, h=1e-5):
    gp = gk_factor(-0.5 + 1j * (tau + h), k, sign)
    gm = gk_factor(-0.5 + 1j * (tau - h), k, sign)
    return math.log(C / math.pi ** 3) + 2 * math.log(math.pi * abs(B) / abs(tau)) + np.angle(gp / gm) / (2 * h)


@dataclass
class AsymptoticResult:
    value: complex
    t0: float
    t0_closed: float
    phase: float
    phase_closed: float
    branch: int
    stationary_points: list = field(default_factory=list)
    pieces: dict = None


def transform_I_asymptotic(p, V=None):
    """Two-step stationary phase for I(B, C).

    The y-integral and then the tau-integral are each replaced by their leading
    stationary phase term; amplitudes and phases use the exact Gamma factors,
    so the result carries the constant phases that the inert functions absorb.
    Returns value, the stationary point t0 = |tau0| / |B| and the closed form
    t0 / phase for comparison.  Transitional parameters also get the dyadic
    pieces I_0, I_{+-T}.
    """
    V = _window(V)
    B, C, k, sign = p.B, p.C, p.k, p.sign
    if p.regime == "flat":
        raise ValueError("no stationary phase form in the flat regime; use transform_I_direct")
    a, b = V.support
    lo, hi = math.pi * abs(B) * math.sqrt(a), math.pi * abs(B) * math.sqrt(b)
    sg = 1.0 if B > 0 else -1.0
    grid = np.linspace(lo * (1 + 1e-9), hi * (1 - 1e-9), 801)
    d = np.array([_phi1(sg * t, B, C, k, sign) for t in grid])
    roots = []
    for i in np.nonzero(np.sign(d[:-1]) != np.sign(d[1:]))[0]:
        r = brentq(lambda t: _phi1(sg * t, B, C, k, sign), grid[i], grid[i + 1], xtol=1e-12)
        roots.append(r)
    total = 0j
    phase = None
    for r in roots:
        tau0 = sg * r
        hh = 1e-3 * max(1.0, r / 100)
        p2 = (_phi1(tau0 + hh, B, C, k, sign) - _phi1(tau0 - hh, B, C, k, sign)) / (2 * hh)
        amp, ph = _phi_parts(tau0, B, C, k, sign, V)
        term = float(amp) * math.sqrt(TWO_PI / abs(p2)) * np.exp(1j * (float(ph) + math.copysign(math.pi / 4, p2)))
        total += term
        if phase is None:
            phase = float(np.angle(term))
    if p.regime == "below_k":
        branch = -1
    elif p.regime == "above_k":
        branch = 1
    else:
        branch = 0
    t0 = roots[0] / abs(B) if roots else None
    if branch:
        t0c = stationary_t0(B, C, k, branch)
        phc = closed_phase(B, C, k, sign, branch)
    else:
        t0c = phc = None
    res = AsymptoticResult(complex(total), t0, t0c, phase, phc, branch, [r / abs(B) for r in roots])
    if p.regime == "transitional":
        res.pieces = transitional_pieces(p, V)
    return res


def _rho(x):
    """Smooth 1 on |x| <= 1, 0 on |x| >= 2."""
    return SmoothWindow("bump_U")(np.asarray(x) * 1.25)


def dyadic_partition(x, T_max):
    """phi_0 and the pieces (sigma, T) for T = 1, 2, 4, ..., T_max / 2.

    phi_0 keeps |x| <~ 1/T_max and |x| >~ 1; the pieces are
    rho(T x) - rho(2T x) restricted to sign(x) = sigma.  They sum to 1.
    """
    x = np.asarray(x, dtype=float)
    pieces = {}
    phi0 = (1 - _rho(x)) + _rho(T_max * x)
    T = 1
    while T < T_max:
        ring = _rho(T * x) - _rho(2 * T * x)
        pieces[(1, T)] = np.where(x > 0, ring, 0.0)
        pieces[(-1, T)] = np.where(x < 0, ring, 0.0)
        T *= 2
    return phi0, pieces


def transitional_pieces(p, V=None, T_max=None, n=20001):
    """I_0 and I_{+-T} from the y-reduced t-integral split by a dyadic partition
    in x = t - k/|B| (t = |tau| / |B|).  T_max defaults to the largest power of
    two not above k^(1/3).  Each piece is integrated numerically."""
    V = _window(V)
    B, C, k, sign = p.B, p.C, p.k, p.sign
    if T_max is None:
        T_max = 2 ** int(math.floor(math.log2(max(k ** (1 / 3), 1))))
    a, b = V.support
    t = np.linspace(math.pi * math.sqrt(a), math.pi * math.sqrt(b), n)
    tau = math.copysign(1.0, B) * abs(B) * t
    amp, ph = _phi_parts(tau, B, C, k, sign, V)
    f = amp * np.exp(1j * ph) * abs(B)
    x = t - k / abs(B)
    phi0, pieces = dyadic_partition(x, T_max)
    dt = t[1] - t[0]
    wts = np.full(n, dt)
    wts[0] = wts[-1] = dt / 2
    out = {"I0": complex(np.sum(wts * f * phi0))}
    for key, win in pieces.items():
        out[key] = complex(np.sum(wts * f * win))
    out["reduced_total"] = complex(np.sum(wts * f))
    out["T_max"] = T_max
    return out


# ---------------------------------------------------------------- Taylor identity


def taylor_coefficients(n):
    """Exact a_j with (1/(2Z))(1 - sqrt(1-Z^2)) - arctan((1 - sqrt(1-Z^2))/Z)
    = -sum_j a_j Z^(2j-1).

    With Z = sin(theta) the arctan is theta/2 = arcsin(Z)/2, so a_j is half
    the arcsin coefficient minus half the coefficient of (1 - sqrt(1-Z^2))/Z.
    """
    out = []
    for j in range(1, n + 1):
        m = j - 1
        asin = Fraction(math.comb(2 * m, m), 4 ** m * (2 * m + 1))
        # 1 - sqrt(1-x) = sum_{i>=1} C(2i,i) x^i / ((2i-1) 4^i)
        root = Fraction(math.comb(2 * j, j), (2 * j - 1) * 4 ** j)
        out.append(asin / 2 - root / 2)
    return out


def taylor_closed(Z):
    w = 1 - math.sqrt(1 - Z * Z)
    return w / (2 * Z) - math.atan(w / Z)


def taylor_series(Z, coeffs):
    return -sum(float(a) * Z ** (2 * j + 1) for j, a in enumerate(coeffs))


# ---------------------------------------------------------------- J


@dataclass
class CorrelationParams:
    B1: float
    B2: float
    C1: float
    C2: float
    D: float
    T: float = 0.0
    sigma: int = 1
    k: int = 12

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("T must be non-negative")
        if self.sigma not in (1, -1):
            raise ValueError("sigma must be +1 or -1")
        if self.C1 <= 0 or self.C2 <= 0:
            raise ValueError("C1, C2 must be positive")

    @property
    def H(self):
        return self.k ** 2 * abs(self.B1 ** 2 * self.C1 - self.B2 ** 2 * self.C2)


@dataclass
class RegimeReport:
    regime: str
    case: str
    H: float
    condition: str
    holds: bool
    envelope: float


SMALL = 3.0


def regime_report(p):
    """Which regime case of the J estimate applies, and whether its support
    condition holds with the desk constant SMALL standing in for P^eps."""
    r1, r2 = classify_regime(p.B1, p.k), classify_regime(p.B2, p.k)
    regime = r1 if r1 == r2 else f"{r1}/{r2}"
    H = p.H
    env_small = 1 / math.sqrt(p.C1 * p.C2)
    if p.T > 0:
        if H <= SMALL:
            return RegimeReport(regime, "transitional_T_smallH", H, "|D| << 1", abs(p.D) <= SMALL, p.k ** 3 * p.T)
        return RegimeReport(
            regime, "transitional_T_largeH", H, "|D| ~ H", H / SMALL <= abs(p.D) <= SMALL * H, p.k ** 3 * p.T / math.sqrt(H)
        )
    if r1 == "flat" and r2 == "flat":
        return RegimeReport(regime, "flat", H, "|D| << 1", abs(p.D) <= SMALL, env_small)
    Dp = p.D
    if r1 == "above_k" and r2 == "above_k":
        Dp = p.D + 4 * (1 / (p.B1 ** 2 * p.C1) - 1 / (p.B2 ** 2 * p.C2)) * (1 if p.B1 < 0 else -1)
    if H <= SMALL:
        return RegimeReport(regime, "smallH", H, "|D'| << 1", abs(Dp) <= SMALL, env_small)
    return RegimeReport(
        regime, "largeH", H, "|D'| ~ H", H / SMALL <= abs(Dp) <= SMALL * H, 1 / math.sqrt(p.C1 * p.C2 * H)
    )


def resonant_D(p, x0=1.5, V=None, h=1e-3):
    """D cancelling the x-derivative of the inner phases at x0, which is where
    |D| ~ H places the stationary point of the outer integral."""
    V = _window(V)
    xs = np.array([x0 - h, x0 + h])
    i1 = ContourSampler(p.B1, p.k, dominant_sign(p.B1), V).evaluate(p.C1 / xs)[0]
    i2 = ContourSampler(p.B2, p.k, dominant_sign(p.B2), V).evaluate(p.C2 / xs)[0]
    slope = np.angle((i1[1] * np.conj(i2[1])) / (i1[0] * np.conj(i2[0]))) / (2 * h)
    return float(-slope / TWO_PI)


@dataclass
class CorrelationResult:
    value: complex
    report: RegimeReport
    nodes: int
    change: float


def _piece_values(B, Cs, k, sign, V, T, sigma):
    out = []
    for C in Cs:
        pr = TransformParams(B, float(C), k, sign)
        pieces = transitional_pieces(pr, V)
        out.append(pieces.get((sigma, int(T)), 0j))
    return np.array(out)


def correlation_J(p, W=None, V=None, sign=None, tol=1e-6, budget=2e9, n0=24, n_max=384):
    """J = int W(x) I(B1, C1/x) conj(I(B2, C2/x)) e(D x) dx.

    Direct nested evaluation: the inner transforms come from one contour
    sampler per B, evaluated on Gauss-Legendre x nodes; the node count doubles
    until J moves by less than tol * max(1, |J|).  With T > 0 the inner factors
    are the transitional pieces I_{sigma T}.
    """
    W = W if W is not None else SmoothWindow("inert_V")
    V = _window(V)
    a, b = W.support
    s1 = dominant_sign(p.B1) if sign is None else sign
    s2 = dominant_sign(p.B2) if sign is None else sign
    if p.T == 0:
        samp1 = ContourSampler(p.B1, p.k, s1, V)
        samp2 = samp1 if (p.B2 == p.B1 and s1 == s2) else ContourSampler(p.B2, p.k, s2, V)
        per_node = 2 * len(samp1.tau)
    else:
        per_node = 2 * 20001
    if n_max * per_node > budget:
        raise CostGuardError(f"grid of {n_max} x {per_node} exceeds budget {budget:g}")

    def inner(n):
        x, w = np.polynomial.legendre.leggauss(n)
        x = 0.5 * (b - a) * x + 0.5 * (a + b)
        w = 0.5 * (b - a) * w
        if p.T == 0:
            i1 = samp1.evaluate(p.C1 / x)[0]
            i2 = samp2.evaluate(p.C2 / x)[0]
        else:
            i1 = _piece_values(p.B1, p.C1 / x, p.k, s1, V, p.T, p.sigma)
            i2 = _piece_values(p.B2, p.C2 / x, p.k, s2, V, p.T, p.sigma)
        return complex(np.sum(w * np.asarray(W(x)) * i1 * np.conj(i2) * np.exp(TWO_PI * 1j * p.D * x)))

    n = n0
    prev = inner(n)
    while True:
        n2 = 2 * n
        if n2 > n_max:
            raise CostGuardError(f"x-grid did not settle by {n_max} nodes")
        cur = inner(n2)
        change = abs(cur - prev)
        if change <= tol * max(1.0, abs(cur)):
            return CorrelationResult(cur, regime_report(p), n2, change)
        prev, n = cur, n2
