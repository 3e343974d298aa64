"""The two-sum delta identity, its additive-character form, and the
elementary prime-modulus delta.

All windows are compactly supported, so every sum here is finite and the
identities hold exactly up to rounding.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .arithmetic import e_frac, is_prime

__all__ = [
    "Jet",
    "SmoothWindow",
    "DeltaConfig",
    "DeltaKernelH",
    "DeltaResult",
    "TrivialDeltaError",
    "delta_general",
    "delta_corollary",
    "trivial_delta",
    "corollary_config",
    "write_ledger_csv",
]

MAX_DERIV = 6


class Jet:
    """Truncated Taylor series: c[j] = f^(j)(x)/j!, vectorised over x."""

    __slots__ = ("c",)

    def __init__(self, c):
        self.c = c

    @classmethod
    def variable(cls, x, order=MAX_DERIV):
        x = np.asarray(x, dtype=float)
        c = np.zeros((order + 1,) + x.shape)
        c[0] = x
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def const(cls, v, like):
        c = np.zeros_like(like.c)
        c[0] = v
        return cls(c)

    @property
    def order(self):
        return self.c.shape[0] - 1

    def __add__(self, o):
        if isinstance(o, Jet):
            return Jet(self.c + o.c)
        c = self.c.copy()
        c[0] = c[0] + o
        return Jet(c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c)

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if not isinstance(o, Jet):
            return Jet(self.c * o)
        n = self.order
        out = np.zeros_like(self.c)
        for k in range(n + 1):
            for j in range(k + 1):
                out[k] = out[k] + self.c[j] * o.c[k - j]
        return Jet(out)

    __rmul__ = __mul__

    def reciprocal(self):
        n = self.order
        h = np.zeros_like(self.c)
        f0 = self.c[0]
        h[0] = 1.0 / f0
        for k in range(1, n + 1):
            s = np.zeros_like(f0)
            for j in range(1, k + 1):
                s = s + self.c[j] * h[k - j]
            h[k] = -s / f0
        return Jet(h)

    def __truediv__(self, o):
        if isinstance(o, Jet):
            return self * o.reciprocal()
        return Jet(self.c / o)

    def exp(self):
        n = self.order
        g = np.zeros_like(self.c)
        g[0] = np.exp(self.c[0])
        for k in range(1, n + 1):
            s = np.zeros_like(g[0])
            for j in range(1, k + 1):
                s = s + j * self.c[j] * g[k - j]
            g[k] = s / k
        return Jet(g)

    def derivative(self, j):
        return self.c[j] * math.factorial(j)


def _flat_exp_inv(t):
    """Jet of F(t) = exp(-1/t) for t > 0, 0 otherwise."""
    x = t.c[0]
    live = x > 1.0 / 700.0
    safe = np.where(live, x, 1.0)
    tt = Jet(t.c.copy())
    tt.c[0] = safe
    out = (-(tt.reciprocal())).exp()
    out.c = np.where(live, out.c, 0.0)
    return out


def _smooth_step(t):
    """0 for t <= 0, 1 for t >= 1, C-infinity in between."""
    a = _flat_exp_inv(t)
    b = _flat_exp_inv(1.0 - t)
    return a / (a + b)


def _bump01(t):
    """exp(1 - 1/(1 - s^2)) with s = 2t - 1 on (0,1); peak value 1 at t = 1/2."""
    s = 2.0 * t - 1.0
    x = s.c[0]
    live = np.abs(x) < 1.0 - 1e-3
    ss = Jet(s.c.copy())
    ss.c[0] = np.where(live, x, 0.0)
    one_minus = 1.0 - ss * ss
    out = (1.0 - one_minus.reciprocal()).exp()
    out.c = np.where(live, out.c, 0.0)
    return out


def _flat_value(x):
    live = x > 1.0 / 700.0
    return np.where(live, np.exp(-1.0 / np.where(live, x, 1.0)), 0.0)


def _step_value(x):
    a = _flat_value(x)
    return a / (a + _flat_value(1.0 - x))


def _bump_value(t):
    s = 2.0 * t - 1.0
    live = np.abs(s) < 1.0 - 1e-3
    ss = np.where(live, s, 0.0)
    return np.where(live, np.exp(1.0 - 1.0 / (1.0 - ss * ss)), 0.0)


def _abs_jet(t):
    sgn = np.where(t.c[0] < 0, -1.0, 1.0)
    return Jet(t.c * sgn)


KINDS = ("bump_U", "annulus_W", "inert_V", "plateau_V0")


@dataclass(frozen=True)
class SmoothWindow:
    """A compactly supported bump evaluated at x/scale.

    bump_U    even, 1 on [-2,2], 0 outside [-2.5,2.5]
    annulus_W even, support [-2,-1] u [1,2], peak 1
    inert_V   support [1,2], peak 1
    plateau_V0 support [1/2,5/2], 1 on [1,2]
    """

    kind: str
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown window kind {self.kind}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def support(self):
        s = self.scale
        if self.kind == "bump_U":
            return (-2.5 * s, 2.5 * s)
        if self.kind == "annulus_W":
            return (-2.0 * s, 2.0 * s)
        if self.kind == "plateau_V0":
            return (0.5 * s, 2.5 * s)
        return (1.0 * s, 2.0 * s)

    @property
    def support_radius(self):
        return max(abs(v) for v in self.support)

    def _jet(self, x, order):
        t = Jet.variable(np.asarray(x, dtype=float) / self.scale, order)
        if self.kind == "bump_U":
            return _smooth_step((2.5 - _abs_jet(t)) / 0.5)
        if self.kind == "annulus_W":
            return _bump01(_abs_jet(t) - 1.0)
        if self.kind == "plateau_V0":
            return _smooth_step((t - 0.5) / 0.5) * _smooth_step((2.5 - t) / 0.5)
        return _bump01(t - 1.0)

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        t = np.asarray(x, dtype=float) / self.scale
        if self.kind == "bump_U":
            out = _step_value((2.5 - np.abs(t)) / 0.5)
        elif self.kind == "annulus_W":
            out = _bump_value(np.abs(t) - 1.0)
        elif self.kind == "plateau_V0":
            out = _step_value((t - 0.5) / 0.5) * _step_value((2.5 - t) / 0.5)
        else:
            out = _bump_value(t - 1.0)
        return float(out) if np.ndim(x) == 0 else out

    def derivative(self, j, x):
        if not 0 <= j <= MAX_DERIV:
            raise ValueError(f"derivatives available up to order {MAX_DERIV}")
        out = self._jet(x, j).derivative(j) / self.scale ** j
        return float(out) if np.ndim(x) == 0 else out

    def derivatives(self, x, order=MAX_DERIV):
        """Array of f, f', ..., f^(order) at x."""
        jet = self._jet(x, order)
        return np.array([jet.derivative(j) / self.scale ** j for j in range(order + 1)])

    def scaled(self, factor):
        return SmoothWindow(self.kind, self.scale * factor)


@dataclass(frozen=True)
class DeltaKernelH:
    """h(x,y) = W(x)U(x)U(y) - W(y)U(x)U(y)."""

    U: SmoothWindow = SmoothWindow("bump_U")
    W: SmoothWindow = SmoothWindow("annulus_W")

    def __call__(self, x, y):
        ux = self.U(x)
        uy = self.U(y)
        return (self.W(x) - self.W(y)) * ux * uy


@dataclass(frozen=True)
class DeltaConfig:
    C: float
    D: float
    q: int = 1
    U: SmoothWindow = SmoothWindow("bump_U")
    W: SmoothWindow = SmoothWindow("annulus_W")

    def __post_init__(self):
        if self.C <= 1 or self.D <= 1:
            raise ValueError("C and D must exceed 1")
        if self.q < 1:
            raise ValueError("q must be a positive integer")

    def check_range(self, N, eps=0.1):
        if not self.C > N ** eps:
            raise ValueError(f"C={self.C} must exceed N^eps = {N ** eps}")


def corollary_config(q, C):
    """C = D with W(x) = W'(x/C): the specialisation behind the corollary form."""
    return DeltaConfig(C, C, q, SmoothWindow("bump_U"), SmoothWindow("annulus_W", C))


@dataclass
class DeltaResult:
    value: float
    ledger: list = field(default_factory=list)
    normaliser: float = 0.0

    def __float__(self):
        return self.value


def _ranges(cfg):
    c_hi = int(math.floor(cfg.U.support_radius / cfg.U.scale * cfg.C))
    d_hi = int(math.floor(cfg.U.support_radius / cfg.U.scale * cfg.D))
    return c_hi, d_hi


def delta_general(n, cfg, with_ledger=False):
    """S_1 - S_2 with the c and d sums cut exactly by the supports."""
    q = cfg.q
    U, W = cfg.U, cfg.W
    c_hi, d_hi = _ranges(cfg)
    cs = np.arange(1, c_hi + 1)
    norm = float(np.sum(W(cs.astype(float)) * U(cs / cfg.C)))
    if norm == 0:
        raise ValueError("the normaliser sum vanishes; W and C are incompatible")
    UC = 1.0 / norm
    ledger = []
    s1 = 0.0
    for c in range(1, c_hi + 1):
        if n % (c * q):
            t = 0.0
        else:
            t = UC * W(float(c)) * U(n / (c * cfg.D * q)) * U(c / cfg.C)
        s1 += t
        ledger.append(("S1", c, t))
    s2 = 0.0
    for d in range(1, d_hi + 1):
        if n % (d * q):
            t = 0.0
        else:
            t = UC * W(n / (d * q)) * U(n / (cfg.C * d * q)) * U(d / cfg.D)
        s2 += t
        ledger.append(("S2", d, t))
    res = DeltaResult(s1 - s2, ledger if with_ledger else [], norm)
    return res if with_ledger else res.value


def _alpha_sums(n, ms, method):
    if method == "exact":
        return np.where(n % ms == 0, ms, 0).astype(float)
    out = np.empty(len(ms))
    for i, m in enumerate(ms):
        alphas = np.arange(m)
        out[i] = np.sum(np.exp(2j * np.pi * ((alphas * n) % m) / m)).real
    return out


def delta_corollary(n, q, C, kernel=None, method="exact"):
    """(1/Cnorm) sum_c 1/(cq) sum_{alpha mod cq} e(alpha n/(cq)) h(c/C, n/(cCq)).

    Returns a DeltaResult whose ledger rows are (c, alpha_sum, h, term),
    c ascending over [1, 2.5C].  method="enumerate" sums the roots of
    unity numerically instead of using sum = cq [cq | n].

    c runs over 1..2.5C: the W(x) half of h lives on c ~ C, but the W(y)
    half reaches down to c = 1 when |n| is comparable to Cq.
    """
    if C <= 1:
        raise ValueError("C must exceed 1")
    h = kernel or DeltaKernelH()
    lo = 1
    hi = int(math.ceil(2.5 * C))
    norm = float(np.sum(h.W(np.arange(1, hi + 1) / C)))
    cs = np.arange(lo, hi + 1)
    ms = cs * q
    hv = h(cs / C, n / (cs * C * q))
    a = _alpha_sums(n, ms, method)
    terms = np.where(hv == 0.0, 0.0, a * hv / (ms * norm))
    total = 0.0
    for t in terms:  # ascending c, fixed order
        total += t
    ledger = list(zip(cs.tolist(), a.tolist(), hv.tolist(), terms.tolist()))
    return DeltaResult(total, ledger, norm)


def ledger_gap(n, q, C):
    """Largest row gap between the corollary ledger and delta_general run at
    corollary_config(q, C), where corollary row c should equal S1(c) - S2(c).
    """
    gen = delta_general(n, corollary_config(q, C), with_ledger=True)
    cor = delta_corollary(n, q, C)
    s1 = {c: t for tag, c, t in gen.ledger if tag == "S1"}
    s2 = {d: t for tag, d, t in gen.ledger if tag == "S2"}
    seen = set()
    worst = 0.0
    for c, _, _, term in cor.ledger:
        seen.add(c)
        worst = max(worst, abs(term - (s1.get(c, 0.0) - s2.get(c, 0.0))))
    # rows outside the corollary range must be empty
    for key in (set(s1) | set(s2)) - seen:
        worst = max(worst, abs(s1.get(key, 0.0) - s2.get(key, 0.0)))
    return worst


def write_ledger_csv(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["c", "alpha_sum", "h", "term"])
        for row in result.ledger:
            w.writerow(row)


class TrivialDeltaError(ValueError):
    def __init__(self, msg, witness, value):
        super().__init__(msg)
        self.witness = witness
        self.value = value


def trivial_delta(n, p, Y, h=None, check=True):
    """delta(p | n) h(n/Y), which equals delta(n = 0) once p > Y * radius(h).

    The default h is the unit bump supported in [-1, 1].
    """
    if h is None:
        h = SmoothWindow("bump_U", 1.0 / 2.5)
    if not is_prime(p):
        raise ValueError("p must be prime")
    if abs(h(0.0) - 1.0) > 1e-15:
        raise ValueError("h(0) must be 1")
    if check and p <= Y * h.support_radius:
        raise TrivialDeltaError(
            f"p={p} does not exceed Y*radius={Y * h.support_radius}; n=p is a counterexample",
            witness=p, value=h(p / Y))
    return (1.0 if n % p == 0 else 0.0) * h(n / Y)
