"""The opening steps of the S_d(N) analysis, run as exact finite sums.

    S_d(N) = sum_n lambda_rho(dn) A(1,n) V(d^3 n / N)

Inserting the delta identity for dn - m = 0 and writing c = a b with
alpha/c reduced to a unit alpha mod b splits S_d(N) into S_0 (P does not
divide b) and S_1 (b carries one factor P).  Every sum is finite, so the
split is checked as an identity, and the GL(2) Voronoi step on the m-sum is
checked against the same sum before the transform.

Desk scale only: the claims here are identities, never magnitudes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .arithmetic import (
    DirichletCharacter,
    is_prime,
    ramanujan_sum,
    sym_square_array,
    synthetic_hecke_sequence,
)
from .delta_method import DeltaKernelH, SmoothWindow
from .voronoi import VoronoiInstance, gl2_voronoi_check

MAX_N = 10 ** 4
MAX_C = 60
MAX_P = 13
SPLIT_TOL = 1e-8
VORONOI_STEP_TOL = 1e-4


class BudgetError(RuntimeError):
    pass


@dataclass
class PipelineConfig:
    P: int
    k: int = 12
    d: int = 1
    N: float = 2000.0
    C: float = 20.0
    V: SmoothWindow = SmoothWindow("inert_V")
    V0: SmoothWindow = SmoothWindow("plateau_V0")
    U: SmoothWindow = SmoothWindow("bump_U")
    W: SmoothWindow = SmoothWindow("annulus_W")
    rho: str = "synthetic"  # or "delta" for the level 1 ground truth
    chi: DirichletCharacter = None
    seed: int = 0

    def __post_init__(self):
        if not is_prime(self.P):
            raise ValueError(f"P={self.P} is not prime")
        if self.k % 2:
            raise ValueError("k must be even")
        if self.d < 1 or math.gcd(self.d, self.P) != 1:
            raise ValueError("need d >= 1 with (d, P) = 1")
        if not 1 <= self.C ** 2 <= self.N / self.d ** 2:
            raise ValueError(f"need 1 <= C^2 <= N/d^2, got C={self.C}, N={self.N}, d={self.d}")
        if self.C <= 1:
            raise ValueError("the delta identity needs C > 1")
        if self.rho not in ("synthetic", "delta"):
            raise ValueError("rho is 'synthetic' or 'delta'")
        if self.chi is None:
            self.chi = DirichletCharacter.trivial(self.P)

    def check_budget(self):
        if self.N > MAX_N or self.C > MAX_C or self.P > MAX_P:
            raise BudgetError(f"desk scale needs N <= {MAX_N}, C <= {MAX_C}, P <= {MAX_P}")

    @property
    def n_range(self):
        lo, hi = self.V.support
        return (int(math.ceil(lo * self.N / self.d ** 3)), int(math.floor(hi * self.N / self.d ** 3)))

    @property
    def m_range(self):
        lo, hi = self.V0.support
        return (int(math.ceil(lo * self.N / self.d ** 2)), int(math.floor(hi * self.N / self.d ** 2)))

    def params(self):
        return {"P": self.P, "k": self.k, "d": self.d, "N": self.N, "C": self.C, "rho": self.rho}


@dataclass
class Coefficients:
    lam: np.ndarray  # lambda_rho(m), index m
    A: np.ndarray  # A(1, n), index n


def coefficients(cfg, table):
    """lambda_rho on the m-range and A(1, n) on the n-range."""
    m_hi = max(cfg.m_range[1], cfg.d * cfg.n_range[1], 1)
    n_hi = max(cfg.n_range[1], 1)
    if max(m_hi, n_hi) > table.n_max:
        raise IndexError(f"table holds tau up to {table.n_max}, need {max(m_hi, n_hi)}")
    if cfg.rho == "delta":
        lam = np.array([0.0] + [table.tau[m] / m ** 5.5 for m in range(1, m_hi + 1)], dtype=complex)
    else:
        lam = np.array(synthetic_hecke_sequence(cfg.P, cfg.chi, m_hi, cfg.seed), dtype=complex)
    A = np.array(sym_square_array(table, n_hi))
    return Coefficients(lam, A)


def s_d_direct(cfg, table, coeffs=None):
    """sum over n in [N/d^3, 2N/d^3] of lambda_rho(dn) A(1,n) V(d^3 n/N)."""
    lo, hi = cfg.n_range
    if hi < max(lo, 1):
        return 0j
    co = coeffs or coefficients(cfg, table)
    total = 0j
    for n in range(max(lo, 1), hi + 1):
        v = cfg.V(cfg.d ** 3 * n / cfg.N)
        if v:
            total += co.lam[cfg.d * n] * co.A[n] * v
    return complex(total)


def trivial_bound_constant(cfg, table):
    """|S_d(N)| / (N/d^3): the measured constant in S_d(N) << N/d^3."""
    return abs(s_d_direct(cfg, table)) / (cfg.N / cfg.d ** 3)


def _correlation(cfg, co, r_max):
    """K(r) = sum_{dn - m = r} lambda(m) V0(d^2 m/N) A(1,n) V(d^3 n/N), |r| <= r_max."""
    n_lo, n_hi = cfg.n_range
    m_lo, m_hi = cfg.m_range
    ns = np.arange(max(n_lo, 1), n_hi + 1)
    K = np.zeros(2 * r_max + 1, dtype=complex)
    if len(ns) == 0:
        return K
    an = co.A[ns] * cfg.V(cfg.d ** 3 * ns / cfg.N)
    for i, r in enumerate(range(-r_max, r_max + 1)):
        ms = cfg.d * ns - r
        ok = (ms >= max(m_lo, 1)) & (ms <= m_hi)
        if not np.any(ok):
            continue
        mm = ms[ok]
        K[i] = np.sum(an[ok] * co.lam[mm] * cfg.V0(cfg.d ** 2 * mm / cfg.N))
    return K


def _unit_sum(r, B):
    """sum over units alpha mod B of e(alpha r / B), by enumeration."""
    al = np.array([x for x in range(B) if math.gcd(x, B) == 1])
    return float(np.sum(np.exp(2j * np.pi * ((al * r) % B) / B)).real)


@dataclass
class SplitResult:
    S0: complex
    S1: complex
    direct: complex
    residual: float
    normaliser: float
    cells: list = field(default_factory=list)

    @property
    def total(self):
        return self.S0 + self.S1

    def ledger(self, params=None):
        def cj(z):
            return [complex(z).real, complex(z).imag]
        out = {"params": params or {}, "S_d": cj(self.direct), "S0": cj(self.S0),
               "S1": cj(self.S1), "residual": self.residual, "normaliser": self.normaliser,
               "cells": [{"v": v, "a": a, "b": b, "value": cj(z)} for v, a, b, z in self.cells]}
        return json.dumps(out, sort_keys=True)


def s_d_delta_split(cfg, table, method="ramanujan", coeffs=None):
    """S_0 and S_1 by direct summation, and the residual against s_d_direct.

    S_v = (1/Cnorm) sum_a sum_{(P^(1-v), b) = 1} 1/(a b P^v) sum_m sum_n ...
          sum*_{alpha mod b P^v} e(alpha (dn - m)/(b P^v)) h(a b P^v / C, (dn - m)/(a b P^v C))

    The (m, n) sum is grouped by r = dn - m.  The unit sum over alpha is the
    Ramanujan sum c_B(r), or with method="enumerate" an explicit sum of roots
    of unity.  Moduli c = a b P^v run over 1 .. 2.5 C, the support of h.
    """
    cfg.check_budget()
    co = coeffs or coefficients(cfg, table)
    h = DeltaKernelH(cfg.U, cfg.W)
    C = cfg.C
    c_hi = int(math.floor(2.5 * C))
    norm = float(np.sum(cfg.W(np.arange(1, c_hi + 1) / C)))
    r_max = int(math.floor(2.5 * c_hi * C))
    K = _correlation(cfg, co, r_max)
    rs = np.arange(-r_max, r_max + 1)
    live = np.nonzero(K)[0]
    rs, K = rs[live], K[live]
    S = [0j, 0j]
    cells = []
    P = cfg.P
    for v in (0, 1):
        for a in range(1, c_hi + 1):
            for b in range(1, c_hi // a + 1):
                if v == 0 and b % P == 0:
                    continue
                B = b * P ** v
                c = a * B
                if c > c_hi:
                    continue
                hv = h(np.full(len(rs), c / C), rs / (c * C))
                sel = hv != 0
                if not np.any(sel):
                    continue
                if method == "ramanujan":
                    units = np.array([ramanujan_sum(int(r), B) for r in rs[sel]], dtype=float)
                elif method == "enumerate":
                    units = np.array([_unit_sum(int(r), B) for r in rs[sel]])
                else:
                    raise ValueError(f"unknown method {method}")
                cell = complex(np.sum(K[sel] * units * hv[sel])) / (c * norm)
                S[v] += cell
                cells.append((v, a, b, cell))
    direct = s_d_direct(cfg, table, co)
    residual = abs(S[0] + S[1] - direct)
    return SplitResult(S[0], S[1], direct, residual, norm, cells)


# ---------------------------------------------------------------- m-sum Voronoi


class MStepWindow:
    """y -> V0(d^2 y/N) h(a b P^v / C, (d n - y)/(a b P^v C)) as a test function."""

    kind = "m_step"

    def __init__(self, cfg, a, b, v, n):
        self.cfg, self.n = cfg, n
        self.c = a * b * cfg.P ** v
        self.h = DeltaKernelH(cfg.U, cfg.W)
        lo, hi = cfg.V0.support
        reach = 2.5 * self.c * cfg.C
        y_lo = max(lo * cfg.N / cfg.d ** 2, cfg.d * n - reach)
        y_hi = min(hi * cfg.N / cfg.d ** 2, cfg.d * n + reach)
        self.support = (y_lo, max(y_hi, y_lo))
        # the narrowest feature: the W bump of width c C in y
        self.feature = self.c * cfg.C

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        cfg = self.cfg
        x = np.full(y.shape, self.c / cfg.C)
        out = cfg.V0(cfg.d ** 2 * y / cfg.N) * self.h(x, (cfg.d * self.n - y) / (self.c * cfg.C))
        return float(out) if np.ndim(out) == 0 else out


@dataclass
class MStepResult:
    pre: complex
    post: complex
    gap: float
    dual_terms: int
    cutoff: float
    beyond_cutoff: float


def m_sum_cutoff(cfg, a):
    """N / (a^2 C^2 d^2): dual length of the m-sum at level 1."""
    return cfg.N / (a * a * cfg.C ** 2 * cfg.d ** 2)


def m_sum_voronoi_step(cfg, table, a, b, alpha, n, v=0, tol=VORONOI_STEP_TOL, n_max=None):
    """sum_m lambda(m) e(-alpha m/(b P^v)) F(m) before and after GL(2) Voronoi.

    Level 1 ground truth: lambda = tau(m)/m^(11/2), eta = 1, trivial
    character, modulus b P^v.  The dual sum carries e(alphabar m/(b P^v)).
    Also reports the relative share of dual terms beyond 4x the cutoff.
    """
    B = b * cfg.P ** v
    if math.gcd(alpha, B) != 1:
        raise ValueError("alpha must be a unit mod b P^v")
    F = MStepWindow(cfg, a, b, v, n)
    inst = VoronoiInstance((-alpha) % B if B > 1 else 0, B, F, kappa=12)
    if F.support[1] <= F.support[0]:
        return MStepResult(0j, 0j, 0.0, 0, m_sum_cutoff(cfg, a), 0.0)
    res = gl2_voronoi_check(inst, table, tol=tol, n_start=16, n_max=n_max,
                            omega_min=2 * math.pi * 8 / F.feature)
    cutoff = m_sum_cutoff(cfg, a)
    beyond = 0.0
    edge = int(math.ceil(4 * cutoff))
    if res.dual_terms > edge:
        full = gl2_voronoi_check(inst, table, tol=tol, n_start=edge, n_max=edge,
                                 omega_min=2 * math.pi * 8 / F.feature)
        beyond = abs(res.rhs - full.rhs) / max(abs(res.rhs), 1e-300)
    return MStepResult(res.lhs, res.rhs, res.gap, res.dual_terms, cutoff, beyond)


def split_grid(table, Ps=(5, 7), ds=(1, 2), Ns=(500, 2000), Cs=(10, 20)):
    """Residuals over the desk scale grid; skips cells violating C^2 <= N/d^2."""
    out = []
    for P in Ps:
        for d in ds:
            for N in Ns:
                for C in Cs:
                    if C * C > N / d ** 2 or math.gcd(d, P) != 1:
                        continue
                    cfg = PipelineConfig(P=P, d=d, N=float(N), C=float(C))
                    r = s_d_delta_split(cfg, table)
                    out.append((cfg.params(), r))
    return out


def v1_vanishes(cfg):
    """True when no modulus a b P <= 2.5 C exists, so S_1 is an empty sum."""
    return cfg.P > 2.5 * cfg.C


__all__ = [
    "PipelineConfig",
    "BudgetError",
    "s_d_direct",
    "s_d_delta_split",
    "m_sum_voronoi_step",
    "trivial_bound_constant",
    "split_grid",
    "v1_vanishes",
]
