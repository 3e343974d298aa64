"""Command line front end.

    artifact verify <suite> [--config PATH] [--report PATH] [--jobs N] [--seed S]
    artifact audit-delta --n N --q Q --C C [--out PATH]
    artifact build-cache N [--dir DIR]
    artifact kloosterman a b c
    artifact exponents trace

Exit status: 0 when every case passes (skipped cases do not count as
failures), 1 when any case fails, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import random
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import arithmetic as ar
from . import delta_method as dm
from . import exponents as ex
from . import oscillatory as osc
from . import pipeline as pl
from . import special_functions as sf
from . import voronoi as vo

SUITES = (
    "delta",
    "gamma-bessel",
    "kloosterman",
    "hecke",
    "voronoi-gl2",
    "voronoi-gl3",
    "stationary-phase",
    "transform-I",
    "correlation-J",
    "pipeline",
    "exponents",
)

# budgets are conservative so that `verify all` stays within a laptop quarter hour
DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "record_runtime": True,
    "cache_dir": "",
    "tau_n_max": 200000,
    "max_quad_evals": vo.DUAL_BUDGET,
    "max_tuples": 10 ** 6,
    "delta_n_max": 1000,
    "equivalence_cases": 20,
    "kloosterman_c_max": 50,
    "congruence_systems": 50,
    "hecke_mn_max": 1000,
    "deligne_n_max": 10000,
    "correlation_budget": 2e9,
}


class ConfigError(ValueError):
    pass


class Skip(Exception):
    """Raised by a case that would exceed a configured budget."""


def _coerce(key, raw):
    default = DEFAULTS[key]
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return raw.strip()


def parse_config(text):
    """Flat `key = value` lines; `#` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, raw)
    return out


def load_config(path=None, overrides=None):
    cfg = dict(DEFAULTS)
    if path:
        try:
            with open(path) as fh:
                cfg.update(parse_config(fh.read()))
        except OSError as err:
            raise ConfigError(f"cannot read config: {err}") from None
    for key, val in (overrides or {}).items():
        if val is not None:
            cfg[key] = val
    if cfg["jobs"] < 1:
        raise ConfigError("jobs must be at least 1")
    return cfg


# ---------------------------------------------------------------- report types


@dataclass
class CaseResult:
    name: str
    params: dict
    observed: object
    expected: object
    tolerance: float
    status: str  # pass, fail or skipped
    runtime_ms: int = 0

    def to_dict(self):
        return {
            "name": self.name,
            "params": self.params,
            "observed": self.observed,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "pass": self.status == "pass",
            "status": self.status,
            "runtime_ms": self.runtime_ms,
        }


@dataclass
class VerificationReport:
    suite: str
    cases: list = field(default_factory=list)

    @property
    def summary(self):
        passed = sum(c.status == "pass" for c in self.cases)
        failed = sum(c.status == "fail" for c in self.cases)
        skipped = sum(c.status == "skipped" for c in self.cases)
        return {"passed": passed, "failed": failed, "skipped": skipped, "total": len(self.cases)}

    @property
    def ok(self):
        return self.summary["failed"] == 0

    def to_dict(self):
        return {"suite": self.suite, "cases": [c.to_dict() for c in self.cases],
                "summary": self.summary}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, default=_jsonable)


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    return str(x)


# ---------------------------------------------------------------- run context


class Context:
    """Config plus lazily built, shared coefficient tables."""

    def __init__(self, config):
        self.config = config
        self._lock = threading.Lock()
        self._table = None

    def rng(self, salt):
        return random.Random(f"{self.config['seed']}:{salt}")

    def table(self, n_max=None):
        n_max = n_max or self.config["tau_n_max"]
        with self._lock:
            if self._table is None or self._table.n_max < n_max:
                self._table = _load_or_build(max(n_max, self.config["tau_n_max"]),
                                             self.config["cache_dir"])
            return self._table


def _load_or_build(n_max, directory):
    if directory:
        path = ar.cache_path(directory)
        if os.path.exists(path):
            tab = ar.read_tau_cache(path)
            if tab.n_max >= n_max:
                return tab
        tab = ar.build_tau_table(n_max)
        os.makedirs(directory, exist_ok=True)
        ar.write_tau_cache(path, tab)
        return tab
    return ar.build_tau_table(n_max)


@dataclass
class Case:
    name: str
    params: dict
    run: object  # ctx -> (observed, expected, tolerance, passed)


def _le(observed, tol, expected=0.0):
    return observed, expected, tol, bool(observed <= tol)


def _run_case(case, ctx):
    t0 = time.perf_counter()
    try:
        obs, exp, tol, ok = case.run(ctx)
        status = "pass" if ok else "fail"
    except (Skip, osc.CostGuardError, pl.BudgetError, ar.EnumerationBudgetError) as err:
        obs, exp, tol, status = f"skipped: {err}", None, None, "skipped"
    except Exception as err:  # a crash is a failed case, not a dead run
        obs, exp, tol, status = f"error: {type(err).__name__}: {err}", None, None, "fail"
    ms = int(round((time.perf_counter() - t0) * 1000)) if ctx.config["record_runtime"] else 0
    return CaseResult(case.name, case.params, obs, exp, tol, status, ms)


# ---------------------------------------------------------------- suites


def _delta_cases(ctx):
    cases = []
    n_max = ctx.config["delta_n_max"]

    def sweep(q, C):
        def run(_):
            worst = 0.0
            for n in range(-n_max, n_max + 1):
                v = dm.delta_corollary(n, q, C).value
                worst = max(worst, abs(v - (1.0 if n == 0 else 0.0)))
            return _le(worst, 1e-9)
        return run

    for q in (1, 2, 3, 5):
        for C in (20, 50, 100):
            cases.append(Case(f"corollary sweep q={q} C={C}", {"q": q, "C": C, "n_max": n_max},
                              sweep(q, C)))
    rng = ctx.rng("delta-equivalence")
    for i in range(ctx.config["equivalence_cases"]):
        n = rng.randint(-n_max, n_max)
        q = rng.choice((1, 2, 3, 5))
        C = rng.choice((20.0, 30.0, 50.0, 75.5, 100.0))
        cases.append(Case(f"ledger equivalence {i:02d}", {"n": n, "q": q, "C": C},
                          lambda _, n=n, q=q, C=C: _le(dm.ledger_gap(n, q, C), 1e-12)))
    cases.append(Case("general form n=7 C=D=20", {"n": 7, "q": 1, "C": 20, "D": 20},
                      lambda _: _le(abs(dm.delta_general(7, dm.corollary_config(1, 20.0))), 1e-9)))

    def trivial(_):
        v = dm.trivial_delta(17, 101, 50.0)
        return v, 0.0, 0.0, v == 0.0
    cases.append(Case("trivial delta p=101 Y=50 n=17", {"p": 101, "Y": 50, "n": 17}, trivial))
    return cases


def _gamma_cases(ctx):
    cases = []

    def modulus(_):
        worst = 0.0
        for nu in (0.25, 0.75, 1.5, 5.0):
            for tau in (0.0, 1.0, 10.0, 50.0, 300.0):
                z = complex(nu, tau)
                ratio = np.exp(sf.log_gamma(z) - sf.log_gamma(z.conjugate()))
                worst = max(worst, abs(abs(ratio) - 1.0))
        return _le(worst, 1e-12)
    cases.append(Case("gamma ratio modulus", {"nu": [0.25, 0.75, 1.5, 5.0],
                                              "tau": [0, 1, 10, 50, 300]}, modulus))

    def asym(_):
        r = sf.gamma_ratio(0.75, 50.0, 6)
        return _le(abs(r.value - r.asymptotic), 1e-6)
    cases.append(Case("gamma ratio main term nu=0.75 tau=50", {"order": 6}, asym))
    cases.append(Case("F+ decay B=10", {"B": 10, "sign": 1},
                      lambda _: _le(abs(sf.f_pm_decay(10.0, 1)), 1e-6)))

    def reflection(_):
        worst = 0.0
        for z in (0.3, 0.5 + 0.2j, 1.7 - 0.4j, -2.5 + 1j):
            v = sf.gamma(z) * sf.gamma(1 - z) * np.sin(np.pi * z) / np.pi
            worst = max(worst, abs(v - 1))
        return _le(worst, 1e-10)
    cases.append(Case("reflection formula", {}, reflection))

    def recurrence(_):
        worst = 0.0
        for nu in (1, 5, 11):
            for x in (0.5, 3.0, 20.0, 60.0, 200.0):
                r = sf.bessel_j(nu - 1, x) + sf.bessel_j(nu + 1, x) - 2 * nu / x * sf.bessel_j(nu, x)
                worst = max(worst, abs(r))
        return _le(worst, 1e-8)
    cases.append(Case("bessel recurrence", {"nu": [1, 5, 11], "x": [0.5, 3, 20, 60, 200]},
                      recurrence))

    def derivative(_):
        worst, h = 0.0, 1e-5
        for nu in (1, 5, 11):
            for x in (0.5, 3.0, 20.0):
                fd = (sf.bessel_j(nu, x + h) - sf.bessel_j(nu, x - h)) / (2 * h)
                worst = max(worst, abs(fd - (sf.bessel_j(nu - 1, x) - sf.bessel_j(nu + 1, x)) / 2))
        return _le(worst, 1e-8)
    cases.append(Case("bessel derivative identity", {"nu": [1, 5, 11], "x": [0.5, 3, 20]},
                      derivative))
    return cases


def random_congruence_system(rng):
    """A desk scale system with every divisibility condition satisfied."""
    P = rng.choice((3, 5, 7))
    v = rng.choice((0, 1))
    d = rng.choice([x for x in (1, 2, 4) if math.gcd(x, P) == 1])
    b1, b2 = (rng.choice([b for b in range(1, 7) if math.gcd(b, P) == 1]) for _ in range(2))

    def pick(b):
        g = math.gcd(b, d)
        top = (b // g) * P ** v
        n = rng.choice(ar.divisors(top))
        u = rng.choice(ar.divisors(b * P ** v))
        return n, u
    n1, u1 = pick(b1)
    n2, u2 = pick(b2)
    m1 = rng.randint(-6, 4)
    m2 = rng.randint(-6, 4)
    n0 = rng.randint(-10, 10)
    return ar.CongruenceSystem(b1, b2, d, P, v, n1, n2, u1, u2, (m1, m1 + rng.randint(2, 8)),
                               (m2, m2 + rng.randint(2, 8)), (n0, n0 + rng.randint(5, 20)),
                               sign=rng.choice((1, -1)), n_only=rng.random() < 0.2)


def _kloosterman_cases(ctx):
    cases = []
    for a, b, c, want in ((1, 1, 2, 1.0), (1, 1, 3, -1.0)):
        cases.append(Case(f"S({a},{b};{c})", {"a": a, "b": b, "c": c},
                          lambda _, a=a, b=b, c=c, w=want: _le(abs(ar.kloosterman(a, b, c) - w), 1e-12, w)))
    c_max = ctx.config["kloosterman_c_max"]

    def symmetric(_):
        worst = 0.0
        for c in range(1, c_max + 1):
            for a in range(1, c + 1):
                for b in range(a, c + 1):
                    s, t = ar.kloosterman(a, b, c), ar.kloosterman(b, a, c)
                    worst = max(worst, abs(s - t), abs(s.imag))
        return _le(worst, 1e-9)
    cases.append(Case(f"symmetric and real c<={c_max}", {"c_max": c_max}, symmetric))

    def twisted(_):
        worst = 0.0
        for c1, c2 in ((3, 4), (5, 7), (8, 9), (4, 15)):
            for a, b in ((1, 1), (2, 3), (5, 0), (6, 10)):
                lhs = ar.kloosterman(a, b, c1 * c2)
                i2, i1 = ar.modinv(c2, c1), ar.modinv(c1, c2)
                rhs = ar.kloosterman(a * i2, b * i2, c1) * ar.kloosterman(a * i1, b * i1, c2)
                worst = max(worst, abs(lhs - rhs))
        return _le(worst, 1e-9)
    cases.append(Case("twisted multiplicativity", {}, twisted))

    def ramanujan(_):
        worst = 0.0
        for c in range(1, 40):
            for b in range(-5, 30):
                worst = max(worst, abs(ar.kloosterman(0, b, c) - ar.ramanujan_sum(b, c)))
        return _le(worst, 1e-9)
    cases.append(Case("S(0,b;c) is the Ramanujan sum", {"c_max": 39}, ramanujan))

    rng = ctx.rng("congruences")
    budget = ctx.config["max_tuples"]
    for i in range(ctx.config["congruence_systems"]):
        sys_ = random_congruence_system(rng)
        H = rng.choice((None, 0, 1, 5, 40))

        def run(_, s=sys_, H=H):
            n, _w = ar.enumerate_congruences(s, H, budget=budget)
            m = ar.enumerate_congruences_dual(s, H)
            return n, m, 0, n == m
        cases.append(Case(f"congruence count {i:02d}", {"system": repr(sys_), "H": H}, run))
    return cases


def _hecke_cases(ctx):
    cases = []
    mn_max = ctx.config["hecke_mn_max"]

    def gl2(c):
        tab = c.table(mn_max)
        worst = 0
        for m in range(1, mn_max + 1):
            for n in range(1, mn_max // m + 1):
                worst = max(worst, ar.gl2_hecke_check(tab, m, n, rational=True))
        return worst, 0, 0, worst == 0
    cases.append(Case(f"GL2 Hecke relation mn<={mn_max}", {"rational": True}, gl2))

    def sym(c):
        tab = c.table(mn_max)
        worst = 0
        for m in range(1, mn_max + 1):
            for n in range(1, mn_max // m + 1):
                worst = max(worst, ar.sym_hecke_check(tab, m, n))
        return float(worst), 0, 0, worst == 0
    cases.append(Case(f"Sym2 Hecke relation mn<={mn_max}", {"rational": True}, sym))

    def deligne(c):
        n_max = ctx.config["deligne_n_max"]
        r = ar.deligne_check(c.table(n_max), n_max)
        return r.worst_ratio, 1.0, 1.0, r.worst_ratio <= 1.0
    cases.append(Case("Deligne bound", {"n_max": ctx.config["deligne_n_max"]}, deligne))

    def tau(c):
        tab = c.table()
        oracle = ar.tau_naive(300)
        bad = sum(tab.tau[n] != oracle[n] for n in range(1, 301))
        return bad, 0, 0, bad == 0
    cases.append(Case("tau against the divisor-sum recurrence", {"n_max": 300}, tau))
    return cases


def _gl2_cases(ctx):
    cases = []
    for a, c, scale in ((0, 1, 10.0), (0, 1, 50.0), (1, 2, 50.0), (2, 5, 50.0)):
        def run(cx, a=a, c=c, scale=scale):
            inst = vo.VoronoiInstance(a, c, dm.SmoothWindow("inert_V", scale))
            r = vo.gl2_voronoi_check(inst, cx.table(), budget=cx.config["max_quad_evals"])
            return r.gap, 0.0, r.tolerance * r.scale, r.passed
        cases.append(Case(f"GL2 c={c} a={a} F on [{scale:g},{2 * scale:g}]",
                          {"a": a, "c": c, "support": [scale, 2 * scale]}, run))
    return cases


def _gl3_cases(ctx):
    cases = []
    psi = dm.SmoothWindow("inert_V", 100.0)
    for a, c in ((0, 1), (1, 2)):
        def run(cx, a=a, c=c):
            inst = vo.VoronoiInstance(a, c, psi)
            r = vo.gl3_voronoi_check(inst, cx.table(), budget=cx.config["max_quad_evals"])
            return r.gap, 0.0, r.tolerance * r.scale, r.passed
        cases.append(Case(f"GL3 c={c} a={a} psi on [100,200]", {"a": a, "c": c, "k": 12}, run))

    def sigma(_):
        w = dm.SmoothWindow("inert_V")
        worst = 0.0
        for x in (0.5, 1.0, 7.0):
            v1 = vo.psi_pm(x, 12, w, 1, sigma=-0.75)
            v2 = vo.psi_pm(x, 12, w, 1, sigma=-0.25)
            worst = max(worst, abs(v1 - v2))
        return _le(worst, 1e-8)
    cases.append(Case("Psi contour shift", {"sigma": [-0.75, -0.25], "x": [0.5, 1, 7]}, sigma))
    return cases


def _bump_phase(R, center=1.5):
    return osc.PhaseIntegral(
        dm.SmoothWindow("inert_V"),
        lambda t: math.pi * R * (np.asarray(t) - center) ** 2,
        lambda t, j: (2 * math.pi * R * (np.asarray(t) - center) if j == 1 else
                      np.full(np.shape(t), 2 * math.pi * R) if j == 2 else np.zeros(np.shape(t))),
        Z=1.0, X=1.0, Y=R)


def stationary_relative_error(R):
    pi = _bump_phase(R)
    main, _ = osc.stationary_phase_main(pi)
    oracle = osc.oscillatory_quadrature(pi, 1e-13)
    return abs(main - oracle) / abs(oracle)


def nonstationary_instance(R):
    """Linear phase R t on the unit bump: |phi'| = R = Y/Z with Z = X = 1."""
    return osc.PhaseIntegral(
        dm.SmoothWindow("inert_V"),
        lambda t: R * np.asarray(t),
        lambda t, j: np.full(np.shape(t), float(R)) if j == 1 else np.zeros(np.shape(t)),
        Z=1.0, X=1.0, Y=R)


def _stationary_cases(ctx):
    cases = []
    for R in (1e2, 1e3, 1e4):
        cases.append(Case(f"stationary phase R={R:g}", {"R": R},
                          lambda _, R=R: _le(stationary_relative_error(R), 5 / R)))

    def nonstat(_):
        r = osc.nonstationary_decay_check(nonstationary_instance(1e3))
        return r["value"], 0.0, r["bound"], bool(r["pass"] and r["hypothesis"])
    cases.append(Case("nonstationary R=1000", {"R": 1e3, "Z": 1}, nonstat))

    def second(_):
        worst = 0.0
        for R in (10.0, 100.0, 1000.0):
            pi = osc.PhaseIntegral(dm.SmoothWindow("inert_V"),
                                   lambda t, R=R: R * (np.asarray(t) - 1.5) ** 2 / 2,
                                   lambda t, j, R=R: (R * (np.asarray(t) - 1.5) if j == 1 else
                                                      np.full(np.shape(t), R)),
                                   Z=1.0, X=1.0, Y=R)
            worst = max(worst, osc.second_derivative_bound_check(pi, R))
        return _le(worst, 2.0)
    cases.append(Case("second derivative constant", {"R": [10, 100, 1000]}, second))
    return cases


ABOVE_K_B = (400.0, 550.0, 700.0, 850.0, 1000.0)
BELOW_K_B = (3.2, 3.4, 3.6, 3.8, 4.0)
GRID_Y0 = (1.35, 1.45, 1.55, 1.65)
# C at and below the flat cutoff k^-2/10 for k = 12
FLAT_POINTS = tuple((B, 12 ** -2 / r) for B in (0.5, 2.0, -1.0) for r in (10, 20, 100))


def transform_grid_errors(Bs, k=12, y0s=GRID_Y0):
    """(ratio, phase error) of asymptotic against direct on the B x y0 grid.

    A missing stationary point makes the asymptotic 0, so the ratio is 0.
    """
    out = []
    for B in Bs:
        Cs = [osc.c_for_stationary(B, k, y0) for y0 in y0s]
        direct, _ = osc.transform_I_many(B, Cs, k)
        for C, d in zip(Cs, direct):
            a = osc.transform_I_asymptotic(osc.TransformParams(B, C, k)).value
            ratio = abs(a) / abs(d)
            phase = abs(float(np.angle(a / d))) if a != 0 else math.pi
            out.append((B, C, ratio, phase))
    return out


def flat_cutoff_values(k=12, points=FLAT_POINTS):
    return [abs(osc.transform_I_direct(osc.TransformParams(B, C, k), tol=1e-10).value)
            for B, C in points]


def _transform_cases(ctx):
    cases = []

    def grid(Bs):
        def run(_):
            errs = transform_grid_errors(Bs)
            r_lo = min(e[2] for e in errs)
            r_hi = max(e[2] for e in errs)
            ph = max(e[3] for e in errs)
            ok = r_lo >= 1 / 3 and r_hi <= 3 and ph <= 0.1
            return {"ratio_min": r_lo, "ratio_max": r_hi, "phase_max": ph}, \
                {"ratio": [1 / 3, 3]}, 0.1, ok
        return run
    cases.append(Case("above-k grid", {"k": 12, "B": list(ABOVE_K_B), "y0": list(GRID_Y0)},
                      grid(ABOVE_K_B)))
    cases.append(Case("below-k grid", {"k": 12, "B": list(BELOW_K_B), "y0": list(GRID_Y0)},
                      grid(BELOW_K_B)))
    cases.append(Case("flat cutoff C<=k^-2/10", {"k": 12, "points": [list(p) for p in FLAT_POINTS]},
                      lambda _: _le(max(flat_cutoff_values()), 1e-6)))

    def phase_slope(_):
        B, k, dB = 500.0, 12, 0.01
        C = osc.c_for_stationary(B, k, 1.5)
        ph = [np.angle(osc.transform_I_direct(osc.TransformParams(b, C, k)).value)
              for b in (B - dB, B + dB)]
        num = np.angle(np.exp(1j * (ph[1] - ph[0]))) / (2 * dB)
        ana = (osc.closed_phase(B + dB, C, k, -1, 1) - osc.closed_phase(B - dB, C, k, -1, 1)) / (2 * dB)
        return _le(abs(num / ana - 1), 0.05)
    cases.append(Case("phase derivative in B above-k", {"B": 500, "k": 12, "y0": 1.5}, phase_slope))
    return cases


def below_k_correlation_params(k=12, B=3.5, C1=0.05, H=40.0):
    C2 = (B * B * C1 - H / k ** 2) / (B * B)
    p = osc.CorrelationParams(B, B, C1, C2, 0.0, k=k)
    return osc.CorrelationParams(B, B, C1, C2, osc.resonant_D(p), k=k)


def _correlation_cases(ctx):
    cases = []
    budget = ctx.config["correlation_budget"]

    def equal(_):
        C = osc.c_for_stationary(500.0, 12, 1.5)
        r = osc.correlation_J(osc.CorrelationParams(500.0, 500.0, C, C, 0.0), budget=budget)
        rel_imag = abs(r.value.imag) / abs(r.value)
        return {"real": r.value.real, "rel_imag": rel_imag}, "positive real", 1e-9, \
            r.value.real > 0 and rel_imag <= 1e-9
    cases.append(Case("equal parameters D=0", {"B": 500, "y0": 1.5}, equal))

    def flat(_):
        C1, C2 = 1e-2, 1.3e-2
        r = osc.correlation_J(osc.CorrelationParams(0.5, 0.8, C1, C2, 50.0), budget=budget)
        return _le(abs(r.value), 1e-4 / math.sqrt(C1 * C2))
    cases.append(Case("flat regime D=50", {"B": [0.5, 0.8], "C": [1e-2, 1.3e-2], "D": 50}, flat))

    def below(_):
        p = below_k_correlation_params()
        r = osc.correlation_J(p, budget=budget)
        return _le(abs(r.value) * math.sqrt(p.C1 * p.C2 * p.H), 10.0)
    cases.append(Case("below-k resonance H=40", {"B": 3.5, "C1": 0.05, "H": 40}, below))
    return cases


def _pipeline_cases(ctx):
    cases = []
    for P in (5, 7):
        for d in (1, 2):
            for N in (500, 2000):
                for C in (10, 20):
                    if C * C > N / d ** 2:
                        continue

                    def run(cx, P=P, d=d, N=N, C=C):
                        cfg = pl.PipelineConfig(P=P, d=d, N=float(N), C=float(C))
                        r = pl.s_d_delta_split(cfg, cx.table(5 * N))
                        return r.residual, 0.0, pl.SPLIT_TOL * max(abs(r.direct), 1), \
                            r.residual <= pl.SPLIT_TOL * max(abs(r.direct), 1)
                    cases.append(Case(f"split P={P} d={d} N={N} C={C}",
                                      {"P": P, "d": d, "N": N, "C": C}, run))

    def v1(cx):
        cfg = pl.PipelineConfig(P=7, N=500.0, C=2.5)
        r = pl.s_d_delta_split(cfg, cx.table(5 * 500))
        return abs(r.S1), 0.0, 0.0, pl.v1_vanishes(cfg) and r.S1 == 0
    cases.append(Case("v=1 branch empty when P > 2.5C", {"P": 7, "C": 2.5, "N": 500}, v1))

    def mstep(cx):
        cfg = pl.PipelineConfig(P=5, d=1, N=2000.0, C=20.0, rho="delta")
        r = pl.m_sum_voronoi_step(cfg, cx.table(), 1, 3, 1, 1500)
        tol = pl.VORONOI_STEP_TOL * max(abs(r.pre), 1)
        return r.gap, 0.0, tol, r.gap <= tol
    cases.append(Case("m-sum Voronoi step a=1 b=3", {"P": 5, "N": 2000, "C": 20, "alpha": 1, "n": 1500},
                      mstep))
    return cases


def _exponent_cases(ctx):
    cases = []
    for case in (1, 2):
        def run(_, case=case):
            got = ex.reproduce_mainthm(case)
            want = ex.MAIN_BOUND_1 if case == 1 else ex.MAIN_BOUND_2
            same = all(g.get(s) == w.get(s) for g, w in zip(got, want) for s in ex.SYMBOLS)
            return [str(g) for g in got], [str(w) for w in want], 0, same and len(got) == len(want)
        cases.append(Case(f"main bound case {case}", {"case": case}, run))

    def cor(_):
        r = ex.corollary_range()
        got = {"interval": str(r.interval), "eta_max": str(r.eta_max),
               "exponents": sorted(f"P^{a} k^{b}" for a, b in r.exponents)}
        want = {"interval": str(ex.Interval(ex.Q(1, 4), ex.Q(21, 17))), "eta_max": str(ex.ETA_MAX),
                "exponents": sorted(f"P^{a} k^{b}" for a, b in ex.COROLLARY_EXPONENTS)}
        return got, want, 0, got == want
    cases.append(Case("corollary range", {}, cor))

    def dser(_):
        return [str(e) for e in ex.d_exponents()], "all < -1", 0, ex.d_series_converges()
    cases.append(Case("d-series convergence", {}, dser))
    return cases


SUITE_CASES = {
    "delta": _delta_cases,
    "gamma-bessel": _gamma_cases,
    "kloosterman": _kloosterman_cases,
    "hecke": _hecke_cases,
    "voronoi-gl2": _gl2_cases,
    "voronoi-gl3": _gl3_cases,
    "stationary-phase": _stationary_cases,
    "transform-I": _transform_cases,
    "correlation-J": _correlation_cases,
    "pipeline": _pipeline_cases,
    "exponents": _exponent_cases,
}


def run_suite(name, config=None, ctx=None):
    """Run one suite (or "all") and return a VerificationReport.

    Cases are reported sorted by name whatever the job count.
    """
    if name != "all" and name not in SUITE_CASES:
        raise ConfigError(f"unknown suite {name!r}")
    config = config or load_config()
    ctx = ctx or Context(config)
    names = SUITES if name == "all" else (name,)
    cases = []
    for s in names:
        for c in SUITE_CASES[s](ctx):
            if name == "all":
                c.name = f"{s}/{c.name}"
            cases.append(c)
    if config["jobs"] > 1:
        with ThreadPoolExecutor(config["jobs"]) as pool:
            results = list(pool.map(lambda c: _run_case(c, ctx), cases))
    else:
        results = [_run_case(c, ctx) for c in cases]
    results.sort(key=lambda r: r.name)
    return VerificationReport(name, results)


# ---------------------------------------------------------------- report files


def _report_paths(path):
    stem, ext = os.path.splitext(path)
    if ext.lower() != ".json":
        stem = path
    return stem + ".json", stem + ".csv", stem + ".png"


def write_report(report, path):
    """JSON report plus a CSV table and a PNG margin chart next to it."""
    jpath, cpath, ppath = _report_paths(path)
    os.makedirs(os.path.dirname(os.path.abspath(jpath)), exist_ok=True)
    with open(jpath, "w") as fh:
        fh.write(report.to_json() + "\n")
    with open(cpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["suite", "name", "status", "observed", "expected", "tolerance", "runtime_ms", "params"])
        for c in report.cases:
            w.writerow([report.suite, c.name, c.status, json.dumps(c.observed, default=_jsonable),
                        json.dumps(c.expected, default=_jsonable), c.tolerance, c.runtime_ms,
                        json.dumps(c.params, sort_keys=True, default=_jsonable)])
    plot_report(report, ppath)
    return jpath, cpath, ppath


def _margin(case):
    if not isinstance(case.observed, (int, float)) or isinstance(case.observed, bool):
        return None
    if not case.tolerance:
        return 0.0 if case.observed == case.expected else None
    return math.log10(max(abs(case.observed), 1e-300) / case.tolerance)


def plot_report(report, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [(c.name, _margin(c), c.status) for c in report.cases]
    rows = [r for r in rows if r[1] is not None]
    colours = {"pass": "tab:green", "fail": "tab:red", "skipped": "tab:gray"}
    fig, ax = plt.subplots(figsize=(8, 0.25 * max(len(rows), 4) + 1))
    if rows:
        ys = np.arange(len(rows))
        ax.barh(ys, [max(r[1], -20) for r in rows], color=[colours[r[2]] for r in rows])
        ax.set_yticks(ys)
        ax.set_yticklabels([r[0] for r in rows], fontsize=6)
        ax.invert_yaxis()
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("log10(observed / tolerance)")
    s = report.summary
    ax.set_title(f"{report.suite}: {s['passed']} passed, {s['failed']} failed, {s['skipped']} skipped")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------- other commands


def audit_delta(n, q, C, out=None):
    """CSV ledger of the corollary terms (c, alpha_sum, h, term).

    term is alpha_sum * h / (c q) before the 1/Cnorm factor, so the rows sum
    to Cnorm at n = 0 and to 0 otherwise.
    """
    res = dm.delta_corollary(n, q, C)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["c", "alpha_sum", "h", "term"])
    for c, a, h, _t in res.ledger:
        term = a * h / (c * q) if h != 0.0 else 0.0
        w.writerow([c, repr(float(a)), repr(float(h)), repr(float(term))])
    text = buf.getvalue()
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    return text, res


def build_cache(n_max, directory="."):
    """Write (or keep) the tau cache; returns (path, rebuilt)."""
    path = ar.cache_path(directory)
    if os.path.exists(path):
        with open(path) as fh:
            have = sum(1 for line in fh if line.strip())
        if have >= n_max:
            return path, False
    os.makedirs(directory, exist_ok=True)
    ar.write_tau_cache(path, ar.build_tau_table(n_max))
    return path, True


def _parser():
    p = argparse.ArgumentParser(prog="artifact", description="numerical verification suites")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", choices=SUITES + ("all",))
    v.add_argument("--config", help="key = value file")
    v.add_argument("--report", help="write PATH(.json) with .csv and .png alongside")
    v.add_argument("--jobs", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key")

    a = sub.add_parser("audit-delta", help="dump the delta identity ledger as CSV")
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--q", type=int, default=1)
    a.add_argument("--C", type=float, required=True)
    a.add_argument("--out")

    b = sub.add_parser("build-cache", help="write the tau(n) cache")
    b.add_argument("n_max", type=int)
    b.add_argument("--dir", default=".")

    k = sub.add_parser("kloosterman", help="print S(a,b;c)")
    k.add_argument("a", type=int)
    k.add_argument("b", type=int)
    k.add_argument("c", type=int)

    e = sub.add_parser("exponents", help="exact exponent derivation")
    e.add_argument("action", choices=("trace",))
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "verify":
            overrides = {"jobs": args.jobs, "seed": args.seed}
            for item in args.set:
                if "=" not in item:
                    raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
                key, raw = item.split("=", 1)
                key = key.strip().replace("-", "_")
                if key not in DEFAULTS:
                    raise ConfigError(f"unknown key {key!r}")
                overrides[key] = _coerce(key, raw)
            config = load_config(args.config, overrides)
            report = run_suite(args.suite, config)
            print(report.to_json())
            for c in report.cases:
                print(f"{c.status.upper():7s} {c.name}", file=sys.stderr)
            if args.report:
                write_report(report, args.report)
            return 0 if report.ok else 1
        if args.command == "audit-delta":
            if args.C <= 1 or args.q < 1:
                raise ConfigError("need C > 1 and q >= 1")
            text, _ = audit_delta(args.n, args.q, args.C, args.out)
            if not args.out:
                sys.stdout.write(text)
            return 0
        if args.command == "build-cache":
            if args.n_max < 1:
                raise ConfigError("n_max must be positive")
            path, rebuilt = build_cache(args.n_max, args.dir)
            print(f"{path} {'written' if rebuilt else 'up to date'}", file=sys.stderr)
            return 0
        if args.command == "kloosterman":
            if args.c < 1:
                raise ConfigError("c must be positive")
            s = ar.kloosterman(args.a, args.b, args.c)
            print(json.dumps({"a": args.a, "b": args.b, "c": args.c, "value": [s.real, s.imag]}))
            return 0
        if args.command == "exponents":
            print(ex.derivation_trace())
            return 0
    except ConfigError as err:
        print(f"artifact: error: {err}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
