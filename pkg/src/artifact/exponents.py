"""Exact exponent bookkeeping for the S_d(N) bound terms.

A term is a monomial P^a k^b d^c N^e C^f with rational exponents.  Regimes
put k = P^theta and N = P^(3/2) k^2 (d = P^0 unless stated), so every term
becomes a linear form alpha + beta theta in the exponent of P.  All
arithmetic is done in Fractions; a float anywhere in here is a bug.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction as Q

SYMBOLS = ("P", "k", "d", "N", "C")


class ExponentMismatch(AssertionError):
    pass


class UnboundSymbol(KeyError):
    pass


class EmptyWindow(ValueError):
    pass


def _q(x):
    if isinstance(x, float):
        raise TypeError("exponents must be exact; got a float")
    return Q(x)


@dataclass(frozen=True)
class ExponentVector:
    """P^a k^b d^c N^e C^f, optionally carrying a P^eps factor."""

    P: Q = Q(0)
    k: Q = Q(0)
    d: Q = Q(0)
    N: Q = Q(0)
    C: Q = Q(0)
    eps: bool = False
    label: str = ""

    def __post_init__(self):
        for s in SYMBOLS:
            object.__setattr__(self, s, _q(getattr(self, s)))

    @classmethod
    def of(cls, label="", eps=False, **exps):
        return cls(**{s: _q(exps.get(s, 0)) for s in SYMBOLS}, eps=eps, label=label)

    def get(self, s):
        return getattr(self, s)

    def items(self):
        return [(s, self.get(s)) for s in SYMBOLS]

    def __mul__(self, o):
        return ExponentVector(*(self.get(s) + o.get(s) for s in SYMBOLS),
                              eps=self.eps or o.eps, label=self.label)

    def __truediv__(self, o):
        return self * o ** -1

    def __pow__(self, r):
        r = _q(r)
        return ExponentVector(*(self.get(s) * r for s in SYMBOLS), eps=self.eps, label=self.label)

    def same_powers(self, o):
        return all(self.get(s) == o.get(s) for s in SYMBOLS)

    def __eq__(self, o):
        return isinstance(o, ExponentVector) and self.same_powers(o) and self.eps == o.eps

    def __hash__(self):
        return hash((tuple(self.get(s) for s in SYMBOLS), self.eps))

    def named(self, label):
        return ExponentVector(*(self.get(s) for s in SYMBOLS), eps=self.eps, label=label)

    def subs(self, symbol, value):
        """Replace symbol by the monomial `value`."""
        e = self.get(symbol)
        rest = ExponentVector(*(Q(0) if s == symbol else self.get(s) for s in SYMBOLS),
                              eps=self.eps, label=self.label)
        return rest * value ** e if e else rest

    def drop(self, symbol):
        return ExponentVector(*(Q(0) if s == symbol else self.get(s) for s in SYMBOLS),
                              eps=self.eps, label=self.label)

    def __str__(self):
        parts = []
        for s in SYMBOLS:
            e = self.get(s)
            if e == 1:
                parts.append(s)
            elif e:
                parts.append(f"{s}^({e})")
        body = " ".join(parts) or "1"
        return ("P^eps " if self.eps else "") + body


def mono(**exps):
    return ExponentVector.of(**exps)


# ---------------------------------------------------------------- linear forms in theta


@dataclass(frozen=True)
class LinearForm:
    """const + slope * theta."""

    const: Q = Q(0)
    slope: Q = Q(0)

    def __post_init__(self):
        object.__setattr__(self, "const", _q(self.const))
        object.__setattr__(self, "slope", _q(self.slope))

    def __add__(self, o):
        return LinearForm(self.const + o.const, self.slope + o.slope)

    def __sub__(self, o):
        return LinearForm(self.const - o.const, self.slope - o.slope)

    def scale(self, r):
        r = _q(r)
        return LinearForm(self.const * r, self.slope * r)

    def at(self, theta):
        return self.const + self.slope * _q(theta)

    def root(self):
        """theta where the form vanishes; None for a constant form."""
        if self.slope == 0:
            return None
        return -self.const / self.slope

    def __str__(self):
        return f"{self.const} + {self.slope} theta"


THETA = LinearForm(0, 1)


@dataclass(frozen=True)
class Interval:
    lo: Q
    hi: Q
    lo_open: bool = True
    hi_open: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lo", _q(self.lo))
        object.__setattr__(self, "hi", _q(self.hi))

    @property
    def empty(self):
        return self.lo > self.hi or (self.lo == self.hi and (self.lo_open or self.hi_open))

    @property
    def width(self):
        return self.hi - self.lo

    def __contains__(self, t):
        t = _q(t)
        lo_ok = t > self.lo if self.lo_open else t >= self.lo
        hi_ok = t < self.hi if self.hi_open else t <= self.hi
        return lo_ok and hi_ok

    def __str__(self):
        return f"{'(' if self.lo_open else '['}{self.lo}, {self.hi}{')' if self.hi_open else ']'}"


def solve_positive(form, strict=True, within=None):
    """The theta interval on which form > 0 (or >= 0), intersected with `within`."""
    if within is None:
        within = Interval(Q(-10 ** 9), Q(10 ** 9))
    lo, hi, lo_open, hi_open = within.lo, within.hi, within.lo_open, within.hi_open
    r = form.root()
    if r is None:
        ok = form.const > 0 or (form.const == 0 and not strict)
        return within if ok else Interval(Q(1), Q(0))
    if form.slope > 0:
        if r > lo:
            lo, lo_open = r, strict
        elif r == lo:
            lo_open = lo_open or strict
    else:
        if r < hi:
            hi, hi_open = r, strict
        elif r == hi:
            hi_open = hi_open or strict
    return Interval(lo, hi, lo_open, hi_open)


@dataclass
class Regime:
    """Symbol -> P-exponent as a linear form in theta, plus a theta interval."""

    substitutions: dict
    interval: Interval
    name: str = ""

    def __post_init__(self):
        if self.interval.empty:
            raise EmptyWindow(f"regime {self.name} has an empty theta interval")

    @classmethod
    def standard(cls, interval, name="", d=LinearForm(0, 0), C=None):
        subs = {"P": LinearForm(1, 0), "k": THETA, "d": d, "N": LinearForm(Q(3, 2), 2)}
        if C is not None:
            subs["C"] = C
        return cls(subs, interval, name)

    def with_C(self, C_form):
        subs = dict(self.substitutions)
        subs["C"] = C_form
        return Regime(subs, self.interval, self.name)


def substitute(term, regime):
    """P-exponent of `term` under `regime`, as an exact linear form in theta."""
    out = LinearForm()
    for s, e in term.items():
        if e == 0:
            continue
        if s not in regime.substitutions:
            raise UnboundSymbol(f"symbol {s} is not bound by regime {regime.name}")
        out = out + regime.substitutions[s].scale(e)
    return out


def pk_form(term):
    """P^a k^b -> a + b theta, for terms free of d, N and C."""
    for s in ("d", "N", "C"):
        if term.get(s):
            raise UnboundSymbol(f"term still carries {s}")
    return LinearForm(term.P, term.k)


# ---------------------------------------------------------------- the bound terms

H = Q(1, 2)

TERMS = (
    ExponentVector.of("C^(3/2) sqrt N / (d^(3/2) sqrt P)", C=Q(3, 2), N=H, d=-Q(3, 2), P=-H),
    ExponentVector.of("sqrt(C N) k / d", C=H, N=H, k=1, d=-1),
    ExponentVector.of("sqrt P N^(5/4) / (C d^3)", P=H, N=Q(5, 4), C=-1, d=-3),
    ExponentVector.of("C^2 k / sqrt P", C=2, k=1, P=-H),
    ExponentVector.of("sqrt P N^2 / (C^(5/2) d^(9/2) k^(7/12))", P=H, N=2, C=-Q(5, 2),
                      d=-Q(9, 2), k=-Q(7, 12)),
)

CASE1_CANDIDATES = (
    ExponentVector.of("P^(2/5) N^(3/10) / d^(3/5)", P=Q(2, 5), N=Q(3, 10), d=-Q(3, 5)),
    ExponentVector.of("P^(1/3) sqrt N / (d k^(2/3))", P=Q(1, 3), N=H, d=-1, k=-Q(2, 3)),
    ExponentVector.of("P^(1/3) N^(5/12) / (d k^(1/3))", P=Q(1, 3), N=Q(5, 12), d=-1, k=-Q(1, 3)),
    ExponentVector.of("sqrt N / d", N=H, d=-1),
)

CASE2_CHOICE = ExponentVector.of("P^(1/6) sqrt N / (d^(7/6) k^(19/36))", P=Q(1, 6), N=H,
                                 d=-Q(7, 6), k=-Q(19, 36))

MAIN_BOUND_1 = (
    ExponentVector.of("P^(1/10) N^(19/20) / d^(12/5)", P=Q(1, 10), N=Q(19, 20), d=-Q(12, 5)),
    ExponentVector.of("P^(1/6) N^(3/4) k^(2/3) / d^(3/2)", P=Q(1, 6), N=Q(3, 4), k=Q(2, 3),
                      d=-Q(3, 2)),
    ExponentVector.of("P^(1/6) N^(5/6) k^(1/3) / d^2", P=Q(1, 6), N=Q(5, 6), k=Q(1, 3), d=-2),
    ExponentVector.of("sqrt P N^(3/4) / d^2", P=H, N=Q(3, 4), d=-2),
)

MAIN_BOUND_2 = (
    ExponentVector.of("P^(1/12) N^(3/4) k^(53/72) / d^(19/12)", P=Q(1, 12), N=Q(3, 4),
                      k=Q(53, 72), d=-Q(19, 12)),
)

# lower thresholds on N as displayed in the bound's hypotheses
N_THRESHOLDS_1 = (mono(P=Q(4, 3), k=Q(4, 3), d=2), mono(P=Q(8, 5), k=Q(4, 5), d=Q(12, 5)),
                  mono(P=2, d=2))
N_THRESHOLDS_2 = (mono(P=Q(4, 3), k=Q(4, 3), d=2), mono(P=Q(5, 3), k=Q(19, 18), d=Q(7, 3)),
                  mono(P=2, d=2))

CASE1 = Interval(Q(1, 4), Q(6, 5), True, False)
CASE2 = Interval(Q(6, 5), Q(21, 17), False, True)
# ranges before the convexity comparison: the combined estimate holds for
# d^3 < k < P^(5/4), and the cases split at 6/5
WORKING = {1: Interval(Q(0), Q(6, 5), True, False), 2: Interval(Q(6, 5), Q(5, 4), False, True)}
CONVEXITY = mono(P=Q(3, 4), k=1)  # (P^3 k^4)^(1/4)
COROLLARY_EXPONENTS = {(Q(31, 40), Q(9, 10)), (Q(13, 24), Q(7, 6)), (Q(2, 3), Q(1)),
                       (Q(11, 24), Q(89, 72))}
ETA_MAX = Q(67, 136)
DISPLAYED_UPPER = {"abstract": Q(21, 17), "corollary": Q(17, 21)}


# ---------------------------------------------------------------- piecewise maxima


@dataclass
class Piece:
    lo: Q
    hi: Q
    form: LinearForm
    label: str
    ties: tuple = ()


def piecewise_max(forms, interval):
    """Upper envelope of labelled linear forms on [lo, hi], as pieces.

    Breakpoints are exactly the crossings of the active lines.
    """
    lo, hi = interval.lo, interval.hi
    crossings = {lo, hi}
    items = list(forms.items())
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            r = (items[i][1] - items[j][1]).root()
            if r is not None and lo < r < hi:
                crossings.add(r)
    pts = sorted(crossings)
    pieces = []
    for a, b in zip(pts[:-1], pts[1:]):
        mid = (a + b) / 2
        label, form = max(items, key=lambda kv: (kv[1].at(mid), kv[0]))
        ties = tuple(sorted(k for k, f in items if f == form))
        if pieces and pieces[-1].label == label:
            pieces[-1].hi = b
        else:
            pieces.append(Piece(a, b, form, label, ties))
    return pieces


def piecewise_min(forms, interval):
    neg = {k: LinearForm(-v.const, -v.slope) for k, v in forms.items()}
    return [Piece(p.lo, p.hi, LinearForm(-p.form.const, -p.form.slope), p.label, p.ties)
            for p in piecewise_max(neg, interval)]


# ---------------------------------------------------------------- optimisation of C


def balance(t1, t2, symbol="C"):
    """The monomial value of `symbol` at which t1 and t2 coincide."""
    e = t1.get(symbol) - t2.get(symbol)
    if e == 0:
        raise EmptyWindow("the two terms have equal powers of the balanced symbol")
    rest = t2.drop(symbol) / t1.drop(symbol)
    return (rest ** (Q(1) / e)).named(f"balance({t1.label}, {t2.label})")


@dataclass
class CandidateReport:
    choice: ExponentVector
    term_forms: dict
    envelope: list


@dataclass
class OptimizeResult:
    candidates: list
    chosen: list  # pieces of the lower envelope over candidate C forms
    dominant: list  # pieces of max over terms at the chosen C

    def dominant_labels(self):
        return {p.label for p in self.dominant}


def optimize_C(terms, regime, candidates):
    """For each candidate C: every term's P-exponent and their upper envelope.

    The chosen C is the pointwise minimum of the candidates, as in the
    C = min{...} recipe; `dominant` is the envelope of the terms at that C.
    """
    reports = []
    cforms = {}
    for cand in candidates:
        cf = substitute(cand, regime)
        cforms[cand.label] = cf
        r = regime.with_C(cf)
        forms = {t.label: substitute(t, r) for t in terms}
        reports.append(CandidateReport(cand, forms, piecewise_max(forms, regime.interval)))
    chosen = piecewise_min(cforms, regime.interval)
    dominant = []
    for piece in chosen:
        r = regime.with_C(piece.form)
        forms = {t.label: substitute(t, r) for t in terms}
        dominant.extend(piecewise_max(forms, Interval(piece.lo, piece.hi, False, False)))
    return OptimizeResult(reports, chosen, dominant)


def flip_point(t1, t2, regime):
    """theta at which t1 and t2 exchange order under the regime (exact)."""
    return (substitute(t1, regime) - substitute(t2, regime)).root()


# ---------------------------------------------------------------- the main bounds


def _leading(choice, terms=TERMS, anchor=2):
    """Bound at C = choice: the anchor term, with the largest d-power among
    the terms that tie with it in P, k and N."""
    vals = [t.subs("C", choice) for t in terms]
    base = vals[anchor]
    ties = [v for v in vals if all(v.get(s) == base.get(s) for s in ("P", "k", "N"))]
    d_top = max(v.d for v in ties)
    return ExponentVector(base.P, base.k, d_top, base.N, Q(0), eps=True)


def reproduce_mainthm(case, trace=None):
    """The displayed bound terms for case 1 or 2, derived and checked exactly."""
    if case == 1:
        out = [_leading(c).named(f"C = {c.label}") for c in CASE1_CANDIDATES]
        expected = MAIN_BOUND_1
    elif case == 2:
        choice = balance(TERMS[1], TERMS[4])
        if not choice.same_powers(CASE2_CHOICE):
            raise ExponentMismatch(f"balanced C {choice} differs from {CASE2_CHOICE}")
        out = [TERMS[1].subs("C", choice).named(f"C = {choice.label}")]
        out = [ExponentVector(o.P, o.k, o.d, o.N, Q(0), eps=True, label=o.label) for o in out]
        expected = MAIN_BOUND_2
    else:
        raise ValueError("case is 1 or 2")
    for got, want in zip(out, expected):
        for s in SYMBOLS:
            if got.get(s) != want.get(s):
                raise ExponentMismatch(f"case {case}, {want.label}: exponent of {s} is "
                                       f"{got.get(s)}, expected {want.get(s)}")
        if trace is not None:
            trace.append(f"mainthm case {case} | {got.label} | {got}")
    return out


def n_preconditions(case):
    """Lower bounds on N from C >= P for each C choice (d kept symbolic).

    Case 2 only produces its own threshold this way; the other two are the
    case independent ones from the case 1 candidates with C = P^(1/3) sqrt N
    / (d k^(2/3)) and C = sqrt N / d, restated for case 2.
    """
    P = mono(P=1)

    def threshold(choice):
        e = choice.N
        return ((P / choice.drop("N")) ** (Q(1) / e))

    if case == 1:
        out = []
        for c in CASE1_CANDIDATES:
            t = threshold(c)
            if not any(t.same_powers(o) for o in out):
                out.append(t)
        return out
    if case == 2:
        own = threshold(CASE2_CHOICE)
        inherited = [threshold(CASE1_CANDIDATES[1]), threshold(CASE1_CANDIDATES[3])]
        return [inherited[0], own, inherited[1]]
    raise ValueError("case is 1 or 2")


def d_exponents():
    return [t.d for t in MAIN_BOUND_1 + MAIN_BOUND_2]


def d_series_converges():
    return all(e < -1 for e in d_exponents())


# ---------------------------------------------------------------- the corollary


@dataclass
class CorollaryResult:
    exponents: set
    interval: Interval
    eta_max: Q
    per_case: dict = field(default_factory=dict)
    typo_flag: str = ""
    trace: list = field(default_factory=list)


def _over_sqrt_N(term):
    """term / sqrt N at N = P^(3/2) k^2, d = 1."""
    t = (term / mono(N=H)).subs("N", mono(P=Q(3, 2), k=2))
    return t.drop("d")


def _case_terms(case):
    """Every P-k term entering sup_N sum_d S_d(N)/sqrt N in a case, at d = 1."""
    main = reproduce_mainthm(case)
    out = [(f"main: {t.label}", _over_sqrt_N(t)) for t in main]
    # below the N threshold the trivial bound N/d^3 gives sqrt(N0)/d^3
    for t in n_preconditions(case):
        out.append((f"trivial below N >= {t}", (t ** H).drop("d")))
    # large d: trivial bound at N = P^(3/2) k^2 summed from the first d the
    # hypotheses exclude (d^3 > k, or d beyond the P-power cap)
    conv = mono(P=Q(3, 4), k=1)
    out.append(("trivial, d > k^(1/3)", conv / mono(k=Q(2, 3))))
    cap = Q(3, 8) if case == 1 else Q(1, 24)
    out.append((f"trivial, d > P^({cap})", conv / mono(P=2 * cap)))
    return out


def _dominated(f, forms, iv):
    """Some other line is >= f at both ends of iv (so on all of it)."""
    for g in forms:
        if (g.const, g.slope) == (f.const, f.slope):
            continue
        if (g - f).at(iv.lo) >= 0 and (g - f).at(iv.hi) >= 0:
            return True
    return False


def corollary_range(trace=None):
    """Exponent set, theta interval and eta_max, derived exactly.

    Per case: every term must beat convexity P^(3/4) k, which cuts the
    working range down to a theta interval; terms dominated on that interval
    are then dropped.  The two case intervals must join.
    """
    trace = [] if trace is None else trace
    conv = pk_form(CONVEXITY)
    per_case = {}
    kept_all = set()
    for case in (1, 2):
        forms = [(lab, pk_form(t)) for lab, t in _case_terms(case)]
        iv = WORKING[case]
        for lab, f in forms:
            iv = solve_positive(conv - f, strict=True, within=iv)
            trace.append(f"corollary case {case} | {lab} | P^({f.const}) k^({f.slope}) | {iv}")
        if iv.empty:
            raise ExponentMismatch(f"case {case}: no theta beats convexity")
        lines = [f for _, f in forms]
        kept = [f for f in lines if not _dominated(f, lines, iv)]
        for f in kept:
            trace.append(f"corollary case {case} | kept | P^({f.const}) k^({f.slope})")
        per_case[case] = (kept, iv)
        kept_all |= {(f.const, f.slope) for f in kept}
    lo_iv, hi_iv = per_case[1][1], per_case[2][1]
    if lo_iv.hi != hi_iv.lo or (lo_iv.hi_open and hi_iv.lo_open):
        raise ExponentMismatch("the two cases do not join into one interval")
    interval = Interval(lo_iv.lo, hi_iv.hi, lo_iv.lo_open, hi_iv.hi_open)
    eta = interval.width / 2
    trace.append(f"corollary | theta interval {interval} | eta_max {eta}")
    flag = ""
    if DISPLAYED_UPPER["corollary"] != interval.hi:
        flag = (f"displayed upper exponent {DISPLAYED_UPPER['corollary']} in the corollary "
                f"differs from the derived {interval.hi} (the abstract shows "
                f"{DISPLAYED_UPPER['abstract']})")
        trace.append(f"corollary | flag | {flag}")
    if kept_all != COROLLARY_EXPONENTS:
        raise ExponentMismatch(f"exponent set {sorted(kept_all)} differs from the display")
    if interval.lo != Q(1, 4) or interval.hi != Q(21, 17) or eta != ETA_MAX:
        raise ExponentMismatch(f"range {interval} / eta {eta} differs from (1/4, 21/17), 67/136")
    return CorollaryResult(kept_all, interval, eta, per_case, flag, trace)


def derivation_trace():
    """Stable text trace: term -> substitution -> exponent."""
    lines = []
    case1 = Regime.standard(CASE1, "case 1")
    for c in CASE1_CANDIDATES:
        r = case1.with_C(substitute(c, case1))
        for t in TERMS:
            lines.append(f"substitute | C = {c.label} | {t.label} | {substitute(t, r)}")
    reproduce_mainthm(1, lines)
    reproduce_mainthm(2, lines)
    for case in (1, 2):
        for t in n_preconditions(case):
            lines.append(f"precondition case {case} | N >= {t}")
    corollary_range(lines)
    return "\n".join(lines)
