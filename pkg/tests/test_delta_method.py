import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import delta_method as dm


@pytest.mark.parametrize("kind", dm.KINDS)
def test_window_support_and_values(kind):
    w = dm.SmoothWindow(kind)
    lo, hi = w.support
    xs = np.linspace(lo - 1, hi + 1, 2001)
    vals = w(xs)
    assert np.all(vals >= 0)
    assert np.all(vals[(xs < lo) | (xs > hi)] == 0)
    assert np.max(vals) <= 1 + 1e-15


def test_window_named_properties():
    U, W = dm.SmoothWindow("bump_U"), dm.SmoothWindow("annulus_W")
    V0 = dm.SmoothWindow("plateau_V0")
    assert U(0.0) == 1.0 and W(0.0) == 0.0
    xs = np.linspace(-2, 2, 101)
    assert np.all(U(xs) == 1.0)
    assert np.allclose(U(xs), U(-xs)) and np.allclose(W(xs), W(-xs))
    assert np.all(V0(np.linspace(1, 2, 51)) == 1.0)


@pytest.mark.parametrize("kind", dm.KINDS)
@pytest.mark.parametrize("j", [1, 2, 3])
def test_window_derivatives_match_differences(kind, j):
    w = dm.SmoothWindow(kind, 1.3)
    xs = np.linspace(*w.support, 41)[1:-1] + 1e-3
    h = 1e-5
    fd = (w.derivative(j - 1, xs + h) - w.derivative(j - 1, xs - h)) / (2 * h)
    scale = max(1.0, np.max(np.abs(w.derivative(j, xs))))
    assert np.max(np.abs(fd - w.derivative(j, xs))) <= 1e-6 * scale


def test_window_derivative_order_guard():
    with pytest.raises(ValueError):
        dm.SmoothWindow("inert_V").derivative(7, 1.5)
    with pytest.raises(ValueError):
        dm.SmoothWindow("nope")


def test_kernel_support():
    h = dm.DeltaKernelH()
    xs = np.linspace(-4, 4, 161)
    X, Y = np.meshgrid(xs, xs)
    vals = h(X, Y)
    assert np.all(vals[(np.abs(X) > 2.5) | (np.abs(Y) > 2.5)] == 0)
    for x in (1.2, 1.5, 1.9):
        assert h(x, 0.0) == pytest.approx(h.W(x) * h.U(x))


def test_general_n_zero():
    assert dm.delta_general(0, dm.corollary_config(1, 20.0)) == pytest.approx(1.0, abs=1e-12)
    cfg = dm.DeltaConfig(20.0, 30.0, 2, dm.SmoothWindow("bump_U"), dm.SmoothWindow("annulus_W", 5.0))
    assert dm.delta_general(0, cfg) == pytest.approx(1.0, abs=1e-12)


def test_general_vanishing_normaliser():
    # unit-scale W vanishes at every integer, so no normaliser exists
    with pytest.raises(ValueError):
        dm.delta_general(0, dm.DeltaConfig(20.0, 20.0))


def test_general_n_seven():
    assert abs(dm.delta_general(7, dm.corollary_config(1, 20.0))) <= 1e-9
    cfg = dm.DeltaConfig(20.0, 30.0, 2, dm.SmoothWindow("bump_U"), dm.SmoothWindow("annulus_W", 5.0))
    for n in range(-200, 201):
        if n:
            assert abs(dm.delta_general(n, cfg)) <= 1e-9


def test_general_divisibility_branches():
    cfg = dm.corollary_config(3, 20.0)
    # 3 | 90 lets the c = 30 row and the d = 1 row fire; 3 does not divide 91
    six = dm.delta_general(90, cfg, with_ledger=True)
    seven = dm.delta_general(91, cfg, with_ledger=True)
    assert abs(six.value) <= 1e-9 and abs(seven.value) <= 1e-9
    assert any(t != 0 for _, _, t in six.ledger)
    assert all(t == 0 for _, _, t in seven.ledger)


def test_config_validation():
    with pytest.raises(ValueError):
        dm.DeltaConfig(1.0, 5.0)
    with pytest.raises(ValueError):
        dm.DeltaConfig(5.0, 5.0, q=0)
    with pytest.raises(ValueError):
        dm.DeltaConfig(2.0, 2.0).check_range(10 ** 6, 0.1)


def test_corollary_n_zero():
    r = dm.delta_corollary(0, 1, 30.0)
    assert r.value == pytest.approx(1.0, abs=1e-12)
    assert sum(a * h / c for c, a, h, _ in r.ledger) == pytest.approx(r.normaliser, rel=1e-12)


def test_corollary_small_n_vanish():
    for n in list(range(1, 51)) + list(range(-50, 0)):
        assert abs(dm.delta_corollary(n, 1, 30.0).value) <= 1e-9


def test_normaliser_comparable_to_C():
    ratios = [dm.delta_corollary(0, 1, C).normaliser / C for C in (20.0, 40.0, 80.0)]
    assert min(ratios) > 0.3 and max(ratios) < 1.5


@given(st.integers(-1000, 1000), st.sampled_from([1, 2, 3, 5]), st.sampled_from([20.0, 50.0, 100.0]))
@settings(max_examples=150, deadline=None)
def test_corollary_exact(n, q, C):
    assert abs(dm.delta_corollary(n, q, C).value - (n == 0)) <= 1e-9


@given(st.integers(-300, 300), st.sampled_from([1, 2, 3, 5]), st.floats(3.0, 60.0))
@settings(max_examples=60, deadline=None)
def test_corollary_enumeration_route(n, q, C):
    a = dm.delta_corollary(n, q, C).value
    b = dm.delta_corollary(n, q, C, method="enumerate").value
    assert abs(a - b) <= 1e-9


@given(st.integers(-1000, 1000), st.sampled_from([1, 2, 3, 5]), st.floats(5.0, 100.0))
@settings(max_examples=60, deadline=None)
def test_ledger_equivalence(n, q, C):
    assert dm.ledger_gap(n, q, C) <= 1e-12


@given(st.integers(-1000, 1000), st.sampled_from([1, 2, 3]), st.sampled_from([20.0, 50.0]))
@settings(max_examples=60, deadline=None)
def test_conductor_truncation(n, q, C):
    r = dm.delta_corollary(n, q, C)
    for c, _, h, t in r.ledger:
        if abs(n) > 2.5 * c * C * q:
            assert h == 0.0 and t == 0.0


def test_corollary_rejects_small_C():
    with pytest.raises(ValueError):
        dm.delta_corollary(0, 1, 1.0)


def test_ledger_csv(tmp_path):
    path = tmp_path / "l.csv"
    dm.write_ledger_csv(path, dm.delta_corollary(3, 1, 10.0))
    lines = path.read_text().splitlines()
    assert lines[0] == "c,alpha_sum,h,term"
    assert len(lines) == 1 + math.ceil(25.0)


def test_trivial_delta_examples():
    assert dm.trivial_delta(0, 101, 50.0) == 1.0
    assert dm.trivial_delta(17, 101, 50.0) == 0.0


def test_trivial_delta_counterexample():
    with pytest.raises(dm.TrivialDeltaError) as info:
        dm.trivial_delta(7, 7, 50.0)
    assert info.value.witness == 7
    assert info.value.value == pytest.approx(dm.SmoothWindow("bump_U", 0.4)(7 / 50))
    assert info.value.value != 0
    # unchecked, the identity visibly fails at the witness
    assert dm.trivial_delta(7, 7, 50.0, check=False) != 0.0


@given(st.integers(-50, 50))
def test_trivial_delta_exact(n):
    assert dm.trivial_delta(n, 53, 50.0) == (1.0 if n == 0 else 0.0)
