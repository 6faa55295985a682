import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dlocontact.signal import (
    CumulativeStats,
    SmoothingWindow,
    bartlett_weights,
    guarded_ratio_diff,
    smooth,
    stats_update,
)


def direct_smooth(xs, L):
    """Oracle: triangular weights w_k = 1 - |k - c|/c, newest sample first,
    renormalized over what is available."""
    c = (L - 1) / 2
    w = np.array([1 - abs(k - c) / c for k in range(L)]) if L > 2 else np.ones(L)
    out = []
    for t in range(len(xs)):
        win = np.array(xs[max(0, t - L + 1):t + 1][::-1])
        ww = w[:len(win)]
        s = ww.sum()
        out.append(float(win[0]) if s == 0 else float(np.dot(ww, win) / s))
    return out


def test_weights_length5_by_hand():
    assert bartlett_weights(5) == pytest.approx([0, 0.25, 0.5, 0.25, 0], abs=1e-15)


@pytest.mark.parametrize("L", [1, 2, 3, 4, 7, 50, 51])
def test_weights_shape(L):
    w = np.array(bartlett_weights(L))
    assert abs(w.sum() - 1) < 1e-12
    assert np.all(w >= 0)
    assert np.allclose(w, w[::-1], atol=1e-15)
    assert w.argmax() in ((L - 1) // 2, L // 2)


def test_constant_stream_fixed_point():
    win = SmoothingWindow(50)
    for _ in range(200):
        assert smooth(win, 3.0) == pytest.approx(3.0, abs=1e-12)


def test_impulse_gives_weights():
    win = SmoothingWindow(5)
    win.update(0.0)
    for _ in range(10):
        win.update(0.0)
    out = [win.update(1.0)] + [win.update(0.0) for _ in range(5)]
    assert out[:5] == pytest.approx(bartlett_weights(5), abs=1e-15)
    assert out[5] == 0.0


def test_ramp_lags_by_mean_delay():
    L, r = 50, 0.3
    w = bartlett_weights(L)
    delay = sum(k * wk for k, wk in enumerate(w))
    assert delay == pytest.approx((L - 1) / 2)
    win = SmoothingWindow(L)
    for t in range(300):
        y = win.update(r * t)
    assert y == pytest.approx(r * (299 - delay), abs=1e-9)


def test_partial_window_renormalizes():
    # no zero padding: the first samples average to their own level
    win = SmoothingWindow(50)
    assert win.update(5.0) == 5.0
    assert win.update(5.0) == pytest.approx(5.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 60), st.lists(st.floats(-50, 50), min_size=1, max_size=400))
def test_streaming_equals_direct(L, xs):
    win = SmoothingWindow(L)
    got = [win.update(x) for x in xs]
    want = direct_smooth(xs, L)
    assert np.max(np.abs(np.array(got) - np.array(want))) <= 1e-12 * max(1.0, max(map(abs, xs)))


def test_long_run_no_drift():
    rng = np.random.default_rng(1)
    xs = (rng.standard_normal(20000) * 3 + 10).tolist()
    win = SmoothingWindow(50)
    got = [win.update(x) for x in xs]
    want = direct_smooth(xs[-200:], 50)  # steady state only depends on the last 50
    assert np.max(np.abs(np.array(got[-150:]) - np.array(want[-150:]))) < 1e-12


def test_reset_matches_fresh():
    a, b = SmoothingWindow(7), SmoothingWindow(7)
    for x in range(30):
        a.update(float(x))
    a.reset()
    assert [a.update(float(x)) for x in range(20)] == [b.update(float(x)) for x in range(20)]


def test_window_newest_first():
    win = SmoothingWindow(3)
    for x in (1.0, 2.0, 3.0, 4.0):
        win.update(x)
    assert win.window() == [4.0, 3.0, 2.0]


def test_zero_length_rejected():
    with pytest.raises(ValueError):
        SmoothingWindow(0)


# ---- cumulative statistics

def test_stats_examples():
    s = CumulativeStats()
    for v in (1, 1, 1):
        m, sd = stats_update(s, v)
    assert (m, sd) == (1, s.min_sigma)

    s = CumulativeStats()
    for v in (2, 4, 4, 4, 5, 5, 7, 9):
        m, sd = s.update(v)
    assert m == 5
    assert sd == pytest.approx(math.sqrt(32 / 7))
    assert sd == pytest.approx(2.138, abs=1e-3)

    s = CumulativeStats()
    assert s.update(7.0) == (7.0, s.min_sigma)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=500))
def test_stats_vs_two_pass(xs):
    s = CumulativeStats(min_sigma=0.0)
    for x in xs:
        m, sd = s.update(x)
    a = np.array(xs)
    assert m == pytest.approx(a.mean(), rel=1e-9, abs=1e-9)
    assert sd == pytest.approx(a.std(ddof=1), rel=1e-9, abs=1e-9)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=50), st.floats(1e-6, 1.0))
def test_sigma_floor(xs, floor):
    s = CumulativeStats(min_sigma=floor)
    for x in xs:
        _, sd = s.update(x)
        assert sd >= floor


def test_guarded_ratio_examples():
    assert guarded_ratio_diff(0.02, 0.02) == 1.0
    assert guarded_ratio_diff(0.0, 0.02) == 0.0
    assert guarded_ratio_diff(1.0, 1e-9, 1e-6) is None
    assert guarded_ratio_diff(1.0, -1e-9) is None
