import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fibresense.filters import (
    butter_coefficients,
    butterworth_lowpass,
    moving_median,
    savgol_coefficients,
    savitzky_golay,
)
from oracles import brute_median, savgol_point

RATE = 30.5


# moving_median


def test_median_constant_unchanged():
    x = np.full(100, 3.25)
    assert np.array_equal(moving_median(x, RATE), x)


def test_median_removes_impulse():
    x = np.zeros(200)
    x[100] = 50.0
    assert not np.any(moving_median(x, 10.0, window_s=0.3))


def test_median_step_matches_oracle():
    x = np.r_[np.zeros(50), np.ones(50)]
    y = moving_median(x, RATE, window_s=2.0)
    assert np.array_equal(y, brute_median(x, 63))
    # a centred window keeps the edge at the same sample
    assert y[49] == 0 and y[50] == 1


def test_window_rounds_up_to_odd():
    x = np.arange(20.0)[::-1] ** 2
    assert np.array_equal(moving_median(x, 1.0, window_s=3.2), brute_median(x, 5))
    assert np.array_equal(moving_median(x, 1.0, window_s=4.0), brute_median(x, 5))


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 400), elements=st.floats(-1e6, 1e6)), st.integers(1, 41))
def test_median_equals_sort_oracle(x, w):
    n = w if w % 2 else w + 1
    assert np.array_equal(moving_median(x, 1.0, window_s=w), brute_median(x, n))


def test_median_large_random_series():
    x = np.random.default_rng(0).standard_normal(10_000)
    assert np.array_equal(moving_median(x, RATE), brute_median(x, 61))


def test_median_vector_series_column_wise():
    x = np.random.default_rng(1).standard_normal((300, 3))
    y = moving_median(x, RATE)
    for j in range(3):
        assert np.array_equal(y[:, j], brute_median(x[:, j], 61))


def test_median_errors():
    with pytest.raises(ValueError):
        moving_median([], RATE)
    with pytest.raises(ValueError):
        moving_median([1.0, 2.0], RATE, window_s=0.0)


# butterworth_lowpass


def _gain(f, zero_phase, rate=RATE, n=6000):
    t = np.arange(n) / rate
    x = np.sin(2 * np.pi * f * t)
    y = butterworth_lowpass(x, rate, zero_phase=zero_phase)
    core = slice(n // 4, 3 * n // 4)
    return np.sqrt(np.mean(y[core] ** 2) / np.mean(x[core] ** 2))


def test_butterworth_dc_unchanged():
    x = np.full(500, -4.0)
    np.testing.assert_allclose(butterworth_lowpass(x, RATE), x, rtol=1e-12)
    np.testing.assert_allclose(butterworth_lowpass(x, RATE, zero_phase=False), x, rtol=1e-12)


def test_single_pass_half_power_at_cutoff():
    assert _gain(2.0, zero_phase=False) == pytest.approx(2 ** -0.5, rel=0.01)


def test_forty_db_rejection_at_ten_hz():
    assert 20 * np.log10(_gain(10.0, zero_phase=False)) <= -40.0
    assert 20 * np.log10(_gain(10.0, zero_phase=True)) <= -40.0


def test_zero_phase_has_no_lag():
    rate = RATE
    t = np.arange(4000) / rate
    clean = np.sin(2 * np.pi * 0.5 * t)
    noisy = clean + 0.3 * np.random.default_rng(0).standard_normal(t.size)
    y = butterworth_lowpass(noisy, rate)
    core = slice(500, 3500)
    lags = np.arange(-20, 21)
    xc = [np.dot(np.roll(y, -k)[core], clean[core]) for k in lags]
    assert lags[int(np.argmax(xc))] == 0


def test_causal_pass_lags():
    t = np.arange(3000) / RATE
    clean = np.sin(2 * np.pi * 0.5 * t)
    y = butterworth_lowpass(clean, RATE, zero_phase=False)
    lags = np.arange(0, 30)
    xc = [np.dot(y[k + 200:k + 2500], clean[200:2500]) for k in lags]
    assert lags[int(np.argmax(xc))] > 0


@pytest.mark.parametrize("cutoff", [0.0, RATE / 2, 20.0])
def test_cutoff_outside_band_rejected(cutoff):
    with pytest.raises(ValueError):
        butterworth_lowpass(np.zeros(100), RATE, cutoff=cutoff)


def test_butterworth_coefficients_are_fourth_order():
    assert butter_coefficients(4, 2.0, RATE).shape == (2, 6)


def test_butterworth_vector_series():
    x = np.random.default_rng(2).standard_normal((400, 4))
    y = butterworth_lowpass(x, RATE)
    np.testing.assert_allclose(y[:, 2], butterworth_lowpass(x[:, 2], RATE), rtol=1e-12, atol=1e-15)


# savitzky_golay


def test_classical_quadratic_kernel():
    np.testing.assert_allclose(savgol_coefficients(5, 2), np.array([-3, 12, 17, 12, -3]) / 35, atol=1e-15)


@pytest.mark.parametrize("window,order", [(5, 2), (7, 3), (61, 4), (9, 4)])
def test_kernel_matches_direct_polyfit(window, order):
    e = np.eye(window)
    direct = np.array([savgol_point(e[i], order) for i in range(window)])
    np.testing.assert_allclose(savgol_coefficients(window, order), direct, atol=1e-10)


def test_cubic_reproduced_on_interior():
    # mirror padding bends the polynomial, so only the first and last half
    # windows deviate
    t = np.linspace(-2, 3, 300)
    x = 0.4 * t ** 3 - t ** 2 + 2 * t - 7
    y = savitzky_golay(x, RATE)
    np.testing.assert_allclose(y[30:-30], x[30:-30], atol=1e-9)
    assert np.max(np.abs(y[:30] - x[:30])) > 1e-6


def test_quartic_reproduced_on_interior():
    t = np.linspace(-1, 1, 300)
    x = 3 * t ** 4 - t ** 3 + t - 1
    y = savitzky_golay(x, RATE)
    np.testing.assert_allclose(y[30:-30], x[30:-30], atol=1e-9)


def test_savgol_constant_unchanged():
    x = np.full(50, 2.5)
    np.testing.assert_allclose(savitzky_golay(x, RATE), x, rtol=1e-12)


@pytest.mark.parametrize("window,order", [(4, 2), (3, 4), (5, 5)])
def test_bad_kernel_rejected(window, order):
    with pytest.raises(ValueError):
        savgol_coefficients(window, order)


def test_window_too_short_for_order():
    with pytest.raises(ValueError):
        savitzky_golay(np.zeros(100), RATE, window_s=0.05, poly_order=4)


# shared properties

FILTERS = [
    lambda x: moving_median(x, RATE),
    lambda x: butterworth_lowpass(x, RATE),
    lambda x: savitzky_golay(x, RATE),
]


@pytest.mark.parametrize("f", FILTERS)
@settings(max_examples=20, deadline=None)
@given(x=arrays(np.float64, 600, elements=st.floats(-10, 10)), shift=st.integers(1, 30))
def test_shift_equivariant_on_interior(f, x, shift):
    y = f(x)
    ys = f(np.roll(x, shift))
    core = slice(200 + shift, 400)
    np.testing.assert_allclose(ys[core], y[core.start - shift:core.stop - shift], atol=1e-6)


@pytest.mark.parametrize("f", FILTERS)
@given(n=st.integers(70, 500))
@settings(max_examples=20, deadline=None)
def test_length_preserved(f, n):
    assert len(f(np.random.default_rng(n).standard_normal(n))) == n
