"""Offline smoothing filters applied to frame streams and reference signals.

All filters run along axis 0 and keep the series length. ``rate`` is the
sample rate in Hz.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal


def _samples(window_s, rate):
    n = int(np.ceil(window_s * rate))
    if n < 1:
        raise ValueError("window shorter than one sample")
    return n if n % 2 else n + 1


def moving_median(x, rate, window_s=2.0):
    """Centred moving median; the window is truncated at the edges."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("empty series")
    n = _samples(window_s, rate)
    half = n // 2
    pad = [(half, half)] + [(0, 0)] * (x.ndim - 1)
    xp = np.pad(x, pad, constant_values=np.nan)
    windows = sliding_window_view(xp, n, axis=0)
    return np.nanmedian(windows, axis=-1)


def butter_coefficients(order, cutoff, rate):
    if not 0 < cutoff < rate / 2:
        raise ValueError(f"cutoff {cutoff} Hz must lie in (0, {rate / 2}) Hz")
    return signal.butter(order, cutoff, btype="low", fs=rate, output="sos")


def butterworth_lowpass(x, rate, order=4, cutoff=2.0, zero_phase=True):
    """Butterworth low-pass (bilinear transform with pre-warping).

    ``zero_phase`` runs the filter forward and backward (odd-reflection
    padding), squaring the magnitude response; otherwise a single causal pass.
    """
    x = np.asarray(x, dtype=float)
    sos = butter_coefficients(order, cutoff, rate)
    if zero_phase:
        padlen = min(3 * (2 * len(sos) + 1), x.shape[0] - 1)
        return signal.sosfiltfilt(sos, x, axis=0, padtype="odd", padlen=padlen)
    zi = signal.sosfilt_zi(sos)
    zi = zi.reshape(zi.shape + (1,) * (x.ndim - 1)) * x[0]
    y, _ = signal.sosfilt(sos, x, axis=0, zi=zi)
    return y


def savgol_coefficients(window, poly_order):
    """Smoothing kernel from the normal equations of a centred polynomial fit."""
    if window % 2 == 0 or window <= poly_order:
        raise ValueError("window must be odd and larger than poly_order")
    half = window // 2
    k = np.arange(-half, half + 1, dtype=float)
    a = np.vander(k, poly_order + 1, increasing=True)
    # row 0 of the pseudo-inverse evaluates the fitted polynomial at k = 0
    return np.linalg.pinv(a)[0]


def savitzky_golay(x, rate, window_s=2.0, poly_order=4):
    """Local least-squares polynomial smoothing with mirror padding."""
    x = np.asarray(x, dtype=float)
    n = _samples(window_s, rate)
    if n <= poly_order:
        raise ValueError(f"window of {n} samples too short for order {poly_order}")
    h = savgol_coefficients(n, poly_order)
    half = n // 2
    pad = [(half, half)] + [(0, 0)] * (x.ndim - 1)
    xp = np.pad(x, pad, mode="reflect")
    windows = sliding_window_view(xp, n, axis=0)
    return windows @ h[::-1]
