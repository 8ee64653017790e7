"""Shared test utilities, including the independent spectrum oracle."""

import numpy as np

from mycelsim.spectral import blackman_window


def naive_dft_amplitudes(samples, window: str) -> np.ndarray:
    """O(n^2) single-sided amplitude oracle.

    Mirrors amplitude_spectrum's definition (mean removal, window, zero-pad
    to the next power of two, coherent-gain correction) but evaluates the
    transform by direct cosine/sine summation instead of an FFT.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    x = x - x.mean()
    w = blackman_window(n) if window == "blackman" else np.ones(n)
    n_fft = 1 << (n - 1).bit_length()
    padded = np.zeros(n_fft)
    padded[:n] = x * w

    j = np.arange(n_fft)
    amps = np.empty(n_fft // 2 + 1)
    for k in range(amps.size):
        angle = -2.0 * np.pi * k * j / n_fft
        re = float(np.sum(padded * np.cos(angle)))
        im = float(np.sum(padded * np.sin(angle)))
        amps[k] = 2.0 * np.hypot(re, im) / w.sum()
    amps[0] *= 0.5
    if n_fft % 2 == 0:
        amps[-1] *= 0.5
    return amps


def sampled_square_thd_oracle(samples_per_period: int, k_max: int) -> float:
    """Closed-form THD of an ideal sampled square wave.

    The DFT magnitude of a balanced discrete square wave of period N at odd
    harmonic k is proportional to 1/sin(pi*k/N), so
    THD^2 = sum over odd k in [3, k_max] of (sin(pi/N) / sin(pi*k/N))^2.
    """
    n = samples_per_period
    total = 0.0
    for k in range(3, k_max + 1, 2):
        total += (np.sin(np.pi / n) / np.sin(np.pi * k / n)) ** 2
    return float(np.sqrt(total))
