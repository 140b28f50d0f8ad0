"""Synthetic test signals shared by the demo scripts.

No corpora ship with this package, so the demos synthesize a speech
surrogate (harmonic voicing with syllabic modulation and pauses) and
white / amplitude-modulated noise at the fixed 8 kHz rate.
"""

import numpy as np

SAMPLE_RATE = 8000


def speech(duration_s, seed):
    rng = np.random.default_rng(seed)
    n = round(duration_s * SAMPLE_RATE)
    t = np.arange(n) / SAMPLE_RATE
    f0 = 120.0 * (1.0 + 0.08 * np.sin(2.0 * np.pi * 2.3 * t + rng.uniform(0, 2 * np.pi)))
    phase = 2.0 * np.pi * np.cumsum(f0) / SAMPLE_RATE
    x = np.zeros(n)
    for k, amp in enumerate((1.0, 0.7, 0.45, 0.3, 0.18, 0.1), start=1):
        x += amp * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    x += 0.12 * rng.standard_normal(n)
    contour = 0.5 * (1.0 + np.sin(2.0 * np.pi * 3.1 * t + rng.uniform(0, 2 * np.pi)))
    gaps = (np.sin(2.0 * np.pi * 0.7 * t + rng.uniform(0, 2 * np.pi)) > -0.6).astype(float)
    x *= contour * gaps
    return 0.5 * x / np.max(np.abs(x))


def white_noise(duration_s, seed, rms=0.05):
    rng = np.random.default_rng(seed)
    return rms * rng.standard_normal(round(duration_s * SAMPLE_RATE))


def modulated_white(duration_s, seed, rms=0.05, depth=0.5, rate_hz=0.5):
    x = white_noise(duration_s, seed, rms)
    t = np.arange(x.size) / SAMPLE_RATE
    return x * (1.0 + depth * np.sin(2.0 * np.pi * rate_hz * t))
