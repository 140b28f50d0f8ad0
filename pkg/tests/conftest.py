"""Shared fixtures: synthetic speech/noise generators and a desk-scale corpus.

No real corpora ship with the package, so tests synthesize speech-like
signals (harmonic voicing with formant coloring, syllabic modulation and
pauses) and the two stationary/modulated noise types used throughout.
"""

import numpy as np
import pytest

from snrmask.audio import SAMPLE_RATE, write_wav


def make_speech(duration_s, seed, sample_rate=SAMPLE_RATE):
    """Speech surrogate: voiced harmonic stretches with pauses and AM."""
    rng = np.random.default_rng(seed)
    n = round(duration_s * sample_rate)
    t = np.arange(n) / sample_rate
    f0 = 120.0 * (1.0 + 0.08 * np.sin(2.0 * np.pi * 2.3 * t + rng.uniform(0, 2 * np.pi)))
    phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate
    x = np.zeros(n)
    # low harmonics dominate, mimicking a glottal source behind formants
    for k, amp in enumerate((1.0, 0.7, 0.45, 0.3, 0.18, 0.1), start=1):
        x += amp * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    # unvoiced-ish component
    x += 0.12 * rng.standard_normal(n)
    # syllabic energy contour with silent gaps
    contour = 0.5 * (1.0 + np.sin(2.0 * np.pi * 3.1 * t + rng.uniform(0, 2 * np.pi)))
    gaps = (np.sin(2.0 * np.pi * 0.7 * t + rng.uniform(0, 2 * np.pi)) > -0.6).astype(float)
    x *= contour * gaps
    peak = np.max(np.abs(x))
    return 0.5 * x / peak if peak > 0 else x


def make_white_noise(duration_s, seed, rms=0.05, sample_rate=SAMPLE_RATE):
    rng = np.random.default_rng(seed)
    return rms * rng.standard_normal(round(duration_s * sample_rate))


def make_modulated_white(duration_s, seed, rms=0.05, depth=0.5, rate_hz=0.5,
                         sample_rate=SAMPLE_RATE):
    """Sinusoidally amplitude-modulated white noise (depth 0.5, 0.5 Hz)."""
    noise = make_white_noise(duration_s, seed, rms, sample_rate)
    t = np.arange(noise.size) / sample_rate
    return noise * (1.0 + depth * np.sin(2.0 * np.pi * rate_hz * t))


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """WAV sources for the desk corpus: 8 sentences, white + modulated noise."""
    root = tmp_path_factory.mktemp("sources")
    speech = []
    for i in range(8):
        path = root / f"speech{i}.wav"
        write_wav(path, make_speech(5.0, seed=100 + i))
        speech.append(path)
    noise = []
    for name, maker, seed in (
        ("white", make_white_noise, 300),
        ("modwhite", make_modulated_white, 301),
    ):
        path = root / f"{name}.wav"
        maker_kwargs = {"duration_s": 30.0, "seed": seed}
        write_wav(path, maker(**maker_kwargs))
        noise.append(path)
    return {"root": root, "speech": speech, "noise": noise}
