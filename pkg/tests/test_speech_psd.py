import numpy as np
import pytest

from snrmask.speech_psd import (
    SpeechPsdEstimator,
    TcsConfig,
    cepstrum_to_log,
    detect_pitch_peak,
    log_to_cepstrum,
    ml_speech_psd,
)

BIAS = np.exp(0.5 * np.euler_gamma)  # about 1.33457


def mirror_idft_oracle(log_half):
    """Independent cepstrum oracle: explicit mirroring plus a full IDFT sum."""
    k = len(log_half)
    n = 2 * (k - 1)
    full = np.concatenate([log_half, log_half[-2:0:-1]])
    q = np.arange(n)[:, None]
    t = np.arange(n)[None, :]
    return np.real(np.sum(full[None, :] * np.exp(2j * np.pi * q * t / n), axis=1)) / n


class TestMlSpeechPsd:
    def test_plain_subtraction_branch(self):
        # snr 5 with noise psd 2 -> 2 * (5 - 1) = 8
        out = ml_speech_psd(np.array([10.0]), np.array([2.0]))
        assert out[0] == pytest.approx(8.0)

    def test_floor_branch(self):
        out = ml_speech_psd(np.array([1.0]), np.array([2.0]))
        assert out[0] == pytest.approx(1e-3 * 2.0)

    def test_boundary_equal_power(self):
        out = ml_speech_psd(np.array([2.0]), np.array([2.0]))
        assert out[0] == pytest.approx(1e-3 * 2.0)

    def test_nonpositive_noise_rejected(self):
        with pytest.raises(ValueError):
            ml_speech_psd(np.ones(3), np.array([1.0, 0.0, 1.0]))


class TestCepstrumTransforms:
    def test_matches_mirror_idft_oracle(self):
        rng = np.random.default_rng(0)
        log_half = rng.standard_normal(129)
        assert np.allclose(log_to_cepstrum(log_half), mirror_idft_oracle(log_half), atol=1e-9)

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        log_half = rng.standard_normal(129)
        rebuilt = cepstrum_to_log(log_to_cepstrum(log_half))
        assert np.max(np.abs(rebuilt - log_half)) < 1e-9

    def test_flat_spectrum_has_dc_only_cepstrum(self):
        ceps = log_to_cepstrum(np.full(129, 2.3))
        assert ceps[0] == pytest.approx(2.3)
        assert np.max(np.abs(ceps[1:])) < 1e-12


class TestPitchDetection:
    def test_harmonic_ripple_at_100_hz(self):
        # 100 Hz fundamental shows up at quefrency 10 ms = index 80
        k = np.arange(129)
        log_half = 1.5 * np.cos(2.0 * np.pi * k * 80.0 / 256.0)
        ceps = log_to_cepstrum(log_half)
        oracle = 16 + int(np.argmax(mirror_idft_oracle(log_half)[16:129]))
        assert oracle == 80
        assert detect_pitch_peak(ceps) == 80

    def test_flat_cepstrum_is_unvoiced(self):
        assert detect_pitch_peak(np.zeros(256)) is None
        assert detect_pitch_peak(np.full(256, 0.4)) is None

    def test_tie_breaks_to_lower_quefrency(self):
        ceps = np.zeros(256)
        ceps[40] = ceps[90] = 5.0
        assert detect_pitch_peak(ceps) == 40


class TestEstimator:
    def test_no_smoothing_is_bias_corrected_pass_through(self):
        cfg = TcsConfig(alpha_env=0.0, alpha_rest=0.0, alpha_pitch=0.0)
        est = SpeechPsdEstimator(cfg)
        rng = np.random.default_rng(2)
        for _ in range(3):
            power = rng.uniform(0.5, 4.0, 129)
            noise = rng.uniform(0.2, 1.0, 129)
            out = est.estimate(power, noise)
            expected = ml_speech_psd(power, noise, cfg.snr_floor) * BIAS
            assert np.allclose(out, expected, rtol=1e-9)

    def test_first_frame_initializes_without_smoothing(self):
        est = SpeechPsdEstimator()
        power = np.full(129, 3.0)
        out = est.estimate(power, np.ones(129))
        assert np.allclose(out, 2.0 * BIAS, rtol=1e-9)

    def test_constant_input_converges_to_bias_times_ml(self):
        est = SpeechPsdEstimator()
        rng = np.random.default_rng(3)
        power = rng.uniform(1.0, 5.0, 129)
        noise = np.full(129, 0.3)
        for _ in range(250):
            out = est.estimate(power, noise)
        ml = ml_speech_psd(power, noise)
        assert np.allclose(out / ml, BIAS, rtol=1e-3)
        assert BIAS == pytest.approx(1.33457, abs=1e-5)

    def test_flat_spectrum_stays_flat(self):
        est = SpeechPsdEstimator()
        for _ in range(10):
            out = est.estimate(np.full(129, 4.0), np.full(129, 1.0))
        assert np.max(np.abs(out - out.mean())) / out.mean() < 1e-10

    def test_scale_equivariance(self):
        rng = np.random.default_rng(4)
        frames = rng.uniform(0.5, 6.0, size=(20, 129))
        noises = rng.uniform(0.1, 1.0, size=(20, 129))
        g2 = 2.0 ** 16
        a, b = SpeechPsdEstimator(), SpeechPsdEstimator()
        for power, noise in zip(frames, noises):
            out_a = a.estimate(power, noise)
            out_b = b.estimate(g2 * power, g2 * noise)
            assert np.allclose(out_b, g2 * out_a, rtol=1e-12)

    def test_output_positive_and_finite(self):
        est = SpeechPsdEstimator()
        rng = np.random.default_rng(5)
        for _ in range(30):
            out = est.estimate(rng.uniform(0.0, 10.0, 129), rng.uniform(1e-6, 2.0, 129))
            assert np.all(out > 0.0) and np.all(np.isfinite(out))

    def test_smoothing_is_convex_per_quefrency(self):
        est = SpeechPsdEstimator()
        rng = np.random.default_rng(6)
        est.estimate(rng.uniform(0.5, 2.0, 129), np.ones(129))
        prev = est.cepstrum.copy()
        power = rng.uniform(0.5, 2.0, 129)
        est.estimate(power, np.ones(129))
        current = log_to_cepstrum(np.log(ml_speech_psd(power, np.ones(129))))
        lo = np.minimum(prev, current) - 1e-12
        hi = np.maximum(prev, current) + 1e-12
        assert np.all((est.cepstrum >= lo) & (est.cepstrum <= hi))

    def test_voiced_override_controls_pitch_protection(self):
        # a strong ripple makes the frame voiced; forcing voiced=False must
        # change the smoothing at the pitch quefrency
        k = np.arange(129)
        ripple = np.exp(1.5 * np.cos(2.0 * np.pi * k * 80.0 / 256.0))
        est_auto = SpeechPsdEstimator()
        est_off = SpeechPsdEstimator()
        flat_p, flat_n = np.full(129, 1.5), np.ones(129)
        est_auto.estimate(flat_p, flat_n)
        est_off.estimate(flat_p, flat_n)
        out_auto = est_auto.estimate(ripple, flat_n)
        out_off = est_off.estimate(ripple, flat_n, voiced=False)
        assert not np.allclose(out_auto, out_off)
        # pitch protection keeps more of the instantaneous ripple
        assert abs(est_auto.cepstrum[80]) > abs(est_off.cepstrum[80])


class TestConfig:
    def test_alpha_ranges_validated(self):
        with pytest.raises(ValueError):
            TcsConfig(alpha_rest=1.0)
        with pytest.raises(ValueError):
            TcsConfig(alpha_env=-0.1)
        with pytest.raises(ValueError):
            TcsConfig(snr_floor=0.0)
