"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
report.  The desk-scale corpus and the trained model are built once per
session and shared by the training, oracle-mask and noise-only criteria.
"""

import hashlib
import json
import time

import numpy as np
import pytest

from snrmask.cli import main as cli_main
from snrmask.dataset import make_manifest, mix_at_snr
from snrmask.enhance import MODE_DNN, EnhanceConfig, gain_field
from snrmask.features import FeatureKind, Trackers, extract, irm
from snrmask.metrics import seg_nr, seg_ssnr, shadow_filter
from snrmask.network import (
    Activation,
    LayerSpec,
    TrainConfig,
    glorot_init,
    gradients,
    lr_at,
    preset_layers,
    train,
)
from snrmask.noise_tracker import NoiseTracker
from snrmask.records import read_records
from snrmask.stft import FrameParams, istft, sqrt_hann, stft

from conftest import make_modulated_white, make_speech, make_white_noise

GAIN_FLOOR = 0.1
INIT_SAMPLES = 16000
SCALES = (10.0 ** (-1.7), 1.0, 10.0 ** 0.9)


def report(criterion, text):
    print(f"\n[criterion {criterion}] PASS - {text}")


def make_mixture(speech_seed, noise_seed, snr_db, stationary=True, speech_seconds=4.0):
    """Noisy utterance with a 2 s noise preamble plus its true components."""
    speech = make_speech(speech_seconds, seed=speech_seed)
    maker = make_white_noise if stationary else make_modulated_white
    noise = maker(2.0 + speech_seconds + 0.5, seed=noise_seed)
    noisy, gain = mix_at_snr(speech, noise, snr_db, INIT_SAMPLES)
    speech_comp = np.concatenate([np.zeros(INIT_SAMPLES), speech])
    noise_comp = gain * noise[: noisy.size]
    return noisy, speech_comp, noise_comp


def shadow_metrics(speech_comp, noise_comp, gains):
    speech_spec, noise_spec = stft(speech_comp), stft(noise_comp)
    ssnr = seg_ssnr(istft(speech_spec), istft(shadow_filter(speech_spec, gains, GAIN_FLOOR)))
    nr = seg_nr(istft(noise_spec), istft(shadow_filter(noise_spec, gains, GAIN_FLOOR)))
    return ssnr, nr


@pytest.fixture(scope="session")
def desk_model(corpus_dir, tmp_path_factory):
    """Criterion 6 artifacts: ~3 min corpus, desk MLP trained for 30 epochs."""
    out = tmp_path_factory.mktemp("desk_corpus")
    manifest = make_manifest(
        corpus_dir["speech"],
        corpus_dir["noise"],
        num_records=26,  # 26 x (2 s init + 5 s speech) is about three minutes
        seed=42,
        snr_range=(-5.0, 15.0),
        noise_only_fraction=0.1,
        feature_kinds=[FeatureKind.SNR_NAT],
        context=4,
    )
    from snrmask.dataset import build_corpus

    build_corpus(manifest, out)
    record_file = read_records(out / "snrnat.rec")
    layers = preset_layers("ff", "desk", in_dim=record_file.feat_dim)
    params = glorot_init(layers, seed=7, feature_kind=FeatureKind.SNR_NAT, context=4)
    start = time.perf_counter()
    best, history = train(
        params, record_file.feature_matrices(), TrainConfig(epochs=30, seed=7)
    )
    elapsed = time.perf_counter() - start
    return {"model": best, "history": history, "train_seconds": elapsed}


class TestCriterion1:
    def test_stft_round_trip(self):
        rng = np.random.default_rng(0)
        start = time.perf_counter()
        worst = 0.0
        for _ in range(5):
            x = rng.standard_normal(16000)
            y = istft(stft(x))
            interior = slice(128, y.size - 128)
            worst = max(worst, np.max(np.abs(y[interior] - x[interior])) / np.max(np.abs(x)))
        elapsed = time.perf_counter() - start
        assert worst < 1e-6
        assert elapsed < 1.0
        report(1, f"round-trip error {worst:.2e}, {elapsed * 1000:.0f} ms for 5 signals")


class TestCriterion2:
    def test_scale_invariance_of_snr_nat_pipeline(self):
        noisy, speech_comp, noise_comp = make_mixture(900, 901, 5.0)
        # a random-weight net suffices: the claim is about the features and
        # the gain field they induce, not about training
        model = glorot_init(
            (LayerSpec(258, 32, Activation.RELU), LayerSpec(32, 129, Activation.SIGMOID)),
            seed=3,
            feature_kind=FeatureKind.SNR_NAT,
            context=1,
        )
        config = EnhanceConfig(mode=MODE_DNN)

        def features_at(g):
            spec = stft(g * noisy)
            trackers = Trackers.from_preamble(spec.power()[:124])
            return extract(spec, FeatureKind.SNR_NAT, trackers).rows

        base_feats = features_at(1.0)
        _, base_gains = gain_field(noisy, config, model=model)
        nr_values = []
        feat_dev = gain_dev = 0.0
        for g in SCALES:
            feats = features_at(g)
            feat_dev = max(feat_dev, float(np.max(np.abs(feats - base_feats))))
            _, gains = gain_field(g * noisy, config, model=model)
            gain_dev = max(gain_dev, float(np.max(np.abs(gains - base_gains))))
            _, nr = shadow_metrics(g * speech_comp, g * noise_comp, gains)
            nr_values.append(nr)
        spread = max(nr_values) - min(nr_values)
        assert feat_dev < 1e-5
        assert gain_dev < 1e-5
        assert spread < 0.5

        # contrast: log periodogram features shift by exactly 2 log g
        def log_per_at(g):
            spec = stft(g * noisy)
            trackers = Trackers.from_preamble(spec.power()[:124])
            return extract(spec, FeatureKind.LOG_PERIODOGRAM, trackers).rows

        base_per = log_per_at(1.0)
        for g in SCALES:
            shifted = log_per_at(g)
            assert np.allclose(shifted - base_per, 2.0 * np.log(g), atol=1e-9)
        report(
            2,
            f"feature dev {feat_dev:.2e}, gain dev {gain_dev:.2e}, "
            f"SegNR spread {spread:.4f} dB over levels",
        )


class TestCriterion3:
    def test_tracker_accuracy_and_reconvergence(self):
        rng = np.random.default_rng(1)
        sigma = 0.05
        # 2 s init + 1 s steady + 6 dB level step + 2 s reconvergence
        part1 = sigma * rng.standard_normal(3 * 8000)
        part2 = 2.0 * sigma * rng.standard_normal(2 * 8000)
        x = np.concatenate([part1, part2])
        spec = stft(x)
        power = spec.power()
        params = FrameParams()
        init_frames = params.num_frames(INIT_SAMPLES)
        tracker = NoiseTracker()
        tracker.initialize(power[:init_frames])
        window_energy = float(np.sum(sqrt_hann(256) ** 2))  # 128
        true_low = sigma**2 * window_energy
        true_high = 4.0 * sigma**2 * window_energy
        psd_at = {}
        for l in range(power.shape[0]):
            psd, _ = tracker.update(power[l])
            psd_at[l] = psd
        one_second = params.num_frames(3 * 8000) - 1  # 1 s past the init region
        err_low = 10.0 * np.log10(psd_at[one_second] / true_low)
        assert abs(np.median(err_low)) < 3.0
        end = power.shape[0] - 1  # 2 s past the step
        err_high = 10.0 * np.log10(psd_at[end] / true_high)
        assert abs(np.median(err_high)) < 3.0
        report(
            3,
            f"median error {np.median(err_low):+.2f} dB after 1 s, "
            f"{np.median(err_high):+.2f} dB 2 s after a +6 dB step",
        )


class TestCriterion4:
    def test_gradients_match_finite_differences(self):
        from test_network import finite_difference_grads, max_rel_error, tiny_mlp, tiny_recurrent

        rng = np.random.default_rng(2)
        worst = 0.0
        for params, out_dim in ((tiny_mlp(seed=20), 4), (tiny_recurrent(seed=21), 3)):
            assert params.num_params() <= 200
            x = rng.standard_normal((9, 3))
            y = rng.uniform(0.1, 0.9, (9, out_dim))
            worst = max(
                worst,
                max_rel_error(gradients(params, x, y), finite_difference_grads(params, x, y)),
            )
        assert worst < 1e-4
        report(4, f"max relative gradient error {worst:.2e} (MLP and recurrent)")


class TestCriterion5:
    def test_learning_rate_schedule(self):
        assert lr_at(1) == 0.4
        assert lr_at(28) == pytest.approx(0.1001, abs=1e-4)
        assert lr_at(28) == 0.4 * 0.95**27
        assert lr_at(100) == 0.1
        report(5, f"lr(1)={lr_at(1)}, lr(28)={lr_at(28):.6f}, lr(100)={lr_at(100)}")


class TestCriterion6:
    def test_desk_training_and_heldout_enhancement(self, desk_model):
        history = desk_model["history"]
        assert desk_model["train_seconds"] < 600.0
        best_val = min(s.val_loss for s in history)
        assert best_val <= 0.7 * history[0].val_loss
        # held-out sentence and unseen stationary-noise realization at 5 dB
        noisy, speech_comp, noise_comp = make_mixture(910, 911, 5.0)
        config = EnhanceConfig(mode=MODE_DNN)
        _, gains = gain_field(noisy, config, model=desk_model["model"])
        ssnr, nr = shadow_metrics(speech_comp, noise_comp, gains)
        assert nr >= 5.0
        assert ssnr >= 10.0
        report(
            6,
            f"trained in {desk_model['train_seconds']:.0f} s, best val "
            f"{best_val:.4f} vs epoch-1 {history[0].val_loss:.4f}; held-out "
            f"SegNR {nr:.1f} dB, SegSSNR {ssnr:.1f} dB",
        )


class TestCriterion7:
    def test_oracle_mask_bounds_and_beats_trained_model(self, desk_model):
        noisy, speech_comp, noise_comp = make_mixture(920, 921, 0.0)
        oracle_gains = irm(stft(speech_comp), stft(noise_comp))
        _, oracle_nr = shadow_metrics(speech_comp, noise_comp, oracle_gains)
        assert 10.0 <= oracle_nr <= 20.0
        _, model_gains = gain_field(noisy, EnhanceConfig(mode=MODE_DNN), model=desk_model["model"])
        _, model_nr = shadow_metrics(speech_comp, noise_comp, model_gains)
        assert oracle_nr > model_nr
        report(7, f"oracle SegNR {oracle_nr:.1f} dB in [10, 20], model {model_nr:.1f} dB")


class TestCriterion8:
    def test_synth_train_eval_determinism(self, corpus_dir, tmp_path):
        manifest = make_manifest(
            corpus_dir["speech"][:3],
            corpus_dir["noise"],
            num_records=4,
            seed=17,
            feature_kinds=[FeatureKind.SNR_NAT],
            context=4,
        )
        manifest_path = tmp_path / "manifest.json"
        manifest_path.write_text(manifest.to_json())
        testset_path = tmp_path / "testset.json"
        testset_path.write_text(
            json.dumps(
                {
                    "name": "determinism",
                    "speech": [str(corpus_dir["speech"][3])],
                    "noise": [str(corpus_dir["noise"][0])],
                }
            )
        )
        digests = []
        for run in ("run1", "run2"):
            base = tmp_path / run
            base.mkdir()
            assert cli_main(["synth", str(manifest_path), "--out", str(base / "corpus")]) == 0
            assert (
                cli_main(
                    [
                        "train",
                        str(base / "corpus" / "snrnat.rec"),
                        "--out",
                        str(base / "model.snrm"),
                        "--epochs",
                        "3",
                        "--seed",
                        "23",
                    ]
                )
                == 0
            )
            assert (
                cli_main(
                    [
                        "eval",
                        str(testset_path),
                        "--out",
                        str(base / "results.tsv"),
                        "--mode",
                        "dnn",
                        "--model",
                        str(base / "model.snrm"),
                        "--sweep",
                        "level",
                        "--levels",
                        "-12",
                        "--seed",
                        "23",
                    ]
                )
                == 0
            )
            digests.append(
                tuple(
                    hashlib.sha256((base / name).read_bytes()).hexdigest()
                    for name in ("corpus/snrnat.rec", "model.snrm", "results.tsv")
                )
            )
        assert digests[0] == digests[1]
        report(8, "records, model, and TSV byte-identical across seeded reruns")


class TestCriterion9:
    def test_noise_only_input_is_rejected_by_the_mask(self, desk_model):
        # unseen white-noise realization, no speech at all
        noise = make_white_noise(6.0, seed=930, rms=0.04)
        _, gains = gain_field(noise, EnhanceConfig(mode=MODE_DNN), model=desk_model["model"])
        effective = np.maximum(gains, GAIN_FLOOR)
        frame_means = effective.mean(axis=1)
        closed = np.mean(frame_means <= GAIN_FLOOR + 0.05)
        assert closed >= 0.9
        report(
            9,
            f"{100 * closed:.1f}% of noise-only frames at mean gain <= floor+0.05 "
            f"(median {np.median(frame_means):.3f})",
        )
