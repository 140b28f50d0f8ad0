"""Batch command-line surface: synth, featdump, train, enhance, eval, actdump.

Exit codes: 0 ok, 2 usage, 3 io, 4 format, 5 numeric.  Verbosity is
controlled by the SNRMASK_LOG environment variable (DEBUG/INFO/WARNING).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import network
from .audio import read_wav, write_wav
from .enhance import MODE_CONVENTIONAL, MODE_DNN, EnhanceConfig, enhance, gain_field
from .errors import FormatError, NumericError
from .features import FeatureKind, Trackers, extract
from .metrics import seg_nr, seg_ssnr, shadow_filter
from .records import RecordWriter, read_records
from .stft import FrameParams, istft, stft

log = logging.getLogger("snrmask")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_NUMERIC = 5

LEVEL_SWEEP_DBFS = (-40.0, -24.0, -18.0, -12.0, -6.0)
SNR_SWEEP_DB = (-5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
RANDOM_PEAK_RANGE = (-26.0, -3.0)

TSV_COLUMNS = (
    "condition",
    "snr_db",
    "peak_dbfs",
    "feature",
    "dataset",
    "seg_ssnr",
    "seg_nr",
    "delta_seg_ssnr",
    "delta_seg_nr",
)


def _feature_kind(name: str) -> FeatureKind:
    try:
        return FeatureKind(name)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown feature kind {name!r}")


def _require_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {p}")
    return p


def _load_features_from_wav(wav_path, kind, context, frames=None):
    samples = read_wav(_require_file(wav_path))
    params = FrameParams()
    spec = stft(samples, params)
    init_frames = params.num_frames(2 * params.sample_rate)
    if spec.num_frames < init_frames:
        raise ValueError("input must cover the 2 s initialization region")
    trackers = Trackers.from_preamble(spec.power()[:init_frames])
    features = extract(spec, kind, trackers, context=context)
    if frames is not None:
        features.rows = features.rows[:frames]
    return features


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args):
    manifest = ds.load_manifest(_require_file(args.manifest))
    summary = ds.build_corpus(manifest, args.out, workers=args.workers, dump_audio=args.dump_audio)
    log.info(
        "synthesized %d records, %d frames", len(summary["records"]), summary["total_frames"]
    )


def cmd_featdump(args):
    features = _load_features_from_wav(args.wav, args.feature, args.context, args.frames)
    with RecordWriter(args.out, features.kind, features.dim, features.context, mask_dim=0) as writer:
        writer.add(features)
    log.info("wrote %d frames of %s features", features.num_frames, features.kind.value)


def cmd_train(args):
    record_file = read_records(_require_file(args.records))
    if record_file.mask_dim == 0:
        raise FormatError(f"{args.records}: record file carries no training targets")
    layers = network.preset_layers(args.arch, args.preset, in_dim=record_file.feat_dim)
    params = network.glorot_init(layers, args.seed, record_file.kind, record_file.context)
    cfg = network.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        val_fraction=args.val_fraction,
        seed=args.seed,
    )
    best, history = network.train(params, record_file.feature_matrices(), cfg)
    for stats in history:
        log.info(
            "epoch %3d  lr %.4f  train %.6f  val %.6f",
            stats.epoch,
            stats.lr,
            stats.train_loss,
            stats.val_loss,
        )
    network.save(best, args.out)
    best_epoch = min(history, key=lambda s: s.val_loss)
    log.info("saved model from epoch %d (val %.6f)", best_epoch.epoch, best_epoch.val_loss)


def cmd_enhance(args):
    samples = read_wav(_require_file(args.wav_in))
    model = None
    if args.mode == "dnn":
        if args.model is None:
            raise ValueError("dnn mode needs --model")
        model = network.load(_require_file(args.model))
    config = EnhanceConfig(
        gain_floor=10.0 ** (args.gain_floor_db / 20.0),
        mode=MODE_DNN if args.mode == "dnn" else MODE_CONVENTIONAL,
        feature_kind=args.feature,
    )
    write_wav(args.out, enhance(samples, config, model))


def cmd_actdump(args):
    model = network.load(_require_file(args.model))
    if model.feature_kind is None:
        raise FormatError(f"{args.model}: model does not record its feature kind")
    features = _load_features_from_wav(args.wav, model.feature_kind, model.context, args.frames)
    _, hidden = network.forward(model, features)
    with RecordWriter(args.out, None, hidden.shape[1], 1, mask_dim=0) as writer:
        writer.add(hidden)
    log.info("wrote %d frames of %d-unit activations", hidden.shape[0], hidden.shape[1])


# --- eval ------------------------------------------------------------------


def _load_testset(path):
    import json

    raw = _require_file(path).read_text()
    try:
        data = json.loads(raw)
        speech = [str(p) for p in data["speech"]]
        noise = [str(p) for p in data["noise"]]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: testset is malformed: {exc}") from exc
    if not speech or not noise:
        raise FormatError(f"{path}: testset needs speech and noise entries")
    return data.get("name", Path(path).stem), speech, noise


def _eval_task(task):
    """Metrics for one (sentence, noise, grid cell) mixture.

    Returns {condition: (seg_ssnr, seg_nr)}; the conventional chain always
    runs so dnn rows can report deltas against it.
    """
    rng = np.random.default_rng(task["seed"])
    speech = read_wav(task["speech"])
    noise_source = read_wav(task["noise"])
    offset = int(rng.integers(noise_source.size))
    peak = task["peak_dbfs"]
    if peak is None:
        peak = float(rng.uniform(*RANDOM_PEAK_RANGE))
    scaled, _ = ds.scale_to_peak(speech, peak)
    params = FrameParams()
    init_len = 2 * params.sample_rate
    noise = ds.excerpt(noise_source, offset, init_len + scaled.size)
    noisy, noise_gain = ds.mix_at_snr(scaled, noise, task["snr_db"], init_len)
    speech_comp = np.concatenate([np.zeros(init_len), scaled])
    noise_comp = noise_gain * noise

    speech_spec = stft(speech_comp, params)
    noise_spec = stft(noise_comp, params)
    # reference components share the analysis-synthesis edge taper
    speech_ref = istft(speech_spec)
    noise_ref = istft(noise_spec)
    floor = task["gain_floor"]

    out = {}
    conditions = [(MODE_CONVENTIONAL, None)]
    if task["model_path"] is not None:
        conditions.append((MODE_DNN, task["model_path"]))
    for mode, model_path in conditions:
        model = _cached_model(model_path) if model_path else None
        config = EnhanceConfig(gain_floor=floor, mode=mode)
        _, gains = gain_field(noisy, config, model)
        s_filt = istft(shadow_filter(speech_spec, gains, floor))
        n_filt = istft(shadow_filter(noise_spec, gains, floor))
        out[mode] = (seg_ssnr(speech_ref, s_filt), seg_nr(noise_ref, n_filt))
    return out


_MODEL_CACHE = {}


def _cached_model(path):
    if path not in _MODEL_CACHE:
        _MODEL_CACHE[path] = network.load(path)
    return _MODEL_CACHE[path]


def cmd_eval(args):
    name, speech_paths, noise_paths = _load_testset(args.testset)
    model_path = None
    feature = "-"
    if args.mode == "dnn":
        if args.model is None:
            raise ValueError("dnn mode needs --model")
        model = network.load(_require_file(args.model))
        model_path = str(args.model)
        if model.feature_kind is not None:
            feature = model.feature_kind.value
    floor = 10.0 ** (args.gain_floor_db / 20.0)

    if args.sweep == "level":
        cells = [(args.snr_db, level) for level in args.levels]
    else:
        cells = [(snr, None) for snr in args.snrs]

    tasks = []
    for cell_idx, (snr_db, peak) in enumerate(cells):
        for pair_idx, (sp, np_path) in enumerate(
            [(s, n) for s in speech_paths for n in noise_paths]
        ):
            tasks.append(
                {
                    "speech": sp,
                    "noise": np_path,
                    "snr_db": snr_db,
                    "peak_dbfs": peak,
                    "seed": np.random.SeedSequence(
                        [args.seed, cell_idx, pair_idx]
                    ).generate_state(1)[0],
                    "model_path": model_path,
                    "gain_floor": floor,
                    "cell": cell_idx,
                }
            )
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_eval_task, tasks))
    else:
        results = [_eval_task(t) for t in tasks]

    rows = []
    pairs_per_cell = len(speech_paths) * len(noise_paths)
    for cell_idx, (snr_db, peak) in enumerate(cells):
        cell_results = results[cell_idx * pairs_per_cell : (cell_idx + 1) * pairs_per_cell]
        conv = np.mean([r[MODE_CONVENTIONAL] for r in cell_results], axis=0)
        reported = [(MODE_CONVENTIONAL, conv)]
        if model_path is not None:
            reported.append((MODE_DNN, np.mean([r[MODE_DNN] for r in cell_results], axis=0)))
        for condition, (mean_ssnr, mean_nr) in reported:
            rows.append(
                {
                    "condition": condition,
                    "snr_db": f"{snr_db:.1f}",
                    "peak_dbfs": "-" if peak is None else f"{peak:.1f}",
                    "feature": feature if condition == MODE_DNN else "-",
                    "dataset": name,
                    "seg_ssnr": f"{mean_ssnr:.6f}",
                    "seg_nr": f"{mean_nr:.6f}",
                    "delta_seg_ssnr": f"{mean_ssnr - conv[0]:.6f}",
                    "delta_seg_nr": f"{mean_nr - conv[1]:.6f}",
                }
            )

    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TSV_COLUMNS, delimiter="\t", lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    log.info("wrote %d result rows to %s", len(rows), args.out)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snrmask",
        description="Speech enhancement with SNR-normalized mask prediction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="build feature/target records from a corpus manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump-audio", action="store_true", help="also write component WAVs")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featdump", help="extract features from one WAV file")
    p.add_argument("wav")
    p.add_argument("--feature", type=_feature_kind, required=True,
                   help="per|nat|prior|post|snrnat")
    p.add_argument("--context", type=int, default=1)
    p.add_argument("--frames", type=int, default=None, help="keep only the first N frames")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featdump)

    p = sub.add_parser("train", help="train a mask predictor on a record file")
    p.add_argument("records")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--arch", choices=("ff", "rec"), default="ff")
    p.add_argument("--preset", choices=("paper", "desk"), default="desk")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--val-fraction", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance one WAV file")
    p.add_argument("wav_in")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("conv", "dnn"), default="conv")
    p.add_argument("--model", default=None)
    p.add_argument("--feature", type=_feature_kind, default=None,
                   help="override/validate the model's feature kind")
    p.add_argument("--gain-floor-db", type=float, default=-20.0)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", help="sweep a test set and write a metrics TSV")
    p.add_argument("testset", help="JSON with speech and noise WAV lists")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("conv", "dnn"), default="conv")
    p.add_argument("--model", default=None)
    p.add_argument("--sweep", choices=("level", "snr"), default="snr")
    p.add_argument("--snr-db", type=float, default=5.0, help="fixed SNR for the level sweep")
    p.add_argument("--levels", type=float, nargs="+", default=list(LEVEL_SWEEP_DBFS))
    p.add_argument("--snrs", type=float, nargs="+", default=list(SNR_SWEEP_DB))
    p.add_argument("--gain-floor-db", type=float, default=-20.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("actdump", help="export second-last-layer activations")
    p.add_argument("wav")
    p.add_argument("--model", required=True)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_actdump)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("SNRMASK_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (ValueError, RuntimeError) as exc:
        log.error("usage: %s", exc)
        return EXIT_USAGE
    except FormatError as exc:
        log.error("format: %s", exc)
        return EXIT_FORMAT
    except NumericError as exc:
        log.error("numeric: %s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        log.error("io: %s", exc)
        return EXIT_IO
    return EXIT_OK


def entry() -> None:
    sys.exit(main())
