"""Corpus synthesis: peak-level scaling, SNR mixing, and record emission.

A manifest resolves every random choice (sources, SNRs, peak levels, noise
excerpt offsets, noise-only flags) up front, so building the corpus from the
same manifest is deterministic down to the byte.
"""

from __future__ import annotations

import json
import wave
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .audio import SAMPLE_RATE, read_wav, write_wav
from .errors import FormatError
from .features import FeatureKind, FeatureMatrix, Trackers, assemble, irm, stack_context
from .records import RecordWriter
from .stft import FrameParams, stft


@dataclass
class MixRecord:
    """One resolved utterance of the corpus."""

    index: int
    noise: str
    noise_offset: int
    speech: str | None = None
    snr_db: float | None = None
    peak_dbfs: float | None = None
    noise_only: bool = False
    duration_seconds: float | None = None  # noise-only records carry their own length


@dataclass
class CorpusManifest:
    seed: int
    records: list
    feature_kinds: list = field(default_factory=lambda: [FeatureKind.SNR_NAT])
    context: int = 4
    init_seconds: float = 2.0
    sample_rate: int = SAMPLE_RATE

    def to_json(self) -> str:
        data = asdict(self)
        data["feature_kinds"] = [k.value for k in self.feature_kinds]
        return json.dumps(data, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CorpusManifest":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"manifest is not valid JSON: {exc}") from exc
        try:
            kinds = [FeatureKind(k) for k in data["feature_kinds"]]
            records = [MixRecord(**r) for r in data["records"]]
            return cls(
                seed=data["seed"],
                records=records,
                feature_kinds=kinds,
                context=data.get("context", 4),
                init_seconds=data.get("init_seconds", 2.0),
                sample_rate=data.get("sample_rate", SAMPLE_RATE),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"manifest is malformed: {exc}") from exc


def load_manifest(path) -> CorpusManifest:
    return CorpusManifest.from_json(Path(path).read_text())


def _wav_duration(path) -> float:
    with wave.open(str(path), "rb") as fh:
        return fh.getnframes() / fh.getframerate()


def make_manifest(
    speech_paths,
    noise_paths,
    num_records: int,
    seed: int,
    snr_range=(-10.0, 15.0),
    peak_range=(-26.0, -3.0),
    noise_only_fraction: float = 0.1,
    init_seconds: float = 2.0,
    feature_kinds=(FeatureKind.SNR_NAT,),
    context: int = 4,
) -> CorpusManifest:
    """Resolve all random corpus choices into a reproducible manifest.

    round(noise_only_fraction * num_records) records carry noise only; their
    positions and every per-record draw come from the seed.
    """
    speech_paths = [str(p) for p in speech_paths]
    noise_paths = [str(p) for p in noise_paths]
    if not speech_paths or not noise_paths:
        raise ValueError("need at least one speech and one noise source")
    if num_records < 1:
        raise ValueError("num_records must be >= 1")
    rng = np.random.default_rng(seed)
    n_noise_only = int(round(noise_only_fraction * num_records))
    noise_only_at = set(rng.permutation(num_records)[:n_noise_only].tolist())
    noise_samples = {p: int(round(_wav_duration(p) * SAMPLE_RATE)) for p in noise_paths}
    records = []
    for index in range(num_records):
        noise = noise_paths[int(rng.integers(len(noise_paths)))]
        offset = int(rng.integers(noise_samples[noise]))
        speech = speech_paths[int(rng.integers(len(speech_paths)))]
        if index in noise_only_at:
            records.append(
                MixRecord(
                    index=index,
                    noise=noise,
                    noise_offset=offset,
                    noise_only=True,
                    duration_seconds=_wav_duration(speech),
                )
            )
        else:
            records.append(
                MixRecord(
                    index=index,
                    noise=noise,
                    noise_offset=offset,
                    speech=speech,
                    snr_db=float(rng.uniform(*snr_range)),
                    peak_dbfs=float(rng.uniform(*peak_range)),
                )
            )
    return CorpusManifest(
        seed=seed,
        records=records,
        feature_kinds=list(feature_kinds),
        context=context,
        init_seconds=init_seconds,
    )


def scale_to_peak(samples, peak_dbfs: float):
    """Scale so the time-domain peak hits 10^(peak_dbfs/20); returns (scaled, gain)."""
    x = np.asarray(samples, dtype=np.float64)
    peak = float(np.max(np.abs(x)))
    if peak == 0.0:
        raise ValueError("cannot scale an all-zero signal to a peak level")
    gain = 10.0 ** (peak_dbfs / 20.0) / peak
    return x * gain, gain


def mix_at_snr(speech, noise, snr_db: float, init_len: int = 0):
    """Mix speech into noise at the requested SNR; returns (noisy, noise_gain).

    The speech starts after init_len noise-only samples; the SNR is defined
    over the full sentence extent, excluding that preamble.
    """
    s = np.asarray(speech, dtype=np.float64)
    n = np.asarray(noise, dtype=np.float64)
    total = init_len + s.size
    if n.size < total:
        raise ValueError("noise must cover the speech plus the preamble")
    segment = n[init_len:total]
    s_energy = float(np.sum(s**2))
    n_energy = float(np.sum(segment**2))
    if s_energy == 0.0 or n_energy == 0.0:
        raise ValueError("speech and noise must have nonzero energy")
    gain = float(np.sqrt(s_energy / (n_energy * 10.0 ** (snr_db / 10.0))))
    noisy = gain * n[:total]
    noisy[init_len:] += s
    return noisy, gain


def excerpt(noise, offset: int, length: int) -> np.ndarray:
    """length samples starting at offset, wrapping around a short source."""
    idx = (offset + np.arange(length)) % noise.size
    return noise[idx]


def synthesize_record(record: MixRecord, manifest: CorpusManifest):
    """Audio components of one record.

    Returns (noisy, speech_component, noise_component, speech_gain,
    noise_gain); the components add up to the noisy signal exactly.
    """
    init_len = round(manifest.init_seconds * manifest.sample_rate)
    noise_source = read_wav(record.noise)
    if record.noise_only:
        length = round(record.duration_seconds * manifest.sample_rate)
        noise = excerpt(noise_source, record.noise_offset, init_len + length)
        return noise.copy(), np.zeros(init_len + length), noise, 0.0, 1.0
    speech_raw = read_wav(record.speech)
    speech, speech_gain = scale_to_peak(speech_raw, record.peak_dbfs)
    noise = excerpt(noise_source, record.noise_offset, init_len + speech.size)
    noisy, noise_gain = mix_at_snr(speech, noise, record.snr_db, init_len)
    speech_comp = np.concatenate([np.zeros(init_len), speech])
    return noisy, speech_comp, noise_gain * noise, speech_gain, noise_gain


def _record_features(record: MixRecord, manifest: CorpusManifest, params: FrameParams):
    """Features per kind and IRM targets for one record, init frames dropped."""
    noisy, speech_comp, noise_comp, speech_gain, noise_gain = synthesize_record(
        record, manifest
    )
    init_frames = params.num_frames(round(manifest.init_seconds * manifest.sample_rate))
    noisy_spec = stft(noisy, params)
    power = noisy_spec.power()
    trackers = Trackers.from_preamble(power[:init_frames])
    need_speech = any(k.needs_speech_psd for k in manifest.feature_kinds)
    noise_psd, speech_psd = trackers.run(power, need_speech=need_speech)
    target = irm(stft(speech_comp, params), stft(noise_comp, params))

    per_kind = {}
    for kind in manifest.feature_kinds:
        rows = assemble(kind, power, noise_psd, speech_psd)
        feats = FeatureMatrix(rows, kind)
        if manifest.context > 1:
            feats = stack_context(feats, manifest.context)
        per_kind[kind] = feats.rows[init_frames:]
    stats = {
        "index": record.index,
        "noise_only": record.noise_only,
        "frames_kept": int(power.shape[0] - init_frames),
        "speech_gain": speech_gain,
        "noise_gain": noise_gain,
        "achieved_snr_db": _achieved_snr(speech_comp, noise_comp, manifest),
    }
    return per_kind, target[init_frames:], stats, (noisy, speech_comp, noise_comp)


def _achieved_snr(speech_comp, noise_comp, manifest: CorpusManifest):
    init_len = round(manifest.init_seconds * manifest.sample_rate)
    s_energy = float(np.sum(speech_comp[init_len:] ** 2))
    n_energy = float(np.sum(noise_comp[init_len:] ** 2))
    if s_energy == 0.0 or n_energy == 0.0:
        return None
    return 10.0 * np.log10(s_energy / n_energy)


def build_corpus(manifest: CorpusManifest, out_dir, workers: int = 1, dump_audio: bool = False):
    """Synthesize every record and emit one record file per feature kind.

    Record files are named <kind>.rec; a stats.json with per-record frame
    counts, gains and achieved SNRs is written next to them.  Synthesis may
    fan out over a worker pool; blocks are written in manifest order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = FrameParams()
    tasks = [(record, manifest, params) for record in manifest.records]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_record_features_star, tasks))
    else:
        results = [_record_features_star(t) for t in tasks]

    writers = {
        kind: RecordWriter(
            out_dir / f"{kind.value}.rec",
            kind,
            kind.base_dim() * manifest.context,
            manifest.context,
            params.fft_bins_kept,
        )
        for kind in manifest.feature_kinds
    }
    all_stats = []
    try:
        for record, (per_kind, target, stats, audio) in zip(manifest.records, results):
            for kind, rows in per_kind.items():
                writers[kind].add(rows, target)
            all_stats.append(stats)
            if dump_audio:
                noisy, speech_comp, noise_comp = audio
                write_wav(out_dir / f"record{record.index:04d}_noisy.wav", noisy)
                write_wav(out_dir / f"record{record.index:04d}_speech.wav", speech_comp)
                write_wav(out_dir / f"record{record.index:04d}_noise.wav", noise_comp)
    finally:
        for writer in writers.values():
            writer.close()
    summary = {
        "records": all_stats,
        "total_frames": int(sum(s["frames_kept"] for s in all_stats)),
        "feature_kinds": [k.value for k in manifest.feature_kinds],
        "context": manifest.context,
    }
    (out_dir / "stats.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


def _record_features_star(task):
    return _record_features(*task)
