"""Desk-scale supervised training: synthesize a corpus, fit a mask predictor.

The corpus recipe: every record is a sentence scaled to a random peak level,
embedded in a random noise excerpt at a random SNR behind a 2 s noise-only
preamble; one record in ten contains only noise.  Features are SNR-normalized
(log a priori and a posteriori SNR) with four stacked frames; targets are the
oracle ratio masks.  Training frames inside the preamble are dropped.
"""

import tempfile
from pathlib import Path

import numpy as np

from snrmask import EnhanceConfig, TrainConfig, gain_field, glorot_init, istft, stft
from snrmask.audio import write_wav
from snrmask.dataset import build_corpus, make_manifest, mix_at_snr
from snrmask.enhance import MODE_DNN
from snrmask.features import FeatureKind
from snrmask.metrics import seg_nr, seg_ssnr, shadow_filter
from snrmask.network import preset_layers, train
from snrmask.records import read_records

import signals

work = Path(tempfile.mkdtemp(prefix="snrmask_demo_"))
print(f"working in {work}")

speech_paths, noise_paths = [], []
for i in range(6):
    p = work / f"speech{i}.wav"
    write_wav(p, signals.speech(5.0, seed=100 + i))
    speech_paths.append(p)
for name, maker in (("white", signals.white_noise), ("modwhite", signals.modulated_white)):
    p = work / f"{name}.wav"
    write_wav(p, maker(30.0, seed=hash(name) % 1000))
    noise_paths.append(p)

manifest = make_manifest(
    speech_paths, noise_paths, num_records=20, seed=1,
    snr_range=(-5.0, 15.0), feature_kinds=[FeatureKind.SNR_NAT], context=4,
)
build_corpus(manifest, work / "corpus")
record_file = read_records(work / "corpus" / "snrnat.rec")
print(f"corpus: {len(record_file.utterances)} records, {record_file.num_frames} frames, "
      f"{record_file.feat_dim}-dim features")

layers = preset_layers("ff", "desk", in_dim=record_file.feat_dim)
params = glorot_init(layers, seed=2, feature_kind=FeatureKind.SNR_NAT, context=4)
best, history = train(params, record_file.feature_matrices(), TrainConfig(epochs=20, seed=3))
print(f"\nepoch  1: val loss {history[0].val_loss:.4f}")
print(f"best     : val loss {min(s.val_loss for s in history):.4f}")

# held-out sentence in an unseen noise realization
clean = signals.speech(4.0, seed=500)
noise = signals.white_noise(6.5, seed=501)
noisy, g = mix_at_snr(clean, noise, snr_db=5.0, init_len=16000)
speech_comp = np.concatenate([np.zeros(16000), clean])
noise_comp = g * noise[: noisy.size]

config = EnhanceConfig(mode=MODE_DNN)
_, gains = gain_field(noisy, config, model=best)
speech_spec, noise_spec = stft(speech_comp), stft(noise_comp)
nr = seg_nr(istft(noise_spec), istft(shadow_filter(noise_spec, gains, config.gain_floor)))
ssnr = seg_ssnr(istft(speech_spec), istft(shadow_filter(speech_spec, gains, config.gain_floor)))
print(f"\nheld-out 5 dB mixture: SegNR {nr:.1f} dB, SegSSNR {ssnr:.1f} dB")
