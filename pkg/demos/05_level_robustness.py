"""Why SNR-normalized features: the gain field ignores the absolute level.

Log-periodogram features shift by 2 log g when the waveform is scaled by g,
so a network fed with them sees every playback level as a different input.
The SNR-normalized features divide everything by the tracked noise PSD; the
level cancels before the network ever sees the frame.  This script sweeps a
34 dB level range and prints how much each representation moves.
"""

import numpy as np

from snrmask import EnhanceConfig, FeatureKind, Trackers, extract, gain_field, glorot_init, stft
from snrmask.dataset import mix_at_snr
from snrmask.enhance import MODE_DNN
from snrmask.network import Activation, LayerSpec

import signals

clean = signals.speech(3.0, seed=20)
noise = signals.white_noise(5.5, seed=21)
noisy, _ = mix_at_snr(clean, noise, snr_db=5.0, init_len=16000)


def features(kind, scale):
    spec = stft(scale * noisy)
    trackers = Trackers.from_preamble(spec.power()[:124])
    return extract(spec, kind, trackers).rows


model = glorot_init(
    (LayerSpec(258, 32, Activation.RELU), LayerSpec(32, 129, Activation.SIGMOID)),
    seed=4, feature_kind=FeatureKind.SNR_NAT, context=1,
)
config = EnhanceConfig(mode=MODE_DNN)

base_snr = features(FeatureKind.SNR_NAT, 1.0)
base_per = features(FeatureKind.LOG_PERIODOGRAM, 1.0)
_, base_gains = gain_field(noisy, config, model=model)

print("level    |SNR-NAT move|   |log-per move|   |gain move|")
for level_db in (-34.0, -20.0, -8.0, 0.0, 12.0):
    g = 10.0 ** (level_db / 20.0)
    d_snr = np.max(np.abs(features(FeatureKind.SNR_NAT, g) - base_snr))
    d_per = np.max(np.abs(features(FeatureKind.LOG_PERIODOGRAM, g) - base_per))
    _, gains = gain_field(g * noisy, config, model=model)
    d_gain = np.max(np.abs(gains - base_gains))
    print(f"{level_db:+6.0f} dB   {d_snr:12.2e}   {d_per:14.4f}   {d_gain:10.2e}")

print("\nlog-periodogram features move by exactly |2 ln g| =",
      ", ".join(f"{abs(2 * np.log(10 ** (db / 20))):.4f}" for db in (-34, -20, -8, 0, 12)))
print("the SNR-normalized features and the resulting masks do not move at all.")
