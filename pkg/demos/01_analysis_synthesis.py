"""Analysis/synthesis basics: square-root Hann windows and exact overlap-add.

The same square-root Hann window is used for analysis and synthesis, so the
squared window appears once in the round trip.  Because the squared periodic
Hann sums to one across half-window shifts, every interior sample is
reconstructed exactly; only the first and last half windows taper off.
"""

import numpy as np

from snrmask import istft, sqrt_hann, stft

import signals

w = sqrt_hann(256)
print("window peak              :", w[128])
print("w^2 overlap sum (min/max):", (w[:128] ** 2 + w[128:] ** 2).min(),
      (w[:128] ** 2 + w[128:] ** 2).max())

x = signals.white_noise(2.0, seed=1, rms=0.3)
spec = stft(x)
print(f"\n2 s at 8 kHz -> {spec.num_frames} frames x {spec.frames.shape[1]} bins")

y = istft(spec)
interior = slice(128, y.size - 128)
err = np.max(np.abs(y[interior] - x[interior])) / np.max(np.abs(x))
print(f"interior round-trip relative error: {err:.3e}")

edge_err = np.max(np.abs(y[:128] - x[:128])) / np.max(np.abs(x))
print(f"leading half-window relative deviation (tapered, expected): {edge_err:.3f}")
