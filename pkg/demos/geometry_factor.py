"""How much of the sample does a shallow NV actually see?

Sweeps the radius of the hemispherical sample volume and shows that the
dipolar factor F saturates within a few NV depths, so micrometre-scale
samples already give the full signal.

    python3 demos/geometry_factor.py
"""

import numpy as np

from aeris import PhysicalConstants, estimate_total_amplitude, geometric_sweep, load_config

ratios = [1.25, 1.5, 2, 3, 5, 10, 20, 50, 100]
rows = geometric_sweep(ratios)
f_inf = 2 * np.pi * 2 / 3  # closed-form limit for an NV-centred hemisphere, axis along z

print(" R/depth      F      F/F_inf")
for r, f, *_ in rows:
    print(f"{r:8.2f} {f:8.4f} {f / f_inf:9.3f}")

half = np.interp(rows[-1, 1] / 2, rows[:, 1], rows[:, 0])
print(f"\nhalf of the large-volume value is reached at R = {half:.2f} depths")

sample = load_config("ethanol").sample()
b = estimate_total_amplitude(PhysicalConstants(), sample, rows[-1, 1])
print(f"ethanol at {sample.B_ext} T and {sample.temperature} K: total field {b * 1e9:.3f} nT")

# A tilted NV axis changes F; at the magic angle it vanishes.
magic = np.arccos(1 / np.sqrt(3))
axis = (np.sin(magic), 0.0, np.cos(magic))
tilted = geometric_sweep([50], nv_axis=axis)[0]
print(f"NV axis at the magic angle: F = {tilted[1]:.2e}, Gx = {tilted[2]:.3f}")
