"""
Channel basics
==============

Power normalization, AWGN and Rayleigh transfer on random symbols.
Run with ``python3 demos/01_channel_basics.py``.
"""

# %%
import numpy as np

from djscc.channel import NOISELESS, frame, power_normalize, snr_to_noise_variance, transmit
from djscc.ndgrad import Tensor

rng = np.random.default_rng(0)

# a fake bottleneck: 4 items, 8 channels at 4x8 -> 128 complex symbols each
z = Tensor(rng.standard_normal((4, 8, 4, 8)))
s = power_normalize(frame(z), power=1.0)
print("symbols per item:", s.k)
print("energy per item :", s.power())

# %%
# noise variance for a few SNRs
for mu in (-3, 0, 7, 14):
    print(f"{mu:>4} dB -> sigma^2 = {snr_to_noise_variance(mu):.6f}")

# %%
# measured SNR after each transfer; item 3 rides the noiseless link
mus = [0.0, 7.0, 14.0, NOISELESS]
for kind in ("awgn", "rayleigh"):
    out = transmit(s, mus, kind, np.random.default_rng(1))
    err = np.mean(np.abs(out.to_complex() - s.to_complex()) ** 2, axis=1)
    with np.errstate(divide="ignore"):
        print(kind, np.round(10 * np.log10(1.0 / err), 2))
