"""
Cross attention between the two streams
=======================================

Builds one attention block, feeds it two feature maps and looks at the
attention weights and the quality tokens.
"""

# %%
import numpy as np

from djscc.channel import NOISELESS
from djscc.model import SCAM, attach_token, attention_weights, select_token
from djscc.ndgrad import Tensor

rng = np.random.default_rng(0)
scam = SCAM(channels=8, mlp_ratio=4, snr_range=(-3.0, 14.0), interval=1.0, rng=rng, dtype=np.float64)
print("quality tokens:", scam.tokens.count, "+ 1 noiseless")
for mu in (-3.0, 0.4, 13.5, 99.0, NOISELESS):
    print(f"  mu={mu:>6} -> token {select_token(mu, scam.tokens)}")

# %%
fx = Tensor(rng.standard_normal((1, 8, 2, 4)))
fy = Tensor(rng.standard_normal((1, 8, 2, 4)))
bx = attach_token(fx, scam.tokens.lookup([5.0]))
by = attach_token(fy, scam.tokens.lookup([NOISELESS]))
w = attention_weights(bx, by, scam.params)
print("attention weights", w.shape, "row sums", np.round(w.sum(axis=-1), 6))

# %%
ox, oy = scam(fx, fy, [5.0], [NOISELESS])
print("shapes preserved:", ox.shape == fx.shape, oy.shape == fy.shape)
print("mean change in x features:", float(np.abs(ox.data - fx.data).mean()))
