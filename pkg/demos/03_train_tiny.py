"""
Training a tiny joint model
===========================

A few hundred steps on 16x32 synthetic pairs, then a short SNR sweep.
Takes a couple of minutes on one core.
"""

# %%
import numpy as np

from djscc.data import stack, synthetic_pairs
from djscc.harness import Trainer, parse_config
from djscc.harness.evaluate import evaluate_sweep

cfg = parse_config("""
height = 16
width = 32
widths = 8,16,16
kernels = 5,3,3
bottleneck = 4
lr = 1e-3
batch_size = 8
iterations = 300
train_count = 64
test_count = 16
log_every = 0
noiseless_prob = 0.1
""")
print("bandwidth ratio:", round(cfg.model.bandwidth_ratio(16, 32), 4))

# %%
trainer = Trainer(cfg)
history = trainer.run()
losses = np.array([loss for _, loss in history])
for lo in range(0, len(losses), 50):
    print(f"steps {lo:>3}-{lo + 49:<3} mean loss {losses[lo:lo + 50].mean():.4f}")

# %%
x, y = stack(synthetic_pairs(cfg.test_spec(), "test"))
print(evaluate_sweep(trainer.model, x, y, [-3, 5, 13]).to_csv())
