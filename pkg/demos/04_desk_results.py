"""
Desk-scale results
==================

Loads the joint and baseline checkpoints from ``artifacts/`` and prints the
sweeps behind the acceptance criteria: both links at equal SNR (AWGN and
Rayleigh), and the side-SNR sweep at mu_x = 1 dB.
"""

# %%
from pathlib import Path

import numpy as np

from djscc.channel import NOISELESS
from djscc.data import stack, synthetic_pairs
from djscc.harness import load_checkpoint
from djscc.harness.evaluate import evaluate_delta_sweep, evaluate_sweep

root = Path(__file__).resolve().parent.parent / "artifacts"
joint = load_checkpoint(root / "desk_joint.ckpt")
base = load_checkpoint(root / "desk_baseline.ckpt")
x, y = stack(synthetic_pairs(joint.config.test_spec(), "test"))
print(f"{len(x)} test pairs, iterations {joint.iteration} / {base.iteration}")

# %%
for kind, mus in (("awgn", [-3, 1, 7, 13]), ("rayleigh", [1, 7])):
    rj = evaluate_sweep(joint.model, x, y, mus, kind)
    rb = evaluate_sweep(base.model, x, y, mus, kind)
    print(kind)
    for mu in mus:
        pj = np.mean([rj.lookup(mu, mu, s).psnr_db for s in "xy"])
        pb = np.mean([rb.lookup(mu, mu, s).psnr_db for s in "xy"])
        print(f"  {mu:>3} dB  joint {pj:6.2f}  baseline {pb:6.2f}  gain {pj - pb:+.2f}")

# %%
rep = evaluate_delta_sweep(joint.model, x, y, 1.0, [-6, -3, 0, 3, 6, NOISELESS])
for r in rep.rows:
    print(f"  mu_y={r.mu_y:>5}  x PSNR {r.psnr_db:.2f}  MS-SSIM {r.ms_ssim:.4f}")
