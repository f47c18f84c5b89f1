"""Quick oracle and invariant checks behind ``djscc selftest``.

Each check is small enough to finish in well under a second; together they
exercise the autodiff engine, the channel, the attention block, the metrics
and the checkpoint codec. The full test suite is far more thorough.
"""

from __future__ import annotations

import math
import traceback

import numpy as np

from .channel import NOISELESS, frame, power_normalize, snr_to_noise_variance
from .metrics import ms_ssim_value, psnr
from .model import JointModel, ModelConfig, ScamParams, scam_pair
from .ndgrad import Tape, Tensor, backward, conv2d, conv2d_transpose, ops


def _fd_check(fn, arr, analytic, eps=1e-6, tol=1e-5) -> None:
    flat = arr.reshape(-1)
    num = np.zeros_like(flat)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = fn()
        flat[i] = old - eps
        down = fn()
        flat[i] = old
        num[i] = (up - down) / (2 * eps)
    err = np.max(np.abs(num - analytic.reshape(-1))) / max(np.max(np.abs(num)), 1e-12)
    assert err < tol, f"relative gradient error {err:.2e}"


def check_conv_gradient() -> None:
    rng = np.random.default_rng(0)
    x = Tensor(rng.standard_normal((2, 3, 6, 6)), requires_grad=True)
    k = Tensor(rng.standard_normal((4, 3, 3, 3)), requires_grad=True)
    loss = lambda: ops.sum(ops.power(conv2d(x, k, stride=2), 2.0))
    with Tape() as tape:
        out = loss()
    backward(out, tape, [x, k])
    _fd_check(lambda: loss().item(), k.data, k.grad)
    _fd_check(lambda: loss().item(), x.data, x.grad)


def check_transpose_adjoint() -> None:
    rng = np.random.default_rng(1)
    k = rng.standard_normal((4, 3, 5, 5))
    x, y = rng.standard_normal((1, 3, 8, 8)), rng.standard_normal((1, 4, 4, 4))
    lhs = np.sum(conv2d(Tensor(x), Tensor(k), stride=2).data * y)
    rhs = np.sum(x * conv2d_transpose(Tensor(y), Tensor(k), stride=2).data)
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs)), f"{lhs} != {rhs}"


def check_power_constraint() -> None:
    rng = np.random.default_rng(2)
    sig = power_normalize(frame(Tensor(rng.standard_normal((8, 4, 4, 4)))), 1.0)
    np.testing.assert_allclose(sig.power(), sig.k, rtol=1e-6)


def check_noise_variance() -> None:
    assert math.isclose(snr_to_noise_variance(10.0), 0.1, rel_tol=1e-12)
    assert math.isclose(snr_to_noise_variance(7.0), 0.19952623149688797, rel_tol=1e-12)


def check_scam_identity() -> None:
    rng = np.random.default_rng(3)
    p = ScamParams(4, 8, rng, np.float64)
    for t in (p.w_o, p.w_2, p.b_2):
        t.data[...] = 0.0
    a, b = Tensor(rng.standard_normal((5, 4))), Tensor(rng.standard_normal((3, 4)))
    out_a, out_b = scam_pair(a, b, p)
    assert np.array_equal(out_a.data, a.data) and np.array_equal(out_b.data, b.data)


def check_decoder_symmetry() -> None:
    rng = np.random.default_rng(4)
    model = JointModel(ModelConfig(widths=(4, 4, 4), kernels=(3, 3, 3), bottleneck=2, af_hidden=2))
    sa, sb = model.encode(rng.random((2, 3, 16, 16)), rng.random((2, 3, 16, 16)), 1.0, 5.0)
    a1, b1 = model.decode(sa, sb, 1.0, NOISELESS, 16, 16)
    b2, a2 = model.decode(sb, sa, NOISELESS, 1.0, 16, 16)
    assert np.array_equal(a1.data, a2.data) and np.array_equal(b1.data, b2.data)


def check_metrics() -> None:
    x = np.random.default_rng(5).random((1, 3, 32, 32))
    assert psnr(x, x) == 100.0
    assert math.isclose(psnr(np.zeros(4), np.full(4, 0.1)), 20.0)
    assert ms_ssim_value(x, x)[0] == 1.0


def check_checkpoint_round_trip() -> None:
    from .harness.checkpoint import decode_checkpoint, encode_checkpoint
    from .harness.config import parse_config
    cfg = parse_config("height = 16\nwidth = 16\nwidths = 4,4,4\nkernels = 3,3,3\nbottleneck = 2\n")
    buf = encode_checkpoint(cfg, JointModel(cfg.model), 7)
    back = decode_checkpoint(buf)
    assert back.iteration == 7
    assert encode_checkpoint(back.config, back.model, back.iteration) == buf


CHECKS = [check_conv_gradient, check_transpose_adjoint, check_power_constraint, check_noise_variance,
          check_scam_identity, check_decoder_symmetry, check_metrics, check_checkpoint_round_trip]


def run_all(verbose: bool = True) -> int:
    """Run every check, print one line each, return the number of failures."""
    failures = 0
    for check in CHECKS:
        name = check.__name__[len("check_"):]
        try:
            check()
        except Exception as exc:
            failures += 1
            if verbose:
                print(f"FAIL {name}: {exc}")
                traceback.print_exc()
        else:
            if verbose:
                print(f"PASS {name}")
    return failures
