"""Compare the compiled and pure-numpy LSTM sequence kernels.

Runs the forward and backward-through-time kernels on a few batch shapes and
prints per-kernel wall times plus the speedup. The compiled kernel must agree
with the reference to near machine precision; the script verifies that before
timing.

Usage: python3 benchmarks/bench_lstm.py [--repeats N]
"""

import argparse
import time

import numpy as np

from aeroadapt.nn import kernels

SHAPES = [
    # (batch, steps, input dim, hidden dim)
    (16, 24, 13, 32),
    (64, 24, 13, 64),
    (64, 48, 13, 128),
]


def make_problem(rng, B, T, D, H):
    x = rng.standard_normal((B, T, D))
    Wx = rng.standard_normal((D, 4 * H)) * 0.2
    Wh = rng.standard_normal((H, 4 * H)) * 0.2
    b = rng.standard_normal(4 * H) * 0.1
    dH = rng.standard_normal((B, T, H))
    return x, Wx, Wh, b, dH


def time_kernel(forward, backward, x, Wx, Wh, b, dH, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        h, cache = forward(x, Wx, Wh, b, False)
        backward(dH, cache, Wx, Wh, False)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    compiled = kernels._load_compiled()
    if compiled is None:
        print("compiled kernel unavailable; nothing to compare")
        return

    rng = np.random.default_rng(0)
    print(f"{'shape (B,T,D,H)':>22} {'numpy':>10} {'cython':>10} {'speedup':>8}")
    for shape in SHAPES:
        x, Wx, Wh, b, dH = make_problem(rng, *shape)

        h_py, cache_py = kernels.lstm_seq_forward_py(x, Wx, Wh, b, False)
        h_cy, cache_cy = compiled.lstm_seq_forward(x, Wx, Wh, b, False)
        assert np.allclose(h_py, h_cy, atol=1e-12), "kernel outputs diverge"
        out_py = kernels.lstm_seq_backward_py(dH, cache_py, Wx, Wh, False)
        out_cy = compiled.lstm_seq_backward(dH, cache_cy, Wx, Wh, False)
        for a, c in zip(out_py, out_cy):
            assert np.allclose(a, np.asarray(c), atol=1e-10)

        t_py = time_kernel(kernels.lstm_seq_forward_py,
                           kernels.lstm_seq_backward_py,
                           x, Wx, Wh, b, dH, args.repeats)
        t_cy = time_kernel(compiled.lstm_seq_forward,
                           compiled.lstm_seq_backward,
                           x, Wx, Wh, b, dH, args.repeats)
        print(f"{str(shape):>22} {t_py * 1e3:>8.2f}ms {t_cy * 1e3:>8.2f}ms "
              f"{t_py / t_cy:>7.2f}x")


if __name__ == "__main__":
    main()
