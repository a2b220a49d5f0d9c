"""Timing comparison of the numpy kernels and their numba twins.

Shapes mirror the default training workload: observation size 37, GRU
hidden size 64, square dense layers.  Each kernel is warmed up first so
the numba numbers exclude JIT compilation, then timed as best-of-repeat
means.  Run with the package installed:

    python3 benchmarks/bench_kernels.py
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from readspeak.numerics import kernels_numpy


def load_numba_kernels():
    try:
        from readspeak.numerics import kernels_numba
    except ImportError:
        return None
    return kernels_numba


def make_workloads(rng: np.random.Generator, obs: int, hidden: int):
    x = rng.standard_normal(obs)
    h = rng.standard_normal(hidden)
    gru_weights = {
        name: rng.standard_normal(shape)
        for name, shape in (
            ("w_z", (hidden, obs)), ("u_z", (hidden, hidden)), ("b_z", hidden),
            ("w_r", (hidden, obs)), ("u_r", (hidden, hidden)), ("b_r", hidden),
            ("w_h", (hidden, obs)), ("u_h", (hidden, hidden)), ("b_h", hidden),
        )
    }
    w = rng.standard_normal((hidden, hidden))
    b = rng.standard_normal(hidden)
    vec = rng.standard_normal(hidden)
    d_out = rng.standard_normal(hidden)
    adam_state = {
        "param": rng.standard_normal((hidden, hidden)),
        "grad": rng.standard_normal((hidden, hidden)),
        "m": np.zeros((hidden, hidden)),
        "v": np.zeros((hidden, hidden)),
    }

    def gru_forward(k):
        return k.gru_forward(x, h, *(gru_weights[n] for n in (
            "w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")))

    def gru_step_and_backward(k):
        h_new, z, r, hbar = gru_forward(k)
        return k.gru_backward(h_new, x, h, z, r, hbar,
                              *(gru_weights[n] for n in (
                                  "w_z", "u_z", "w_r", "u_r", "w_h", "u_h")))

    def dense_round_trip(k):
        out, pre = k.dense_forward(vec, w, b, True)
        return k.dense_backward(d_out, vec, pre, w, True)

    def adam_step(k):
        return k.adam_update(adam_state["param"], adam_state["grad"],
                             adam_state["m"], adam_state["v"], 1,
                             1e-3, 0.9, 0.999, 1e-8)

    def recurrent_episode(k):
        state = h
        for _ in range(70):
            state, _, _, _ = k.gru_forward(x, state, *(gru_weights[n] for n in (
                "w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")))
        return state

    return [
        ("gru_forward", gru_forward),
        ("gru_forward+backward", gru_step_and_backward),
        ("dense forward+backward", dense_round_trip),
        ("adam_update 64x64", adam_step),
        ("70-step recurrence", recurrent_episode),
    ]


def best_mean_seconds(fn, module, iterations: int, repeats: int) -> float:
    fn(module)  # warm-up (JIT compilation for the numba path)
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        for _ in range(iterations):
            fn(module)
        best = min(best, (time.perf_counter() - start) / iterations)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(
        description="readspeak kernel timing: numpy vs numba")
    parser.add_argument("--iterations", type=int, default=200,
                        help="inner loop per measurement (default 200)")
    parser.add_argument("--repeats", type=int, default=5,
                        help="measurements per kernel, best kept (default 5)")
    parser.add_argument("--obs-size", type=int, default=37)
    parser.add_argument("--hidden", type=int, default=64)
    args = parser.parse_args()

    numba_kernels = load_numba_kernels()
    rng = np.random.default_rng(0)
    workloads = make_workloads(rng, args.obs_size, args.hidden)

    name_width = max(len(name) for name, _ in workloads)
    header = f"{'kernel':<{name_width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>7}"
    print(f"observation size {args.obs_size}, hidden size {args.hidden}, "
          f"best of {args.repeats} x {args.iterations} iterations")
    print(header)
    print("-" * len(header))
    for name, fn in workloads:
        numpy_s = best_mean_seconds(fn, kernels_numpy, args.iterations,
                                    args.repeats)
        if numba_kernels is None:
            print(f"{name:<{name_width}}  {numpy_s * 1e6:>8.1f}us  "
                  f"{'n/a':>10}  {'n/a':>7}")
            continue
        numba_s = best_mean_seconds(fn, numba_kernels, args.iterations,
                                    args.repeats)
        print(f"{name:<{name_width}}  {numpy_s * 1e6:>8.1f}us  "
              f"{numba_s * 1e6:>8.1f}us  {numpy_s / numba_s:>6.2f}x")
    if numba_kernels is None:
        print("numba is not importable; showing the numpy path only")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
