"""Time the compiled LSTM kernel against the numpy fallback.

    python benchmarks/bench_kernels.py [--sequences 216] [--steps 63] [--hidden 32] [--repeat 5]

The default shape is one desk-scale time LSTM call: batch 8 x 27 bands as
sequences, 63 frames (1 s), hidden size 2N with N = 16.
"""
import argparse
import json
import time

import numpy as np

from nrhlc import _kernels


def _inputs(S, T, H, seed=0):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((S, T, 4 * H)), 0.1 * rng.standard_normal((H, 4 * H)),
            np.zeros((S, H)), np.zeros((S, H)), rng.standard_normal((S, T, H)))


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(sequences=216, steps=63, hidden=32, repeat=5) -> dict:
    """Best-of-`repeat` forward and backward wall time (s) per backend, plus max output disagreement."""
    xw, w_hh, h0, c0, gh = _inputs(sequences, steps, hidden)
    results, outputs = {}, {}
    for name, (fwd, bwd) in _kernels.backends().items():
        h_all, c_all, gates = fwd(xw, w_hh, h0, c0)
        grads = bwd(gh, w_hh, h0, c0, h_all, c_all, gates)
        outputs[name] = (h_all, grads[0], grads[1])
        results[name] = {
            "forward_s": _best(lambda: fwd(xw, w_hh, h0, c0), repeat),
            "backward_s": _best(lambda: bwd(gh, w_hh, h0, c0, h_all, c_all, gates), repeat),
        }
    if "compiled" in outputs:
        ref, got = outputs["python"], outputs["compiled"]
        results["max_abs_diff"] = max(float(np.max(np.abs(a - b))) for a, b in zip(ref, got))
        for k in ("forward_s", "backward_s"):
            results[f"speedup_{k[:-2]}"] = results["python"][k] / results["compiled"][k]
    results["shape"] = {"sequences": sequences, "steps": steps, "hidden": hidden}
    results["active_backend"] = _kernels.BACKEND
    return results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sequences", type=int, default=216)
    ap.add_argument("--steps", type=int, default=63)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(json.dumps(run(args.sequences, args.steps, args.hidden, args.repeat), indent=2))


if __name__ == "__main__":
    main()
