"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 200] [--iterations 20]

Reports per-call microseconds for each kernel at training shapes
(16 envs x 5 agents, hidden 128) and the wall time of full training
iterations on traffic-easy under each backend.
"""

import argparse
import time

import numpy as np

from commlab.autograd import kernels


def _time(fn, repeat):
    fn()
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat * 1e6


def kernel_cases(rows=80, n_in=160, hidden=128, dtype=np.float32, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(rows, n_in)).astype(dtype)
    h = rng.normal(size=(rows, hidden)).astype(dtype)
    ws = [rng.normal(scale=0.1, size=(n_in + hidden, hidden)).astype(dtype) for _ in range(3)]
    bs = [np.zeros(hidden, dtype=dtype) for _ in range(3)]
    logits = rng.normal(size=(16, 5, 5)).astype(dtype)
    mask = rng.random((16, 5, 5)) > 0.3
    probs = kernels.masked_softmax(logits, 0.25, mask)
    g_soft = rng.normal(size=probs.shape).astype(dtype)
    g_h = rng.normal(size=(rows, hidden)).astype(dtype)
    _, cache = kernels.gru_forward(x, h, *ws, *bs)
    return {
        "sigmoid": lambda: kernels.sigmoid(x),
        "masked_softmax": lambda: kernels.masked_softmax(logits, 0.25, mask),
        "softmax_backward": lambda: kernels.softmax_backward(probs, g_soft, 0.25),
        "gru_forward": lambda: kernels.gru_forward(x, h, *ws, *bs),
        "gru_backward": lambda: kernels.gru_backward(g_h, cache, *ws),
    }


def train_iterations(n):
    from commlab.config import TrainConfig
    from commlab.trainer import train

    cfg = TrainConfig(env="traffic-easy", total_episodes=10**9, attention_log_every=0, log_interval=10**6)
    start = time.perf_counter()
    train(cfg, max_iterations=n)
    return (time.perf_counter() - start) / n * 1e3


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--iterations", type=int, default=20, help="training iterations per backend; 0 skips")
    args = ap.parse_args(argv)

    backends = ["python"]
    try:
        kernels.use_backend("compiled")
        backends.append("compiled")
    except ImportError:
        print("compiled extension not built; timing the numpy fallback only")

    results = {}
    for name in backends:
        kernels.use_backend(name)
        # rebuild the cases so cached arrays come from the active backend
        results[name] = {k: _time(fn, args.repeat) for k, fn in kernel_cases().items()}
        if args.iterations:
            results[name]["train_iteration_ms"] = train_iterations(args.iterations)

    keys = list(results["python"])
    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for k in keys:
        unit = "ms" if k.endswith("_ms") else "us"
        row = f"{k + ' (' + unit + ')':<22}" + "".join(f"{results[b][k]:12.1f}" for b in backends)
        if len(backends) > 1:
            row += f"{results['python'][k] / results['compiled'][k]:11.2f}x"
        print(row)
    return results


if __name__ == "__main__":
    main()
