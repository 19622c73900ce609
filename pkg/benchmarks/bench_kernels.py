"""Time the compiled kernels against their numpy fallbacks.

Run with ``python3 benchmarks/bench_kernels.py``. Inputs are sized like a
pooled replicate from the simulation scenario (about 3000 measurements for
the smoother, 300 subjects for the concordance sum).
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from jmppc import _fallback

try:
    from jmppc import _kernels
except ImportError:  # extension not built
    _kernels = None


def _loess_inputs(rng, n):
    x = np.sort(rng.uniform(0.0, 25.0, n))
    y = np.sin(x / 4.0) + rng.normal(0.0, 0.3, n)
    rw = np.ones(n)
    x_eval = np.linspace(0.0, 25.0, 201)
    return (x, y, rw, x_eval, int(0.75 * n), 2, True)


def _concordance_inputs(rng, n):
    marker = rng.normal(size=n)
    time = rng.exponential(10.0, n)
    status = (rng.uniform(size=n) < 0.7).astype(np.int64)
    weight = rng.uniform(0.5, 2.0, n)
    return (marker, time, status, weight, float(np.quantile(time, 0.9)))


def _time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    cases = {
        "loess_kernel (n=3000, 201 points)": ("loess_kernel", _loess_inputs(rng, 3000)),
        "concordance_kernel (n=300)": ("concordance_kernel", _concordance_inputs(rng, 300)),
    }
    print(f"{'kernel':40s} {'numpy [ms]':>12s} {'cython [ms]':>12s} {'speedup':>9s}")
    for label, (name, inputs) in cases.items():
        t_py = _time(getattr(_fallback, name), inputs, args.repeat)
        if _kernels is None:
            print(f"{label:40s} {1e3 * t_py:12.2f} {'n/a':>12s} {'n/a':>9s}")
            continue
        impl = getattr(_kernels, name)
        c_args = tuple(np.ascontiguousarray(a) if isinstance(a, np.ndarray) else a for a in inputs)
        out_py = getattr(_fallback, name)(*inputs)
        out_c = impl(*c_args)
        agree = all(np.allclose(a, b, equal_nan=True, atol=1e-9) for a, b in zip(out_py, out_c))
        t_c = _time(impl, c_args, args.repeat)
        flag = "" if agree else "  (outputs differ)"
        print(f"{label:40s} {1e3 * t_py:12.2f} {1e3 * t_c:12.2f} {t_py / t_c:8.1f}x{flag}")


if __name__ == "__main__":
    main()
