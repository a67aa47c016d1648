"""Compiled vs pure-Python turbo kernels: time per decoder iteration and per encode.

    python3 benchmarks/bench_kernels.py --sizes 40,512,6144 --repeat 3
"""

from __future__ import annotations

import argparse
import statistics
import sys
import time

import numpy as np

from cranbench.codec import LlrBlock, available_backends, crc24_attach, turbo_decode, turbo_encode


def _time(fn, repeat: int) -> float:
    best = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best.append(time.perf_counter() - t0)
    return min(best)


def measure(k: int, backend: str, repeat: int, iterations: int, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    bits = crc24_attach(rng.integers(0, 2, k - 24, dtype=np.uint8))
    eb = turbo_encode(bits, backend=backend)
    x = 1.0 - 2.0 * eb.serialize()
    y = 2.0 * (x + rng.normal(0, 1.0, x.size))
    llr = LlrBlock(y[:k], y[k:2 * k], y[2 * k:3 * k], y[3 * k:])
    enc = _time(lambda: turbo_encode(bits, backend=backend), repeat)
    dec = _time(lambda: turbo_decode(llr, iterations, early_stop=False, backend=backend), repeat)
    return {"k": k, "backend": backend, "encode_s": enc, "decode_iter_s": dec / iterations}


def run(sizes, repeat=3, iterations=2, backends=None) -> list[dict]:
    names = backends or sorted(available_backends())
    return [measure(k, b, repeat, iterations) for k in sizes for b in names]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="40,512,2048,6144")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--iterations", type=int, default=2)
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = run(sizes, args.repeat, args.iterations)
    if "cython" not in available_backends():
        print("compiled kernels not built; only the Python fallback is measured", file=sys.stderr)
    print(f"{'k':>6} {'backend':>8} {'encode [ms]':>12} {'decode/iter [ms]':>17} {'speed-up':>9}")
    by_k = {}
    for r in rows:
        by_k.setdefault(r["k"], {})[r["backend"]] = r
    for k, group in by_k.items():
        py = group.get("python")
        for name, r in group.items():
            up = py["decode_iter_s"] / r["decode_iter_s"] if py else float("nan")
            print(f"{k:>6} {name:>8} {r['encode_s'] * 1e3:>12.3f} {r['decode_iter_s'] * 1e3:>17.3f} {up:>8.1f}x")
    ups = [g["python"]["decode_iter_s"] / g["cython"]["decode_iter_s"] for g in by_k.values() if len(g) == 2]
    if ups:
        print(f"median decode speed-up {statistics.median(ups):.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
