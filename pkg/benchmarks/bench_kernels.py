"""Time the numba kernels against the fallback selected by ``EABLOCK_DISABLE_JIT=1``.

    python benchmarks/bench_kernels.py [--repeat 3]

Each backend runs in its own interpreter, since the flag is read at import.
Both runs see identical inputs; a checksum of every output confirms that
the two paths compute the same thing. The glauber row also times the
vectorised numpy replica kernel.
"""

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np


def best_of(repeat, fn, args):
    best = float("inf")
    fresh = None
    for _ in range(repeat):
        fresh = [a.copy() if isinstance(a, np.ndarray) else a for a in args]
        t = time.perf_counter()
        res = fn(*fresh)
        best = min(best, time.perf_counter() - t)
    return best, res, fresh


def digest(arr) -> str:
    return hashlib.sha1(np.ascontiguousarray(arr).tobytes()).hexdigest()[:12]


def cases(scale):
    from eablock import dynamics
    from eablock.instance import gen_instance
    from eablock.kernels import chains, graph
    from eablock.random_structures import random_instance_with_partition
    from eablock.streams import generator

    n = 2000
    inst = gen_instance(n, 8.0, 0.3, seed=1)
    g = inst.graph
    uni = generator(1, "bench-glauber").random((scale * n // 32, 32, 2))
    yield "glauber_batch", chains.glauber_batch, (g.indptr, g.nbrs, inst.coupling_csr(), inst.beta,
                                                  np.ones((32, n), dtype=np.int8), uni), 4
    yield "glauber_numpy", chains.glauber_batch_numpy, (g.indptr, g.nbrs, inst.coupling_csr(), inst.beta,
                                                        np.ones((32, n), dtype=np.int8), uni), 4

    binst, part = random_instance_with_partition(60, 0.06, 1.0, 8, np.random.default_rng(2))
    t = dynamics.block_table(binst, part)
    buni = generator(2, "bench-block").random((20 * scale, 16, t.width))
    yield "block_batch", chains.block_batch, (*t.kernel_args(), binst.beta,
                                              np.ones((16, binst.n), dtype=np.int8), buni), -1

    big = gen_instance(50_000, 6.0, 0.1, seed=3).graph
    yield "bfs_distances", graph.bfs_distances, (big.indptr, big.nbrs, np.array([0, 1, 2], dtype=np.int64), 1 << 30), None


def measure(repeat, scale):
    from eablock._accel import backend_name

    rows = {}
    for name, fn, args, spins_pos in cases(scale):
        if backend_name() == "numba":
            fn(*[a.copy() if isinstance(a, np.ndarray) else a for a in args])  # compile outside the timing
        secs, res, used = best_of(repeat, fn, args)
        rows[name] = {"seconds": secs, "digest": digest(used[spins_pos] if spins_pos is not None else res)}
    return {"backend": backend_name(), "rows": rows}


def run_backend(disable_jit, repeat, scale):
    env = dict(os.environ, EABLOCK_DISABLE_JIT="1" if disable_jit else "0")
    cmd = [sys.executable, __file__, "--child", "--repeat", str(repeat), "--scale", str(scale)]
    out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True).stdout
    return json.loads(out.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=int, default=4, help="work multiplier for the chain kernels")
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.child:
        print(json.dumps(measure(args.repeat, args.scale)))
        return
    fast = run_backend(False, args.repeat, args.scale)
    slow = run_backend(True, 1, args.scale)
    print(f"{'kernel':<16}{fast['backend'] + ' s':>12}{slow['backend'] + ' s':>12}{'speedup':>10}  same output")
    for name, f in fast["rows"].items():
        s = slow["rows"][name]
        print(f"{name:<16}{f['seconds']:>12.4f}{s['seconds']:>12.4f}{s['seconds'] / f['seconds']:>9.0f}x  "
              f"{f['digest'] == s['digest']}")


if __name__ == "__main__":
    main()
