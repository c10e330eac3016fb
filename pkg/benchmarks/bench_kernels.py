"""Compare the compiled and pure-Python chromosome decoders.

Usage: python benchmarks/bench_kernels.py [--sizes 10,100,500] [--population 200] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from mecsched import _decode_py
from mecsched.ga import _arrays, bits_per_task, chromosome_length
from mecsched.workload import WorkloadConfig, generate_workload

try:
    from mecsched import _decode as _compiled
except ImportError:
    _compiled = None


def bench(n_tasks, population, repeat, m=2, lam=0.5):
    ts = generate_workload(WorkloadConfig(n_users=n_tasks, tasks_per_user=1, seed=1))
    arrival, proc, deadline = _arrays(ts)
    bits = bits_per_task(m)
    rng = np.random.default_rng(0)
    pop = rng.integers(0, 2, size=(population, chromosome_length(n_tasks, m)), dtype=np.uint8)
    args = (pop, arrival, proc, deadline, m, bits, lam)
    out = {}
    for name, mod in (("python", _decode_py), ("compiled", _compiled)):
        if mod is None:
            continue
        best = min(timeit.repeat(lambda: mod.evaluate_population(*args), number=1, repeat=repeat))
        out[name] = best * 1000
    if len(out) == 2:
        # both backends must agree bit for bit
        assert np.array_equal(_decode_py.evaluate_population(*args), _compiled.evaluate_population(*args))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="10,100,500")
    ap.add_argument("--population", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _compiled is None:
        print("compiled extension not built; timing the python backend only")
    print("n_tasks,population,python_ms,compiled_ms,speedup")
    for n in (int(s) for s in args.sizes.split(",")):
        r = bench(n, args.population, args.repeat)
        py, c = r["python"], r.get("compiled")
        speed = f"{py / c:.1f}" if c else ""
        print(f"{n},{args.population},{py:.3f},{'' if c is None else f'{c:.3f}'},{speed}")


if __name__ == "__main__":
    main()
