"""Time the compiled and pure-Python kernel backends on the same workload.

    python benchmarks/bench_kernels.py [--molecules 200] [--repeat 3]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from molgen import random_corpus  # noqa: E402

from molhier import find_matches, kernels, parse_smiles  # noqa: E402
from molhier.encoder import gin_forward, init_encoder  # noqa: E402
from molhier.fgroups import default_registry  # noqa: E402
from molhier.hier import build_hier, laplacian_eigenpairs  # noqa: E402


def workloads(n: int):
    mols = [parse_smiles(s) for s in random_corpus(99, n)]
    hiers = [build_hier(m) for m in mols]
    adjs = [h.adjacency() for h in hiers]
    params = init_encoder(0)
    patterns = [e.pattern for e in default_registry()]
    return {
        "jacobi_eigh": lambda: [laplacian_eigenpairs(a) for a in adjs],
        "gin_aggregate": lambda: [gin_forward(h, params) for h in hiers],
        "match_embeddings": lambda: [find_matches(m, p) for m in mols for p in patterns],
    }


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--molecules", type=int, default=200, help="random molecules per workload (default: 200)")
    ap.add_argument("--repeat", type=int, default=3, help="timing repeats, best kept (default: 3)")
    args = ap.parse_args()
    backends = ["python"] + (["cython"] if kernels.compiled_available() else [])
    jobs = workloads(args.molecules)
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in jobs.items():
        row = []
        for b in backends:
            kernels.use_backend(b)
            fn()  # warm-up
            row.append(best_of(fn, args.repeat))
        line = f"{name:<18}" + "".join(f"{t:11.3f}s" for t in row)
        if len(row) == 2:
            line += f"{row[0] / row[1]:11.1f}x"
        print(line)
    if len(backends) == 1:
        print("compiled extension not built; only the fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
