"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--entries 200000] [--queries 300]
"""

import argparse
import random
import time
from array import array

from newsgeo import kernels
from newsgeo.gazetteer import Gazetteer, GazetteerEntry
from newsgeo.index import build_index, search

WORDS = ["new", "port", "san", "saint", "north", "south", "spring", "field", "lake", "river",
         "mount", "fort", "west", "east", "green", "ville", "haven", "bridge", "hill", "wood"]


def make_gazetteer(n, rng):
    entries = []
    for i in range(1, n + 1):
        k = rng.randint(1, 3)
        name = " ".join(rng.choice(WORDS) + (str(rng.randint(0, 500)) if rng.random() < 0.5 else "")
                        for _ in range(k))
        entries.append(GazetteerEntry(i, name.title(), rng.uniform(-90, 90),
                                      rng.uniform(-180, 180), population=rng.randint(0, 10**6)))
    return Gazetteer(entries)


def timeit(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--entries", type=int, default=200_000)
    ap.add_argument("--queries", type=int, default=300)
    ap.add_argument("--points", type=int, default=500_000)
    args = ap.parse_args()
    rng = random.Random(0)
    t0 = time.perf_counter()
    idx = build_index(make_gazetteer(args.entries, rng))
    print(f"built index over {args.entries} entries in {time.perf_counter() - t0:.2f}s")
    queries = [" ".join(rng.sample(WORDS, rng.randint(1, 2))) for _ in range(args.queries)]
    lat = array("d", (rng.uniform(-90, 90) for _ in range(args.points)))
    lon = array("d", (rng.uniform(-180, 180) for _ in range(args.points)))
    lat2, lon2 = lat[::-1], lon[::-1]

    backends = kernels.available_backends()
    results = {}
    original = kernels.bm25_accumulate, kernels.bm25_topk
    try:
        for name, mod in backends.items():
            kernels.bm25_accumulate, kernels.bm25_topk = mod.bm25_accumulate, mod.bm25_topk
            t_search = timeit(lambda: [search(idx, q) for q in queries], repeat=1)
            t_hav = timeit(lambda: mod.haversine_batch(lat, lon, lat2, lon2, 6371.0088))
            results[name] = (t_search, t_hav)
            print(f"{name:>7}: search {t_search / len(queries) * 1e3:8.2f} ms/query   "
                  f"haversine {t_hav / args.points * 1e9:7.1f} ns/pair")
    finally:
        kernels.bm25_accumulate, kernels.bm25_topk = original
    if "cython" in results:
        s = results["python"][0] / results["cython"][0]
        h = results["python"][1] / results["cython"][1]
        print(f"speedup: search x{s:.1f}, haversine x{h:.1f}")


if __name__ == "__main__":
    main()
