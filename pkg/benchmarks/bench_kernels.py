"""Time the numba kernels against their pure-numpy twins on 512x512 inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from odstain import _kernels_numba as nb
from odstain import _kernels_numpy as npk
from odstain.stainsep import DEFAULT_STAIN_MATRIX

SIZE = 512


def cases(rng):
    n = SIZE * SIZE
    od = rng.uniform(0, 2, (n, 3))
    inv = np.linalg.inv(DEFAULT_STAIN_MATRIX)
    fod = rng.uniform(0, 4, (SIZE, SIZE))
    feats = rng.normal(size=(n // 16, 64))
    probs = rng.dirichlet(np.ones(2), size=n // 16)
    protos = rng.normal(size=(2, 64))
    return {
        "deconvolve": lambda k: k.deconvolve(od, inv),
        "histo_accumulate": lambda k: k.histo_accumulate(fod, 20, np.e),
        "block_means": lambda k: k.block_means(fod, 4),
        "weighted_sums": lambda k: k.weighted_sums(feats, probs),
        "cosine_map": lambda k: k.cosine_map(feats, protos, 1e-12),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}{'agree':>8}")
    for name, call in cases(rng).items():
        call(nb)  # compile outside the timed region
        t_np = min(timeit.repeat(lambda: call(npk), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: call(nb), number=1, repeat=args.repeat))
        a, b = call(npk), call(nb)
        if isinstance(a, tuple):
            agree = all(np.allclose(x, y, rtol=1e-12, atol=1e-12) for x, y in zip(a, b))
        else:
            agree = np.allclose(a, b, rtol=1e-12, atol=1e-12)
        print(f"{name:<18}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>9.1f}x{str(agree):>8}")


if __name__ == "__main__":
    main()
