"""Compare the numba and numpy edit-distance kernels used by TER.

    python benchmarks/bench_kernels.py [--repeat 5]

Reports the raw kernel time per sentence length and the end-to-end corpus
TER time with each backend swapped in. Results are checked for equality.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from g2t import _kernels
from g2t.metrics import corpus_ter


def _best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_rows(rng: np.random.Generator, repeat: int):
    for length in (10, 30, 100, 300):
        pairs = [(rng.integers(0, 20, size=length), rng.integers(0, 20, size=length)) for _ in range(20)]
        for h, r in pairs:
            assert np.array_equal(_kernels.edit_matrix_numba(h, r), _kernels.edit_matrix_numpy(h, r))
        t_nb = _best_of(lambda: [_kernels.edit_matrix_numba(h, r) for h, r in pairs], repeat)
        t_np = _best_of(lambda: [_kernels.edit_matrix_numpy(h, r) for h, r in pairs], repeat)
        yield length, t_nb / len(pairs), t_np / len(pairs)


def corpus(rng: np.random.Generator, n: int = 40, length: int = 25):
    words = [f"w{i}" for i in range(30)]
    refs = [[tuple(rng.choice(words, size=length))] for _ in range(n)]
    hyps = []
    for (ref,) in refs:
        h = list(ref)
        cut = int(rng.integers(1, length - 1))
        h = h[cut:] + h[:cut]  # a block move, so shifts get searched
        h[int(rng.integers(length))] = "oov"
        hyps.append(tuple(h))
    return hyps, refs


def ter_time(hyps, refs, use_numba: bool, repeat: int) -> tuple[float, float]:
    saved = _kernels.edit_matrix, _kernels.backtrace
    if use_numba:
        _kernels.edit_matrix, _kernels.backtrace = _kernels.edit_matrix_numba, _kernels.backtrace_numba
    else:
        _kernels.edit_matrix, _kernels.backtrace = _kernels.edit_matrix_numpy, _kernels.backtrace_numpy
    try:
        score = corpus_ter(hyps, refs).score
        return _best_of(lambda: corpus_ter(hyps, refs), repeat), score
    finally:
        _kernels.edit_matrix, _kernels.backtrace = saved


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not _kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(args.seed)
    h, r = rng.integers(0, 5, size=4), rng.integers(0, 5, size=4)
    t0 = time.perf_counter()
    _kernels.backtrace_numba(_kernels.edit_matrix_numba(h, r), h, r)
    print(f"numba first call (compile or cache load): {time.perf_counter() - t0:.3f} s")

    print(f"{'length':>6} {'numba us':>10} {'numpy us':>10} {'speedup':>8}")
    for length, t_nb, t_np in kernel_rows(rng, args.repeat):
        print(f"{length:>6} {1e6 * t_nb:>10.1f} {1e6 * t_np:>10.1f} {t_np / t_nb:>8.1f}")

    hyps, refs = corpus(rng)
    t_nb, s_nb = ter_time(hyps, refs, True, args.repeat)
    t_np, s_np = ter_time(hyps, refs, False, args.repeat)
    assert s_nb == s_np, (s_nb, s_np)
    print(f"corpus TER ({len(hyps)} sentences): numba {t_nb:.3f} s, numpy {t_np:.3f} s, "
          f"speedup {t_np / t_nb:.1f}x, TER {s_nb:.4f}")


if __name__ == "__main__":
    main()
