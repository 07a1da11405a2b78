"""Compare the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--quick]
"""

from __future__ import annotations

import argparse
import random
import sys
import timeit

from ethfuzz import _pure
from ethfuzz.fixtures import load_fixtures

try:
    from ethfuzz import _speedups
except ImportError:
    _speedups = None


def workloads(rng: random.Random):
    code = b"".join(f.runtime_code() for f in load_fixtures())
    big = rng.randbytes(24 * 1024)
    return [
        ("keccak256", "32 B", (rng.randbytes(32),)),
        ("keccak256", "1 KiB", (rng.randbytes(1024),)),
        ("valid_jumpdests", f"fixtures {len(code)} B", (code,)),
        ("valid_jumpdests", "random 24 KiB", (big,)),
        ("instruction_starts", f"fixtures {len(code)} B", (code,)),
        ("instruction_starts", "random 24 KiB", (big,)),
    ]


def best_time(fn, args, number: int, repeat: int) -> float:
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--quick", action="store_true", help="few iterations, for smoke testing")
    args = p.parse_args(argv)
    number, repeat = (5, 2) if args.quick else (200, 5)

    rows = []
    for name, label, fn_args in workloads(random.Random(0)):
        pure = getattr(_pure, name)
        t_pure = best_time(pure, fn_args, number, repeat)
        if _speedups is None:
            rows.append((name, label, t_pure, None))
            continue
        fast = getattr(_speedups, name)
        if fast(*fn_args) != pure(*fn_args):
            print(f"{name} ({label}): backends disagree", file=sys.stderr)
            return 1
        rows.append((name, label, t_pure, best_time(fast, fn_args, number, repeat)))

    print(f"{'kernel':<20}{'input':<22}{'python us':>12}{'cython us':>12}{'speedup':>10}")
    for name, label, t_pure, t_fast in rows:
        fast = f"{t_fast * 1e6:12.2f}" if t_fast is not None else f"{'n/a':>12}"
        ratio = f"{t_pure / t_fast:9.1f}x" if t_fast else f"{'n/a':>10}"
        print(f"{name:<20}{label:<22}{t_pure * 1e6:12.2f}{fast}{ratio}")
    if _speedups is None:
        print("compiled extension not built; only the fallback was timed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
