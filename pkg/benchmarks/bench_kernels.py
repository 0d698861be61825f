"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--rounds 10000]

Batch kernels are timed on stacks of random density matrices; per-state
kernels on a single 4x4 matrix. The session timing spawns one subprocess per
backend because the backend is fixed at import time.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from stepsplit import _kernels as K

SESSION_SNIPPET = """
import time, numpy as np
from stepsplit import adversary, protocol, qcore
rng = np.random.default_rng(0)
msg = [qcore.CODES[i] for i in rng.integers(0, 4, size={n})]
cfg = protocol.SessionConfig(rounds={n}, abort_threshold=0)
protocol.run_session(cfg, adversary.InterceptResendBell(), msg[:50], rng)
t0 = time.perf_counter()
protocol.run_session(cfg, adversary.InterceptResendBell(), msg, rng)
print((time.perf_counter() - t0) / {n} * 1e6)
"""


def random_stack(n, seed=0):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(n, 4, 4)) + 1j * rng.normal(size=(n, 4, 4))
    rho = g @ np.conj(np.swapaxes(g, 1, 2))
    return rho / np.trace(rho, axis1=1, axis2=2).real[:, None, None]


def cases(stack):
    rho = stack[0]
    u = np.array([[0, 1], [-1, 0]], dtype=complex)
    proj = np.array([[1, 0], [0, 0]], dtype=complex)
    return {
        "jacobi_eigh (batch)": lambda f: f["jacobi_eigh"](stack),
        "bell_populations (batch)": lambda f: f["bell_populations"](stack),
        "apply_1q": lambda f: f["apply_1q"](rho, u, 0),
        "depolarize": lambda f: f["depolarize"](rho, 1, 0.3),
        "project": lambda f: f["project"](rho, proj, 0),
        "bell_probs": lambda f: f["bell_probs"](rho),
        "jacobi_eigh (single)": lambda f: f["jacobi_eigh"](stack[:1]),
    }


def best_time(fn, number, repeat):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def session_us(backend: str, rounds: int) -> float:
    env = dict(os.environ)
    if backend == "numpy":
        env["STEPSPLIT_NO_NUMBA"] = "1"
    else:
        env.pop("STEPSPLIT_NO_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", SESSION_SNIPPET.format(n=rounds)],
                         env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=2000, help="matrices per batch kernel call")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--rounds", type=int, default=10000, help="protocol rounds for the session timing")
    args = ap.parse_args(argv)

    backends = ["numpy"] + (["numba"] if K.HAVE_NUMBA else [])
    impls = {b: K.implementations(b) for b in backends}
    stack = random_stack(args.batch)
    for f in impls.values():  # compile before timing
        for fn in cases(stack).values():
            fn(f)

    header = f"{'kernel':<26}" + "".join(f"{b:>14}" for b in backends) + ("   speedup" if len(backends) == 2 else "")
    print(header)
    for name, fn in cases(stack).items():
        number = 3 if "batch" in name else 2000
        times = [best_time(lambda: fn(impls[b]), number, args.repeat) for b in backends]
        row = f"{name:<26}" + "".join(f"{t * 1e6:>12.2f}us" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)

    per_round = [session_us(b, args.rounds) for b in backends]
    row = f"{'session (per round)':<26}" + "".join(f"{t:>12.2f}us" for t in per_round)
    if len(per_round) == 2:
        row += f"{per_round[0] / per_round[1]:>9.1f}x"
    print(row)


if __name__ == "__main__":
    main()
