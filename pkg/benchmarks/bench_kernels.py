"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--frames 10000] [--repeat 5]

Prints one JSON record per (kernel, backend) with the best wall time.
"""

import argparse
import json
import time

import numpy as np

from tlagent import kernels
from tlagent.automaton import compile_dfa
from tlagent.probability import assignment_probabilities

SPEC = "G (a -> F[0,12] b) & G (c -> F[0,12] d)"
SEARCH_SPEC = "a U (b & F[0,4] c)"


def best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=10000)
    ap.add_argument("--window", type=int, default=60)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    conf = rng.random((args.frames, 4))
    probs = np.ascontiguousarray(assignment_probabilities(conf))
    letters = np.ascontiguousarray(((conf >= 0.5) * np.array([1, 2, 4, 8])).sum(axis=1), dtype=np.int32)

    score_dfa = compile_dfa(SPEC, propositions="abcd")
    search_dfa = compile_dfa(SEARCH_SPEC, propositions="abcd")
    acc = search_dfa.accepting.astype(np.uint8)
    live = search_dfa.live.astype(np.uint8)

    jobs = {
        "forward": lambda k: k.forward(score_dfa.delta, 0, probs),
        "boolean_spans": lambda k: k.boolean_spans(search_dfa.delta, acc, live, 0, letters, args.window),
        "prob_spans": lambda k: k.prob_spans(search_dfa.delta, acc, live, 0, probs, args.window, 0.5),
    }
    backends = kernels.available_backends()
    for job, fn in jobs.items():
        timings = {name: best(lambda: fn(impl), args.repeat) for name, impl in sorted(backends.items())}
        rec = {"kernel": job, "frames": args.frames, "states": (score_dfa if job == "forward" else search_dfa).num_states}
        rec.update({f"{name}_s": round(t, 6) for name, t in timings.items()})
        if "cython" in timings:
            rec["speedup"] = round(timings["python"] / timings["cython"], 2)
        print(json.dumps(rec))


if __name__ == "__main__":
    main()
