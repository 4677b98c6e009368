"""Gilbert-Elliott channel: Algorithm 3 from 0.2 and a side-by-side table
against the stored iterates."""

import time

from markovcap import channels
from markovcap.fixtures import GE_TABLE
from markovcap.optimizer import Algo3Config, run_algorithm3, verify_lemma5


def main() -> None:
    seq = channels.ge_objective()
    lemma = verify_lemma5(seq, b=0.5)
    print(f"starting-constant check passed={lemma.passed} witness={lemma.witness}")
    start = time.perf_counter()
    trace = run_algorithm3(seq, Algo3Config(alpha=0.4, beta=0.5, b=0.5, theta0=0.2, outer_iters=10))
    elapsed = time.perf_counter() - start
    k0 = seq.constants.k0
    print(f"{'k':>3} {'theta':>10} {'ref':>10} {'grad':>11} {'f':>10} {'ref':>10}")
    for r, (k, theta, _, f) in zip(trace, GE_TABLE):
        print(f"{r.outer_k + k0:3d} {r.theta[0]:10.6f} {theta:10.6f} {r.grad_norm:11.6g} "
              f"{r.f_value:10.6f} {f:10.6f}")
    print(f"{elapsed:.2f}s, stop: {trace.stop_reason}")


if __name__ == "__main__":
    main()
