"""Noiseless two-state channel with the {101}-forbidden input: Algorithm 1
from 0.5 for 450 steps, the order-2 Birch bound and the Shannon capacity."""

import time

from markovcap import channels
from markovcap.fixtures import NOISELESS
from markovcap.optimizer import Algo1Config, certified_bound, run_algorithm1, verify_lemma1


def main() -> None:
    seq = channels.noiseless_objective()
    lemma = verify_lemma1(seq, grid_points=1001)
    print(f"starting-constant check passed={lemma.passed}")
    for msg in lemma.failures:
        print(f"  {msg}")
    start = time.perf_counter()
    trace = run_algorithm1(seq, Algo1Config(alpha=0.4, beta=0.9, theta0=0.5, outer_iters=450))
    elapsed = time.perf_counter() - start
    final = trace.final
    print(f"theta_450 = {final.theta[0]:.7f}  (reference {NOISELESS['theta_final']})")
    print(f"f_450     = {final.f_value:.8f} (reference {NOISELESS['f_final']})   {elapsed:.2f}s")
    rep = certified_bound(trace, seq, lemma.dist_C_boundary, eval_tol=1e-14)
    print(f"interval [{rep.interval[0]:.9f}, {rep.interval[1]:.6g}] eta={rep.eta:.5f} "
          f"(reference {list(NOISELESS['interval'])}, eta {NOISELESS['eta']})")
    exact = channels.noiseless_fk(final.theta[0], 450, exact_first_term=True)
    print(f"output entropy rate at theta_450 including the first-symbol term: {exact:.7f}")
    p, q = NOISELESS["birch_pq"]
    print(f"order-2 Birch bound: {channels.birch_bound_noiseless(p, q):.7f}")
    print(f"Shannon capacity:    {channels.shannon_capacity('101'):.7f}")


if __name__ == "__main__":
    main()
