"""Positive semidefinite matrix completion without storing the matrix.

Builds a rank-3 ground truth on n = 100, observes a dense anchor block plus
a sparse random set of upper-triangle entries at 20 dB, and compares plain
momentum descent against the variant with periodic greedy factor refits.
The solver state is the measurement vector and a trace scalar; the full
matrix never materializes.

Run:  python3 demos/matrix_completion.py
"""

import numpy as np

from cdkit import SolverConfig, sdp_solve
from cdkit.problems import build_matcomp


def main():
    mc = build_matcomp(n=100, rank=3, seed=0, block=10, density=0.1, noise_snr=20.0)
    print(f"n=100, observed entries: {mc.op.d}, rank of truth: {mc.v_true.shape[1]}")

    results = {}
    for name, period in (("moco", 0), ("mocog", 20)):
        cfg = SolverConfig(max_iters=300, greedy_period=period, rng_seed=0)
        res = sdp_solve(mc.fv, mc.op, config=cfg, sketch_size=8)
        results[name] = res
        commits = res.stats.get("n_greedy_commits", 0)
        print(
            f"{name:>6}: final f = {res.trace.f_values()[-1]:.6f}, "
            f"dual cert = {res.certified_dual_cert:.3e}, "
            f"trace = {res.final_tr:.3f}, greedy commits = {commits}"
        )

    gain = results["moco"].trace.f_values()[-1] - results["mocog"].trace.f_values()[-1]
    print(f"greedy refits improve the final objective by {gain:.6f}")

    # every tenth record, side by side
    print(f"\n{'k':>4} {'f (moco)':>12} {'f (mocog)':>12}")
    recs_m = {r.k: r for r in results["moco"].trace.records}
    recs_g = {r.k: r for r in results["mocog"].trace.records}
    for k in range(0, 301, 30):
        if k in recs_m and k in recs_g:
            print(f"{k:>4} {recs_m[k].f_value:>12.6f} {recs_g[k].f_value:>12.6f}")


if __name__ == "__main__":
    main()
