"""Acceptance suite.

One test per shipped guarantee, in order. Each test prints a single
"criterion NN PASS" line with the measured margin (visible under -s; the
pytest -v listing gives the pass/fail per criterion either way).
"""

import functools
import gc
import time
import tracemalloc

import numpy as np
import pytest

from cdkit import (
    ConicProgram,
    NonnegativeOrthant,
    PsdCone,
    SecondOrderCone,
    SketchState,
    SolverConfig,
    factor_to_dense,
    fw_solve,
    operator_norm,
    sdp_solve,
    sketch_reconstruct,
    solve,
)
from cdkit.cones import brute_lmo, dual_distance
from cdkit.problems import (
    build_matcomp,
    build_orthant_quadratic,
    build_phase_retrieval,
    build_trace_toy,
)
from cdkit.verify import smoothness_gap_check


def toy_program():
    # f(x, y) = (x - 1)^2 + y^2 over the nonnegative orthant
    # smoothness constant 2, optimum (1, 0) at distance 1 from the origin
    opt = np.array([1.0, 0.0])

    def value(p):
        return float(np.sum((p - opt) ** 2))

    def grad(p):
        return 2.0 * (p - opt)

    def restriction(base, direction):
        a = float(direction @ direction)
        b = 2.0 * float((base - opt) @ direction)
        c = value(base)
        return a, b, c

    return ConicProgram(
        2, value, grad, cone=NonnegativeOrthant(2), restriction_oracle=restriction,
        smoothness_hint=2.0,
    )


# start away from the planted optimum: the default orthant init is (1, 0),
# which already solves the toy problem
TOY_X0 = np.array([0.0, 1.0])


def orthant_dist_sq(g):
    neg = np.minimum(g, 0.0)
    return float(neg @ neg)


@functools.lru_cache(maxsize=1)
def rate_bound_sweep():
    """Run moco for 500 visits on the toy and ten planted quadratics and
    collect the worst ratios against the two dual rate bounds plus the
    certificate identity margin."""
    instances = [(toy_program(), 2.0, 1.0, TOY_X0)]
    for seed in range(10):
        built = build_orthant_quadratic(dim=20, seed=seed)
        instances.append(
            (built.program, built.lipschitz, float(np.linalg.norm(built.x_star)), None)
        )
    worst_grad = 0.0
    worst_mom = 0.0
    worst_ident = 0.0
    for prob, lips, radius, x0 in instances:
        scale = 4.0 * lips * lips * radius * radius
        rows = []

        def cb(state, record, rows=rows, prob=prob):
            xe = state.eta * state.x
            grad = prob.gradient_oracle(xe)
            rows.append(
                (
                    state.k,
                    orthant_dist_sq(grad),
                    orthant_dist_sq(state.g),
                    record.dual_cert,
                    float(np.linalg.norm(state.g)),
                )
            )

        solve(prob, SolverConfig(max_iters=500), x0=x0, callback=cb)
        for k, dg, dm, cert, gnorm in rows:
            worst_grad = max(worst_grad, dg * (k + 1) / scale)
            if k >= 2:
                worst_mom = max(worst_mom, dm * (k + 1) / (2.425 * scale))
            ident = abs(cert - np.sqrt(dm)) / (1.0 + gnorm)
            worst_ident = max(worst_ident, ident)
    return worst_grad, worst_mom, worst_ident


def test_criterion_01_toy_primal_rate():
    prob = toy_program()
    for mode in ("cd", "moco"):
        t0 = time.perf_counter()
        res = solve(prob, SolverConfig(max_iters=50, momentum_mode=mode), x0=TOY_X0)
        wall = time.perf_counter() - t0
        for rec in res.trace.records:
            if rec.k >= 1:
                assert rec.f_value <= 4.0 / (rec.k + 1.0) + 1e-15, (mode, rec.k)
        assert res.trace.f_values()[-1] <= 1e-6, mode
        assert wall < 1.0, mode
    print("criterion 01 PASS: toy reaches f <= 1e-6 under the 4/(k+1) envelope")


def test_criterion_02_ray_slackness_everywhere():
    obs = []

    # vector runs: scale by 1 + |eta x| |grad|
    for mode in ("cd", "moco"):
        prob = toy_program()

        def cb(state, record, prob=prob):
            xe = state.eta * state.x
            s = 1.0 + np.linalg.norm(xe) * np.linalg.norm(prob.gradient_oracle(xe))
            obs.append(abs(record.cs_residual) / s)

        solve(prob, SolverConfig(max_iters=50, momentum_mode=mode), x0=TOY_X0, callback=cb)
    for seed in range(3):
        built = build_orthant_quadratic(dim=20, seed=seed)

        def cb(state, record, prob=built.program):
            xe = state.eta * state.x
            s = 1.0 + np.linalg.norm(xe) * np.linalg.norm(prob.gradient_oracle(xe))
            obs.append(abs(record.cs_residual) / s)

        solve(built.program, SolverConfig(max_iters=500), callback=cb)

    # semidefinite runs: hold them to the tighter unit scale
    mc = build_matcomp(n=100, rank=3, seed=0, block=10, density=0.1, noise_snr=20.0)
    res = sdp_solve(mc.fv, mc.op, config=SolverConfig(max_iters=300))
    obs.extend(abs(c) for c in res.trace.cs_residuals())
    ph = build_phase_retrieval(n=64, m=10, seed=0, noise_snr=20.0)
    res = sdp_solve(
        ph.fv, ph.op, gamma=ph.gamma,
        config=SolverConfig(max_iters=300, greedy_period=20, rng_seed=0), sketch_size=8,
    )
    obs.extend(abs(c) for c in res.trace.cs_residuals())

    worst = max(obs)
    assert worst <= 1e-8, worst
    print(f"criterion 02 PASS: max scaled ray-slackness residual {worst:.3e} <= 1e-8")


def test_criterion_03_gradient_dual_rate():
    worst_grad, _, _ = rate_bound_sweep()
    assert worst_grad <= 1.0, worst_grad
    print(
        "criterion 03 PASS: dist^2(grad) * (k+1) <= 4 L^2 R^2, worst ratio "
        f"{worst_grad:.4f}"
    )


def test_criterion_04_momentum_dual_rate():
    _, worst_mom, _ = rate_bound_sweep()
    assert worst_mom <= 1.0, worst_mom
    print(
        "criterion 04 PASS: dist^2(momentum) * (k+1) <= 9.7 L^2 R^2 for k >= 2, "
        f"worst ratio {worst_mom:.4f}"
    )


def test_criterion_05_certificate_identity():
    _, _, worst_ident = rate_bound_sweep()
    assert worst_ident <= 1e-10, worst_ident

    # semidefinite side: lanczos certificate vs a dense eigendecomposition
    worst_sdp = 0.0

    def make_cb(op, gamma):
        def cb(info):
            dense = op.adjoint_dense(info["g_avg"]) + gamma * np.eye(op.n)
            lam_dense = float(np.linalg.eigvalsh(dense)[0])
            cert = max(0.0, -info["lambda"])
            nonlocal worst_sdp
            worst_sdp = max(worst_sdp, abs(cert - max(0.0, -lam_dense)))
        return cb

    mc = build_matcomp(n=100, rank=3, seed=0, block=10, density=0.1, noise_snr=20.0)
    sdp_solve(mc.fv, mc.op, config=SolverConfig(max_iters=60), callback=make_cb(mc.op, 0.0))
    ph = build_phase_retrieval(n=64, m=10, seed=0, noise_snr=20.0)
    sdp_solve(
        ph.fv, ph.op, gamma=ph.gamma,
        config=SolverConfig(max_iters=60, greedy_period=20, rng_seed=0), sketch_size=8,
        callback=make_cb(ph.op, ph.gamma),
    )
    assert worst_sdp <= 1e-6, worst_sdp
    print(
        f"criterion 05 PASS: certificate identity, vector margin {worst_ident:.3e}, "
        f"eigensolver vs dense {worst_sdp:.3e}"
    )


def test_criterion_06_smoothness_slack_suite():
    worst = np.inf
    for idx, seed in enumerate(range(100, 120)):
        built = build_orthant_quadratic(dim=20, seed=seed)
        rng = np.random.default_rng(idx)
        pairs = [(rng.standard_normal(20), rng.standard_normal(20)) for _ in range(1000)]
        slack = smoothness_gap_check(
            built.program.value_oracle,
            built.program.gradient_oracle,
            pairs,
            built.lipschitz,
        )
        worst = min(worst, slack)
    assert worst >= -1e-9, worst
    print(f"criterion 06 PASS: smoothness inequality min scaled slack {worst:+.4f}")


def test_criterion_07_lmo_brute_force_equivalence():
    cones = [
        NonnegativeOrthant(2),
        NonnegativeOrthant(3),
        SecondOrderCone(2),
        SecondOrderCone(3),
        PsdCone(2),
        PsdCone(3),
    ]
    worst = 0.0
    for ci, cone in enumerate(cones):
        rng = np.random.default_rng(ci)
        for _ in range(500):
            if isinstance(cone, PsdCone):
                a = rng.standard_normal((cone.n, cone.n))
                g = (a + a.T) / 2.0
                gnorm = operator_norm(g)
            else:
                g = rng.standard_normal(cone.dim)
                gnorm = float(np.linalg.norm(g))
            exact = -float(np.vdot(g, cone.lmo(g)))
            brute = -float(np.vdot(g, brute_lmo(cone, g, grid_n=10000)))
            gap = abs(exact - brute) / (1.0 + gnorm)
            worst = max(worst, gap)
    assert worst <= 2e-3, worst
    print(f"criterion 07 PASS: closed-form vs grid LMO, worst scaled gap {worst:.2e}")


def test_criterion_08_sketch_consistency_through_greedy():
    mc = build_matcomp(n=40, rank=2, seed=0, block=6, density=0.15)
    op = mc.op
    x = np.zeros((40, 40))
    worst = [0.0]

    def cb(info):
        if info["eta"] != 1.0:
            x[:] *= info["eta"]
        if info["theta"] != 0.0:
            x[:] += info["theta"] * np.outer(info["q"], info["q"])
        gr = info["greedy"]
        if gr is not None and gr["committed"]:
            x[:] *= gr["t_sq"]
            x[:] += gr["u"] @ gr["u"].T
        sk = info["sketch"]
        gap = np.linalg.norm(sk.s - x @ sk.omega) / (1.0 + np.linalg.norm(x))
        worst[0] = max(worst[0], gap)

    cfg = SolverConfig(max_iters=300, greedy_period=20, rng_seed=0)
    res = sdp_solve(mc.fv, op, config=cfg, sketch_size=6, record_factors=True, callback=cb)
    assert res.stats["n_greedy_commits"] >= 1
    assert worst[0] <= 1e-8, worst[0]
    print(
        f"criterion 08 PASS: sketch tracks the dense iterate, worst scaled gap "
        f"{worst[0]:.2e} over 300 visits, {res.stats['n_greedy_commits']} greedy commits"
    )


def test_criterion_09_reconstruction_bounds():
    rng = np.random.default_rng(0)
    # exact rank-1 recovery from a width-3 sketch
    worst = 0.0
    for trial in range(50):
        n = 30
        q = rng.standard_normal(n)
        q /= np.linalg.norm(q)
        weight = float(np.exp(rng.standard_normal()))
        x_mat = weight * np.outer(q, q)
        sk = SketchState.create(n, 3, seed=trial)
        sk.add_rank_one(weight, q)
        u, lam = sketch_reconstruct(sk, 1)
        err = np.abs(np.linalg.eigvalsh(factor_to_dense(u, lam) - x_mat)).sum() / weight
        worst = max(worst, err)
    assert worst <= 1e-6, worst

    # rank-5 spectrum, rank-2 readout from a width-8 sketch: the mean nuclear
    # error stays within 10 percent of the tail expectation bound
    n = 40
    sigma = np.array([1.0, 0.5, 0.05, 0.03, 0.02])
    tail = float(sigma[2:].sum())
    bound = 1.1 * (1.0 + 2.0 / (8 - 2 - 1)) * tail
    errs = []
    for trial in range(200):
        gmat = rng.standard_normal((n, 5))
        qmat, _ = np.linalg.qr(gmat)
        x_mat = (qmat * sigma) @ qmat.T
        sk = SketchState.create(n, 8, seed=1000 + trial)
        sk.s = x_mat @ sk.omega
        u, lam = sketch_reconstruct(sk, 2)
        errs.append(np.abs(np.linalg.eigvalsh(factor_to_dense(u, lam) - x_mat)).sum())
    mean_err = float(np.mean(errs))
    assert mean_err <= bound, (mean_err, bound)
    print(
        f"criterion 09 PASS: rank-1 nuclear error {worst:.1e}; rank-5 mean "
        f"{mean_err:.4f} <= {bound:.4f}"
    )


def test_criterion_10_matcomp_monotone_and_greedy_wins():
    wins = 0
    slowest = 0.0
    for seed in range(10):
        mc = build_matcomp(n=100, rank=3, seed=seed, block=10, density=0.1, noise_snr=20.0)
        finals = {}
        for algo in ("cd", "moco", "mocog"):
            mode = "cd" if algo == "cd" else "moco"
            period = 20 if algo == "mocog" else 0
            cfg = SolverConfig(
                max_iters=300, momentum_mode=mode, greedy_period=period, rng_seed=0
            )
            t0 = time.perf_counter()
            res = sdp_solve(mc.fv, mc.op, config=cfg)
            slowest = max(slowest, time.perf_counter() - t0)
            fs = res.trace.f_values()
            assert all(
                fs[i + 1] <= fs[i] + 1e-12 for i in range(len(fs) - 1)
            ), (seed, algo)
            for ev in res.stats["greedy_events"]:
                assert ev["f_after"] <= ev["f_before"] + 1e-12, (seed, ev["k"])
            assert max(abs(c) for c in res.trace.cs_residuals()) <= 1e-8
            finals[algo] = fs[-1]
        wins += finals["mocog"] <= finals["moco"]
    assert wins >= 8, wins
    assert slowest < 60.0, slowest
    print(
        f"criterion 10 PASS: monotone traces, greedy never increases f, "
        f"mocog <= moco on {wins}/10 seeds, slowest run {slowest:.1f}s"
    )


def test_criterion_11_phase_recovery_and_heuristic():
    hits = 0
    errs = []
    for seed in range(10):
        ph = build_phase_retrieval(n=64, m=10, seed=seed, noise_snr=20.0)
        cfg = SolverConfig(max_iters=300, greedy_period=20, rng_seed=0)
        res = sdp_solve(ph.fv, ph.op, gamma=ph.gamma, config=cfg, sketch_size=8)
        u, lam = sketch_reconstruct(res.sketch, 1)
        lifted = factor_to_dense(u, lam)
        err = float(
            np.linalg.norm(lifted - np.outer(ph.x_true, ph.x_true))
            / (ph.x_true @ ph.x_true)
        )
        errs.append(err)
        hits += err <= 0.1
    assert hits >= 8, errs

    # the heuristic step rule runs zero line searches along the atoms and
    # spends fewer objective evaluations than the searched variant
    ph = build_phase_retrieval(n=64, m=10, seed=0, noise_snr=20.0)
    res_m = sdp_solve(ph.fv, ph.op, gamma=ph.gamma, config=SolverConfig(max_iters=300))
    res_h = sdp_solve(
        ph.fv, ph.op, gamma=ph.gamma,
        config=SolverConfig(
            max_iters=300, step_rule="heuristic", heuristic_m=ph.m_estimate
        ),
    )
    assert res_h.stats["n_theta_searches"] == 0
    evals_h = res_h.stats["value"] + res_h.stats["restriction"]
    evals_m = res_m.stats["value"] + res_m.stats["restriction"]
    assert evals_h < evals_m, (evals_h, evals_m)
    print(
        f"criterion 11 PASS: lifted recovery error <= 0.1 on {hits}/10 seeds "
        f"(max {max(errs):.4f}); heuristic used {evals_h} objective evals vs "
        f"{evals_m} with line search"
    )


def test_criterion_12_fw_shrunk_domain_stall():
    toy = build_trace_toy()
    res_fw = fw_solve(
        toy.fv, toy.op, tau=0.5, config=SolverConfig(max_iters=300, tol_eps=1e-14)
    )
    f_fw = res_fw.trace.f_values()[-1]
    assert abs(f_fw - 0.125) <= 1e-6, f_fw
    res_moco = sdp_solve(toy.fv, toy.op, config=SolverConfig(max_iters=300))
    f_moco = res_moco.trace.f_values()[-1]
    assert f_moco <= 1e-6, f_moco
    print(
        f"criterion 12 PASS: baseline stalls at f = {f_fw:.6f} with trace budget "
        f"0.5 while the cone method reaches f = {f_moco:.1e}"
    )


def test_criterion_13_memory_contract():
    n = 2000
    mc = build_matcomp(n=n, rank=3, seed=0, block=10, density=0.1)
    gc.collect()
    tracemalloc.start()
    baseline = tracemalloc.get_traced_memory()[0]
    res = sdp_solve(mc.fv, mc.op, config=SolverConfig(max_iters=8), sketch_size=8)
    peak = tracemalloc.get_traced_memory()[1]
    tracemalloc.stop()
    assert res.status in ("converged", "max_iters")
    used = peak - baseline
    budget = n * n * 8  # one dense n x n float64 must never exist
    assert used < budget, (used, budget)
    print(
        f"criterion 13 PASS: peak solver allocation {used / 1e6:.1f} MB, "
        f"under the {budget / 1e6:.0f} MB dense-matrix budget"
    )
