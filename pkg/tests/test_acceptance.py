"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Gating solver runs are cached so the invariant audit (criterion 11) sees
exactly the runs the other criteria checked, whatever order tests run in.
"""

import time
from functools import lru_cache
from types import SimpleNamespace

import numpy as np
from oracles import THEORY_CASES, near_kkt_pair, normal_cone_distance, subproblem_oracle

from orthosolve.baselines import rsm_warmstart
from orthosolve.harness import f_measure, make_initial, make_problem, round_assignment, sparsity
from orthosolve.lsalm import (
    InvariantMonitor,
    LsalmParams,
    LsalmState,
    StopRule,
    feasibility,
    init_feasible,
    kkt_residual,
    primal_step,
    run,
    stationarity_bound,
    step,
)
from orthosolve.matcore import SplitMix64, frobenius_norm, jacobi_eigh, sym, tangent_project
from orthosolve.problems import (
    GraphMatchingProblem,
    gen_qp,
    gen_spca,
    penalty_curvature,
    penalty_value,
)
from orthosolve.sets import Box
from orthosolve.theory import theory_constants

QP_SEEDS = range(10)
BETAS = (0.10, 0.20, 0.30, 0.40, 0.44)
SPCA_SEED = 1
GM_SEEDS = range(5)


def qp_run(seed, beta=0.44):
    P = gen_qp(20, 2, 0.35, seed)
    X0 = init_feasible(20, 2, seed + 10000)
    return run(P, LsalmParams.qp_baseline(beta=beta), StopRule.qp(), X0,
               log_every=10**9, check_invariants=True)


@lru_cache(maxsize=None)
def baseline_runs():
    t0 = time.perf_counter()
    recs = [qp_run(s) for s in QP_SEEDS]
    return recs, time.perf_counter() - t0


@lru_cache(maxsize=None)
def beta_runs():
    t0 = time.perf_counter()
    out = {b: [qp_run(s, b) for s in QP_SEEDS] for b in BETAS}
    return out, time.perf_counter() - t0


@lru_cache(maxsize=None)
def floor_run():
    t0 = time.perf_counter()
    P = gen_qp(20, 2, 0.35, 0)
    params = LsalmParams.qp_baseline()
    rec = run(P, params, StopRule.qp(), init_feasible(20, 2, 10000), log_every=10**9,
              check_invariants=True)
    state = rec.state
    # the continuation's convex-combination bound starts from the converged state
    monitor = InvariantMonitor(params, state.X, state.Z)
    for _ in range(5000):
        new = step(P, params, state)
        monitor.observe(state, new)
        state = new
    counts = {k: rec.invariant_violations[k] + monitor.counts[k] for k in monitor.counts}
    return rec, state, counts, time.perf_counter() - t0


@lru_cache(maxsize=None)
def spca_smooth():
    t0 = time.perf_counter()
    P = gen_spca(200, 100, 10, 0.0, SPCA_SEED)
    params = LsalmParams.sparse_pca(P.m, P.n, P.smooth_lipschitz)
    rec = run(P, params, StopRule.spca(), init_feasible(100, 10, SPCA_SEED + 10000),
              log_every=10**9, check_invariants=True)
    evals, _ = jacobi_eigh(P.AtA)
    return rec, -float(np.sum(evals[:10])), time.perf_counter() - t0


@lru_cache(maxsize=None)
def spca_sparse():
    t0 = time.perf_counter()
    P = gen_spca(200, 100, 10, 0.5, SPCA_SEED)
    params = LsalmParams.sparse_pca(P.m, P.n, P.smooth_lipschitz)
    X0 = rsm_warmstart(P, 250, init_feasible(100, 10, SPCA_SEED + 10000))
    rec = run(P, params, StopRule.spca(), X0, log_every=10**9, check_invariants=True)
    return rec, time.perf_counter() - t0


@lru_cache(maxsize=None)
def gm_runs():
    t0 = time.perf_counter()
    out = []
    for seed in GM_SEEDS:
        P = make_problem({"kind": "gm", "n": 30, "mu": 2.0}, seed)
        X0 = make_initial(P, {"spectral": True}, seed)
        rec = run(P, LsalmParams.graph_matching(), StopRule.gm(), X0, log_every=10**9,
                  check_invariants=True)
        out.append(rec)
    return out, time.perf_counter() - t0


def test_criterion_01_baseline_qp(criterion):
    with criterion(1, "baseline QP converges on 10 seeds") as c:
        recs, elapsed = baseline_runs()
        assert all(r.status == "Converged" for r in recs)
        assert all(r.total_iters <= 30000 and r.final_feas <= 1e-5 for r in recs)
        assert elapsed < 2.0
        c.detail = (f"iters {min(r.total_iters for r in recs)}-"
                    f"{max(r.total_iters for r in recs)}, {elapsed:.2f}s")


def test_criterion_02_beta_band(criterion):
    with criterion(2, "beta band converges, larger beta is faster") as c:
        runs, elapsed = beta_runs()
        for beta, recs in runs.items():
            assert all(r.status == "Converged" for r in recs), beta
        means = {b: float(np.mean([r.total_iters for r in recs])) for b, recs in runs.items()}
        assert means[0.44] < means[0.10]
        assert elapsed < 30.0
        c.detail = ", ".join(f"{b}:{m:.0f}" for b, m in means.items()) + f", {elapsed:.1f}s"


def test_criterion_03_feasibility_floor(criterion):
    with criterion(3, "feasibility floor after 5000 extra iterations") as c:
        rec, state, _, elapsed = floor_run()
        params = LsalmParams.qp_baseline()
        assert rec.status == "Converged"
        feas = feasibility(state.X)
        assert feas <= 10 * params.eps * params.R_Y
        assert elapsed < 5.0
        c.detail = f"feas {feas:.2e} <= {10 * params.eps * params.R_Y:.0e}, {elapsed:.2f}s"


def test_criterion_04_spca_spectral_oracle(criterion):
    with criterion(4, "smooth sparse-PCA objective matches eigen oracle") as c:
        rec, oracle, elapsed = spca_smooth()
        assert rec.status == "Converged"
        rel = abs(rec.final_obj - oracle) / abs(oracle)
        assert rel <= 0.01
        assert rec.final_feas <= 1e-4
        assert elapsed < 60.0
        c.detail = f"rel gap {rel:.2e}, feas {rec.final_feas:.1e}, {elapsed:.1f}s"


def test_criterion_05_spca_nonsmooth(criterion):
    with criterion(5, "sparse-PCA with l1 converges to a sparse point") as c:
        rec, elapsed = spca_sparse()
        sp = sparsity(rec.X)
        assert rec.status == "Converged"
        assert sp >= 0.30 and rec.final_feas <= 1e-4
        assert elapsed < 120.0
        c.detail = f"sparsity {sp:.3f}, {rec.total_iters} iters, {elapsed:.1f}s"


def _random_instance(i, rng):
    m = 3 + i % 6
    n = 1 + i % min(m, 3)
    kind = i % 4
    if kind == 0:
        P = gen_qp(m, n, 0.35, 100 + i)
    elif kind == 1:
        P = gen_qp(m, n, 0.0, 100 + i)
    elif kind == 2:
        P = gen_spca(20, max(m, 5), n, 0.5, 100 + i, primal_set=Box(1.5))
    else:
        K = np.abs(sym(rng.normal((m * m, m * m))))
        P = GraphMatchingProblem(K / K.max(), m, m, 2.0)
    return P


def test_criterion_06_primal_step_oracle(criterion):
    with criterion(6, "primal step equals the iterative subproblem solution") as c:
        t0 = time.perf_counter()
        rng = SplitMix64(606)
        worst = 0.0
        for i in range(20):
            P = _random_instance(i, rng)
            assert P.m <= 8
            params = LsalmParams(rho=0.5 + i % 3, lam=0.2 + 0.1 * (i % 5), r=1.0 + i % 4,
                                 alpha=0.1, beta=0.5, eps=1e-6, R_Y=5.0)
            X = init_feasible(P.m, P.n, i) + 0.1 * rng.normal(P.shape)
            Y = sym(rng.normal((P.n, P.n)))
            Z = X + 0.2 * rng.normal(P.shape)
            state = LsalmState(X=X, Y=Y, Z=Z)
            err = frobenius_norm(primal_step(P, params, state)
                                 - subproblem_oracle(P, params, X, Y, Z))
            worst = max(worst, err)
        elapsed = time.perf_counter() - t0
        assert worst <= 1e-8
        assert elapsed < 10.0
        c.detail = f"max error {worst:.1e}, {elapsed:.2f}s"


def test_criterion_07_penalty_weak_convexity(criterion):
    with criterion(7, "penalty curvature identity and 2-weak convexity") as c:
        t0 = time.perf_counter()
        rng = SplitMix64(707)
        t = 1e-4
        worst = 0.0
        for i in range(30):
            m, n = 2 + i % 6, 1 + i % 3
            n = min(n, m)
            X, H = rng.normal((m, n)), rng.normal((m, n))
            second = (penalty_value(X + t * H) - 2 * penalty_value(X)
                      + penalty_value(X - t * H)) / t**2
            exact = penalty_curvature(X, H)
            assert abs(second - exact) <= 1e-4 * abs(exact) + 1e-8
            assert exact >= -2.0 * frobenius_norm(H) ** 2 - 1e-8
            worst = max(worst, abs(second - exact) / max(abs(exact), 1e-300))
        elapsed = time.perf_counter() - t0
        assert elapsed < 1.0
        c.detail = f"max relative deviation {worst:.1e}, {elapsed:.3f}s"


def test_criterion_08_kkt_to_stationarity(criterion):
    with criterion(8, "KKT residual bounds Riemannian stationarity") as c:
        t0 = time.perf_counter()
        tightest = np.inf
        for i in range(50):
            scale = 10.0 ** -(2 + i % 5)
            P, X, Y, Xs, Ys = near_kkt_pair(1000 + i, m=4 + i % 5, n=1 + i % 3, scale=scale)
            eps = max(kkt_residual(P, X, Y), feasibility(X))
            bound = stationarity_bound(X, Y, eps)
            exact = normal_cone_distance(P.grad_smooth(X), X)
            certificate = frobenius_norm(P.grad_smooth(X) + X @ sym(X.T @ (2 * X @ Y)))
            assert exact <= bound and certificate <= bound
            eps_s = kkt_residual(P, Xs, Ys)
            tangent = frobenius_norm(tangent_project(Xs, P.grad_smooth(Xs)))
            assert tangent <= stationarity_bound(Xs, Ys, eps_s) * (1 + 1e-12)
            tightest = min(tightest, bound / max(certificate, 1e-300))
        elapsed = time.perf_counter() - t0
        assert elapsed < 5.0
        c.detail = f"smallest bound/certificate ratio {tightest:.2f}, {elapsed:.2f}s"


def test_criterion_09_theory_constants(criterion):
    names = ("mu_rho", "L_rho", "sigma1", "sigma2", "zeta", "omega", "r_min_c1", "r_min_c2")
    with criterion(9, "theory constants match the frozen recomputation") as c:
        t0 = time.perf_counter()
        worst = 0.0
        for inputs, expected in THEORY_CASES:
            L_ell, L_g, rho, R_Y, R, r, lam, alpha, eps, delta, xi = inputs
            problem = SimpleNamespace(smooth_lipschitz=L_ell, nonsmooth_lipschitz=L_g)
            params = LsalmParams(rho=rho, lam=lam, r=r, alpha=alpha, beta=0.5, eps=eps,
                                 R_Y=R_Y, R_X_op=R)
            tc = theory_constants(problem, params, delta, xi)
            for name, value in zip(names, expected):
                rel = abs(getattr(tc, name) - value) / abs(value)
                assert rel <= 1e-12, name
                worst = max(worst, rel)
        elapsed = time.perf_counter() - t0
        assert elapsed < 1.0
        c.detail = f"max relative error {worst:.1e}"


def test_criterion_10_graph_matching_identity(criterion):
    with criterion(10, "graph matching recovers the identity") as c:
        recs, elapsed = gm_runs()
        scores = []
        for rec in recs:
            assert rec.status == "Converged"
            scores.append(f_measure(round_assignment(rec.X), np.eye(30)))
        assert all(s == 1.0 for s in scores)
        assert elapsed < 30.0
        c.detail = (f"F = 1.0 on {len(recs)} clouds, "
                    f"{elapsed / len(recs):.2f}s per cloud")


def test_criterion_11_iterate_invariants(criterion):
    with criterion(11, "iterate invariants hold on every gating run") as c:
        counts = {}
        checked = 0

        def add(d):
            nonlocal checked
            checked += 1
            for k, v in d.items():
                counts[k] = counts.get(k, 0) + v

        for r in baseline_runs()[0]:
            add(r.invariant_violations)
        for recs in beta_runs()[0].values():
            for r in recs:
                add(r.invariant_violations)
        add(floor_run()[2])
        add(spca_smooth()[0].invariant_violations)
        add(spca_sparse()[0].invariant_violations)
        for r in gm_runs()[0]:
            add(r.invariant_violations)
        assert sum(counts.values()) == 0, counts
        c.detail = f"{checked} runs, zero violations"
