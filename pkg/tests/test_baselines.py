import numpy as np
import pytest

from orthosolve.baselines import (
    MAX_SHRINKS,
    RgdParams,
    armijo_step,
    l1_subgradient,
    rgd,
    rgd_warmstart,
    riemannian_grad,
    rsm_stepsize,
    rsm_warmstart,
)
from orthosolve.errors import BacktrackExhausted, InfeasibleStart, ParameterError
from orthosolve.matcore import (
    frobenius_norm,
    gram_residual,
    jacobi_eigh,
    random_gaussian,
    random_orthonormal,
    sym,
)
from orthosolve.problems import QuadraticProblem, gen_qp, gen_spca
from orthosolve.record import CONVERGED


def pca_problem(m=8, n=2, seed=9):
    M = sym(random_gaussian(m, m, seed))
    # l(X) = -tr(X^T M X)
    return M, QuadraticProblem(-2.0 * M, np.zeros((m, n)), 0.0)


def test_rgd_params_validation():
    assert RgdParams() == RgdParams(eta=0.1, gamma=0.5, delta=0.5)
    for bad in ({"eta": 0.0}, {"gamma": 1.0}, {"delta": 0.0}, {"max_iter": 0},
                {"tol_grad": -1.0}):
        with pytest.raises(ParameterError):
            RgdParams(**bad)
    assert RgdParams.from_dict(RgdParams().to_dict()) == RgdParams()
    with pytest.raises(ParameterError):
        RgdParams.from_dict({"step": 1})


def test_rgd_stops_at_eigenvector_start():
    M, P = pca_problem()
    _, V = np.linalg.eigh(M)
    rec = rgd(P, RgdParams(), V[:, -2:])
    assert rec.status == CONVERGED and rec.total_iters == 0


def test_rgd_small_pca_matches_eigen_oracle():
    M, P = pca_problem()
    evals, _ = jacobi_eigh(M)
    rec = rgd(P, RgdParams(tol_grad=1e-5), random_orthonormal(8, 2, 1))
    assert rec.status == CONVERGED
    assert rec.final_obj == pytest.approx(-(evals[0] + evals[1]), abs=1e-6)
    assert rec.final_feas <= 1e-10
    assert rec.final_kkt == pytest.approx(rec.stationarity_bound, abs=1e-12)


def test_rgd_monotone_and_feasible():
    P = gen_qp(10, 3, 0.0, 2)
    rec = rgd(P, RgdParams(tol_grad=1e-6), random_orthonormal(10, 3, 3))
    objs = [row[1] for row in rec.rows]
    assert all(b <= a for a, b in zip(objs, objs[1:]))
    assert max(row[2] for row in rec.rows) <= 1e-10


def test_armijo_inequality_holds_at_accepted_steps():
    P = gen_qp(10, 3, 0.0, 4)
    X = random_orthonormal(10, 3, 5)
    params = RgdParams()
    for _ in range(30):
        g = riemannian_grad(P, X)
        f0 = P.eval_smooth(X)
        X_next, f1, t = armijo_step(P, X, g, f0, params)
        assert f1 <= f0 - params.delta * t * float(np.sum(g * g))
        assert frobenius_norm(gram_residual(X_next)) <= 1e-10
        X = X_next


def test_armijo_exhaustion_on_ascent_direction():
    P = gen_qp(6, 2, 0.0, 1)
    X = random_orthonormal(6, 2, 2)
    g = riemannian_grad(P, X)
    with pytest.raises(BacktrackExhausted, match=str(MAX_SHRINKS)):
        armijo_step(P, X, -g, P.eval_smooth(X), RgdParams())


def test_rgd_input_checks():
    with pytest.raises(ParameterError):
        rgd(gen_qp(6, 2, 0.3, 0), RgdParams(), random_orthonormal(6, 2, 0))
    with pytest.raises(InfeasibleStart):
        rgd(gen_qp(6, 2, 0.0, 0), RgdParams(), 1.1 * random_orthonormal(6, 2, 0))


def test_rgd_budget():
    P = gen_qp(10, 3, 0.0, 2)
    rec = rgd(P, RgdParams(max_iter=2, tol_grad=1e-12), random_orthonormal(10, 3, 3))
    assert rec.status == "Budget" and rec.total_iters == 2


def test_rsm_examples():
    P = gen_spca(20, 10, 2, 0.5, 1)
    X0 = random_orthonormal(10, 2, 4)
    assert np.array_equal(rsm_warmstart(P, 0, X0), X0)
    assert rsm_stepsize(16) == pytest.approx(1 / 8, rel=1e-15)
    assert rsm_stepsize(1) == 1.0
    X = rsm_warmstart(P, 50, X0)
    assert frobenius_norm(gram_residual(X)) <= 1e-10
    assert np.array_equal(X, rsm_warmstart(P, 50, X0))


def test_l1_subgradient_picks_zero_at_zero_entries():
    P = QuadraticProblem(np.zeros((2, 2)), np.zeros((2, 1)), 0.7)
    X = np.array([[0.0], [-2.0]])
    assert np.array_equal(l1_subgradient(P, X), np.array([[0.0], [-0.7]]))


def test_rgd_warmstart_descends():
    M, P = pca_problem()
    X0 = random_orthonormal(8, 2, 6)
    X = rgd_warmstart(P, 20, X0, step=0.05)
    assert frobenius_norm(gram_residual(X)) <= 1e-10
    assert P.eval_smooth(X) < P.eval_smooth(X0)
