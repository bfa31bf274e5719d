import json
import math

import numpy as np
import pytest

from oracles import ball_projection_objective, svt_objective, svt_solution
from tracereg.linalg import embed_eigensystem, thin_svd, trace_norm
from tracereg.problem import (
    ConstrainedSpec,
    PenalizedSpec,
    ReducedProblem,
    radius_penalized,
)
from tracereg.prox import FactoredSpectahedronPoint
from tracereg.solver import (
    IterState,
    SolverConfig,
    derive,
    eval_primal_dual,
    iteration_bound,
    solve_constrained,
    solve_penalized,
)


def _identity_problem(h):
    h = np.asarray(h, dtype=float)
    return ReducedProblem(
        lambda_diag=np.ones(h.shape[0]),
        h=h,
        q_basis=np.eye(h.shape[0]),
        norm_b_sq=float(np.sum(h * h)),
    )


def _rng(seed):
    return np.random.Generator(np.random.Philox(key=seed))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)
    with pytest.raises(ValueError):
        SolverConfig(gap_check_interval=0)
    with pytest.raises(ValueError):
        SolverConfig(alpha_rule="uniform")


def test_saddle_pair_has_zero_gap():
    # with every singular value above lam, soft thresholding keeps all
    # directions and the matching dual point is available in closed form
    rng = _rng(3)
    p, q, m = 6, 4, 4
    u0, _ = np.linalg.qr(rng.standard_normal((p, m)))
    v0, _ = np.linalg.qr(rng.standard_normal((q, m)))
    sig = np.array([5.0, 4.2, 3.1, 2.5])
    h = (u0 * sig) @ v0.T
    lam = 1.0
    spec = PenalizedSpec(problem=_identity_problem(h), lam=lam)
    r = radius_penalized(spec)
    x_star = (u0 * (sig - lam)) @ v0.T
    eig = embed_eigensystem(thin_svd(x_star))
    point = FactoredSpectahedronPoint(
        dim=p + q,
        cap_m=m,
        theta=0.0,
        basis=eig.vectors,
        weights=np.array([1.0 / m] * m + [0.0] * m),
        trace_t=1.0,
    )
    adj = point.sym_embed_adjoint((p, q))
    state = IterState(
        k=0,
        u_adjoint=adj,
        u_sd_adjoint=adj,
        u_ag=point,
        v_accum=x_star / r,
        grad_accum=np.zeros((p, q)),
        tau=1.0,
        alpha_sum=0.0,
    )
    f, g = eval_primal_dual(spec, state)
    opt = 0.5 * float(np.sum((x_star - h) ** 2)) + lam * float(np.sum(sig - lam))
    assert f == pytest.approx(g, abs=1e-10)
    assert -g == pytest.approx(opt, abs=1e-10)


def test_penalized_matches_svt():
    h = _rng(20).standard_normal((5, 3))
    spec = PenalizedSpec(problem=_identity_problem(h), lam=0.8)
    report = solve_penalized(spec, SolverConfig(epsilon=1e-6, max_iters=200_000))
    assert report.converged
    assert report.gap <= 1e-6
    assert report.dual_obj <= report.primal_obj + 1e-12
    ref = svt_objective(h, 0.8)
    assert report.primal_obj == pytest.approx(ref, rel=1e-6, abs=1e-6)
    # the reported objective is attained by the reported matrix
    direct = 0.5 * float(np.sum((report.x - h) ** 2)) + 0.8 * trace_norm(report.x)
    assert direct == pytest.approx(report.primal_obj, abs=1e-10)
    np.testing.assert_allclose(report.x, svt_solution(h, 0.8), atol=2e-3)
    assert report.max_rate_excess <= 1e-9


def test_penalized_scaled_rows():
    # non-identity diagonal weights exercise the general reduction path
    rng = _rng(21)
    h = rng.standard_normal((4, 3))
    ld = rng.random(4) + 0.5
    prob = ReducedProblem(
        lambda_diag=ld, h=h, q_basis=np.eye(4), norm_b_sq=float(np.sum(h * h))
    )
    spec = PenalizedSpec(problem=prob, lam=0.6)
    report = solve_penalized(spec, SolverConfig(epsilon=1e-7, max_iters=400_000))
    assert report.converged
    direct = 0.5 * float(np.sum((ld[:, None] * report.x - h) ** 2)) + 0.6 * trace_norm(
        report.x
    )
    assert direct == pytest.approx(report.primal_obj, abs=1e-9)
    # certified bracket contains the true optimum
    assert report.dual_obj - 1e-9 <= direct <= report.dual_obj + report.gap + 1e-9


def test_constrained_matches_projection():
    h = _rng(22).standard_normal((5, 3))
    budget = 0.5 * trace_norm(h)
    spec = ConstrainedSpec(problem=_identity_problem(h), budget=budget)
    report = solve_constrained(
        spec, SolverConfig(epsilon=1e-5, max_iters=2_000_000, gap_check_interval=10)
    )
    assert report.converged
    assert trace_norm(report.x) <= budget + 1e-8 * (1.0 + budget)
    ref = ball_projection_objective(h, budget)
    attained = 0.5 * float(np.sum((report.x - h) ** 2))
    assert attained == pytest.approx(ref, rel=1e-4)
    assert report.max_rate_excess <= 1e-9


def test_constrained_inactive_budget_reduces_to_least_squares():
    h = _rng(23).standard_normal((4, 2))
    budget = 2.0 * trace_norm(h)  # optimum X = H is strictly inside
    spec = ConstrainedSpec(problem=_identity_problem(h), budget=budget)
    report = solve_constrained(
        spec, SolverConfig(epsilon=1e-6, max_iters=2_000_000, gap_check_interval=10)
    )
    assert report.converged
    assert 0.5 * float(np.sum((report.x - h) ** 2)) <= 1e-5


def test_zero_target_short_circuits():
    prob = _identity_problem(np.zeros((3, 2)))
    report = solve_penalized(PenalizedSpec(problem=prob, lam=1.0))
    assert report.converged and report.iterations == 0
    np.testing.assert_array_equal(report.x, np.zeros((3, 2)))
    assert report.gap == 0.0


def test_max_iters_exhaustion_reports_honestly():
    h = _rng(24).standard_normal((5, 3))
    spec = PenalizedSpec(problem=_identity_problem(h), lam=1.0)
    report = solve_penalized(spec, SolverConfig(epsilon=1e-12, max_iters=50))
    assert not report.converged
    assert report.iterations == 50
    assert report.gap > 1e-12
    # certificates are still a valid bracket
    assert report.dual_obj <= report.primal_obj
    ref = svt_objective(h, 1.0)
    assert report.dual_obj <= ref + 1e-9


def test_trajectory_and_interval():
    h = _rng(25).standard_normal((4, 3))
    spec = PenalizedSpec(problem=_identity_problem(h), lam=1.0)
    config = SolverConfig(
        epsilon=1e-5, max_iters=100_000, gap_check_interval=7, record_trajectory=True
    )
    report = solve_penalized(spec, config)
    assert report.converged
    ks = [k for k, _, _, _ in report.trajectory]
    assert all(k % 7 == 0 for k in ks[:-1])
    assert ks == sorted(ks)
    assert report.iterations == ks[-1]
    for k, f, g, gap in report.trajectory:
        assert gap == pytest.approx(f - g, abs=1e-12)
    # the certified rate holds at every checked iterate
    d = derive(spec, config.epsilon)
    coef = 4.0 * d.lipschitz * d.diameter / d.sigma_u
    for k, _, _, gap in report.trajectory:
        assert gap <= coef / (k * (k + 1.0)) + 1e-9


def test_validate_iterates_mode_runs_clean():
    h = _rng(26).standard_normal((3, 2))
    spec = PenalizedSpec(problem=_identity_problem(h), lam=0.7)
    report = solve_penalized(
        spec, SolverConfig(epsilon=1e-4, max_iters=20_000, validate_iterates=True)
    )
    assert report.converged
    budget = 0.6 * trace_norm(h)
    spec2 = ConstrainedSpec(problem=_identity_problem(h), budget=budget)
    report2 = solve_constrained(
        spec2,
        SolverConfig(
            epsilon=1e-3,
            max_iters=200_000,
            gap_check_interval=5,
            validate_iterates=True,
        ),
    )
    assert report2.converged


def test_iteration_bound_worked_example():
    # lam * ||Lambda^{-1}|| = 1, m = 10, n = 30, eps = 1e-2:
    # ceil(2*sqrt(2)*sqrt(10*log 3)/0.1) = 94
    h = _rng(27).standard_normal((20, 10))
    spec = PenalizedSpec(problem=_identity_problem(h), lam=1.0)
    assert iteration_bound(spec, 1e-2) == 94
    manual = math.ceil(2.0 * math.sqrt(2.0) * math.sqrt(10.0 * math.log(3.0)) / 0.1)
    assert manual == 94
    d = derive(spec, 1e-2)
    assert d.iteration_bound == 94
    assert d.lipschitz == pytest.approx(2.0 * 100.0)
    assert d.sigma_u == 10.0
    assert d.diameter == pytest.approx(math.log(3.0))


def test_iteration_bound_constrained_formula():
    h = _rng(28).standard_normal((6, 3))
    budget = 0.5 * trace_norm(h)
    spec = ConstrainedSpec(problem=_identity_problem(h), budget=budget)
    eps = 1e-3
    manual = math.ceil(
        2.0
        * math.sqrt(2.0)
        * spec.gamma
        * math.sqrt(3.0)
        * math.sqrt(1.0 + math.log(3.0))
        / math.sqrt(eps)
    )
    assert iteration_bound(spec, eps) == manual
    d = derive(spec, eps)
    assert d.diameter == pytest.approx(1.0 + math.log(3.0))
    assert d.lipschitz == pytest.approx(2.0 * (spec.gamma * 3.0) ** 2)


def test_determinism_of_payload():
    h = _rng(29).standard_normal((4, 3))
    spec = PenalizedSpec(problem=_identity_problem(h), lam=1.0)
    config = SolverConfig(epsilon=1e-6, max_iters=200_000)
    a = solve_penalized(spec, config)
    b = solve_penalized(spec, config)
    assert json.dumps(a.payload(), sort_keys=True) == json.dumps(
        b.payload(), sort_keys=True
    )
    # wall time is excluded from the deterministic payload by design
    assert "wall_time_seconds" in a.to_json_dict()
    assert "wall_time_seconds" not in a.payload()
