import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monosplit.algorithms import (CSV_COLUMNS, METHODS, STEPS, IterationTrace, SolverState,
                                  StoppingRule, csetnek2_step, csetnek3_step,
                                  diagnostics_update, fbfs_step, fbhfs_step, fbs_step,
                                  init_state, lyapunov_value, orfbs_step, sfrbs_step,
                                  solve, srfbs_step)
from monosplit.catalog import (ProblemInstance, make_quadratic_gradient, make_scaled_identity,
                               make_skew, synthesize_instance)
from monosplit.exceptions import ContractViolation, DivergenceError, InvalidParameter
from monosplit.operators import (AffineMonotoneOp, CountingMap, CountingSetOp, ZeroMap,
                                 ZeroSetOp)
from monosplit.stepsize import plan_step_size

ROT = [[0.0, 1.0], [-1.0, 0.0]]


def _state(x, x_prev, problem):
    x, x_prev = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(x_prev, float))
    return SolverState(x, x_prev, problem.B.apply(x_prev), 0)


def _run(problem, method, lam, n, x0=None):
    state = init_state(problem, x0)
    out = []
    for _ in range(n):
        state = STEPS[method](state, problem, lam)
        out.append(state.x_curr)
    return np.array(out)


# -- single-step examples ---------------------------------------------------

def test_step_zero_problem_is_identity():
    p = ProblemInstance(ZeroSetOp(1), ZeroMap(1), ZeroMap(1), 1)
    assert orfbs_step(_state([7.0], [7.0], p), p, 0.3).x_curr == pytest.approx([7.0])


def test_step_pure_gradient():
    p = ProblemInstance(ZeroSetOp(1), ZeroMap(1), make_scaled_identity(1.0, 1), 1)
    assert orfbs_step(_state([1.0], [1.0], p), p, 0.1).x_curr == pytest.approx([0.9], abs=1e-15)


def test_step_skew_with_equal_iterates():
    # B(1, 0) = (0, -1), so x - 0.5 B x = (1, 0.5) and the reflection term vanishes
    p = ProblemInstance(ZeroSetOp(2), make_skew(ROT), ZeroMap(2), 2)
    out = orfbs_step(_state([1, 0], [1, 0], p), p, 0.5).x_curr
    assert np.allclose(out, [1.0, 0.5], atol=1e-15)


def test_fbhfs_without_b_equals_fbs():
    p = synthesize_instance(3, 5, "l1-lasso-like")
    s = _state(np.linspace(-1, 1, 5), np.zeros(5), p)
    assert np.array_equal(fbhfs_step(s, p, 0.4).x_curr, fbs_step(s, p, 0.4).x_curr)


def test_sfrbs_equals_srfbs_for_linear_b():
    p = synthesize_instance(4, 6, "affine-interior")
    rng = np.random.default_rng(0)
    s = _state(rng.standard_normal(6), rng.standard_normal(6), p)
    assert np.allclose(sfrbs_step(s, p, 0.3).x_curr, srfbs_step(s, p, 0.3).x_curr,
                       atol=1e-12, rtol=0)


def test_csetnek3_without_c_equals_orfbs():
    p = ProblemInstance(ZeroSetOp(2), make_skew(ROT), ZeroMap(2), 2)
    s = _state([1, 0], [0.5, -0.2], p)
    assert np.array_equal(csetnek3_step(s, p, 0.5).x_curr, orfbs_step(s, p, 0.5).x_curr)
    assert np.array_equal(csetnek2_step(s, p, 0.5).x_curr, orfbs_step(s, p, 0.5).x_curr)


def test_step_rejects_bad_lambda_and_dims():
    p = synthesize_instance(0, 3, "affine-interior")
    s = init_state(p)
    with pytest.raises(InvalidParameter):
        orfbs_step(s, p, 0.0)
    q = synthesize_instance(0, 4, "affine-interior")
    with pytest.raises(ContractViolation):
        orfbs_step(s, q, 0.1)


def test_b_prev_cache_coherent():
    p = synthesize_instance(2, 4, "smooth-interior")
    for method in ("orfbs", "fbhfs", "sfrbs", "srfbs", "csetnek3"):
        state = init_state(p, np.ones(4))
        for _ in range(5):
            state = STEPS[method](state, p, 0.1)
            assert np.allclose(state.b_prev, p.B.apply(state.x_prev), atol=1e-15)


# -- evaluation budget --------------------------------------------------------

def _counted(problem):
    A, B, C = CountingSetOp(problem.A), CountingMap(problem.B), CountingMap(problem.C)
    return ProblemInstance(A, B, C, problem.dim), A, B, C


@pytest.mark.parametrize("method,expected", [
    ("orfbs", (1, 1, 1)),
    ("fbhfs", (1, 2, 1)),
    ("sfrbs", (1, 1, 1)),
    ("csetnek3", (1, 1, 1)),
])
def test_evaluation_budget_three_operator(method, expected):
    p, A, B, C = _counted(synthesize_instance(1, 4, "affine-interior"))
    state = init_state(p, np.ones(4))
    state = STEPS[method](state, p, 0.05)  # csetnek3 fills its C cache on the first step
    A.calls = B.calls = C.calls = 0
    for _ in range(10):
        state = STEPS[method](state, p, 0.05)
    assert (A.calls, B.calls, C.calls) == tuple(10 * e for e in expected)


def test_evaluation_budget_fbfs():
    p, A, B, C = _counted(synthesize_instance(1, 4, "no-cocoercive"))
    state = init_state(p, np.ones(4))
    A.calls = B.calls = 0
    for _ in range(10):
        state = fbfs_step(state, p, 0.1)
    assert (A.calls, B.calls) == (10, 20)


# -- reductions (exact) -------------------------------------------------------

@pytest.mark.parametrize("seed", range(3))
def test_orfbs_reduces_to_fbs_without_b(seed):
    p = synthesize_instance(seed, 6, "l1-lasso-like")
    lam = plan_step_size(p.L, p.beta).lam
    a = _run(p, "orfbs", lam, 300, np.ones(6))
    b = _run(p, "fbs", lam, 300, np.ones(6))
    assert np.max(np.abs(a - b)) <= 1e-14


@pytest.mark.parametrize("seed", range(3))
def test_orfbs_reduces_to_two_operator_scheme_without_c(seed):
    p = synthesize_instance(seed, 6, "no-cocoercive")
    lam = plan_step_size(p.L, p.beta).lam
    assert np.array_equal(_run(p, "orfbs", lam, 300), _run(p, "csetnek2", lam, 300))


# -- solve ------------------------------------------------------------------

def test_solve_example_converges():
    p = synthesize_instance(1, 2, "affine-interior")
    x, trace = solve(p, "orfbs", "auto", StoppingRule(1e-6, 100_000, "dist-to-ref"))
    assert trace.converged
    assert np.linalg.norm(x - p.known_solution) <= 1e-6


@pytest.mark.parametrize("method", METHODS)
def test_zero_problem_stops_at_first_step(method):
    p = ProblemInstance(ZeroSetOp(3), ZeroMap(3), ZeroMap(3), 3)
    x, trace = solve(p, method, "auto", x0=[1.0, 2.0, 3.0])
    assert trace.converged and trace.last.k == 1 and trace.last.step_norm == 0.0
    assert np.array_equal(x, [1.0, 2.0, 3.0])


def test_oversized_step_is_reported_not_crashed():
    p = synthesize_instance(0, 4, "no-cocoercive")
    lam = 100 * plan_step_size(p.L, p.beta).lam
    try:
        _, trace = solve(p, "orfbs", lam, StoppingRule(1e-10, 2000))
        assert not trace.converged
    except DivergenceError as err:
        assert err.trace is not None and err.trace.diverged
        assert err.iteration >= 1


def test_incompatible_method_rejected():
    p = synthesize_instance(0, 3, "affine-interior")
    with pytest.raises(ContractViolation):
        solve(p, "fbs")
    with pytest.raises(ContractViolation):
        solve(p, "fbfs")
    with pytest.raises(InvalidParameter):
        solve(p, "bogus")


def test_dist_stop_needs_reference():
    p = ProblemInstance(ZeroSetOp(2), ZeroMap(2), make_scaled_identity(1.0, 2), 2)
    with pytest.raises(ContractViolation):
        solve(p, stop=StoppingRule(1e-6, 10, "dist-to-ref"))


def test_stopping_rule_validation():
    with pytest.raises(InvalidParameter):
        StoppingRule(0.0)
    with pytest.raises(InvalidParameter):
        StoppingRule(1e-6, 0)
    with pytest.raises(InvalidParameter):
        StoppingRule(1e-6, 10, "bogus")


@pytest.mark.parametrize("method", ["orfbs", "fbhfs", "sfrbs", "srfbs", "csetnek3"])
@pytest.mark.parametrize("kind", ["affine-interior", "box-active", "l1-skew", "smooth-interior"])
def test_methods_converge_on_planted(method, kind):
    p = synthesize_instance(11, 8, kind)
    x, trace = solve(p, method, "auto", StoppingRule(1e-7, 50_000, "dist-to-ref"))
    assert trace.converged, (method, kind, trace.last)


# -- Lyapunov and diagnostics ------------------------------------------------

def test_lyapunov_examples():
    p = ProblemInstance(ZeroSetOp(1), ZeroMap(1), ZeroMap(1), 1)
    s = _state([1.0], [0.0], p)
    assert lyapunov_value(s, np.zeros(1), np.zeros(1), 0.3) == pytest.approx(1.5)
    ref = np.array([2.0])
    assert lyapunov_value(_state(ref, ref, p), ref, np.zeros(1), 0.3) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 2.0))
def test_lyapunov_nonnegative(seed, lam):
    rng = np.random.default_rng(seed)
    p = synthesize_instance(seed, 3, "affine-interior")
    s = _state(rng.standard_normal(3), rng.standard_normal(3), p)
    ref = p.known_solution
    assert lyapunov_value(s, ref, p.B.apply(ref), lam) >= 0.0


@pytest.mark.parametrize("kind", ["affine-interior", "box-active", "l1-skew",
                                  "smooth-interior", "no-cocoercive", "l1-lasso-like"])
def test_lyapunov_descent_and_summability(kind):
    p = synthesize_instance(5, 10, kind)
    _, trace = solve(p, "orfbs", "auto", StoppingRule(1e-9, 100_000, "dist-to-ref"))
    assert trace.converged
    v = trace.column("lyapunov")
    assert np.all(np.diff(v) <= 1e-10)
    cum = trace.column("cum_c_err")
    assert np.all(np.diff(cum) >= 0)
    assert np.diff(cum)[-1] <= 1e-12
    assert trace.last.step_norm <= 1e-8


def test_diagnostics_at_solution():
    p = synthesize_instance(0, 4, "box-active")
    ref = p.known_solution
    trace = IterationTrace()
    diagnostics_update(trace, _state(ref, ref, p), p, 0.2, ref)
    rec = trace.last
    assert rec.residual <= 1e-12 and rec.dist_to_ref == 0.0 and rec.lyapunov == 0.0
    assert rec.cum_c_err == 0.0


def test_residual_stop_contract():
    p = synthesize_instance(2, 6, "affine-interior")
    _, trace = solve(p, "orfbs", "auto", StoppingRule(1e-9, 100_000, "residual"))
    assert trace.converged and trace.last.residual <= 1e-9


def test_trace_without_reference_leaves_columns_empty():
    p = ProblemInstance(ZeroSetOp(2), ZeroMap(2), make_quadratic_gradient(np.eye(2), [1.0, -1.0]), 2)
    _, trace = solve(p, "orfbs", "auto", StoppingRule(1e-8, 10_000))
    text = trace.to_csv(wall_time=False)
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    first = lines[1].split(",")
    assert len(first) == len(CSV_COLUMNS)
    assert first[3] == first[4] == first[5] == first[6] == ""


def test_callback_sees_every_step():
    p = synthesize_instance(0, 3, "affine-interior")
    seen = []
    _, trace = solve(p, "orfbs", "auto", StoppingRule(1e-6, 1000),
                     callback=lambda state, rec: seen.append(rec.k))
    assert seen == list(range(1, trace.last.k + 1))


def test_warm_start_default():
    p = synthesize_instance(0, 3, "affine-interior")
    s = init_state(p, [1.0, 2.0, 3.0])
    assert np.array_equal(s.x_curr, s.x_prev)
    assert np.allclose(s.b_prev, p.B.apply(s.x_curr))


def test_affine_a_with_planner_constants():
    # A affine monotone, B skew, C quadratic gradient: the generic three-operator case
    rng = np.random.default_rng(9)
    m = rng.standard_normal((3, 3))
    A = AffineMonotoneOp(m @ m.T, rng.standard_normal(3))
    B = make_skew(np.triu(m, 1) - np.triu(m, 1).T)
    C = make_quadratic_gradient(np.eye(3) * 2)
    p = ProblemInstance(A, B, C, 3)
    x, trace = solve(p, "orfbs", "auto", StoppingRule(1e-12, 200_000))
    assert trace.converged
    total = A.m + B.m + C.m
    expected = np.linalg.solve(total, -A.b - (C.b if C.b is not None else 0))
    assert np.allclose(x, expected, atol=1e-9)
    assert math.isfinite(trace.lam)
