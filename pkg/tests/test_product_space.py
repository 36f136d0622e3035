import json
import math

import numpy as np
import pytest

from monosplit.algorithms import STEPS, StoppingRule, init_state
from monosplit.catalog import (make_l1_subdifferential, make_linear, make_scaled_identity,
                               make_skew)
from monosplit.exceptions import ContractViolation, InvalidParameter
from monosplit.operators import (AffineMonotoneOp, ZeroMap, ZeroSetOp, certify,
                                 probe_firm_nonexpansive)
from monosplit.product_space import (CompositeBlock, CompositeProblem, LiftedPoint, LiftedQ,
                                     LiftedR, aggregate_constants, check_residuals,
                                     lifted_apply_Q, lifted_apply_R, lifted_instance,
                                     lifted_operator_M, lifted_resolvent, pd_init_state,
                                     primal_dual_solve, primal_dual_step,
                                     synthesize_composite)
from monosplit.stepsize import plan_step_size


def _single_block(n, Li, B=None, C=None, Bi=None, Di_inv=None, Ci_inv=None, z=None, ri=None):
    Li = np.atleast_2d(np.asarray(Li, float))
    blk = CompositeBlock(Bi=Bi if Bi is not None else AffineMonotoneOp(np.eye(Li.shape[0])),
                         Li=Li, ri=ri, Di_inv=Di_inv, Ci_inv=Ci_inv)
    return CompositeProblem(A=ZeroSetOp(n), B=B if B is not None else ZeroMap(n),
                            C=C if C is not None else ZeroMap(n),
                            z=np.zeros(n) if z is None else np.asarray(z, float), blocks=[blk])


# -- aggregate constants -------------------------------------------------------

def test_aggregate_lipschitz_example():
    p = _single_block(1, [[3.0]], B=make_linear([[1.0]], lipschitz=1.0),
                      Di_inv=make_linear([[2.0]], lipschitz=2.0))
    assert aggregate_constants(p)[0] == pytest.approx(5.0)


def test_aggregate_cocoercivity_example():
    p = _single_block(1, [[1.0]], C=make_scaled_identity(1.0, 1),
                      Ci_inv=make_scaled_identity(2.0, 1))
    assert aggregate_constants(p)[1] == pytest.approx(0.5)


def test_aggregate_two_blocks_example():
    rot = make_skew([[0.0, 1.0], [-1.0, 0.0]])
    blocks = [CompositeBlock(Bi=AffineMonotoneOp(np.eye(2)), Li=np.eye(2), Di_inv=rot)
              for _ in range(2)]
    p = CompositeProblem(ZeroSetOp(2), ZeroMap(2), ZeroMap(2), np.zeros(2), blocks)
    L_bar, beta_bar = aggregate_constants(p)
    assert L_bar == pytest.approx(1 + math.sqrt(2), abs=1e-12)
    assert math.isinf(beta_bar)


# -- lifted operators -------------------------------------------------------------

def test_q_zero_at_origin():
    p = _single_block(2, np.eye(2))
    out = lifted_apply_Q(p, LiftedPoint(np.zeros(2), [np.zeros(2)]))
    assert not np.any(out.to_vector())


def test_q_skew_coupling():
    p = _single_block(2, np.eye(2))
    out = lifted_apply_Q(p, LiftedPoint(np.array([1.0, 0.0]), [np.array([0.0, 1.0])]))
    assert np.array_equal(out.x, [0.0, 1.0])
    assert np.array_equal(out.v[0], [-1.0, 0.0])


def test_r_examples():
    p = _single_block(1, [[1.0]])
    assert not np.any(lifted_apply_R(p, LiftedPoint(np.ones(1), [np.ones(1)])).to_vector())
    q = _single_block(1, [[1.0]], C=make_scaled_identity(1.0, 1), Ci_inv=make_scaled_identity(1.0, 1))
    out = lifted_apply_R(q, LiftedPoint(np.array([1.0]), [np.array([2.0])]))
    assert np.array_equal(out.to_vector(), [1.0, 2.0])


def test_resolvent_examples():
    p = _single_block(1, [[1.0]], z=[1.0], Bi=make_l1_subdifferential(1.0, 1))
    out = lifted_resolvent(p, 2.0, LiftedPoint(np.array([0.5]), [np.array([0.3])]))
    assert out.x == pytest.approx([2.5])
    q = _single_block(1, [[1.0]], Bi=make_l1_subdifferential(1.0, 1))
    assert lifted_resolvent(q, 0.7, LiftedPoint(np.array([4.0]), [np.array([0.0])])).x == pytest.approx([4.0])


@pytest.mark.parametrize("seed", range(5))
def test_lifted_probes(seed):
    p = synthesize_composite(seed, n=3, m=2, g=[2, 1])
    assert certify(LiftedQ(p), n_samples=1000, seed=seed).passed
    assert certify(LiftedR(p), n_samples=1000, seed=seed).passed
    for lam in (0.1, 1.0, 5.0):
        assert probe_firm_nonexpansive(lifted_operator_M(p), lam, n_samples=500, seed=seed,
                                       scale=3.0) >= -1e-9


# -- equivalence, convergence and residuals ---------------------------------------------

@pytest.mark.parametrize("seed,n,m", [(0, 2, 1), (1, 3, 2), (2, 4, 2), (3, 1, 1), (4, 4, 1)])
def test_blockwise_equals_lifted(seed, n, m):
    p = synthesize_composite(seed, n=n, m=m, g=2)
    lifted = lifted_instance(p)
    lam = plan_step_size(*aggregate_constants(p)).lam
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(lifted.dim)
    gs = init_state(lifted, x0)
    ps = pd_init_state(p, LiftedPoint.from_vector(p, x0))
    for _ in range(200):
        gs = STEPS["orfbs"](gs, lifted, lam)
        ps = primal_dual_step(ps, p, lam)
        assert np.max(np.abs(gs.x_curr - LiftedPoint(ps.x, ps.v).to_vector())) <= 1e-12


def test_degenerate_zero_block():
    # every operator vanishes except the coupling; any (x, 0) with L_1 x = 0 is a solution
    p = _single_block(2, [[1.0, 0.0]], Bi=make_l1_subdifferential(1.0, 1))
    for t in (0.0, 0.8, -3.0):
        init = LiftedPoint(np.array([0.0, t]), [np.zeros(1)])
        x, v, trace = primal_dual_solve(p, StoppingRule(1e-12, 10), init=init)
        assert trace.last.k == 1 and trace.converged
        assert np.array_equal(x, init.x) and np.array_equal(v[0], init.v[0])
        primal, dual = check_residuals(p, x, v)
        assert primal == 0.0 and dual[0] == 0.0


@pytest.mark.parametrize("seed", range(4))
def test_primal_dual_converges(seed):
    p = synthesize_composite(seed, n=2, m=1, g=2)
    tol = 1e-8
    x, v, trace = primal_dual_solve(p, StoppingRule(tol, 500_000, "dist-to-ref"))
    assert trace.converged
    primal, dual = check_residuals(p, x, v)
    assert primal <= 1e-6
    assert max([primal] + dual) <= 10 * tol


def test_residuals_at_planted_solution():
    for seed in range(5):
        p = synthesize_composite(seed, n=3, m=2, g=2)
        ks = p.known_solution
        for lam in (0.5, 1.0, 2.0):
            primal, dual = check_residuals(p, ks.x, ks.v, lam)
            assert primal <= 1e-10 and max(dual) <= 1e-10


def test_residuals_detect_non_solution():
    p = synthesize_composite(1, n=3, m=2, g=2)
    rng = np.random.default_rng(0)
    primal, dual = check_residuals(p, rng.standard_normal(3) * 3,
                                   [rng.standard_normal(2) * 3 for _ in range(2)])
    assert max([primal] + dual) > 0.01


def test_residuals_reject_wrong_block_count():
    p = synthesize_composite(1, n=3, m=2, g=2)
    with pytest.raises(ContractViolation):
        check_residuals(p, np.zeros(3), [np.zeros(2)])


def test_block_validation():
    with pytest.raises(InvalidParameter):
        CompositeBlock(Bi=make_l1_subdifferential(1.0, 2), Li=np.zeros((2, 2)))
    with pytest.raises(InvalidParameter):
        CompositeBlock(Bi=ZeroSetOp(2), Li=np.eye(2))


def test_composite_json_roundtrip():
    p = synthesize_composite(2, n=3, m=2, g=[2, 3])
    q = CompositeProblem.from_dict(json.loads(json.dumps(p.to_dict())))
    assert aggregate_constants(q) == pytest.approx(aggregate_constants(p))
    pt = LiftedPoint(np.ones(3), [np.ones(2), -np.ones(3)])
    assert np.allclose(lifted_apply_Q(q, pt).to_vector(), lifted_apply_Q(p, pt).to_vector())
    assert np.allclose(q.known_solution.to_vector(), p.known_solution.to_vector())
