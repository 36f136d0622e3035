import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from monosplit.exceptions import ContractViolation, InvalidParameter
from monosplit.operators import (AffineMonotoneOp, BallNormalCone, BlockDiagonalOp,
                                 BoxNormalCone, ComponentwiseSmooth, CountingMap,
                                 InverseOp, L1Subdifferential, MatrixMap, ScaledIdentity,
                                 ShiftedScaledOp, ZeroMap, ZeroSetOp, apply, certify,
                                 inverse_resolvent_eval, probe_firm_nonexpansive,
                                 probe_inverse_identity, resolvent_eval, set_op_from_dict,
                                 single_op_from_dict, spectral_norm)

ROT = [[0.0, 1.0], [-1.0, 0.0]]


def _set_families():
    rng = np.random.default_rng(5)
    m = rng.standard_normal((3, 3))
    return {
        "zero": ZeroSetOp(3),
        "affine": AffineMonotoneOp(m @ m.T + (m - m.T), rng.standard_normal(3)),
        "box": BoxNormalCone([-1, 0, -2], [1, 0.5, 2]),
        "ball": BallNormalCone([0.5, -0.5, 0], 1.3),
        "l1": L1Subdifferential(0.7, 3),
        "shifted": ShiftedScaledOp(BoxNormalCone(-np.ones(3), np.ones(3)), 2.0, [1, 0, -1]),
        "inverse": InverseOp(L1Subdifferential(0.4, 3)),
        "block": BlockDiagonalOp([L1Subdifferential(1.0, 1), BoxNormalCone([0, 0], [1, 1])], [1, 2]),
    }


SET_FAMILIES = _set_families()
INVERTIBLE = [k for k, op in SET_FAMILIES.items() if op.supports_inverse]


# -- examples ---------------------------------------------------------------

def test_apply_examples():
    assert np.array_equal(apply(ZeroMap(), [3, -1]), [0, 0])
    assert np.array_equal(apply(ScaledIdentity(1.0), [2]), [2])
    assert np.allclose(apply(MatrixMap(ROT, kind="skew"), [1, 0]), [0, -1])


def test_resolvent_examples():
    assert np.array_equal(resolvent_eval(ZeroSetOp(), 3.0, [5, 5]), [5, 5])
    assert np.array_equal(resolvent_eval(BoxNormalCone([0, 0], [1, 1]), 0.7, [2, -3]), [1, 0])
    assert np.allclose(resolvent_eval(AffineMonotoneOp(ROT), 1.0, [1, 0]), [0.5, 0.5], atol=1e-15)


def test_inverse_resolvent_identity_operator():
    assert np.allclose(inverse_resolvent_eval(AffineMonotoneOp([[1.0]]), 1.0, [2]), [1])


def test_inverse_resolvent_of_zero_rejected():
    with pytest.raises(InvalidParameter):
        inverse_resolvent_eval(ZeroSetOp(), 1.0, [1.0])


def test_inverse_resolvent_scaled_affine_against_root_finder():
    # A(y) = 2y, lam = 0.5: solve x - p = 0.5 * A^{-1}(p) = 0.25 p directly
    x = 3.0
    oracle = brentq(lambda p: x - p - 0.25 * p, -10, 10, xtol=1e-15)
    got = inverse_resolvent_eval(AffineMonotoneOp([[2.0]]), 0.5, [x])[0]
    assert got == pytest.approx(oracle, abs=1e-12)
    assert got == pytest.approx(2.4, abs=1e-12)


def test_certify_examples():
    rep = certify(MatrixMap(ROT, kind="skew", lipschitz=1.0), n_samples=1000, seed=0)
    assert rep.checks["monotone"].passed and rep.checks["lipschitz"].passed
    assert abs(rep.checks["monotone"].worst_margin) < 1e-12
    assert certify(ScaledIdentity(1.0, 2), 1000).checks["cocoercive"].passed
    bad = certify(MatrixMap(2.0 * np.eye(2), cocoercivity=1.0), 1000)
    assert not bad.checks["cocoercive"].passed
    assert not bad.passed


# -- validation -------------------------------------------------------------

def test_affine_rejects_non_monotone():
    with pytest.raises(InvalidParameter):
        AffineMonotoneOp([[-1.0, 0.0], [0.0, 1.0]])


def test_box_rejects_inverted_bounds():
    with pytest.raises(InvalidParameter):
        BoxNormalCone([1.0], [0.0])


def test_ball_rejects_nonpositive_radius():
    with pytest.raises(InvalidParameter):
        BallNormalCone([0.0], 0.0)


@pytest.mark.parametrize("bad", [[np.nan, 1.0], [np.inf], []])
def test_points_must_be_finite(bad):
    with pytest.raises(ContractViolation):
        resolvent_eval(ZeroSetOp(), 1.0, bad)


def test_resolvent_rejects_nonpositive_lambda():
    with pytest.raises(InvalidParameter):
        resolvent_eval(ZeroSetOp(), 0.0, [1.0])


def test_dim_mismatch_rejected():
    with pytest.raises(ContractViolation):
        resolvent_eval(BoxNormalCone([0, 0], [1, 1]), 1.0, [1, 2, 3])


def test_spectral_norm_matches_singular_values():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((5, 4))
    assert spectral_norm(m) == pytest.approx(np.linalg.svd(m, compute_uv=False)[0], rel=1e-12)
    assert spectral_norm(np.zeros((2, 2))) == 0.0


# -- properties across families ---------------------------------------------

@pytest.mark.parametrize("name", sorted(SET_FAMILIES))
@pytest.mark.parametrize("lam", [0.1, 1.0, 7.5])
def test_firm_nonexpansive(name, lam):
    worst = probe_firm_nonexpansive(SET_FAMILIES[name], lam, n_samples=500, seed=1, scale=3.0)
    assert worst >= -1e-9


@pytest.mark.parametrize("name", INVERTIBLE)
@pytest.mark.parametrize("lam", [0.3, 1.0, 4.0])
def test_inverse_identity(name, lam):
    assert probe_inverse_identity(SET_FAMILIES[name], lam, n_samples=200, seed=2, scale=3.0) <= 1e-10


def test_affine_resolvent_inclusion_exact():
    op = SET_FAMILIES["affine"]
    rng = np.random.default_rng(3)
    for lam in (0.2, 1.0, 3.0):
        for _ in range(50):
            x = rng.standard_normal(3) * 3
            j = resolvent_eval(op, lam, x)
            assert np.allclose((x - j) / lam, op.evaluate(j), atol=1e-10)


@pytest.mark.parametrize("name", ["box", "ball"])
def test_projection_resolvent_normal_cone(name):
    op = SET_FAMILIES[name]
    rng = np.random.default_rng(4)
    feasible = [resolvent_eval(op, 1.0, rng.standard_normal(3) * 5) for _ in range(50)]
    for _ in range(100):
        x = rng.standard_normal(3) * 4
        j = resolvent_eval(op, 0.5, x)
        worst = max(np.dot(x - j, z - j) for z in feasible)
        assert worst <= 1e-9


def test_l1_resolvent_inclusion():
    w, lam = 0.7, 0.4
    op = L1Subdifferential(w, 5)
    rng = np.random.default_rng(6)
    for _ in range(200):
        x = rng.standard_normal(5)
        j = resolvent_eval(op, lam, x)
        g = (x - j) / lam
        nz = j != 0
        assert np.allclose(g[nz], w * np.sign(j[nz]), atol=1e-12)
        assert np.all(np.abs(g[~nz]) <= w + 1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=6),
       st.floats(0.01, 20), st.floats(0.01, 5))
def test_l1_resolvent_is_soft_threshold(x, lam, w):
    x = np.asarray(x)
    expected = np.sign(x) * np.maximum(np.abs(x) - lam * w, 0.0)
    assert np.allclose(resolvent_eval(L1Subdifferential(w), lam, x), expected, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.floats(0.05, 10), st.integers(0, 2**31 - 1))
def test_affine_resolvent_matches_linear_solve(n, lam, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n))
    m = m @ m.T + (m - m.T)
    b = rng.standard_normal(n)
    x = rng.standard_normal(n)
    expected = np.linalg.solve(np.eye(n) + lam * m, x - lam * b)
    assert np.allclose(resolvent_eval(AffineMonotoneOp(m, b), lam, x), expected, atol=1e-10)


@pytest.mark.parametrize("op", [
    ComponentwiseSmooth("tanh", 2.0, dim=3),
    ComponentwiseSmooth("arctan", 0.5, dim=3),
    ComponentwiseSmooth("sigmoid", 1.5, dim=3),
    MatrixMap([[2.0, 1.0], [1.0, 2.0]], kind="quad_grad", cocoercivity=1 / 3),
    ScaledIdentity(0.25, 4),
], ids=lambda op: op.kind)
def test_certify_passes_with_correct_constants(op):
    assert certify(op, n_samples=1000, seed=11).passed


def test_cocoercive_implies_lipschitz():
    op = ScaledIdentity(0.5, 2)
    assert op.cocoercivity == pytest.approx(2.0)
    assert op.lipschitz == pytest.approx(0.5)


def test_resolvent_cache_thread_safe():
    rng = np.random.default_rng(7)
    m = rng.standard_normal((6, 6))
    op = AffineMonotoneOp(m @ m.T, rng.standard_normal(6))
    xs = rng.standard_normal((40, 6))
    lams = [0.1 * (1 + i % 4) for i in range(40)]
    expected = [np.linalg.solve(np.eye(6) + l * op.m, x - l * op.b) for x, l in zip(xs, lams)]
    out = [None] * 40

    def work(i):
        out[i] = op.resolvent(xs[i], lams[i])

    threads = [threading.Thread(target=work, args=(i,)) for i in range(40)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for got, want in zip(out, expected):
        assert np.allclose(got, want, atol=1e-10)


def test_counting_wrapper():
    op = CountingMap(ScaledIdentity(2.0, 2))
    op.apply([1.0, 2.0])
    op([0.0, 1.0])
    assert op.calls == 2


def test_resolvent_does_not_mutate_input():
    x = np.array([3.0, -4.0])
    before = x.copy()
    resolvent_eval(BoxNormalCone([0, 0], [1, 1]), 1.0, x)
    resolvent_eval(L1Subdifferential(1.0), 1.0, x)
    assert np.array_equal(x, before)


@pytest.mark.parametrize("name", sorted(SET_FAMILIES))
def test_set_op_json_roundtrip(name):
    op = SET_FAMILIES[name]
    clone = set_op_from_dict(op.to_dict(), dim=3)
    x = np.random.default_rng(8).standard_normal(3) * 2
    assert np.allclose(clone.resolvent(x, 0.6), op.resolvent(x, 0.6), atol=1e-14)


@pytest.mark.parametrize("d", [
    {"type": "zero", "dim": 2},
    {"type": "skew", "m": ROT},
    {"type": "quad_grad", "q": [[2, 0], [0, 1]], "b": [1, 1]},
    {"type": "scaled_identity", "factor": 0.5, "dim": 2},
    {"type": "smooth", "fn": "tanh", "scale": 2.0, "dim": 2},
], ids=lambda d: d["type"])
def test_single_op_json_roundtrip(d):
    op = single_op_from_dict(d)
    clone = single_op_from_dict(op.to_dict())
    x = np.array([0.3, -1.2])
    assert np.allclose(op.apply(x), clone.apply(x))
    assert clone.lipschitz == pytest.approx(op.lipschitz)


def test_unknown_family_rejected():
    with pytest.raises(InvalidParameter):
        set_op_from_dict({"type": "mystery"})
