import numpy as np
import pytest
import scipy.io

from onebit.models import Direct, Linear, QuadraticLifted, Rank1Symmetric, Trace, LowRank, flatten_row, measure, random_truth
from onebit.polyhedron import OneBitPolyhedron, build, build_by_rows, membership, residual, scaled_condition_number
from onebit.quantizer import SignData, ThresholdScheme, UniformRange, generate_thresholds, quantize


def _polyhedron(model, truth, L, seed=0, width=3.0):
    y = measure(model, truth)
    s = np.sqrt(np.mean(y**2))
    scheme = ThresholdScheme(UniformRange(-width * s, width * s), L, seed)
    return build(model, quantize(y, generate_thresholds(scheme, model.m)))


def test_direct_rows_are_signed_units():
    sd = SignData(np.array([[1], [-1]]), np.array([[0.2], [0.5]]))
    p = build(Direct(2), sd)
    assert p.N == 2 and p.D == 2
    assert np.array_equal(p.C, [[1.0, 0.0], [0.0, -1.0]])
    assert np.allclose(p.b, [0.2, -0.5])


def test_linear_matches_loop_oracle():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((5, 3))
    x = rng.standard_normal(3)
    thr = rng.standard_normal((5, 4))
    sd = quantize(A @ x, thr)
    p = build(Linear(A), sd)
    assert (p.N, p.D) == (20, 3)
    C = np.zeros((20, 3))
    b = np.zeros(20)
    for l in range(4):
        for j in range(5):
            r = 1.0 if A[j] @ x >= thr[j, l] else -1.0
            for k in range(3):
                C[l * 5 + j, k] = r * A[j, k]
            b[l * 5 + j] = r * thr[j, l]
    assert np.array_equal(p.C, C)
    assert np.array_equal(p.b, b)


@pytest.mark.parametrize("model_fn,shape,structure", [
    (lambda r: QuadraticLifted(r.standard_normal((6, 3))), (3, 3), Rank1Symmetric()),
    (lambda r: Trace(r.standard_normal((5, 2, 3))), (2, 3), LowRank(1)),
])
def test_vectorised_build_matches_flatten_row(model_fn, shape, structure):
    rng = np.random.default_rng(1)
    model = model_fn(rng)
    truth = random_truth(shape, structure, rng)
    sd = quantize(measure(model, truth), rng.standard_normal((model.m, 3)))
    fast, slow = build(model, sd), build_by_rows(model, sd)
    assert np.allclose(fast.C, slow.C, rtol=0, atol=1e-15)
    assert np.array_equal(fast.b, slow.b)


def test_row_norm_cache():
    rng = np.random.default_rng(2)
    p = OneBitPolyhedron(rng.standard_normal((9, 4)), rng.standard_normal(9))
    for j in range(9):
        assert p.row_sq_norms[j] == pytest.approx(np.sum(p.C[j] ** 2), rel=1e-12)
    assert p.frobenius_sq == pytest.approx(p.row_sq_norms.sum(), rel=1e-12)


def test_zero_rows_dropped():
    model = Linear(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]))
    sd = quantize(np.zeros(3), np.ones((3, 2)))
    with pytest.warns(UserWarning, match="dropped 2 zero rows"):
        p = build(model, sd)
    assert p.N == 4 and p.dropped_rows == 2


def test_build_dimension_mismatch():
    with pytest.raises(ValueError):
        build(Direct(3), quantize(np.zeros(2), np.zeros((2, 1))))


def test_residual_examples():
    p = OneBitPolyhedron(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([0.0, 3.0]), equality=[False, True])
    assert residual(p, 0, [-1.0, 0.0]) == 1.0
    assert residual(p, 0, [2.0, 0.0]) == 0.0
    assert residual(p, 1, [0.0, 1.0]) == 2.0
    assert residual(p, 1, [0.0, 5.0]) == -2.0
    with pytest.raises(IndexError):
        residual(p, 2, [0.0, 0.0])


def test_membership_examples():
    rng = np.random.default_rng(3)
    model = Linear(rng.standard_normal((8, 3)))
    x = rng.standard_normal(3)
    p = _polyhedron(model, x, 6)
    ok, worst = membership(p, x, 1e-9)
    assert ok and worst == 0.0
    # push far along the normal of some row, against its half-space
    j = 0
    v = x - 100.0 * p.C[j] / np.linalg.norm(p.C[j])
    ok, worst = membership(p, v, 1e-9)
    assert not ok and worst > 0


def test_membership_matches_row_loop():
    rng = np.random.default_rng(4)
    for _ in range(20):
        N, D = rng.integers(2, 12), rng.integers(1, 5)
        eq = rng.random(N) < 0.3
        p = OneBitPolyhedron(rng.standard_normal((N, D)), rng.standard_normal(N), equality=eq)
        v = rng.standard_normal(D)
        tol = 0.5
        worst = 0.0
        ok = True
        for j in range(N):
            s = p.b[j] - sum(p.C[j, k] * v[k] for k in range(D))
            viol = abs(s) if eq[j] else max(s, 0.0)
            worst = max(worst, viol)
            ok = ok and viol <= tol
        got_ok, got_worst = membership(p, v, tol)
        assert got_ok == ok
        assert got_worst == pytest.approx(worst, abs=1e-12)


def test_condition_number_identity_and_diag():
    cn = scaled_condition_number(OneBitPolyhedron(np.eye(4), np.zeros(4)))
    assert cn.kappa == pytest.approx(2.0) and cn.q == pytest.approx(0.25)
    cn = scaled_condition_number(OneBitPolyhedron(np.diag([2.0, 1.0]), np.zeros(2)))
    assert cn.kappa == pytest.approx(np.sqrt(5)) and cn.q == pytest.approx(0.2)


def test_condition_number_matches_pinv_oracle():
    C = np.random.default_rng(5).standard_normal((50, 10))
    kappa = np.linalg.norm(C, "fro") * np.linalg.norm(np.linalg.pinv(C), 2)
    assert scaled_condition_number(OneBitPolyhedron(C, np.zeros(50))).kappa == pytest.approx(kappa, rel=1e-8)


def test_condition_number_rank_deficient():
    C = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    cn = scaled_condition_number(OneBitPolyhedron(C, np.zeros(3)))
    assert cn.kappa == np.inf and cn.q == 0.0
    with pytest.raises(ValueError):
        scaled_condition_number(OneBitPolyhedron(np.ones((1, 2)), np.zeros(1)))


def test_more_sequences_give_row_superset_and_nesting():
    rng = np.random.default_rng(6)
    model = Linear(rng.standard_normal((6, 3)))
    x = rng.standard_normal(3)
    small = _polyhedron(model, x, 4, seed=9)
    big = _polyhedron(model, x, 12, seed=9)
    assert np.array_equal(big.C[: small.N], small.C)
    assert np.array_equal(big.b[: small.N], small.b)
    for _ in range(200):
        v = x + 0.3 * rng.standard_normal(3)
        if membership(big, v, 0.0)[0]:
            assert membership(small, v, 0.0)[0]


def test_export_matrix_market(tmp_path):
    rng = np.random.default_rng(7)
    p = OneBitPolyhedron(rng.standard_normal((5, 3)), rng.standard_normal(5))
    path = tmp_path / "system.mtx"
    p.export_mm(str(path), comment="seed=7")
    back = scipy.io.mmread(str(path))
    assert np.array_equal(back[:, :3], p.C) and np.array_equal(back[:, 3], p.b)
