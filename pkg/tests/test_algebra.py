import numpy as np
import pytest

from neveukit.algebra import (
    Operator,
    Projection,
    TracialAlgebra,
    abs_op,
    distribution,
    op_norm,
    order_leq,
    spectral_decompose,
    spectral_projection,
    support,
    trace,
    trace_norm,
)

M2 = TracialAlgebra.full_matrix(2)
C3 = TracialAlgebra.commutative([1 / 3, 1 / 3, 1 / 3])


def random_op(algebra, rng):
    return algebra.operator(
        [
            rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            for n in algebra.blocks
        ]
    )


# ---------------------------------------------------------------------------
# construction and the trace
# ---------------------------------------------------------------------------


def test_full_matrix_trace_is_normalized():
    assert M2.normalized
    assert trace(M2.identity()) == pytest.approx(1.0)


def test_commutative_trace_hand_value():
    # tau(diag(3, 1, 0.1)) with uniform weights 1/3: (3 + 1 + 0.1) / 3
    x = C3.diag([3.0, 1.0, 0.1])
    assert trace(x).real == pytest.approx(4.1 / 3, abs=1e-15)
    assert trace(x).imag == pytest.approx(0.0, abs=1e-15)


def test_trace_weighted_blocks():
    alg = TracialAlgebra([2, 1], [0.25, 0.5])  # 2*0.25 + 1*0.5 = 1
    assert alg.normalized
    x = alg.operator([np.diag([1.0, 2.0]), [[4.0]]])
    assert trace(x).real == pytest.approx(0.25 * 3 + 0.5 * 4)


def test_nonpositive_weight_rejected():
    with pytest.raises(ValueError):
        TracialAlgebra([2], [0.0])
    with pytest.raises(ValueError):
        TracialAlgebra([2], [-1.0])


def test_block_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        M2.operator([np.eye(3)])
    with pytest.raises(ValueError):
        Operator(M2, [np.eye(2), np.eye(2)])


def test_mixed_algebra_arithmetic_rejected():
    other = TracialAlgebra.full_matrix(2)
    weird = TracialAlgebra([2], [0.3])
    x, y = M2.identity(), weird.identity()
    with pytest.raises(ValueError):
        _ = x + y
    assert trace(M2.identity() + other.identity()).real == pytest.approx(2.0)


def test_trace_is_tracial():
    rng = np.random.default_rng(7)
    alg = TracialAlgebra([2, 3], [0.1, 0.2])
    for _ in range(25):
        x, y = random_op(alg, rng), random_op(alg, rng)
        assert trace(x @ y) == pytest.approx(trace(y @ x), abs=1e-12)


def test_vec_round_trip():
    rng = np.random.default_rng(11)
    alg = TracialAlgebra([2, 3, 1], [0.1, 0.1, 0.5])
    x = random_op(alg, rng)
    y = alg.from_vec(x.vec())
    assert all(
        np.allclose(a, b, atol=0) for a, b in zip(x.block_mats, y.block_mats)
    )
    assert alg.dim == 4 + 9 + 1


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def test_trace_norm_oracle_dense_svd():
    # Independent oracle: stack each block, take numpy SVD, weight and sum.
    rng = np.random.default_rng(3)
    alg = TracialAlgebra([2, 3], [0.2, 0.15])
    for _ in range(20):
        x = random_op(alg, rng)
        expected = sum(
            w * np.linalg.svd(m, compute_uv=False).sum()
            for w, m in zip(alg.weights, x.block_mats)
        )
        assert trace_norm(x) == pytest.approx(expected, rel=1e-12)


def test_trace_norm_hand_value():
    x = C3.diag([3.0, -1.0, 0.1])
    assert trace_norm(x) == pytest.approx(4.1 / 3, rel=1e-14)


def test_op_norm_diag():
    x = C3.diag([3.0, -1.0, 0.1])
    assert op_norm(x) == pytest.approx(3.0)


def test_norm_triangle_and_unitary_invariance():
    rng = np.random.default_rng(5)
    for _ in range(20):
        x, y = random_op(M2, rng), random_op(M2, rng)
        assert trace_norm(x + y) <= trace_norm(x) + trace_norm(y) + 1e-12
        # unitary invariance of ||.||_1 under u x u*
        g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        q, _ = np.linalg.qr(g)
        u = M2.operator([q])
        assert trace_norm(u @ x @ u.H) == pytest.approx(trace_norm(x), rel=1e-10)


def test_l1_op_duality_bound():
    # |tau(x y)| <= ||x||_1 ||y|| on random pairs
    rng = np.random.default_rng(13)
    alg = TracialAlgebra([2, 2], [0.2, 0.05])
    for _ in range(30):
        x, y = random_op(alg, rng), random_op(alg, rng)
        assert abs(trace(x @ y)) <= trace_norm(x) * op_norm(y) + 1e-12


# ---------------------------------------------------------------------------
# spectral calculus
# ---------------------------------------------------------------------------


def test_spectral_decompose_reassembles():
    rng = np.random.default_rng(17)
    alg = TracialAlgebra([3, 2], [0.2, 0.2])
    for _ in range(10):
        h = alg.random_hermitian(rng)
        pairs = spectral_decompose(h)
        acc = alg.zero()
        total = alg.zero()
        for lam, p in pairs:
            acc = acc + lam * p
            total = total + p
        assert op_norm(acc - h) <= 1e-10 * max(op_norm(h), 1.0)
        assert op_norm(total - alg.identity()) <= 1e-10


def test_spectral_decompose_degenerate_cluster():
    h = C3.diag([1.0, 1.0 + 1e-13, 5.0])
    pairs = spectral_decompose(h)
    assert len(pairs) == 2
    lam0, p0 = pairs[0]
    assert lam0 == pytest.approx(1.0, abs=1e-12)
    assert p0.rank == 2


def test_spectral_decompose_rejects_nonhermitian():
    x = M2.operator([[[0.0, 1.0], [0.0, 0.0]]])
    with pytest.raises(ValueError):
        spectral_decompose(x)


def test_spectral_projection_half_open():
    h = C3.diag([0.3, 0.6, 0.9])
    p = spectral_projection(h, (0.5, 1.0))
    assert np.allclose(p.dense().real, np.diag([0.0, 1.0, 1.0]))
    # boundary: eigenvalue exactly at the lower endpoint is included
    h2 = C3.diag([0.5, 0.2, 0.9])
    p2 = spectral_projection(h2, (0.5, 1.0))
    assert np.allclose(p2.dense().real, np.diag([1.0, 0.0, 1.0]))
    # and exactly at the upper endpoint is excluded
    p3 = spectral_projection(h2, (0.0, 0.5))
    assert np.allclose(p3.dense().real, np.diag([0.0, 1.0, 0.0]))


def test_spectral_projection_unbounded_side():
    h = C3.diag([-1.0, 0.0, 2.0])
    p = spectral_projection(h, (None, 0.0))
    assert np.allclose(p.dense().real, np.diag([1.0, 0.0, 0.0]))
    q = spectral_projection(h, (0.0, None))
    assert np.allclose(q.dense().real, np.diag([0.0, 1.0, 1.0]))
    z = spectral_projection(h, (5.0, None))
    assert z.rank == 0


def test_projection_admission():
    with pytest.raises(ValueError):
        Projection(M2, [np.array([[0.5, 0.0], [0.0, 1.0]])])
    p = Projection(M2, [np.diag([1.0, 0.0])])
    assert p.rank == 1
    assert p.complement().rank == 1


def test_support_diagonal():
    x = C3.diag([2.0, 0.0, 1e-14])
    s = support(x)
    assert np.allclose(s.dense().real, np.diag([1.0, 0.0, 0.0]))


def test_support_requires_positive():
    with pytest.raises(ValueError):
        support(C3.diag([1.0, -1.0, 0.0]))


def test_support_of_decaying_average_never_shrinks():
    # (1/a) sum_{k<a} (1-g)^k E11 keeps full support at every finite a;
    # oracle: the scalar (1 - (1-g)^a) / (a g) stays > 0.
    g = 0.5
    e11 = M2.basis_element(0, 1, 1)
    for a in [1, 2, 10, 50]:
        scale = (1 - (1 - g) ** a) / (a * g)
        assert scale > 0
        s = support(scale * e11)
        assert s.rank == 1
        assert op_norm(s - e11) <= 1e-12


def test_distribution_counting_oracle():
    # weighted eigenvalue counting against a direct numpy count
    rng = np.random.default_rng(23)
    alg = TracialAlgebra([3, 2], [0.15, 0.2])
    for _ in range(50):
        h = alg.random_hermitian(rng)
        eps = float(rng.uniform(0.1, 1.5))
        expected = sum(
            w * int(np.sum(np.abs(np.linalg.eigvalsh(m)) >= eps))
            for w, m in zip(alg.weights, h.block_mats)
        )
        assert distribution(h, eps) == pytest.approx(expected, abs=1e-12)


def test_distribution_hand_value():
    x = C3.diag([3.0, 1.0, 0.1])
    assert distribution(x, 0.5) == pytest.approx(2 / 3, abs=1e-12)
    assert distribution(x, 0.05) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        distribution(x, 0.0)


def test_abs_op_matches_singular_values():
    rng = np.random.default_rng(29)
    x = random_op(M2, rng)
    a = abs_op(x)
    assert a.is_positive()
    s = np.linalg.svd(x.block_mats[0], compute_uv=False)
    lam = np.sort(np.linalg.eigvalsh(a.block_mats[0]))
    assert np.allclose(np.sort(s), lam, atol=1e-12)


def test_order_leq():
    assert order_leq(C3.diag([0, 0, 0]), C3.diag([1, 2, 3]))
    assert order_leq(C3.diag([1, 1, 1]), C3.diag([1, 1, 1]))
    assert not order_leq(C3.diag([2, 0, 0]), C3.diag([1, 1, 1]))
    # slack absorbs tiny negative dips
    assert order_leq(C3.diag([1 + 1e-12, 0, 0]), C3.diag([1, 1, 1]))


def test_projection_lattice_basics():
    p = Projection(C3, [[[1.0]], [[0.0]], [[1.0]]])
    q = p.complement()
    assert trace(p).real == pytest.approx(2 / 3)
    assert trace(q).real == pytest.approx(1 / 3)
    assert op_norm(p @ q) <= 1e-15
