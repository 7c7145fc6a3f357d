import itertools

import numpy as np
import pytest

from neveukit.algebra import TracialAlgebra, op_norm, trace
from neveukit.dynamics import (
    FolnerScheme,
    SemigroupAction,
    average,
    average_super,
    continuous_average,
    continuous_average_super,
    folner_ratio,
    folner_set,
    orbit_average_vector,
)
from neveukit.maps import (
    PreconditionError,
    from_classical,
    from_conjugation,
    from_kraus,
    dual,
    pairing,
)

M2 = TracialAlgebra.full_matrix(2)


def amplitude_damping(algebra, g):
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - g)]])
    k1 = np.array([[0.0, np.sqrt(g)], [0.0, 0.0]])
    return from_kraus(algebra, [[k0], [k1]])


def zplus_action(*gens, d=None):
    algebra = gens[0].algebra
    scheme = FolnerScheme("zplus-box", d=d or len(gens))
    return SemigroupAction(algebra, "heisenberg", scheme, list(gens))


def random_herm(algebra, rng):
    return algebra.random_hermitian(rng)


# ---------------------------------------------------------------------------
# Foelner schemes
# ---------------------------------------------------------------------------


def test_folner_set_zplus_line():
    scheme = FolnerScheme("zplus-box", d=1)
    assert set(folner_set(scheme, 3)) == {(0,), (1,), (2,)}


def test_folner_set_zplus_square():
    scheme = FolnerScheme("zplus-box", d=2)
    box = folner_set(scheme, 2)
    assert set(box) == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_folner_set_symmetric_box():
    scheme = FolnerScheme("z-symmetric-box", d=1)
    assert set(folner_set(scheme, 2)) == {(-2,), (-1,), (0,), (1,), (2,)}


def test_folner_set_cube_descriptor():
    scheme = FolnerScheme("r-plus-cube", d=2)
    desc = folner_set(scheme, 1.5)
    assert desc == {"kind": "cube", "d": 2, "side": 1.5}


def test_folner_ratio_zplus_line():
    scheme = FolnerScheme("zplus-box", d=1)
    assert folner_ratio(scheme, 10, 0) == pytest.approx(0.2)


def test_folner_ratio_symmetric():
    scheme = FolnerScheme("z-symmetric-box", d=1)
    assert folner_ratio(scheme, 10, 0) == pytest.approx(2.0 / 21.0)


def test_folner_ratio_finite_group_is_zero():
    scheme = FolnerScheme("finite-group", order=2, table=((0, 1), (1, 0)))
    assert folner_ratio(scheme, 1, 1) == 0.0


def test_folner_ratio_cube_shift():
    scheme = FolnerScheme("r-plus-cube", d=1)
    assert folner_ratio(scheme, 4.0, (0, 1.0)) == pytest.approx(0.5)
    # shifts past the cube side saturate
    assert folner_ratio(scheme, 4.0, (0, 100.0)) == pytest.approx(2.0)


def test_folner_counting_matches_ratio():
    # |K_a \ (K_a + g)| + |(K_a + g) \ K_a| over |K_a|, brute force
    scheme = FolnerScheme("zplus-box", d=2)
    for a in (2, 3, 4):
        box = set(folner_set(scheme, a))
        shifted = {(k[0] + 1, k[1]) for k in box}
        sym_diff = len(box ^ shifted)
        assert folner_ratio(scheme, a, 0) == pytest.approx(sym_diff / len(box))


def test_scheme_rejects_unknown_kind():
    with pytest.raises(ValueError, match="unknown scheme kind"):
        FolnerScheme("free-group")


def test_group_table_must_be_latin_square():
    with pytest.raises(ValueError):
        FolnerScheme("finite-group", order=2, table=((0, 0), (1, 1)))


def test_group_table_identity_must_be_element_zero():
    with pytest.raises(ValueError, match="identity"):
        FolnerScheme("finite-group", order=2, table=((1, 0), (0, 1)))


# ---------------------------------------------------------------------------
# construction checks
# ---------------------------------------------------------------------------


def test_non_commuting_generators_recorded_not_raised():
    s = amplitude_damping(M2, 0.5)
    swap = from_conjugation(M2, [np.array([[0.0, 1.0], [1.0, 0.0]])])
    action = zplus_action(s, swap)
    assert action.checks["commuting"].verdict == "fail"
    with pytest.raises(PreconditionError, match="commute"):
        action.require_commuting()


def test_commuting_generators_pass():
    action = zplus_action(amplitude_damping(M2, 0.5), amplitude_damping(M2, 0.25))
    assert action.checks["commuting"].passed
    action.require_commuting()


def test_z_symmetric_requires_invertible_generators():
    # a merging kernel is singular as a linear map, so no inverse walk exists
    C2 = TracialAlgebra.commutative([0.5, 0.5])
    merge = from_classical(C2, np.array([[1.0, 0.0], [1.0, 0.0]]))
    scheme = FolnerScheme("z-symmetric-box", d=1)
    with pytest.raises(ValueError, match="invertible|residual"):
        SemigroupAction(C2, "heisenberg", scheme, [merge])


def test_finite_group_representation_check():
    swap = from_conjugation(M2, [np.array([[0.0, 1.0], [1.0, 0.0]])])
    scheme = FolnerScheme("finite-group", order=2, table=((0, 1), (1, 0)))
    from neveukit.maps import SuperOperator

    good = SemigroupAction(
        M2, "heisenberg", scheme, [SuperOperator.identity(M2), swap]
    )
    assert good.checks["representation"].passed

    # amplitude damping is not an involution, so the table is violated
    bad = SemigroupAction(
        M2, "heisenberg", scheme, [SuperOperator.identity(M2), amplitude_damping(M2, 0.5)]
    )
    assert bad.checks["representation"].verdict == "fail"
    with pytest.raises(PreconditionError):
        bad.require_commuting()


def test_contraction_check_runs_in_declared_picture():
    # schrodinger actions are probed through the dual, which is certified CP
    s = dual(amplitude_damping(M2, 0.5))
    scheme = FolnerScheme("zplus-box", d=1)
    action = SemigroupAction(M2, "schrodinger", scheme, [s])
    assert action.checks["contraction"].passed


def test_picture_validation():
    with pytest.raises(ValueError, match="picture"):
        SemigroupAction(M2, "interaction", FolnerScheme("zplus-box"), [])


# ---------------------------------------------------------------------------
# averages: oracles
# ---------------------------------------------------------------------------


def test_identity_action_average_is_identity():
    from neveukit.maps import SuperOperator

    action = zplus_action(SuperOperator.identity(M2))
    rng = np.random.default_rng(0)
    x = random_herm(M2, rng)
    assert op_norm(average(action, x, 17) - x) <= 1e-12


def test_amplitude_damping_average_geometric_oracle():
    # A_a(E11) has norm (1 - (1-g)^a) / (a g): partial geometric sums
    g = 0.5
    action = zplus_action(amplitude_damping(M2, g))
    e11 = M2.operator([np.diag([0.0, 1.0])])
    for a in (1, 2, 5, 10, 64):
        want = (1.0 - (1.0 - g) ** a) / (a * g)
        got = op_norm(average(action, e11, a))
        assert abs(got - want) <= 1e-10
    assert op_norm(average(action, e11, 10)) == pytest.approx(0.19980468750000002)


def test_average_matches_brute_force_box_sum_2d():
    # direct enumeration of the box, exact to eigensolver precision
    g1, g2 = amplitude_damping(M2, 0.5), amplitude_damping(M2, 0.25)
    action = zplus_action(g1, g2)
    rng = np.random.default_rng(42)
    x = random_herm(M2, rng)
    for a in (1, 2, 3, 4):
        box = folner_set(action.scheme, a)
        acc = M2.zero()
        for k1, k2 in box:
            y = x
            for _ in range(k1):
                y = g1(y)
            for _ in range(k2):
                y = g2(y)
            acc = acc + y
        brute = (1.0 / len(box)) * acc
        assert op_norm(average(action, x, a) - brute) <= 1e-12


def test_average_symmetric_box_walks_inverses():
    theta = 2.0 * np.pi / 5.0
    u = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    rot = from_conjugation(M2, [u])
    scheme = FolnerScheme("z-symmetric-box", d=1)
    action = SemigroupAction(M2, "heisenberg", scheme, [rot])
    rng = np.random.default_rng(9)
    x = random_herm(M2, rng)
    a = 2
    mats = [np.linalg.matrix_power(u, k) for k in range(-a, a + 1)]
    brute = (1.0 / 5.0) * sum(
        (M2.operator([m @ x.block_mats[0] @ m.conj().T]) for m in mats), M2.zero()
    )
    assert op_norm(average(action, x, a) - brute) <= 1e-12


def test_finite_group_average_is_group_mean():
    from neveukit.maps import SuperOperator

    swap = from_conjugation(M2, [np.array([[0.0, 1.0], [1.0, 0.0]])])
    scheme = FolnerScheme("finite-group", order=2, table=((0, 1), (1, 0)))
    action = SemigroupAction(M2, "heisenberg", scheme, [SuperOperator.identity(M2), swap])
    rng = np.random.default_rng(3)
    x = random_herm(M2, rng)
    brute = 0.5 * (x + swap(x))
    assert op_norm(average(action, x, 1) - brute) <= 1e-12
    # for finite groups every index averages the whole group
    assert op_norm(average(action, x, 7) - brute) <= 1e-12


def test_average_super_agrees_with_average():
    action = zplus_action(amplitude_damping(M2, 0.5), amplitude_damping(M2, 0.25))
    rng = np.random.default_rng(1)
    x = random_herm(M2, rng)
    for a in (1, 3, 8):
        s = average_super(action, a)
        assert op_norm(s(x) - average(action, x, a)) <= 1e-12


def test_average_index_validation():
    action = zplus_action(amplitude_damping(M2, 0.5))
    rng = np.random.default_rng(2)
    x = random_herm(M2, rng)
    with pytest.raises(ValueError):
        average(action, x, 0)


# ---------------------------------------------------------------------------
# averages: invariants
# ---------------------------------------------------------------------------


def test_averages_are_contractive():
    action = zplus_action(amplitude_damping(M2, 0.5), amplitude_damping(M2, 0.25))
    rng = np.random.default_rng(8)
    for _ in range(5):
        x = random_herm(M2, rng)
        for a in (1, 4, 16):
            assert op_norm(average(action, x, a)) <= (1.0 + 1e-9) * op_norm(x)


def test_averages_preserve_positivity():
    action = zplus_action(amplitude_damping(M2, 0.5))
    rng = np.random.default_rng(8)
    for _ in range(5):
        x = M2.random_positive(rng)
        for a in (1, 4, 16):
            assert average(action, x, a).is_positive()


def test_asymptotic_invariance_bound():
    # || A_a(Gamma x) - A_a(x) || <= ||x|| * folner_ratio + 1e-10
    action = zplus_action(amplitude_damping(M2, 0.5), amplitude_damping(M2, 0.25))
    rng = np.random.default_rng(13)
    for _ in range(3):
        x = random_herm(M2, rng)
        for a in (2, 8, 32):
            for i, gen in enumerate(action.generators):
                lhs = op_norm(average(action, gen(x), a) - average(action, x, a))
                bound = op_norm(x) * folner_ratio(action.scheme, a, i) + 1e-10
                assert lhs <= bound


def test_average_invariance_tightens_with_a():
    action = zplus_action(amplitude_damping(M2, 0.5))
    gen = action.generators[0]
    e11 = M2.operator([np.diag([0.0, 1.0])])
    devs = [
        op_norm(average(action, gen(e11), a) - average(action, e11, a))
        for a in (4, 8, 16, 32, 64)
    ]
    assert all(b <= a + 1e-12 for a, b in zip(devs, devs[1:]))


# ---------------------------------------------------------------------------
# continuous averages
# ---------------------------------------------------------------------------


def test_continuous_average_scalar_oracle():
    # d/dt x = -x gives A_a = (1 - exp(-a)) / a
    alg = TracialAlgebra.commutative([1.0])
    scheme = FolnerScheme("r-plus-cube", d=1)
    action = SemigroupAction(alg, "heisenberg", scheme, [np.array([[-1.0]])])
    x = alg.operator([[[1.0]]])
    got = continuous_average(action, x, 2.0)
    want = (1.0 - np.exp(-2.0)) / 2.0
    assert op_norm(got) == pytest.approx(want, abs=1e-12)
    assert want == pytest.approx(0.43233235838169365)


def test_continuous_average_identity_residual_recorded():
    alg = TracialAlgebra.commutative([1.0, 1.0])
    scheme = FolnerScheme("r-plus-cube", d=1)
    L = np.diag([0.0, -1.0]).astype(complex)
    action = SemigroupAction(alg, "heisenberg", scheme, [L])
    info = {}
    mat, details = continuous_average_super(action, 3.0, info=info)
    assert details[0]["identity_residual"] <= 1e-9


def test_continuous_average_simpson_fallback_matches_eig():
    # a defective generator forces quadrature; compare against a scalar case
    alg = TracialAlgebra.commutative([1.0, 1.0])
    scheme = FolnerScheme("r-plus-cube", d=1)
    # jordan block in the superoperator: defective, eig path unusable
    L = np.array([[-1.0, 1.0], [0.0, -1.0]])
    action = SemigroupAction(alg, "heisenberg", scheme, [L])
    a = 2.0
    mat, details = continuous_average_super(action, a)
    # oracle by dense quadrature of expm
    from scipy.linalg import expm

    n = 4096
    ts = np.linspace(0.0, a, n + 1)
    vals = np.stack([expm(t * L) for t in ts])
    weights = np.ones(n + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    oracle = (a / (3.0 * n)) * np.einsum("t,tij->ij", weights, vals) / a
    assert np.max(np.abs(mat - oracle)) <= 1e-8
    assert details[0]["method"].startswith("simpson")


def test_continuous_average_two_axes_multiplies():
    alg = TracialAlgebra.commutative([1.0])
    scheme = FolnerScheme("r-plus-cube", d=2)
    action = SemigroupAction(
        alg, "heisenberg", scheme, [np.array([[-1.0]]), np.array([[-2.0]])]
    )
    x = alg.operator([[[1.0]]])
    got = op_norm(continuous_average(action, x, 2.0))
    want = ((1.0 - np.exp(-2.0)) / 2.0) * ((1.0 - np.exp(-4.0)) / 4.0)
    assert got == pytest.approx(want, abs=1e-12)


# ---------------------------------------------------------------------------
# pictures and duality
# ---------------------------------------------------------------------------


def test_dual_roundtrip_and_pairing():
    action = zplus_action(amplitude_damping(M2, 0.5))
    d_action = action.dual()
    assert d_action.picture == "schrodinger"
    assert d_action.dual() is action
    rng = np.random.default_rng(21)
    x, y = random_herm(M2, rng), random_herm(M2, rng)
    a = 6
    lhs = pairing(average(d_action, x, a), y)
    rhs = pairing(x, average(action, y, a))
    assert abs(lhs - rhs) <= 1e-10


def test_dual_of_average_super_is_average_of_dual():
    action = zplus_action(amplitude_damping(M2, 0.5), amplitude_damping(M2, 0.25))
    for a in (1, 4, 9):
        lhs = dual(average_super(action, a)).matrix
        rhs = average_super(action.dual(), a).matrix
        assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_to_picture():
    action = zplus_action(amplitude_damping(M2, 0.5))
    assert action.to_picture("heisenberg") is action
    assert action.to_picture("schrodinger") is action.dual()


def test_finite_group_dual_uses_opposite_table():
    # S3 generated table: dual representation must still satisfy its table
    perm = lambda p: from_conjugation(
        TracialAlgebra.commutative([1 / 3, 1 / 3, 1 / 3]),
        [np.array([[1.0]]) for _ in range(3)],
    )
    # use the classical permutation action of Z3 instead: shift kernel
    C3 = TracialAlgebra.commutative([1 / 3, 1 / 3, 1 / 3])
    shift = from_classical(
        C3, np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    )
    shift2 = from_classical(
        C3, np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    )
    from neveukit.maps import SuperOperator

    table = ((0, 1, 2), (1, 2, 0), (2, 0, 1))
    scheme = FolnerScheme("finite-group", order=3, table=table)
    action = SemigroupAction(
        C3, "heisenberg", scheme, [SuperOperator.identity(C3), shift, shift2]
    )
    assert action.checks["representation"].passed
    assert action.dual().checks["representation"].passed


def test_lamperti_reports_cached_and_attested():
    swap = from_conjugation(M2, [np.array([[0.0, 1.0], [1.0, 0.0]])])
    action = zplus_action(swap)
    assert not action.lamperti_attested()
    reports = action.lamperti_reports()
    assert all(r.passed for r in reports)
    assert action.lamperti_attested()
    assert action.lamperti_reports() is reports


def test_lamperti_fails_for_damping_predual():
    action = zplus_action(amplitude_damping(M2, 0.5))
    reports = action.lamperti_reports()
    assert not action.lamperti_attested()
    assert reports[0].verdict == "fail"


def test_lamperti_reports_reject_flows():
    alg = TracialAlgebra.commutative([1.0])
    scheme = FolnerScheme("r-plus-cube", d=1)
    action = SemigroupAction(alg, "heisenberg", scheme, [np.array([[-1.0]])])
    with pytest.raises(PreconditionError):
        action.lamperti_reports()


# ---------------------------------------------------------------------------
# vector orbit averages
# ---------------------------------------------------------------------------


def test_orbit_average_vector_identity():
    xi = np.array([1.0, 2.0])
    assert np.allclose(orbit_average_vector(np.eye(2), xi, 5), xi)


def test_orbit_average_vector_sign_flip_cancels():
    u = -np.eye(2)
    xi = np.array([1.0, 0.0])
    assert np.linalg.norm(orbit_average_vector(u, xi, 2)) <= 1e-15


def test_orbit_average_vector_rotation_decay():
    theta = 2.0 * np.pi / 8.0
    u = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    xi = np.array([1.0, 0.0])
    # full period averages to zero, half period does not
    assert np.linalg.norm(orbit_average_vector(u, xi, 8)) <= 1e-14
    assert np.linalg.norm(orbit_average_vector(u, xi, 4)) > 0.1
