"""Finite-schedule certificates for the stochastic convergence modes.

Convergence of a sequence X_a toward a limit is certified, never assumed:

* in measure       for each a one projection e_a with small corner norm
                   ||e_a (X_a - X) e_a|| < eps and complement mass
                   delta_a = tau(1 - e_a) read off the same spectral data;
* b.a.u.           one projection e with tau(1 - e) within budget such that
                   sup_{b >= a} ||e (X_b - X) e|| decays along the schedule;
* stochastic       both modes at once for the two Neveu corners of the
                   ergodic averages of a positive density, glued into a
                   single family r_a = p + q_a with a certified cross-term
                   bound.

The glue step is where the decomposition earns its keep: the conservative
corner e1 A_a(X) e1 converges b.a.u. toward the invariant compression while
the wandering corner e2 A_a(X) e2 only converges in measure, and the
off-diagonal block is controlled by Cauchy-Schwarz through the two corner
bounds, so no separate estimate is needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .algebra import (
    BOUNDARY_SNAP,
    Operator,
    Projection,
    TracialAlgebra,
    abs_op,
    op_norm,
    trace,
    trace_norm,
)
from .dynamics import average
from .maps import CheckReport, PreconditionError
from .neveu import mean_ergodic_projection, neveu_decompose

__all__ = [
    "MeasureCertificate",
    "BauCertificate",
    "StochasticReport",
    "HullResult",
    "HullConvergenceError",
    "measure_certify",
    "bau_certify",
    "stochastic_run",
    "corner_compatibility",
    "convex_hull_residual",
    "moving_bump_counterexample",
]

SUPPORT_LEAK_TOL = 1e-8
DECAY_TOL = 1e-6
SLOPE_THRESHOLD = -0.9
SLOPE_WINDOW = 5
CROSS_TERM_SLACK = 1e-10
CORNER_COMPAT_TOL = 1e-9


def _corner_basis(algebra, within):
    """Per-block orthonormal column bases of the range of ``within``.

    ``None`` means the whole algebra.  Restricting the spectral calculus to
    this basis keeps certificate projections exactly inside the corner the
    data lives in, so they add cleanly to the complementary corner.
    """
    if within is None:
        return [np.eye(n) for n in algebra.blocks]
    cols = []
    for m in within.block_mats:
        lam, v = np.linalg.eigh((m + m.conj().T) / 2.0)
        cols.append(v[:, lam >= 0.5])
    return cols


def _check_support(deviation, within, scale):
    leak = op_norm(deviation - within @ deviation @ within)
    if leak > SUPPORT_LEAK_TOL * max(1.0, scale):
        raise ValueError(
            f"sequence is not supported in the given corner (leak {leak:.3e})"
        )


@dataclass
class MeasureCertificate:
    """Per-index witness projections for convergence in measure."""

    schedule: list
    eps: float
    delta_tol: float
    rows: list
    witnesses: list
    witnesses_active: list
    n0: int
    verdict: str
    within: Projection = None

    @property
    def passed(self):
        return self.verdict == "pass"


def measure_certify(sequence, limit, eps, schedule=None, delta_tol=1e-6, within=None):
    """Certify X_a -> limit in measure along the (finite) sequence.

    For each index the spectral projection e_a of |X_a - limit| below eps is
    produced; its complement mass delta_a = tau(1 - e_a) is computed from the
    same eigendecomposition, so the reported mass and the witness projection
    can never drift apart.  The verdict passes iff from some schedule point
    n0 on every delta_a is at most delta_tol.

    ``within`` restricts the construction to a corner projection: witnesses
    then satisfy e_a = q_a + (1 - within) with q_a inside the corner, and
    delta_a only ever charges corner directions.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    sequence = list(sequence)
    if not sequence:
        raise ValueError("empty sequence")
    algebra = sequence[0].algebra
    schedule = list(schedule if schedule is not None else range(1, len(sequence) + 1))
    if len(schedule) != len(sequence):
        raise ValueError("schedule and sequence lengths differ")
    basis = _corner_basis(algebra, within)
    outside = None if within is None else within.complement()
    scale = max([op_norm(x) for x in sequence] + [op_norm(limit), 1.0])

    rows, witnesses, actives = [], [], []
    for a, x in zip(schedule, sequence):
        d = x - limit
        if within is not None:
            _check_support(d, within, scale)
        f = abs_op(d)
        delta = 0.0
        kept_cols = []
        for w, base, m in zip(algebra.weights, basis, f.block_mats):
            comp = base.conj().T @ m @ base
            lam, v = np.linalg.eigh((comp + comp.conj().T) / 2.0)
            keep = lam < eps - BOUNDARY_SNAP
            delta += w * float(np.sum(~keep))
            kept_cols.append([base @ v[:, k] for k in range(lam.size) if keep[k]])
        active = Projection.from_eigvecs(algebra, kept_cols)
        if outside is None:
            e = active
        else:
            e = Projection(
                algebra,
                [p + q for p, q in zip(active.block_mats, outside.block_mats)],
            )
        corner = float(op_norm(e @ d @ e))
        rows.append(
            {"a": a, "delta": float(delta), "rank_kept": e.rank, "corner_norm": corner}
        )
        witnesses.append(e)
        actives.append(active)

    n0 = None
    for i in range(len(rows)):
        if all(r["delta"] <= delta_tol for r in rows[i:]):
            n0 = schedule[i]
            break
    verdict = "pass" if n0 is not None else "fail"
    return MeasureCertificate(
        schedule,
        float(eps),
        float(delta_tol),
        rows,
        witnesses,
        actives,
        n0,
        verdict,
        within,
    )


@dataclass
class BauCertificate:
    """A single witness projection with decaying tail suprema."""

    schedule: list
    delta_budget: float
    theta: float
    excluded_mass: float
    e: Projection
    e_active: Projection
    tail: list
    final: float
    slope: float
    n0: int
    verdict: str
    within: Projection = None
    detail: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict == "pass"


def bau_certify(
    sequence,
    limit,
    delta_budget,
    schedule=None,
    n0=0,
    decay_tol=DECAY_TOL,
    window=SLOPE_WINDOW,
    within=None,
):
    """Certify almost-uniform-type convergence with one witness projection.

    The witness is the spectral projection e = chi_[0, theta](S) of the
    weighted deviation sum S = sum_{k >= n0} 2^-(k - n0) |X_k - limit|, with
    theta the smallest spectral candidate whose excluded mass tau(1 - e)
    stays within delta_budget.  Tail suprema sup_{b >= a} ||e (X_b - X) e||
    are reported per schedule point; the verdict passes iff the final
    supremum is at most decay_tol or the tail-window log-log slope is at
    most -0.9 (the suprema are non-increasing by construction).

    ``within`` has the same corner semantics as in :func:`measure_certify`;
    ``e_active`` is the part of e inside the corner.
    """
    if delta_budget <= 0:
        raise ValueError("delta budget must be > 0; the certificate is infeasible")
    sequence = list(sequence)
    if not sequence:
        raise ValueError("empty sequence")
    if not 0 <= n0 < len(sequence):
        raise ValueError("n0 must index into the sequence")
    algebra = sequence[0].algebra
    schedule = list(schedule if schedule is not None else range(1, len(sequence) + 1))
    if len(schedule) != len(sequence):
        raise ValueError("schedule and sequence lengths differ")
    scale = max([op_norm(x) for x in sequence] + [op_norm(limit), 1.0])

    deviations = [x - limit for x in sequence]
    if within is not None:
        for d in deviations:
            _check_support(d, within, scale)
    s = algebra.zero()
    for k in range(n0, len(deviations)):
        s = s + abs_op(deviations[k]) * (2.0 ** -(k - n0))

    basis = _corner_basis(algebra, within)
    outside = None if within is None else within.complement()
    comp_eigs = []
    for base, m in zip(basis, s.block_mats):
        comp = base.conj().T @ m @ base
        lam, v = np.linalg.eigh((comp + comp.conj().T) / 2.0)
        comp_eigs.append((lam, v, base))
    all_lams = np.concatenate([lam for lam, _, _ in comp_eigs]) if comp_eigs else np.array([])
    candidates = sorted(set([0.0] + [float(t) for t in all_lams]))
    theta = None
    excluded = None
    for cand in candidates:
        mass = sum(
            w * float(np.sum(lam > cand + BOUNDARY_SNAP))
            for w, (lam, _, _) in zip(algebra.weights, comp_eigs)
        )
        if mass <= delta_budget:
            theta, excluded = cand, mass
            break
    kept_cols = []
    for lam, v, base in comp_eigs:
        keep = lam <= theta + BOUNDARY_SNAP
        kept_cols.append([base @ v[:, k] for k in range(lam.size) if keep[k]])
    e_active = Projection.from_eigvecs(algebra, kept_cols)
    if outside is None:
        e = e_active
    else:
        e = Projection(
            algebra,
            [p + q for p, q in zip(e_active.block_mats, outside.block_mats)],
        )

    corner = [float(op_norm(e @ d @ e)) for d in deviations]
    sup = 0.0
    sups = [0.0] * len(corner)
    for i in range(len(corner) - 1, n0 - 1, -1):
        sup = max(sup, corner[i])
        sups[i] = sup
    tail = [(schedule[i], sups[i]) for i in range(n0, len(corner))]
    final = tail[-1][1]
    positive = [(a, v) for a, v in tail[-window:] if v > 0.0]
    slope = None
    if len(positive) >= 2:
        la = np.log([a for a, _ in positive])
        lv = np.log([v for _, v in positive])
        slope = float(np.polyfit(la, lv, 1)[0])
    if final <= decay_tol:
        verdict = "pass"
    elif slope is not None and slope <= SLOPE_THRESHOLD:
        verdict = "pass"
    else:
        verdict = "fail"
    detail = {"corner_norms": corner, "candidates_tried": len(candidates)}
    return BauCertificate(
        schedule,
        float(delta_budget),
        float(theta),
        float(excluded),
        e,
        e_active,
        tail,
        float(final),
        slope,
        n0,
        verdict,
        within,
        detail,
    )


@dataclass
class StochasticReport:
    """Joint two-corner certificate for the averages of a positive density."""

    schedule: list
    eps: float
    delta: float
    xbar: Operator
    decomposition: object
    bau: BauCertificate
    measure: MeasureCertificate
    p: Projection
    burn_in: int
    rows: list
    verdicts: dict
    detail: dict = field(default_factory=dict)

    @property
    def passed(self):
        keys = ("bau", "measure", "budget", "cross_term")
        return all(self.verdicts.get(k) == "pass" for k in keys)


def stochastic_run(
    action,
    x,
    schedule=None,
    eps=0.1,
    delta=0.1,
    decomposition=None,
    seed=0,
    decay_tol=DECAY_TOL,
):
    """Certify the two-mode convergence of the averages of a density x >= 0.

    The conservative corner sequence e1 A_a(x) e1 is certified b.a.u. toward
    the invariant compression xbar = E_*(x) with half the mass budget, and
    the wandering corner e2 A_a(x) e2 in measure toward 0 with the other
    half.  Past the burn-in index (both corner certificates below eps) the
    glued projections r_a = p + q_a satisfy tau(1 - r_a) <= delta and the
    cross-term obeys

        ||p A_a(x) q_a|| <= sqrt(eps (eps + ||p xbar p||)),

    which follows from Cauchy-Schwarz for the positive operator A_a(x); the
    inequality is checked numerically row by row, not assumed.
    """
    if action.picture != "schrodinger":
        raise PreconditionError(
            "stochastic_run works on the density picture; pass action.dual()"
        )
    if not x.is_positive():
        raise ValueError("x must be positive for the stochastic certificate")
    if delta <= 0 or eps <= 0:
        raise ValueError("eps and delta must be > 0")
    schedule = list(schedule if schedule is not None else (1, 2, 4, 8, 16, 32, 64))
    if decomposition is None:
        decomposition = neveu_decompose(action, schedule=schedule, seed=seed)
    e1, e2 = decomposition.e1, decomposition.e2
    algebra = action.algebra

    averages = [average(action, x, a) for a in schedule]
    xbar = algebra.from_vec(decomposition.projection_schrodinger.matrix @ x.vec())
    xbar = (xbar + xbar.H) * 0.5
    lim1 = e1 @ xbar @ e1

    c1 = [e1 @ a @ e1 for a in averages]
    c2 = [e2 @ a @ e2 for a in averages]

    bau = bau_certify(
        c1,
        lim1,
        delta_budget=delta / 2.0,
        schedule=schedule,
        decay_tol=decay_tol,
        within=e1,
    )
    measure = measure_certify(
        c2, algebra.zero(), eps, schedule=schedule, delta_tol=delta / 2.0, within=e2
    )
    p = bau.e_active

    burn_bau = next((a for a, v in bau.tail if v <= eps), None)
    burn = None
    if burn_bau is not None and measure.n0 is not None:
        burn = max(burn_bau, measure.n0)

    bound_base = float(op_norm(p @ xbar @ p))
    rows = []
    budget_ok = True
    cross_ok = True
    for i, a in enumerate(schedule):
        q = measure.witnesses_active[i]  # q_a inside e2
        r = p + q
        excluded = trace(algebra.identity() - r).real
        cross_norm = float(op_norm(p @ averages[i] @ q))
        bound = float(np.sqrt(eps * (eps + bound_base))) + CROSS_TERM_SLACK
        active = burn is not None and a >= burn
        row = {
            "a": a,
            "tau_excluded": float(excluded),
            "cross_norm": cross_norm,
            "cross_bound": bound,
            "past_burn_in": active,
        }
        if active:
            if excluded > delta + 1e-12:
                budget_ok = False
                row["budget_violation"] = True
            if cross_norm > bound:
                cross_ok = False
                row["cross_violation"] = True
        rows.append(row)

    verdicts = {
        "bau": bau.verdict,
        "measure": measure.verdict,
        "budget": "pass" if (burn is not None and budget_ok) else "fail",
        "cross_term": "pass" if (burn is not None and cross_ok) else "fail",
    }
    detail = {"burn_in_bau": burn_bau, "burn_in_measure": measure.n0}

    if action.lamperti_attested():
        compat = corner_compatibility(action, decomposition, x)
        detail["corner_compatibility"] = compat.summary()
        if not compat.passed:
            raise ArithmeticError(
                "Lamperti-attested action violated corner compatibility"
            )

    return StochasticReport(
        schedule,
        float(eps),
        float(delta),
        xbar,
        decomposition,
        bau,
        measure,
        p,
        burn,
        rows,
        verdicts,
        detail,
    )


def corner_compatibility(action, decomposition, x, generator_index=None, tol=CORNER_COMPAT_TOL):
    """Check that the Neveu corners commute with the density evolution.

    For disjointness-preserving (Lamperti) L1 maps the corners of the image
    are the images of the corners:  e_i gamma(x) e_i = gamma(e_i x e_i).
    Requires a passing Lamperti attestation on every density-picture map;
    without one the identity can genuinely fail and the check refuses to run.
    """
    schr = action.to_picture("schrodinger")
    reports = schr.lamperti_reports()
    failing = [i for i, r in enumerate(reports) if not r.passed]
    if failing:
        raise PreconditionError(
            f"corner compatibility needs Lamperti-attested maps; generator(s) "
            f"{failing} failed the disjointness probe"
        )
    idxs = (
        range(len(schr.generators))
        if generator_index is None
        else [int(generator_index)]
    )
    scale = max(1.0, trace_norm(x))
    worst = 0.0
    witness = None
    for i in idxs:
        g = schr.generators[i]
        for e in (decomposition.e1, decomposition.e2):
            dev = trace_norm(e @ g(x) @ e - g(e @ x @ e))
            if dev > worst:
                worst = dev
                witness = (i, e)
    verdict = "pass" if worst <= tol * scale else "fail"
    return CheckReport(
        "corner-compatibility",
        verdict,
        witness=witness if verdict == "fail" else None,
        detail={"max_deviation": float(worst)},
    )


class HullConvergenceError(RuntimeError):
    """Projected gradient ran out of iterations; carries the last iterate."""

    def __init__(self, message, weights, residual, objective):
        super().__init__(message)
        self.weights = weights
        self.residual = residual
        self.objective = objective


@dataclass
class HullResult:
    residual: float
    weights: np.ndarray
    objective: float
    iterations: int
    orbit_size: int


def _simplex_project(v):
    """Euclidean projection onto the probability simplex (sort and shift)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    cond = u - css / idx > 0
    rho = int(np.nonzero(cond)[0][-1])
    lam = css[rho] / (rho + 1.0)
    return np.maximum(v - lam, 0.0)


def _orbit_vectors(action, x, a):
    """Orbit of x over the inclusive index box {0..a}^d (all elements for
    finite groups, a 17-point grid per axis for continuous cubes)."""
    v = x.vec()
    kind = action.scheme.kind
    if kind == "finite-group":
        return [s.matrix @ v for s in action.generators]
    if kind == "r-plus-cube":
        times = np.linspace(0.0, float(a), 17)
        cols = [v]
        for L in action.flow_generators:
            flows = [scipy.linalg.expm(t * L) for t in times]
            cols = [f @ c for c in cols for f in flows]
        return cols
    a = int(a)
    if a < 1:
        raise ValueError("a must be >= 1")
    if kind == "z-symmetric-box":
        cols = [v]
        for axis in range(action.scheme.d):
            s, sinv = action.generators[axis].matrix, action.inverses[axis]
            new = []
            for c in cols:
                cur = c
                for _ in range(a):
                    cur = sinv @ cur
                new.append(cur)
                for _ in range(2 * a):
                    cur = s @ cur
                    new.append(cur)
            cols = new
        return cols
    cols = [v]
    for axis in range(action.scheme.d):
        s = action.generators[axis].matrix
        new = []
        for c in cols:
            cur = c
            new.append(cur)
            for _ in range(a):
                cur = s @ cur
                new.append(cur)
        cols = new
    return cols


def _face_polish(mr, br, lam, objective, feas_tol=1e-12):
    """Exact least squares on the face spanned by the active support.

    Solves min ||M mu - b||^2 subject only to sum(mu) = 1 on the current
    support via the KKT system, dropping the most negative coordinate until
    the solution is feasible.  Deterministic, at most |support| linear
    solves; the caller only accepts the result when it improves.
    """
    support = np.nonzero(lam > feas_tol)[0]
    while support.size:
        ms = mr[:, support]
        k = support.size
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = 2.0 * ms.T @ ms
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.concatenate([2.0 * ms.T @ br, [1.0]])
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        mu = sol[:k]
        if mu.min() >= -feas_tol:
            full = np.zeros_like(lam)
            full[support] = np.clip(mu, 0.0, None)
            total = full.sum()
            if total <= 0.0:
                break
            full /= total
            return full, objective(full)
        support = np.delete(support, int(np.argmin(mu)))
    return lam, objective(lam)


def convex_hull_residual(
    action,
    x,
    a,
    projection=None,
    max_iter=10000,
    decrement_tol=1e-10,
):
    """Distance from the mean projection E(x) to the orbit's convex hull.

    Minimises ||sum_k c_k Gamma^k(x) - E(x)|| over the simplex in the
    weighted Hilbert-Schmidt metric by projected gradient from the
    barycenter (fixed step 1/L).  Iteration stops when the objective
    decrement falls below ``decrement_tol``; exhausting ``max_iter`` raises
    :class:`HullConvergenceError` carrying the last iterate.  The returned
    residual is reported in operator norm.
    """
    action.require_commuting()
    algebra = action.algebra
    if projection is None:
        projection = mean_ergodic_projection(action)
    target = projection(x)
    cols = _orbit_vectors(action, x, a)
    wvec = np.empty(algebra.dim)
    off = 0
    for n, wt in zip(algebra.blocks, algebra.weights):
        wvec[off : off + n * n] = wt
        off += n * n
    sw = np.sqrt(wvec)
    m = np.column_stack(cols) * sw[:, None]
    b = target.vec() * sw
    mr = np.vstack([m.real, m.imag])
    br = np.concatenate([b.real, b.imag])

    k = mr.shape[1]
    lam = np.full(k, 1.0 / k)
    lip = max(np.linalg.norm(mr, 2) ** 2 * 2.0, 1e-30)
    step = 1.0 / lip

    def objective(c):
        r = mr @ c - br
        return float(r @ r)

    obj = objective(lam)
    converged = False
    iterations = 0
    while iterations < max_iter:
        iterations += 1
        grad = 2.0 * (mr.T @ (mr @ lam - br))
        lam_new = _simplex_project(lam - step * grad)
        obj_new = objective(lam_new)
        if obj - obj_new <= decrement_tol:
            if obj_new < obj:
                lam, obj = lam_new, obj_new
            # gradient steps have stalled: finish the active face exactly
            lam_p, obj_p = _face_polish(mr, br, lam, objective)
            if obj - obj_p > decrement_tol:
                lam, obj = lam_p, obj_p
                continue
            if obj_p < obj:
                lam, obj = lam_p, obj_p
            converged = True
            break
        lam, obj = lam_new, obj_new
        # a periodic polish short-circuits the slow crawl toward a vertex
        if iterations % 25 == 0:
            lam_p, obj_p = _face_polish(mr, br, lam, objective)
            if obj - obj_p > decrement_tol:
                lam, obj = lam_p, obj_p
    combo = algebra.from_vec(np.column_stack(cols) @ lam)
    residual = float(op_norm(combo - target))
    if not converged:
        raise HullConvergenceError(
            f"no convergence in {max_iter} iterations (objective {obj:.3e})",
            lam,
            residual,
            obj,
        )
    return HullResult(residual, lam, obj, iterations, k)


def moving_bump_counterexample(n_cycle=40, heavy_weight=0.5):
    """A sequence converging in measure but not b.a.u. on finite data.

    On an atomic algebra with one heavy atom and ``n_cycle`` light atoms of
    equal mass, the indicator of atom (a mod n_cycle) has vanishing mass, so
    measure certification passes at any delta_tol above the atom mass, while
    the weighted-sum witness construction must keep the late atoms (they
    carry the smallest weights) and the kept corner norm stays at 1.

    Returns (algebra, sequence, limit, schedule).
    """
    if n_cycle < 2 or not 0 < heavy_weight < 1:
        raise ValueError("need n_cycle >= 2 and 0 < heavy_weight < 1")
    light = (1.0 - heavy_weight) / n_cycle
    algebra = TracialAlgebra.commutative([heavy_weight] + [light] * n_cycle)
    schedule = list(range(1, n_cycle + 1))
    sequence = [
        algebra.basis_element(1 + ((a - 1) % n_cycle), 0, 0) for a in schedule
    ]
    limit = algebra.zero()
    return algebra, sequence, limit, schedule
