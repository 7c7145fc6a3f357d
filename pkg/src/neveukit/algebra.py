"""Tracial block-matrix algebras: elements, traces, norms, spectral calculus.

Every finite-dimensional von Neumann algebra is a finite direct sum of full
complex matrix blocks.  ``TracialAlgebra`` fixes the block sizes ``n_i``
together with strictly positive trace weights ``w_i`` so that

    tau(x) = sum_i w_i * tr(x_i)

is a faithful normal trace (a tracial state when ``sum_i w_i n_i == 1``).
``Operator`` holds one element as a tuple of per-block complex matrices; the
same object serves as a bounded observable (operator norm) and as an L1
density (trace norm), which in finite dimension are two norms on one space.

Vectorisation convention, used by every superoperator in this package:
block-major, column-stacking per block, i.e.

    vec(x) = concat_i  x_i.reshape(-1, order="F")

so that for a single block vec(A X B) = (B.T kron A) vec(X).

All functions are pure and operators are treated as immutable.
"""

from __future__ import annotations

import numbers

import numpy as np

__all__ = [
    "TracialAlgebra",
    "Operator",
    "Projection",
    "trace",
    "trace_norm",
    "op_norm",
    "abs_op",
    "spectral_decompose",
    "spectral_projection",
    "support",
    "distribution",
    "order_leq",
]

# Flag verification slacks (relative).
HERMITIAN_RTOL = 1e-12
POSITIVE_RTOL = 1e-10
# Projection admission: idempotency / self-adjointness and eigenvalue snap.
PROJECTION_TOL = 1e-10
PROJECTION_EIG_TOL = 1e-8
# Eigenvalue clustering gap, relative to the operator norm of the input.
CLUSTER_GAP_RTOL = 1e-10
# Support threshold, relative to max(lambda_max, 1).
SUPPORT_RTOL = 1e-10
# Half-open interval boundary snap for spectral projections.
BOUNDARY_SNAP = 1e-10
# Loewner order slack, scaled by (||x|| + ||y|| + 1).
ORDER_SLACK = 1e-9
# s(x) x = x check.
SUPPORT_ACTION_TOL = 1e-9


class TracialAlgebra:
    """A direct sum of full matrix blocks with a weighted trace.

    :param blocks: block sizes ``n_i >= 1``.
    :param weights: strictly positive trace weights ``w_i``; defaults to the
        uniform normalised choice ``w_i = 1 / sum_j n_j``.
    :param normalized: if given, assert that ``sum_i w_i n_i == 1`` matches.
    """

    def __init__(self, blocks, weights=None, normalized=None):
        blocks = tuple(int(n) for n in blocks)
        if len(blocks) == 0:
            raise ValueError("algebra needs at least one block")
        if any(n < 1 for n in blocks):
            raise ValueError(f"block sizes must be >= 1, got {blocks}")
        if weights is None:
            weights = tuple(1.0 / sum(blocks) for _ in blocks)
        else:
            weights = tuple(float(w) for w in weights)
        if len(weights) != len(blocks):
            raise ValueError("one weight per block required")
        if any(w <= 0 for w in weights):
            raise ValueError(f"trace weights must be > 0, got {weights}")
        mass = sum(w * n for w, n in zip(weights, blocks))
        is_normalized = abs(mass - 1.0) <= 1e-12
        if normalized is True and not is_normalized:
            raise ValueError(f"tau(1) = {mass!r}, not a tracial state")
        self.blocks = blocks
        self.weights = weights
        self.normalized = is_normalized
        # Total vectorised dimension and per-block offsets into vec(x).
        self.dim = sum(n * n for n in blocks)
        offs = np.cumsum([0] + [n * n for n in blocks])
        self._offsets = tuple(int(o) for o in offs)

    # -- equality is structural so that serialisation round-trips compare --

    def __eq__(self, other):
        return (
            isinstance(other, TracialAlgebra)
            and self.blocks == other.blocks
            and np.allclose(self.weights, other.weights, rtol=0, atol=1e-15)
        )

    def __hash__(self):
        return hash((self.blocks, tuple(round(w, 15) for w in self.weights)))

    def __repr__(self):
        return f"TracialAlgebra(blocks={list(self.blocks)}, weights={list(self.weights)})"

    @property
    def n_blocks(self):
        return len(self.blocks)

    @property
    def is_commutative(self):
        return all(n == 1 for n in self.blocks)

    # -- constructors ------------------------------------------------------

    @classmethod
    def full_matrix(cls, n):
        """M_n with the normalised trace tr/n."""
        return cls([n], [1.0 / n])

    @classmethod
    def commutative(cls, weights):
        """A diagonal (classical) algebra with one atom per weight."""
        return cls([1] * len(weights), weights)

    # -- element factories -------------------------------------------------

    def operator(self, block_mats):
        return Operator(self, block_mats)

    def zero(self):
        return Operator(self, [np.zeros((n, n), dtype=complex) for n in self.blocks])

    def identity(self):
        return Operator(self, [np.eye(n, dtype=complex) for n in self.blocks])

    def diag(self, values):
        """Diagonal operator from a flat list of the per-block diagonals."""
        values = np.asarray(values, dtype=complex).ravel()
        if values.size != sum(self.blocks):
            raise ValueError(
                f"need {sum(self.blocks)} diagonal entries, got {values.size}"
            )
        mats, k = [], 0
        for n in self.blocks:
            mats.append(np.diag(values[k : k + n]))
            k += n
        return Operator(self, mats)

    def basis_element(self, block, row, col):
        """The matrix unit E_{row,col} sitting in one block."""
        mats = [np.zeros((n, n), dtype=complex) for n in self.blocks]
        mats[block][row, col] = 1.0
        return Operator(self, mats)

    def from_vec(self, v):
        """Inverse of ``Operator.vec`` (block-major, column-stacked)."""
        v = np.asarray(v, dtype=complex).ravel()
        if v.size != self.dim:
            raise ValueError(f"vector length {v.size} != algebra dim {self.dim}")
        mats = []
        for i, n in enumerate(self.blocks):
            seg = v[self._offsets[i] : self._offsets[i + 1]]
            mats.append(seg.reshape((n, n), order="F"))
        return Operator(self, mats)

    def random_hermitian(self, rng, scale=1.0):
        mats = []
        for n in self.blocks:
            g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            mats.append(scale * (g + g.conj().T) / 2.0)
        return Operator(self, mats)

    def random_positive(self, rng, scale=1.0):
        mats = []
        for n in self.blocks:
            g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            mats.append(scale * (g @ g.conj().T) / n)
        return Operator(self, mats)

    def random_density(self, rng, faithful=True):
        """Random positive element with tau = 1; full rank when faithful."""
        x = self.random_positive(rng)
        if faithful:
            x = x + 0.1 * op_norm(x) * self.identity() + 1e-3 * self.identity()
        t = trace(x).real
        return (1.0 / t) * x


class Operator:
    """One element of a :class:`TracialAlgebra`.

    Stores per-block complex matrices.  Hermitian / positive flags are
    verified lazily and cached; construction only checks shapes.
    """

    def __init__(self, algebra, block_mats):
        if len(block_mats) != algebra.n_blocks:
            raise ValueError(
                f"expected {algebra.n_blocks} blocks, got {len(block_mats)}"
            )
        mats = []
        for n, m in zip(algebra.blocks, block_mats):
            m = np.asarray(m, dtype=complex)
            if m.shape != (n, n):
                raise ValueError(f"block shape {m.shape} != ({n}, {n})")
            mats.append(m)
        self.algebra = algebra
        self.block_mats = tuple(mats)
        self._flags = {}

    # -- arithmetic --------------------------------------------------------

    def _require_same(self, other):
        if not isinstance(other, Operator):
            raise TypeError(f"expected Operator, got {type(other).__name__}")
        if self.algebra != other.algebra:
            raise ValueError("operators live in different algebras")

    def __add__(self, other):
        self._require_same(other)
        return Operator(
            self.algebra,
            [a + b for a, b in zip(self.block_mats, other.block_mats)],
        )

    def __sub__(self, other):
        self._require_same(other)
        return Operator(
            self.algebra,
            [a - b for a, b in zip(self.block_mats, other.block_mats)],
        )

    def __neg__(self):
        return Operator(self.algebra, [-a for a in self.block_mats])

    def __mul__(self, scalar):
        if not isinstance(scalar, numbers.Number):
            return NotImplemented
        return Operator(self.algebra, [scalar * a for a in self.block_mats])

    __rmul__ = __mul__

    def __matmul__(self, other):
        self._require_same(other)
        return Operator(
            self.algebra,
            [a @ b for a, b in zip(self.block_mats, other.block_mats)],
        )

    @property
    def H(self):
        """Adjoint x*."""
        return Operator(self.algebra, [a.conj().T for a in self.block_mats])

    def vec(self):
        """Block-major column-stacked coordinates (see module docstring)."""
        return np.concatenate([m.reshape(-1, order="F") for m in self.block_mats])

    def dense(self):
        """Full block-diagonal matrix, mostly for debugging and printing."""
        n_tot = sum(self.algebra.blocks)
        out = np.zeros((n_tot, n_tot), dtype=complex)
        k = 0
        for n, m in zip(self.algebra.blocks, self.block_mats):
            out[k : k + n, k : k + n] = m
            k += n
        return out

    # -- verified flags ----------------------------------------------------

    def is_hermitian(self):
        if "hermitian" not in self._flags:
            dev = max(
                np.linalg.norm(m - m.conj().T, 2) for m in self.block_mats
            )
            self._flags["hermitian"] = dev <= HERMITIAN_RTOL * op_norm(self) + 1e-30
        return self._flags["hermitian"]

    def is_positive(self):
        if "positive" not in self._flags:
            if not self.is_hermitian():
                self._flags["positive"] = False
            else:
                lo = min(
                    np.linalg.eigvalsh((m + m.conj().T) / 2.0).min()
                    for m in self.block_mats
                )
                self._flags["positive"] = lo >= -POSITIVE_RTOL * (op_norm(self) + 1e-30)
        return self._flags["positive"]

    def __repr__(self):
        return f"Operator(algebra={self.algebra!r}, norm={op_norm(self):.6g})"


class Projection(Operator):
    """A self-adjoint idempotent, carrying its per-block ranks.

    Construction verifies ``||p^2 - p|| <= 1e-10``, self-adjointness, and
    that every eigenvalue is within 1e-8 of {0, 1}.
    """

    def __init__(self, algebra, block_mats):
        super().__init__(algebra, block_mats)
        ranks = []
        for m in self.block_mats:
            if np.linalg.norm(m @ m - m, 2) > PROJECTION_TOL:
                raise ValueError("not idempotent within 1e-10")
            if np.linalg.norm(m - m.conj().T, 2) > PROJECTION_TOL:
                raise ValueError("not self-adjoint within 1e-10")
            ev = np.linalg.eigvalsh((m + m.conj().T) / 2.0)
            if ev.size and np.abs(ev - np.round(ev)).max() > PROJECTION_EIG_TOL:
                raise ValueError("eigenvalues not within 1e-8 of {0, 1}")
            ranks.append(int(np.round(ev.sum())))
        self.ranks = tuple(ranks)
        self.rank = sum(ranks)

    @classmethod
    def from_eigvecs(cls, algebra, vec_lists):
        """Build sum_k v_k v_k* blockwise from orthonormal column lists."""
        mats = []
        for n, cols in zip(algebra.blocks, vec_lists):
            if cols is None or len(cols) == 0:
                mats.append(np.zeros((n, n), dtype=complex))
            else:
                V = np.column_stack(cols)
                mats.append(V @ V.conj().T)
        return cls(algebra, mats)

    def complement(self):
        eye = self.algebra.identity()
        return Projection(
            self.algebra,
            [i - m for i, m in zip(eye.block_mats, self.block_mats)],
        )

    def __repr__(self):
        return f"Projection(ranks={list(self.ranks)})"


# ---------------------------------------------------------------------------
# traces and norms
# ---------------------------------------------------------------------------


def trace(x):
    """The weighted trace tau(x) = sum_i w_i tr(x_i).  Returns a complex scalar."""
    return complex(
        sum(w * np.trace(m) for w, m in zip(x.algebra.weights, x.block_mats))
    )


def _singvals(x):
    """Per-block singular values; eigenvalue magnitudes when hermitian."""
    out = []
    for m in x.block_mats:
        if np.linalg.norm(m - m.conj().T, 2) <= HERMITIAN_RTOL * (
            np.linalg.norm(m, 2) + 1e-30
        ):
            out.append(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2.0)))
        else:
            out.append(np.linalg.svd(m, compute_uv=False))
    return out

def trace_norm(x):
    """||x||_1 = tau(|x|), via per-block singular values."""
    return float(
        sum(w * s.sum() for w, s in zip(x.algebra.weights, _singvals(x)))
    )


def op_norm(x):
    """Operator norm: the largest singular value over all blocks."""
    return float(max(np.linalg.norm(m, 2) for m in x.block_mats))


def abs_op(x):
    """|x| = (x* x)^(1/2).  Uses the eigendecomposition of x when hermitian."""
    mats = []
    for m in x.block_mats:
        h = (m + m.conj().T) / 2.0
        if np.linalg.norm(m - m.conj().T, 2) <= HERMITIAN_RTOL * (
            np.linalg.norm(m, 2) + 1e-30
        ):
            lam, V = np.linalg.eigh(h)
            mats.append((V * np.abs(lam)) @ V.conj().T)
        else:
            U, s, Vh = np.linalg.svd(m)
            mats.append((Vh.conj().T * s) @ Vh)
    return Operator(x.algebra, mats)


# ---------------------------------------------------------------------------
# spectral calculus
# ---------------------------------------------------------------------------


def _require_hermitian(h, who):
    if not h.is_hermitian():
        raise ValueError(f"{who} requires a hermitian operator")


def _eigh_all(h):
    """Blockwise eigendecomposition; returns (lam, block, column) triples."""
    triples = []
    for b, m in enumerate(h.block_mats):
        lam, V = np.linalg.eigh((m + m.conj().T) / 2.0)
        for k in range(lam.size):
            triples.append((float(lam[k]), b, V[:, k]))
    triples.sort(key=lambda t: t[0])
    return triples


def spectral_decompose(h):
    """Clustered spectral decomposition of a hermitian operator.

    Eigenvalues across all blocks are sorted and merged into clusters when
    consecutive gaps are <= 1e-10 * ||h||.  Returns a list of
    ``(eigenvalue, Projection)`` pairs; the projections sum to the identity
    and ``sum_k lam_k P_k`` reassembles ``h`` to 1e-10.
    """
    _require_hermitian(h, "spectral_decompose")
    triples = _eigh_all(h)
    gap = CLUSTER_GAP_RTOL * max(op_norm(h), 1e-300)
    clusters = []
    current = [triples[0]]
    for t in triples[1:]:
        if t[0] - current[-1][0] <= gap:
            current.append(t)
        else:
            clusters.append(current)
            current = [t]
    clusters.append(current)

    pairs = []
    for cl in clusters:
        lam = float(np.mean([t[0] for t in cl]))
        cols = [[] for _ in h.algebra.blocks]
        for _, b, v in cl:
            cols[b].append(v)
        pairs.append((lam, Projection.from_eigvecs(h.algebra, cols)))
    return pairs


def _interval_member(lam, lo, hi):
    """Half-open [lo, hi) membership with 1e-10 boundary snapping."""
    if lo is not None and abs(lam - lo) <= BOUNDARY_SNAP:
        return True
    if hi is not None and abs(lam - hi) <= BOUNDARY_SNAP:
        return False
    if lo is not None and lam < lo:
        return False
    if hi is not None and lam >= hi:
        return False
    return True


def spectral_projection(h, interval):
    """chi_[lo, hi)(h) for a hermitian h.

    ``interval`` is a pair ``(lo, hi)``; either end may be ``None`` (or
    +-inf) for an unbounded side.  Eigenvalue clusters within 1e-10 of an
    endpoint are assigned by the half-open convention: the lower endpoint
    belongs to the interval, the upper one does not.
    """
    lo, hi = interval
    lo = None if lo is not None and np.isneginf(lo) else lo
    hi = None if hi is not None and np.isposinf(hi) else hi
    acc = None
    for lam, p in spectral_decompose(h):
        if _interval_member(lam, lo, hi):
            acc = p if acc is None else acc + p
    if acc is None:
        return Projection(h.algebra, h.algebra.zero().block_mats)
    return Projection(h.algebra, acc.block_mats)


def support(x):
    """Support projection of a positive operator.

    chi_(theta, inf)(x) with theta = 1e-10 * max(lambda_max, 1); afterwards
    verifies ``s(x) x = x`` within 1e-9.
    """
    if not x.is_positive():
        raise ValueError("support requires a positive operator")
    lam_max = max(
        (np.linalg.eigvalsh((m + m.conj().T) / 2.0).max() for m in x.block_mats),
        default=0.0,
    )
    theta = SUPPORT_RTOL * max(lam_max, 1.0)
    cols = [[] for _ in x.algebra.blocks]
    for lam, b, v in _eigh_all(x):
        if lam > theta:
            cols[b].append(v)
    s = Projection.from_eigvecs(x.algebra, cols)
    dev = op_norm(s @ x - x)
    if dev > SUPPORT_ACTION_TOL * max(op_norm(x), 1.0):
        raise ArithmeticError(f"support check failed: ||s x - x|| = {dev:.3e}")
    return s


def distribution(x, eps):
    """tau of the spectral projection of |x| at and above eps.

    Counts the weighted eigenvalue mass of |x| in [eps, inf), the complement
    of the half-open [0, eps); eigenvalues within 1e-10 of eps count as eps.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    total = 0.0
    for w, s in zip(x.algebra.weights, _singvals(x)):
        total += w * int(np.sum(s >= eps - BOUNDARY_SNAP))
    return float(total)


def order_leq(x, y):
    """Loewner order test x <= y, with slack 1e-9 * (||x|| + ||y|| + 1)."""
    x._require_same(y)
    d = y - x
    if not d.is_hermitian():
        return False
    slack = ORDER_SLACK * (op_norm(x) + op_norm(y) + 1.0)
    lo = min(
        np.linalg.eigvalsh((m + m.conj().T) / 2.0).min() for m in d.block_mats
    )
    return bool(lo >= -slack)
