"""Dense complex tensor-product algebra over labelled composite Hilbert spaces.

All matrices are dense ``numpy`` arrays tagged with a :class:`HilbertLayout`
that records the ordered subsystem dimensions.  The leftmost subsystem is the
slow-varying index everywhere (standard Kronecker convention), which is relied
on by every module downstream.

All values are immutable by convention: no function mutates its inputs and
returned arrays are freshly allocated, so they are safe to share between
concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ContractViolation, SizingError

# Numerical tolerances used by the type invariants.
TOL_HERMITICITY = 1e-10
TOL_TRACE = 1e-8
TOL_EIG_NEGATIVE = 1e-10
TOL_STATE_NORM = 1e-12

# Composite spaces above this total dimension are refused.
DEFAULT_DIM_CAP = 20000


@dataclass(frozen=True)
class HilbertLayout:
    """Ordered subsystem dimensions with unique labels."""

    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.dims) != len(self.labels):
            raise ValueError("dims and labels must have equal length")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate subsystem labels: {self.labels}")
        if any(d < 1 for d in self.dims):
            raise ValueError(f"subsystem dimensions must be >= 1: {self.dims}")

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"unknown subsystem label {label!r}; have {self.labels}") from None

    def restrict(self, keep) -> "HilbertLayout":
        """Layout containing only the labels in `keep`, original order preserved."""
        keep = set(keep)
        unknown = keep - set(self.labels)
        if unknown:
            raise ValueError(f"unknown subsystem labels {sorted(unknown)}; have {self.labels}")
        pairs = [(d, l) for d, l in zip(self.dims, self.labels) if l in keep]
        return HilbertLayout(tuple(d for d, _ in pairs), tuple(l for _, l in pairs))

    def concat(self, other: "HilbertLayout") -> "HilbertLayout":
        return HilbertLayout(self.dims + other.dims, self.labels + other.labels)


def _as_square(entries, dim, what):
    m = np.asarray(entries, dtype=complex)
    if m.shape != (dim, dim):
        raise ValueError(f"{what}: expected shape {(dim, dim)}, got {m.shape}")
    return m


@dataclass(frozen=True)
class OperatorMatrix:
    """A dense complex operator tagged with its Hilbert-space layout."""

    layout: HilbertLayout
    mat: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mat", _as_square(self.mat, self.layout.dim, "OperatorMatrix"))

    @property
    def dim(self) -> int:
        return self.layout.dim

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.layout, self.mat.conj().T)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if other.layout != self.layout:
            raise ValueError("operator layouts differ")
        return OperatorMatrix(self.layout, self.mat @ other.mat)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, PSD, unit-trace matrix over a composite truncated space.

    ``normalized=False`` marks a sub-normalized matrix used for bookkeeping
    during post-selection; the trace check is skipped but hermiticity and
    positivity are still enforced.
    """

    layout: HilbertLayout
    mat: np.ndarray = field(repr=False)
    normalized: bool = True

    def __post_init__(self):
        m = _as_square(self.mat, self.layout.dim, "DensityMatrix")
        object.__setattr__(self, "mat", m)
        herm = np.abs(m - m.conj().T).max()
        if herm > TOL_HERMITICITY:
            raise ContractViolation(f"density matrix not Hermitian: max |rho - rho^+| = {herm:.3e}")
        if self.normalized:
            tr = m.trace()
            if abs(tr - 1.0) > TOL_TRACE:
                raise ContractViolation(f"density matrix trace {tr:.12g} differs from 1")

    @property
    def dim(self) -> int:
        return self.layout.dim

    def trace(self) -> float:
        return float(self.mat.trace().real)

    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues, with tiny negatives clamped to zero."""
        vals = np.linalg.eigvalsh((self.mat + self.mat.conj().T) / 2.0)
        if vals.min() < -TOL_EIG_NEGATIVE:
            raise ContractViolation(f"density matrix has eigenvalue {vals.min():.3e} < 0")
        return np.clip(vals, 0.0, None)

    def purity(self) -> float:
        return float(np.vdot(self.mat, self.mat).real)


@dataclass(frozen=True)
class PureState:
    """Unit-norm state vector over a composite truncated space."""

    layout: HilbertLayout
    vec: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=complex).reshape(-1)
        if v.shape != (self.layout.dim,):
            raise ValueError(f"PureState: expected length {self.layout.dim}, got {v.shape}")
        object.__setattr__(self, "vec", v)
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > TOL_STATE_NORM:
            raise ContractViolation(f"state norm {nrm:.15g} differs from 1")

    @property
    def dim(self) -> int:
        return self.layout.dim

    def density_matrix(self) -> DensityMatrix:
        return DensityMatrix(self.layout, np.outer(self.vec, self.vec.conj()))


# ---------------------------------------------------------------------------
# products and index manipulations


def kron(a: OperatorMatrix, b: OperatorMatrix, dim_cap: int = DEFAULT_DIM_CAP) -> OperatorMatrix:
    """Kronecker product; `a`'s subsystems become the leftmost (slow) indices."""
    total = a.dim * b.dim
    if total > dim_cap:
        raise SizingError(f"kron would produce dimension {total} > cap {dim_cap}")
    return OperatorMatrix(a.layout.concat(b.layout), np.kron(a.mat, b.mat))


def kron_states(a: PureState, b: PureState, dim_cap: int = DEFAULT_DIM_CAP) -> PureState:
    total = a.dim * b.dim
    if total > dim_cap:
        raise SizingError(f"kron would produce dimension {total} > cap {dim_cap}")
    return PureState(a.layout.concat(b.layout), np.kron(a.vec, b.vec))


def embed(op: OperatorMatrix, target: HilbertLayout) -> OperatorMatrix:
    """Lift an operator acting on a subset of subsystems into a larger layout.

    Subsystems of `target` absent from `op.layout` receive the identity; the
    subsystem order of `target` is respected regardless of the order in `op`.
    """
    for lbl in op.layout.labels:
        target.axis(lbl)  # raises on unknown label
    rest = [l for l in target.labels if l not in op.layout.labels]
    rest_dim = int(np.prod([target.dims[target.axis(l)] for l in rest])) if rest else 1
    big = np.kron(op.mat, np.eye(rest_dim))
    ordered = list(op.layout.labels) + rest
    dims = [target.dims[target.axis(l)] for l in ordered]
    n = len(target.labels)
    arr = big.reshape(dims + dims)
    perm = [ordered.index(l) for l in target.labels]
    arr = arr.transpose(perm + [n + p for p in perm])
    return OperatorMatrix(target, arr.reshape(target.dim, target.dim))


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Trace out every subsystem not named in `keep`."""
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    out_layout = rho.layout.restrict(keep)
    dims = list(rho.layout.dims)
    n = len(dims)
    arr = rho.mat.reshape(dims + dims)
    row_idx = list(range(n))
    col_idx = []
    out_rows, out_cols = [], []
    for i, lbl in enumerate(rho.layout.labels):
        if lbl in set(keep):
            col_idx.append(n + i)
            out_rows.append(i)
            out_cols.append(n + i)
        else:
            col_idx.append(i)  # contract with the matching row index
    reduced = np.einsum(arr, row_idx + col_idx, out_rows + out_cols)
    d = out_layout.dim
    return DensityMatrix(out_layout, reduced.reshape(d, d), normalized=rho.normalized)


def partial_transpose(rho: DensityMatrix, subsystem: str) -> OperatorMatrix:
    """Transpose the indices of one named subsystem only."""
    ax = rho.layout.axis(subsystem)
    dims = list(rho.layout.dims)
    n = len(dims)
    arr = rho.mat.reshape(dims + dims)
    perm = list(range(2 * n))
    perm[ax], perm[n + ax] = perm[n + ax], perm[ax]
    out = arr.transpose(perm).reshape(rho.dim, rho.dim)
    return OperatorMatrix(rho.layout, out)


def _bipartition_dims(layout: HilbertLayout, labels_a, labels_b):
    labels_a, labels_b = tuple(labels_a), tuple(labels_b)
    if sorted(labels_a + labels_b) != sorted(layout.labels):
        raise ValueError(
            f"bipartition {labels_a} | {labels_b} does not partition {layout.labels}")
    da = int(np.prod([layout.dims[layout.axis(l)] for l in labels_a]))
    db = int(np.prod([layout.dims[layout.axis(l)] for l in labels_b]))
    return labels_a, labels_b, da, db


def _permute_to(rho: DensityMatrix, order) -> np.ndarray:
    """Density matrix entries with subsystems permuted into `order`."""
    dims = list(rho.layout.dims)
    n = len(dims)
    arr = rho.mat.reshape(dims + dims)
    perm = [rho.layout.axis(l) for l in order]
    arr = arr.transpose(perm + [n + p for p in perm])
    return arr.reshape(rho.dim, rho.dim)


def realign(rho: DensityMatrix, bipartition) -> np.ndarray:
    """Realignment map R[(i,i'),(j,j')] = rho[(i,j),(i',j')] for A|B split.

    Returns the rectangular (dA^2, dB^2) matrix; the entanglement criterion
    downstream looks at its trace norm.
    """
    labels_a, labels_b, da, db = _bipartition_dims(rho.layout, *bipartition)
    mat = _permute_to(rho, labels_a + labels_b)
    arr = mat.reshape(da, db, da, db)          # (i, j, i', j')
    return arr.transpose(0, 2, 1, 3).reshape(da * da, db * db)


def realign_inverse(r: np.ndarray, da: int, db: int) -> np.ndarray:
    """Inverse of :func:`realign` on plain arrays (used by property tests)."""
    arr = r.reshape(da, da, db, db).transpose(0, 2, 1, 3)
    return arr.reshape(da * db, da * db)


# ---------------------------------------------------------------------------
# spectral kernels


def expm_antihermitian(g: OperatorMatrix) -> OperatorMatrix:
    """Exponential of an anti-Hermitian generator; the result is unitary."""
    dev = np.abs(g.mat + g.mat.conj().T).max()
    if dev > TOL_HERMITICITY:
        raise ContractViolation(f"generator not anti-Hermitian: max |G + G^+| = {dev:.3e}")
    u = scipy.linalg.expm(g.mat)
    err = np.abs(u.conj().T @ u - np.eye(g.dim)).max()
    if err > TOL_HERMITICITY:
        raise ContractViolation(f"matrix exponential lost unitarity: {err:.3e}")
    return OperatorMatrix(g.layout, u)


def eig_hermitian(h: OperatorMatrix, vectors: bool = False):
    """Ascending eigenvalues (and eigenvectors on request) of a Hermitian operator."""
    dev = np.abs(h.mat - h.mat.conj().T).max()
    if dev > TOL_HERMITICITY:
        raise ContractViolation(f"operator not Hermitian: max |H - H^+| = {dev:.3e}")
    if vectors:
        vals, vecs = np.linalg.eigh(h.mat)
        return vals, vecs
    return np.linalg.eigvalsh(h.mat)


def singular_values(m: np.ndarray) -> np.ndarray:
    """Nonnegative singular values in descending order."""
    return np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)
