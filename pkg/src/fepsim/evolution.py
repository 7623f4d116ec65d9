"""One electron pass over the photonic system: channels and post-selection.

The production path never builds the three-way unitary.  Each cavity's
scattering unitary is reduced to per-shift photonic coefficients
(:class:`~fepsim.operators.LadderDecomposition`); the FSP phase between the
two interactions is inserted analytically, giving the photonic Kraus
operators of the traced-out electron channel.  The dense triple-space
evolution is kept as a small-instance oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DegeneratePostSelection, SizingError, TruncationError
from .operators import (
    CouplingConfig,
    ElectronLadder,
    LadderDecomposition,
    PhotonMode,
    fsp_operator,
    scattering_matrix,
)
from .tensor_core import (
    DEFAULT_DIM_CAP,
    DensityMatrix,
    HilbertLayout,
    OperatorMatrix,
    PureState,
    embed,
    kron,
    partial_trace,
)


@dataclass(frozen=True)
class KrausChannel:
    """Photonic Kraus operators of one electron pass, keyed by energy loss.

    `ops[k]` is the operation element for the electron having lost exactly
    k photon quanta (measured final ladder index -k relative to the input's
    zero-loss reference).  `interior` gives the photon dimensions over which
    the completeness deficit `leakage` was evaluated.
    """

    layout: HilbertLayout
    ops: dict = field(repr=False)
    electron: PureState = field(repr=False)
    phi: float = 0.0
    leakage: float = 0.0
    discarded_mass: float = 0.0
    interior: tuple = ()

    def losses(self) -> list[int]:
        return sorted(self.ops)

    def op(self, k: int) -> np.ndarray:
        return self.ops[k]

    def stacked(self) -> np.ndarray:
        """All elements as one (n_kraus, D, D) array, ordered by loss."""
        return np.stack([_as_dense(self.ops[k]) for k in self.losses()])

    def blocked(self):
        """Sector-blocked form of the elements, cached on first use.

        Every element only couples total-photon-number sectors (it changes
        n_1 + n_2 by a fixed offset per electron input component), so in a
        basis ordered by total occupation each element is a short list of
        small dense blocks.  Applying the channel through these blocks costs
        a small fraction of the dense triple product.  Returns None for
        layouts where the sector grading does not apply.
        """
        cached = self.__dict__.get("_blocked")
        if cached is None:
            cached = _build_blocked(self)
            object.__setattr__(self, "_blocked", cached)
        return cached if cached != () else None


# Kraus elements on spaces above this dimension are stored sparse; at large
# sizes the densified elements alone would dominate memory while the blocked
# application path never touches the dense form.
DENSE_OP_DIM_LIMIT = 1024


def _as_dense(op) -> np.ndarray:
    return op.toarray() if sp.issparse(op) else op


def _total_occupation(layout: HilbertLayout) -> np.ndarray | None:
    dims = layout.dims
    if len(dims) == 1:
        return np.arange(dims[0])
    if len(dims) == 2:
        return (np.arange(dims[0])[:, None] + np.arange(dims[1])[None, :]).ravel()
    return None


def _build_blocked(kraus: "KrausChannel"):
    s = _total_occupation(kraus.layout)
    if s is None:
        return ()  # sentinel for "not applicable"
    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    bounds = np.flatnonzero(np.diff(s_sorted)) + 1
    starts = np.concatenate(([0], bounds))
    stops = np.concatenate((bounds, [len(s_sorted)]))
    slices = [slice(int(a), int(b)) for a, b in zip(starts, stops)]
    sector_of_row = np.searchsorted(starts, np.arange(len(s_sorted)), "right") - 1
    per_op = {}
    for k in sorted(kraus.ops):
        op = kraus.ops[k]
        blocks = []
        if sp.issparse(op):
            opp = op.tocsr()[order].tocsc()[:, order]
            for s_sl in slices:
                col = opp[:, s_sl].tocsr()
                if col.nnz == 0:
                    continue
                hit_rows = np.flatnonzero(np.diff(col.indptr) > 0)
                for ti in np.unique(sector_of_row[hit_rows]):
                    t_sl = slices[ti]
                    blocks.append((t_sl, s_sl, col[t_sl].toarray()))
        else:
            opp = op[np.ix_(order, order)]
            for s_sl in slices:
                col = opp[:, s_sl]
                hit_rows = np.flatnonzero(np.abs(col).max(axis=1) > 0.0)
                for ti in np.unique(sector_of_row[hit_rows]):
                    t_sl = slices[ti]
                    blocks.append((t_sl, s_sl, np.ascontiguousarray(col[t_sl])))
        if blocks:
            # all target rows of one element sit in one contiguous sector
            # range, so the A rho intermediate only needs those rows
            t_start = min(b[0].start for b in blocks)
            t_stop = max(b[0].stop for b in blocks)
        else:
            t_start = t_stop = 0
        per_op[k] = (t_start, t_stop, blocks)
    return order, slices, per_op


def _electron_amplitudes(electron: PureState, ladder: ElectronLadder):
    """Nonzero (k, amplitude) pairs of the electron input on the ladder."""
    if electron.dim != ladder.dim:
        raise ValueError("electron state dimension does not match the ladder")
    out = []
    for k in ladder.ks():
        c = electron.vec[ladder.index(k)]
        if c != 0:
            out.append((int(k), complex(c)))
    return out


def _completeness_deficit(ops, dim) -> sp.csr_matrix:
    """sum A^+ A - I as a sparse matrix (never densified at large dims)."""
    acc = sp.csr_matrix((dim, dim), dtype=complex)
    for op in ops:
        a = op.tocsr() if sp.issparse(op) else sp.csr_matrix(op)
        acc = acc + a.conj().T @ a
    return (acc - sp.eye(dim, dtype=complex, format="csr")).tocsr()


def _masked_max(mat: sp.csr_matrix, mask: np.ndarray) -> float:
    """Largest |entry| of the sub-matrix selected by a boolean index mask."""
    idx = np.flatnonzero(mask)
    sub = mat[idx].tocsc()[:, idx]
    return float(np.abs(sub.data).max()) if sub.nnz else 0.0


def measurement_effects(kraus: "KrausChannel") -> dict:
    """Effects A_k^+ A_k per loss, for cheap repeated P(k) evaluation.

    Effects are dense for dense channels and sparse for sparse ones.
    """
    out = {}
    for k, op in kraus.ops.items():
        if sp.issparse(op):
            out[k] = (op.conj().T @ op).tocsr()
        else:
            a = sp.csr_matrix(op)
            out[k] = (a.conj().T @ a).toarray()
    return out


def two_cavity_kraus_element(
    dec1: LadderDecomposition,
    dec2: LadderDecomposition,
    electron: PureState,
    ladder: ElectronLadder,
    phi: float,
    loss: int,
) -> np.ndarray:
    """Single Kraus element for net electron energy loss `loss`.

    Interaction order is cavity 1, FSP, cavity 2; the FSP phase acts on the
    intermediate electron index.  Layout is ph1 (x) ph2 with ph1 slow.
    """
    d1, d2 = dec1.mode.dim, dec2.mode.dim
    acc = sp.csr_matrix((d1 * d2, d1 * d2), dtype=complex)
    final = -loss
    sparse1 = {k: sp.csr_matrix(c) for k, c in dec1.coeffs.items()}
    sparse2 = {k: sp.csr_matrix(c) for k, c in dec2.coeffs.items()}
    for j, c_j in _electron_amplitudes(electron, ladder):
        for k1 in dec1.shifts():
            k2 = j - k1 - final
            if k2 not in dec2.coeffs:
                continue
            inter = j - k1
            phase = np.exp(-1j * phi * inter * inter)
            acc = acc + (c_j * phase) * sp.kron(sparse1[k1], sparse2[k2],
                                                format="csr")
    return acc.toarray()


def build_two_cavity_kraus(
    dec1: LadderDecomposition,
    dec2: LadderDecomposition,
    electron: PureState,
    ladder: ElectronLadder,
    phi: float = 0.0,
    drop_tol: float = 1e-12,
    leakage_bound: float = 1e-8,
    interior: tuple | None = None,
) -> KrausChannel:
    """Kraus set of the traced-out electron channel for one pass.

    For an electron input sum_j c_j |j>, the element at final ladder index l
    is  K_l = sum_j c_j sum_k e^{-i phi (j-k)^2} C1_k (x) C2_{j-k-l};
    elements are keyed by the net energy loss -l.  Elements with max-norm
    below `drop_tol` are discarded and their squared mass reported.
    """
    d1, d2 = dec1.mode.dim, dec2.mode.dim
    if interior is None:
        interior = (d1, d2)
    sparse1 = {k: sp.csr_matrix(c) for k, c in dec1.coeffs.items()}
    sparse2 = {k: sp.csr_matrix(c) for k, c in dec2.coeffs.items()}
    acc = {}
    for j, c_j in _electron_amplitudes(electron, ladder):
        for k1, s1 in sparse1.items():
            inter = j - k1
            phase = c_j * np.exp(-1j * phi * inter * inter)
            for k2, s2 in sparse2.items():
                loss = -(j - k1 - k2)
                term = phase * sp.kron(s1, s2, format="csr")
                acc[loss] = acc[loss] + term if loss in acc else term
    keep_dense = d1 * d2 <= DENSE_OP_DIM_LIMIT
    ops = {}
    discarded = 0.0
    for k in sorted(acc):
        mat = acc[k].tocsr()
        mx = float(np.abs(mat.data).max()) if mat.nnz else 0.0
        if mx > drop_tol:
            ops[k] = mat.toarray() if keep_dense else mat
        else:
            discarded += mx * mx
    deficit = _completeness_deficit(ops.values(), d1 * d2)
    n1 = np.repeat(np.arange(d1), d2)
    n2 = np.tile(np.arange(d2), d1)
    leak = _masked_max(deficit, (n1 < interior[0]) & (n2 < interior[1]))
    layout = dec1.mode.layout.concat(dec2.mode.layout)
    if leak > leakage_bound:
        raise TruncationError(
            f"Kraus completeness deficit {leak:.3e} > {leakage_bound:.1e} on the "
            f"interior block {interior}; enlarge the photon spaces",
            suggested_n_max=max(d1, d2) + 8)
    return KrausChannel(layout, ops, electron, phi, leak, discarded, interior)


def build_single_cavity_kraus(
    dec: LadderDecomposition,
    electron: PureState,
    ladder: ElectronLadder,
    drop_tol: float = 1e-12,
    leakage_bound: float = 1e-8,
    interior_dim: int | None = None,
) -> KrausChannel:
    """Kraus set for one electron pass over a single cavity (no FSP involved)."""
    d = dec.mode.dim
    if interior_dim is None:
        interior_dim = d
    pairs = _electron_amplitudes(electron, ladder)
    losses = {-(j - k) for j, _ in pairs for k in dec.shifts()}
    ops = {}
    discarded = 0.0
    for loss in sorted(losses):
        final = -loss
        mat = np.zeros((d, d), dtype=complex)
        for j, c_j in pairs:
            k = j - final
            if k in dec.coeffs:
                mat += c_j * dec.coeffs[k]
        mx = np.abs(mat).max()
        if mx > drop_tol:
            ops[loss] = mat
        else:
            discarded += mx * mx
    deficit = _completeness_deficit(ops.values(), d)
    leak = _masked_max(deficit, np.arange(d) < interior_dim)
    if leak > leakage_bound:
        raise TruncationError(
            f"Kraus completeness deficit {leak:.3e} > {leakage_bound:.1e}",
            suggested_n_max=d + 8)
    return KrausChannel(dec.mode.layout, ops, electron, 0.0, leak, discarded,
                        (interior_dim,))


def apply_channel(rho: DensityMatrix, kraus: KrausChannel) -> DensityMatrix:
    """One application of rho -> sum_k A_k rho A_k^+."""
    if rho.layout != kraus.layout:
        raise ValueError(f"state layout {rho.layout} != channel layout {kraus.layout}")
    d = rho.dim
    blocked = kraus.blocked()
    if blocked is None:
        stack = kraus.stacked()                          # (n, d, d)
        tmp = (stack.reshape(-1, d) @ rho.mat).reshape(-1, d, d)
        left = tmp.transpose(1, 0, 2).reshape(d, -1)
        right = stack.conj().transpose(0, 2, 1).reshape(-1, d)
        out = left @ right
    else:
        order, _, per_op = blocked
        rho_p = np.ascontiguousarray(rho.mat[np.ix_(order, order)])
        out_p = np.zeros((d, d), dtype=complex)
        for t_start, t_stop, blocks in per_op.values():
            if not blocks:
                continue
            tmp = np.zeros((t_stop - t_start, d), dtype=complex)
            for t_sl, s_sl, b in blocks:                  # tmp = A_k rho
                tmp[t_sl.start - t_start:t_sl.stop - t_start] += \
                    b @ rho_p[s_sl]
            for t_sl, s_sl, b in blocks:                  # out += tmp A_k^+
                out_p[t_start:t_stop, t_sl] += tmp[:, s_sl] @ b.conj().T
        out = np.empty_like(out_p)
        out[np.ix_(order, order)] = out_p
    out = (out + out.conj().T) / 2.0
    return DensityMatrix(rho.layout, out, normalized=False)


@dataclass(frozen=True)
class ChannelTrajectory:
    """States of the photonic system after m = 0..M electron passes."""

    states: list = field(repr=False)
    config: CouplingConfig = None
    trace_deficits: list = field(default_factory=list)
    leakage: float = 0.0

    def __len__(self):
        return len(self.states)


def channel_steps(
    rho0: DensityMatrix,
    kraus: KrausChannel,
    m_electrons: int,
    deficit_bound: float = 1e-6,
):
    """Yield (m, state, cumulative trace deficit) for m = 0..m_electrons.

    Streams the trajectory one state at a time, so observables can be
    computed per step without holding every state in memory.  Raises when
    the cumulative trace deficit exceeds `deficit_bound` (truncation has
    started to eat the state).
    """
    if m_electrons < 0:
        raise ValueError("electron count must be nonnegative")
    rho = rho0
    yield 0, rho0, abs(rho0.trace() - 1.0)
    for step in range(1, m_electrons + 1):
        rho = apply_channel(rho, kraus)
        deficit = abs(rho.trace() - 1.0)
        if deficit > deficit_bound:
            raise TruncationError(
                f"cumulative trace deficit {deficit:.3e} > {deficit_bound:.1e} "
                f"after {step} electrons; enlarge the photon spaces",
                suggested_n_max=max(kraus.layout.dims) + 8)
        yield step, rho, deficit


def iterate_channel(
    rho0: DensityMatrix,
    kraus: KrausChannel,
    m_electrons: int,
    config: CouplingConfig | None = None,
    deficit_bound: float = 1e-6,
) -> ChannelTrajectory:
    """Iterate the channel, keeping every intermediate state.

    Convenience wrapper over :func:`channel_steps` for small instances.
    """
    states, deficits = [], []
    for _, rho, deficit in channel_steps(rho0, kraus, m_electrons, deficit_bound):
        states.append(rho)
        deficits.append(deficit)
    return ChannelTrajectory(states, config, deficits, kraus.leakage)


def post_select(rho0, kraus: KrausChannel, k: int, p_floor: float = 1e-14):
    """Condition on the electron having lost exactly k quanta.

    Returns the normalized post-measurement state and the outcome probability.
    A :class:`PureState` input yields a :class:`PureState` output.
    """
    if k not in kraus.ops:
        raise DegeneratePostSelection(
            f"loss {k} outside the retained Kraus window {kraus.losses()[:1]}..."
            f"{kraus.losses()[-1:]}")
    a_k = kraus.ops[k]
    if isinstance(rho0, PureState):
        if rho0.layout != kraus.layout:
            raise ValueError("state layout does not match the channel")
        v = a_k @ rho0.vec
        p = float(np.vdot(v, v).real)
        if p < p_floor:
            raise DegeneratePostSelection(f"P({k}) = {p:.3e} below {p_floor:.0e}")
        return PureState(kraus.layout, v / math.sqrt(p)), p
    if rho0.layout != kraus.layout:
        raise ValueError("state layout does not match the channel")
    if sp.issparse(a_k):
        # rho is Hermitian, so A rho A^+ = (A (A rho)^+)^+ uses only
        # sparse-times-dense products
        out = np.asarray((a_k @ (a_k @ rho0.mat).conj().T).conj().T)
    else:
        out = a_k @ rho0.mat @ a_k.conj().T
    p = float(out.trace().real)
    if p < p_floor:
        raise DegeneratePostSelection(f"P({k}) = {p:.3e} below {p_floor:.0e}")
    out = (out + out.conj().T) / (2.0 * p)
    return DensityMatrix(kraus.layout, out, normalized=False), p


def loss_probabilities(rho0, kraus: KrausChannel) -> dict:
    """P(k) table over the retained Kraus window."""
    out = {}
    if isinstance(rho0, PureState):
        for k, a_k in kraus.ops.items():
            v = a_k @ rho0.vec
            out[k] = float(np.vdot(v, v).real)
    else:
        for k, a_k in kraus.ops.items():
            if sp.issparse(a_k):
                out[k] = float(np.real(
                    a_k.multiply((a_k @ rho0.mat).conj()).sum()))
            else:
                out[k] = float(np.einsum("ij,jk,ik->", a_k, rho0.mat,
                                         a_k.conj()).real)
    return out


# ---------------------------------------------------------------------------
# full triple-space oracle


def _as_density(state) -> DensityMatrix:
    if isinstance(state, PureState):
        return state.density_matrix()
    return state


def joint_evolve_full(
    ladder: ElectronLadder,
    mode1: PhotonMode,
    mode2: PhotonMode,
    config: CouplingConfig,
    rho_e,
    rho1,
    rho2,
    dim_cap: int = DEFAULT_DIM_CAP,
) -> DensityMatrix:
    """Exact conjugation by S2 U_phi S1 on the dense e (x) ph1 (x) ph2 space.

    Small instances only; this is the oracle the factorized channel is
    checked against, and the route to electron-marginal observables.
    """
    total = ladder.dim * mode1.dim * mode2.dim
    if total > dim_cap:
        raise SizingError(f"triple space dimension {total} > cap {dim_cap}")
    rho_e, rho1, rho2 = _as_density(rho_e), _as_density(rho1), _as_density(rho2)
    layout = ladder.layout.concat(mode1.layout).concat(mode2.layout)
    s1, _ = scattering_matrix(ladder, mode1, config.g_q, leakage_bound=math.inf)
    s2, _ = scattering_matrix(ladder, mode2, config.g_q, leakage_bound=math.inf)
    u1 = embed(s1, layout).mat
    u2 = embed(s2, layout).mat
    u_phi = embed(fsp_operator(ladder, config.phi), layout).mat
    u = u2 @ u_phi @ u1
    rho = np.kron(np.kron(rho_e.mat, rho1.mat), rho2.mat)
    out = u @ rho @ u.conj().T
    out = (out + out.conj().T) / 2.0
    return DensityMatrix(layout, out, normalized=False)


def electron_spectrum(rho_full: DensityMatrix, electron_label: str = "e") -> np.ndarray:
    """Probability over the electron ladder index, from the full-space state."""
    red = partial_trace(rho_full, [electron_label])
    p = np.real(np.diag(red.mat)).copy()
    total = p.sum()
    if abs(total - 1.0) > 1e-8 and rho_full.normalized:
        raise TruncationError(f"electron spectrum sums to {total:.12g}, not 1")
    return p


def single_pass_loss_spectrum(dec: LadderDecomposition, photon_state: PureState) -> dict:
    """Electron loss distribution after one pass of a zero-loss electron.

    P(k) = ||C_k |psi>||^2, computed directly from the photonic coefficients;
    equivalent to the electron marginal of the full evolution but without
    building the joint space.
    """
    out = {}
    for k, c in dec.coeffs.items():
        v = c @ photon_state.vec
        out[k] = float(np.vdot(v, v).real)
    return out
