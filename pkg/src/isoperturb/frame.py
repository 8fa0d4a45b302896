"""Pointwise derivative frames of a free embedding and their right inverse.

For an embedding F0 with q components on an n-dimensional grid, the frame
matrix A(x) stacks the n first-derivative rows and the n(n+1)/2 distinct
second-derivative rows (lexicographic pairs).  Freeness means the rows are
independent at every node; the right inverse Theta = A^T (A A^T)^{-1} then
prescribes inner products against those rows:

  A(x) . (Theta(x) . z) = z        for any row-coefficient vector z.

`apply_frame` uses this to build the unique combination E(h, f) whose
products with dF0 are h and with d2F0 are f.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField, SymTensorField, VecField, holder_norm, sym_indices
from .verify import oracle_derivative_matrix

_FREE_EPS_REL = 1e-6
_COND_WARN = 1e8
_IDENTITY_TOL = 1e-10


class NotFreeError(ValueError):
    """Raised when an embedding's derivative rows are (nearly) dependent."""

    def __init__(self, message, margin=0.0, node=-1):
        super().__init__(message)
        self.margin = float(margin)
        self.node = int(node)


@dataclass
class ImmersionFrame:
    """Per-node frame matrices of a free embedding.

    Attributes
    ----------
    grid : Grid
    A : ndarray, shape (nodes, n(n+3)/2, q)
        First- then second-derivative rows of the embedding.
    Theta : ndarray, shape (nodes, q, n(n+3)/2)
        Pointwise right inverse, A . Theta = I.
    freeness_margin : float
        Minimum over nodes of the smallest singular value of A.
    q : int
        Ambient dimension.
    identity_defect : float
        max over nodes of |A Theta - I| (verified <= 1e-10 at build).
    F0 : VecField
        The embedding the frame was built from.
    excluded_nodes : int
        Nodes whose sampled stencil rows are identically zero (only the
        four pole nodes of a 2-d disk grid, where a row/column holds a
        single node).  Theta is zero there, so fields produced through
        the frame vanish at those nodes; they are outside every cutoff
        support used by the solver and carry no data.
    """

    grid: Grid
    A: np.ndarray
    Theta: np.ndarray
    freeness_margin: float
    q: int
    identity_defect: float
    F0: VecField
    excluded_nodes: int = 0

    @property
    def rows(self):
        return self.A.shape[1]


def _row_count(dim):
    return dim * (dim + 3) // 2


def frame_matrix(source, grid: Grid = None):
    """Assemble (F0, A) from a chart (analytic rows) or VecField (stencils).

    Chart objects supply exact derivative rows; for plain sampled
    embeddings the rows come from fourth-order difference stencils, so the
    row error stays below the residual budget of downstream checks.
    """
    if isinstance(source, VecField):
        g = source.grid
        F0 = source
        # Nodes in segments too short to carry any stencil (single-node
        # rows/columns at the rim of a disk grid) get structurally empty
        # operator rows.  Track them from the matrices themselves so the
        # exclusion can never hide an embedding whose data degenerates.
        dead = np.zeros(g.num_nodes, dtype=bool)
        d1 = []
        for ax in range(g.dim):
            m = oracle_derivative_matrix(g, tuple(1 if a == ax else 0 for a in range(g.dim)))
            dead |= m.getnnz(axis=1) == 0
            d1.append(m @ F0.values)
        d2 = {}
        for i, j in sym_indices(g.dim):
            s = tuple((i == a) + (j == a) for a in range(g.dim))
            m = oracle_derivative_matrix(g, s)
            dead |= m.getnnz(axis=1) == 0
            d2[(i, j)] = m @ F0.values
        rows = d1 + [d2[p] for p in sym_indices(g.dim)]
    else:
        if grid is None:
            raise ValueError("frame_matrix: a grid is required when building from a chart")
        g = grid
        F0 = source.evaluate(g)
        dead = np.zeros(g.num_nodes, dtype=bool)
        rows = [source.d1(g, ax) for ax in range(g.dim)] + [
            source.d2(g, i, j) for i, j in sym_indices(g.dim)
        ]
    a = np.stack(rows, axis=1)  # (nodes, rows, q)
    need = _row_count(g.dim)
    if a.shape[2] < need:
        raise ValueError(
            f"frame dimension error: embedding has q={a.shape[2]} components but "
            f"n(n+3)/2 = {need} independent rows are required"
        )
    return F0, a, dead


def freeness_margin(source, grid: Grid = None) -> float:
    """Minimum over nodes of the smallest singular value of the frame."""
    _, a, dead = frame_matrix(source, grid)
    svals = np.linalg.svd(a, compute_uv=False)
    return float(np.min(svals[~dead, -1]))


def freeness_threshold(frame: ImmersionFrame) -> float:
    """The margin threshold the frame was accepted against (eps_free)."""
    row_norms = np.linalg.norm(frame.A, axis=2)
    return _FREE_EPS_REL * float(np.median(row_norms))


def build_frame(source, grid: Grid = None) -> ImmersionFrame:
    """Build the frame and its verified pointwise right inverse.

    Rejects embeddings whose margin falls at/below 1e-6 times the median
    row norm; warns when any node's normal matrix is badly conditioned.
    """
    F0, a, dead = frame_matrix(source, grid)
    live = ~dead
    svals = np.linalg.svd(a, compute_uv=False)
    live_idx = np.flatnonzero(live)
    node = int(live_idx[np.argmin(svals[live, -1])])
    margin = float(svals[node, -1])
    row_norms = np.linalg.norm(a[live], axis=2)
    eps_free = _FREE_EPS_REL * float(np.median(row_norms))
    if margin <= eps_free:
        raise NotFreeError(
            f"embedding is not free: margin {margin:.3e} <= eps_free {eps_free:.3e} "
            f"at node {node}",
            margin=margin,
            node=node,
        )
    aat = a[live] @ np.transpose(a[live], (0, 2, 1))
    cond = float(np.max(np.linalg.cond(aat)))
    if cond > _COND_WARN:
        warnings.warn(
            f"frame normal matrix condition {cond:.2e} exceeds {_COND_WARN:.0e}; "
            "results may lose digits",
            RuntimeWarning,
            stacklevel=2,
        )
    theta = np.zeros((a.shape[0], a.shape[2], a.shape[1]))
    theta[live] = np.transpose(np.linalg.solve(aat, a[live]), (0, 2, 1))
    ident = a[live] @ theta[live]
    eye = np.eye(a.shape[1])[None, :, :]
    defect = float(np.max(np.abs(ident - eye)))
    if defect > _IDENTITY_TOL:
        raise NotFreeError(
            f"frame inverse verification failed: max |A.Theta - I| = {defect:.3e}",
            margin=margin,
            node=node,
        )
    grid_out = F0.grid
    return ImmersionFrame(
        grid_out, a, theta, margin, a.shape[2], defect, F0,
        excluded_nodes=int(np.count_nonzero(dead)),
    )


def apply_frame(frame: ImmersionFrame, h, f: SymTensorField) -> VecField:
    """Field E(h,f) with dF0.E = h (per axis) and d2F0.E = f (per pair)."""
    g = frame.grid
    hv = h.values if hasattr(h, "values") else np.asarray(h, dtype=float)
    if hv.ndim == 1:
        hv = hv[:, None]
    fv = f.values if hasattr(f, "values") else np.asarray(f, dtype=float)
    if fv.ndim == 1:
        fv = fv[:, None]
    if hv.shape[0] != g.num_nodes or fv.shape[0] != g.num_nodes:
        raise ValueError("apply_frame: fields do not live on the frame's grid")
    if hv.shape[1] + fv.shape[1] != frame.rows:
        raise ValueError(
            f"apply_frame: need {frame.rows} row coefficients, got "
            f"{hv.shape[1]} + {fv.shape[1]}"
        )
    z = np.concatenate([hv, fv], axis=1)
    out = np.einsum("nqr,nr->nq", frame.Theta, z)
    return VecField(g, out)


def estimate_frame_gain(frame: ImmersionFrame, alpha=0.5, probes=16, seed=0) -> float:
    """Empirical lower bound for the frame gain |E(h,f)|/(|h|+|f|) in C^{2,a}.

    Max over seeded random probe pairs; deterministic for a fixed seed and
    monotone nondecreasing in the probe count.
    """
    if probes < 10:
        raise ValueError(f"estimate_frame_gain: need probes >= 10, got {probes}")
    g = frame.grid
    rng = np.random.default_rng(seed)
    x = g.coords[:, 0]
    y = g.coords[:, 1] if g.dim == 2 else None
    n_h = g.dim
    n_f = frame.rows - n_h
    best = 0.0
    for _ in range(probes):
        c = rng.uniform(-1.0, 1.0, (n_h + n_f, 3))
        cols = []
        for k in range(n_h + n_f):
            if g.dim == 1:
                cols.append(c[k, 0] + c[k, 1] * np.sin(2.0 * x) + c[k, 2] * x)
            else:
                cols.append(c[k, 0] + c[k, 1] * np.sin(x + y) + c[k, 2] * x * y)
        h = VecField(g, np.column_stack(cols[:n_h]))
        f = SymTensorField(g, np.column_stack(cols[n_h:]))
        denom = holder_norm(h, 2, alpha).value + holder_norm(f, 2, alpha).value
        if denom < 1e-14:
            continue
        e = apply_frame(frame, h, f)
        best = max(best, holder_norm(e, 2, alpha).value / denom)
    return best
