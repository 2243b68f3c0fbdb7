"""Candidate similarity graphs from single features.

Each candidate links samples whose values in one feature differ by at most
a threshold gamma, with gamma taken from the 1/16, 1/8, and 1/4 quantiles
of the pairwise absolute differences of that feature. Adjacency matrices
are stored sparse and symmetrically normalized with self-loops:
(D+I)^{-1/2} (A+I) (D+I)^{-1/2}.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from .errors import DataError, DenseGraphError
from .rng import derive_seed, substream

log = logging.getLogger("graphboost.graph")

QUANTILE_PS = (1 / 16, 1 / 8, 1 / 4)
DEFAULT_PAIR_CAP = 100_000
DEFAULT_EDGE_CAP = 50_000_000


@dataclass(frozen=True)
class ThresholdSet:
    """Quantile thresholds for one feature, nondecreasing in p."""

    feature: int
    gammas: tuple[float, float, float]


@dataclass
class SparseAdjacency:
    """Normalized adjacency in CSR form, self-loops included.

    Immutable after construction; safe to share across threads/processes.
    """

    n: int
    indptr: np.ndarray  # int32, length n+1
    indices: np.ndarray  # int32, sorted within each row
    values: np.ndarray  # float64
    _csr: scipy.sparse.csr_matrix | None = field(default=None, repr=False,
                                                 compare=False)

    def matmul(self, dense: np.ndarray) -> np.ndarray:
        if self._csr is None:
            self._csr = scipy.sparse.csr_matrix(
                (self.values, self.indices, self.indptr),
                shape=(self.n, self.n), copy=False)
        return self._csr @ dense

    def degrees(self) -> np.ndarray:
        """Edge degree per node, self-loop excluded."""
        return np.diff(self.indptr) - 1

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=np.float64)
        for i in range(self.n):
            out[i, self.indices[self.indptr[i]:self.indptr[i + 1]]] = \
                self.values[self.indptr[i]:self.indptr[i + 1]]
        return out


@dataclass
class CandidateGraph:
    feature: int
    gamma: float
    adjacency: SparseAdjacency
    edge_count: int  # undirected, self-loops not counted
    expert: bool = False


def quantile_thresholds(values: np.ndarray, pair_cap: int = DEFAULT_PAIR_CAP,
                        seed: int = 0, feature: int = 0) -> ThresholdSet:
    """Nearest-rank (lower) quantiles of the pairwise absolute differences.

    The p-quantile is the element at 1-based index ceil(p*L) of the
    ascending-sorted difference multiset. When the number of pairs exceeds
    ``pair_cap`` the multiset is estimated from pair_cap uniformly sampled
    index pairs, deterministically under ``seed``.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    n = v.size
    if n < 2:
        raise DataError("need at least 2 values for quantile thresholds")
    if not np.all(np.isfinite(v)):
        raise DataError("non-finite feature values")

    n_pairs = n * (n - 1) // 2
    if n_pairs <= pair_cap:
        iu = np.triu_indices(n, k=1)
        diffs = np.abs(v[iu[0]] - v[iu[1]])
    else:
        rng = substream(seed, "pairs", feature)
        i = rng.integers(0, n, size=pair_cap)
        j = rng.integers(0, n - 1, size=pair_cap)
        j = j + (j >= i)
        diffs = np.abs(v[i] - v[j])
    diffs.sort()
    L = diffs.size
    gammas = []
    for p in QUANTILE_PS:
        rank = min(max(int(np.ceil(p * L)), 1), L)
        gammas.append(float(diffs[rank - 1]))
    return ThresholdSet(feature, tuple(gammas))


def _window_bounds(v_sorted: np.ndarray, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    # The edge predicate compares the ROUNDED difference fl(|v_i - v_j|)
    # against gamma, which admits pairs whose true gap exceeds gamma by up
    # to half an ulp of the difference. Widen gamma by a few relative ulps
    # and the computed bounds by 2 absolute ulps; the exact filter
    # afterwards trims the superset back, so the result still equals the
    # O(N^2) definition.
    gamma_wide = gamma * (1.0 + 4.0 * np.finfo(np.float64).eps)
    lo_bound = v_sorted - gamma_wide
    lo_bound = np.nextafter(np.nextafter(lo_bound, -np.inf), -np.inf)
    hi_bound = v_sorted + gamma_wide
    hi_bound = np.nextafter(np.nextafter(hi_bound, np.inf), np.inf)
    lo = np.searchsorted(v_sorted, lo_bound, side="left")
    hi = np.searchsorted(v_sorted, hi_bound, side="right")
    return lo, hi


def build_adjacency(values: np.ndarray, gamma: float,
                    edge_cap: int | None = None,
                    feature: int = 0, expert: bool = False) -> CandidateGraph:
    """Graph with an edge wherever |v_i - v_j| <= gamma, i != j.

    Built by sorting and sweeping a window, then filtering with the exact
    predicate, so the result equals the O(N^2) definition while costing
    O(N log N + E).
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    n = v.size
    if gamma < 0:
        raise DataError("gamma must be non-negative")
    if not np.all(np.isfinite(v)):
        raise DataError("non-finite feature values")

    order = np.argsort(v, kind="stable").astype(np.int64)
    v_sorted = v[order]
    lo, hi = _window_bounds(v_sorted, gamma)
    total = int(np.sum(hi - lo))
    if edge_cap is not None and total - n > edge_cap:
        raise DenseGraphError(
            f"feature {feature}: ~{total - n} directed edges at gamma={gamma!r} "
            f"exceeds cap {edge_cap}")

    lens = hi - lo
    starts = np.concatenate(([0], np.cumsum(lens)[:-1]))
    flat = np.arange(total, dtype=np.int64) - np.repeat(starts, lens)
    cols_sorted = np.repeat(lo, lens) + flat
    rows_sorted = np.repeat(np.arange(n, dtype=np.int64), lens)
    keep = (np.abs(v_sorted[rows_sorted] - v_sorted[cols_sorted]) <= gamma) \
        & (rows_sorted != cols_sorted)
    rows = order[rows_sorted[keep]]
    cols = order[cols_sorted[keep]]
    adjacency = _assemble(rows, cols, n)
    edge_count = rows.size // 2
    return CandidateGraph(feature, float(gamma), adjacency, edge_count, expert)


def normalize_adjacency(rows: np.ndarray, cols: np.ndarray, n: int,
                        validate: bool = True) -> SparseAdjacency:
    """Normalize a symmetric 0/1 edge list (no self-loops) into CSR form."""
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    if rows.size != cols.size:
        raise DataError("edge arrays differ in length")
    if validate and rows.size:
        if np.any(rows == cols):
            raise DataError("self-loops not allowed in the edge list")
        fwd = np.lexsort((cols, rows))
        bwd = np.lexsort((rows, cols))
        if not (np.array_equal(rows[fwd], cols[bwd])
                and np.array_equal(cols[fwd], rows[bwd])):
            raise DataError("asymmetric edge list")
        dup = (np.diff(rows[fwd]) == 0) & (np.diff(cols[fwd]) == 0)
        if np.any(dup):
            raise DataError("duplicate edges in the edge list")
    return _assemble(rows, cols, n)


def _assemble(rows: np.ndarray, cols: np.ndarray, n: int) -> SparseAdjacency:
    """CSR with self-loops and symmetric normalization from directed pairs."""
    deg = np.bincount(rows, minlength=n).astype(np.int64)
    all_rows = np.concatenate([rows, np.arange(n, dtype=np.int64)])
    all_cols = np.concatenate([cols, np.arange(n, dtype=np.int64)])
    perm = np.lexsort((all_cols, all_rows))
    all_rows = all_rows[perm]
    all_cols = all_cols[perm]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg + 1, out=indptr[1:])
    d1 = (deg + 1).astype(np.float64)
    values = 1.0 / np.sqrt(d1[all_rows] * d1[all_cols])
    return SparseAdjacency(n, indptr.astype(np.int32),
                           all_cols.astype(np.int32), values)


def identity_adjacency(n: int) -> SparseAdjacency:
    """The edgeless graph: normalization reduces to the identity matrix."""
    empty = np.empty(0, dtype=np.int64)
    return _assemble(empty, empty, n)


def enumerate_candidates(X: np.ndarray,
                         expert_edges: list | tuple = (),
                         feature_names: list[str] | None = None,
                         feature_scales: np.ndarray | None = None,
                         pair_cap: int = DEFAULT_PAIR_CAP,
                         edge_cap: int | None = DEFAULT_EDGE_CAP,
                         seed: int = 0) -> list[CandidateGraph]:
    """All 3M quantile candidates plus one per expert edge spec.

    Ordering: feature index ascending, then gamma ascending (duplicates
    kept), expert candidates appended last. Expert thresholds are given in
    raw feature units and divided by ``feature_scales`` before use.
    Candidates whose edge count would exceed ``edge_cap`` are skipped with
    a warning.
    """
    X = np.asarray(X, dtype=np.float64)
    n, m = X.shape
    if m < 1:
        raise DataError("need at least one feature")
    candidates = []
    for j in range(m):
        ts = quantile_thresholds(X[:, j], pair_cap=pair_cap,
                                 seed=derive_seed(seed, "pairs", j), feature=j)
        for gamma in ts.gammas:
            try:
                candidates.append(build_adjacency(X[:, j], gamma,
                                                  edge_cap=edge_cap, feature=j))
            except DenseGraphError as exc:
                log.warning("skipping dense candidate: %s", exc)
    for spec in expert_edges:
        name, threshold = spec
        if isinstance(name, str):
            if feature_names is None or name not in feature_names:
                raise DataError(f"expert edge feature not found: {name!r}")
            j = feature_names.index(name)
        else:
            j = int(name)
            if not 0 <= j < m:
                raise DataError(f"expert edge feature index out of range: {j}")
        scale = 1.0 if feature_scales is None else float(feature_scales[j])
        gamma = float(threshold) / (scale if scale > 0 else 1.0)
        try:
            candidates.append(build_adjacency(X[:, j], gamma,
                                              edge_cap=edge_cap, feature=j,
                                              expert=True))
        except DenseGraphError as exc:
            log.warning("skipping dense expert candidate: %s", exc)
    return candidates
