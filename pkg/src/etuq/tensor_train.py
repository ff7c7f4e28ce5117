"""Tensor-train decomposition, maxvol pivoting and cross approximation.

A tensor A(i_1, ..., i_N) is stored as a chain of order-3 cores
G_n of shape (R_{n-1}, I_n, R_n) with R_0 = R_N = 1, so that

    A(i_1, ..., i_N) = G_1(i_1) G_2(i_2) ... G_N(i_N)

as a product of R_{n-1} x R_n matrices.  Unfoldings and dense expansions
use the convention that the first index runs fastest.

Two cross approximation drivers are provided:

  * ``tt_cross_fixed_rank`` -- alternating maxvol sweeps at prescribed
    ranks, touching only fiber crosses of the function oracle.
  * ``greedy_tt_cross``     -- rank-revealing variant: per sweep and per
    interface, one new pivot is added where the residual on the two-mode
    supercore is largest, and the supercore is split back into two cores
    by a truncated SVD (decimation).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "TTTensor",
    "FunctionOracle",
    "tt_eval",
    "tt_full",
    "tt_from_dense",
    "unfold",
    "maxvol",
    "matrix_cross",
    "truncated_svd",
    "tt_cross_fixed_rank",
    "greedy_tt_cross",
    "rank_one_weights",
    "tt_dot",
    "tt_hadamard",
    "tt_save_json",
    "tt_load_json",
    "CrossDiagnostics",
]

DENSE_CAP = 10**7
HADAMARD_RANK_CAP = 4096
TT_FORMAT_VERSION = 1


@dataclass
class TTTensor:
    """Tensor in TT format: cores[n] has shape (R_{n-1}, I_n, R_n)."""

    cores: list[np.ndarray]

    def __post_init__(self):
        self.cores = [np.asarray(c, dtype=float) for c in self.cores]
        r_prev = 1
        for n, c in enumerate(self.cores):
            if c.ndim != 3:
                raise ValueError(f"core {n} must be order-3, got shape {c.shape}")
            if c.shape[0] != r_prev:
                raise ValueError(
                    f"core {n}: left rank {c.shape[0]} != previous right rank {r_prev}"
                )
            r_prev = c.shape[2]
        if self.cores[0].shape[0] != 1 or self.cores[-1].shape[2] != 1:
            raise ValueError("boundary ranks must be 1")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[2] for c in self.cores)

    @property
    def ndim(self) -> int:
        return len(self.cores)

    @property
    def storage(self) -> int:
        return sum(c.size for c in self.cores)


@dataclass
class CrossDiagnostics:
    """Per-sweep accounting of a cross approximation run."""

    seed: int | None = None
    sweeps_run: int = 0
    converged: bool = False
    calls_per_sweep: list[int] = field(default_factory=list)
    max_rank_per_sweep: list[int] = field(default_factory=list)
    residual_per_sweep: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "sweeps_run": self.sweeps_run,
                "converged": self.converged,
                "calls_per_sweep": self.calls_per_sweep,
                "max_rank_per_sweep": self.max_rank_per_sweep,
                "residual_per_sweep": self.residual_per_sweep,
            },
            indent=2,
        )


class FunctionOracle:
    """Caching wrapper of a multi-index -> scalar function.

    Every distinct multi-index triggers exactly one underlying evaluation,
    also under concurrent access; the counter reports distinct keys only.
    """

    def __init__(self, dims, fn):
        self.dims = tuple(int(d) for d in dims)
        self.fn = fn
        self._cache: dict[tuple[int, ...], float] = {}
        self._lock = threading.Lock()
        self._inflight: dict[tuple[int, ...], threading.Event] = {}

    @property
    def calls(self) -> int:
        return len(self._cache)

    def __call__(self, idx) -> float:
        key = tuple(int(i) for i in idx)
        if len(key) != len(self.dims) or any(
            not 0 <= k < d for k, d in zip(key, self.dims)
        ):
            raise IndexError(f"index {key} out of range for dims {self.dims}")
        with self._lock:
            if key in self._cache:
                return self._cache[key]
            ev = self._inflight.get(key)
            if ev is None:
                ev = threading.Event()
                self._inflight[key] = ev
                owner = True
            else:
                owner = False
        if not owner:
            ev.wait()
            with self._lock:
                return self._cache[key]
        val = float(self.fn(key))
        with self._lock:
            self._cache[key] = val
            del self._inflight[key]
        ev.set()
        return val

    def many(self, indices) -> np.ndarray:
        return np.array([self(idx) for idx in indices], dtype=float)


# ---------------------------------------------------------------------------
# Basic TT operations


def tt_eval(tt: TTTensor, idx) -> float:
    """Evaluate one entry by chaining the core slices."""
    idx = tuple(int(i) for i in idx)
    if len(idx) != tt.ndim:
        raise IndexError("index length mismatch")
    for n, (i, d) in enumerate(zip(idx, tt.dims)):
        if not 0 <= i < d:
            raise IndexError(f"mode {n}: index {i} out of range [0, {d})")
    v = tt.cores[0][:, idx[0], :]
    for n in range(1, tt.ndim):
        v = v @ tt.cores[n][:, idx[n], :]
    return float(v[0, 0])


def tt_full(tt: TTTensor) -> np.ndarray:
    """Expand to a dense array (first index fastest); test/oracle use only."""
    size = int(np.prod(tt.dims))
    if size > DENSE_CAP:
        raise MemoryError(f"dense expansion of {size} entries exceeds cap")
    # result[(i_1,...,i_n), r_n], with i_1 fastest in the flattened index
    res = tt.cores[0][0]  # (I_1, R_1)
    for n in range(1, tt.ndim):
        c = tt.cores[n]  # (R, I, R')
        res = np.einsum("kr,riq->kiq", res, c).reshape(-1, c.shape[2], order="F")
    return res[:, 0].reshape(tt.dims, order="F")


def unfold(a: np.ndarray, n: int) -> np.ndarray:
    """n-th unfolding: modes 1..n as rows (first index fastest)."""
    a = np.asarray(a)
    if not 1 <= n <= a.ndim - 1:
        raise ValueError(f"unfolding index {n} out of range for order {a.ndim}")
    rows = int(np.prod(a.shape[:n]))
    return a.reshape(rows, -1, order="F")


def tt_from_dense(a: np.ndarray, tol: float = 1e-14, rmax: int | None = None) -> TTTensor:
    """Exact (or truncated) TT decomposition via sequential SVD; oracle use."""
    a = np.asarray(a, dtype=float)
    dims = a.shape
    if a.size > DENSE_CAP:
        raise MemoryError("dense tensor exceeds cap")
    cores = []
    r_prev = 1
    mat = a.reshape(dims[0], -1, order="F")
    for n in range(len(dims) - 1):
        mat = mat.reshape(r_prev * dims[n], -1, order="F")
        u, s, vt, r = truncated_svd(mat, tol, rmax or min(mat.shape))
        if r == 0:  # zero tensor
            r = 1
            u = np.zeros((mat.shape[0], 1))
            s = np.zeros(1)
            vt = np.zeros((1, mat.shape[1]))
        cores.append(u.reshape(r_prev, dims[n], r, order="F"))
        mat = s[:, None] * vt
        r_prev = r
    cores.append(mat.reshape(r_prev, dims[-1], 1, order="F"))
    return TTTensor(cores)


def rank_one_weights(weight_vectors) -> TTTensor:
    """Rank-1 TT whose entries are the product of per-mode weights."""
    cores = []
    for w in weight_vectors:
        w = np.asarray(w, dtype=float)
        if w.size == 0:
            raise ValueError("weight vectors must be nonempty")
        cores.append(w.reshape(1, -1, 1))
    return TTTensor(cores)


def tt_dot(a: TTTensor, b: TTTensor) -> float:
    """Inner product <a, b> by sequential core contraction."""
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    m = np.ones((1, 1))
    for ca, cb in zip(a.cores, b.cores):
        # m[ra, rb] -> sum over i of ca[ra,i,:]^T m cb[rb,i,:]
        m = np.einsum("ab,aip,biq->pq", m, ca, cb, optimize=True)
    return float(m[0, 0])


def tt_hadamard(a: TTTensor, b: TTTensor) -> TTTensor:
    """Elementwise product; interface ranks multiply."""
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    cores = []
    for ca, cb in zip(a.cores, b.cores):
        ra, i, rb = ca.shape[0] * cb.shape[0], ca.shape[1], ca.shape[2] * cb.shape[2]
        if ra > HADAMARD_RANK_CAP or rb > HADAMARD_RANK_CAP:
            raise MemoryError("Hadamard product rank exceeds cap")
        c = np.einsum("aib,cid->acibd", ca, cb).reshape(ra, i, rb)
        cores.append(c)
    return TTTensor(cores)


# ---------------------------------------------------------------------------
# Matrix-level building blocks


def maxvol(m: np.ndarray, tol: float = 1e-2, max_iters: int = 200) -> np.ndarray:
    """Quasi-maximal-volume row selection of a tall full-rank matrix.

    Returns R row indices such that every entry of m @ inv(m[rows]) has
    modulus <= 1 + tol.  Seeded from a pivoted LU, then improved by row
    swaps; ties break toward the lowest linear index.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError("maxvol expects a matrix")
    n_rows, r = m.shape
    if n_rows < r:
        raise ValueError(f"need at least {r} rows, got {n_rows}")
    if n_rows == r:
        rows = np.arange(r)
        _check_dominance(m, rows, tol)
        return rows

    # Pivoted-LU row seed.
    p, _, _ = scipy.linalg.lu(m, check_finite=False)
    rows = np.argmax(p[:, :r], axis=0)

    sub = m[rows, :]
    try:
        coeff = np.linalg.solve(sub.T, m.T).T  # m @ inv(sub)
    except np.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError(
            f"rank-deficient {n_rows}x{r} matrix in maxvol seed"
        ) from err

    for _ in range(max_iters):
        flat = np.argmax(np.abs(coeff))
        i, j = np.unravel_index(flat, coeff.shape)
        if np.abs(coeff[i, j]) <= 1.0 + tol:
            break
        # Swap row rows[j] for row i; rank-1 update of the coefficients.
        col = coeff[:, j].copy()
        row_diff = coeff[i, :].copy()
        row_diff[j] -= 1.0
        coeff -= np.outer(col, row_diff) / coeff[i, j]
        rows[j] = i
    else:
        raise np.linalg.LinAlgError("maxvol did not converge; matrix ill-conditioned")

    rows = np.array(sorted(rows))
    _check_dominance(m, rows, tol)
    return rows


def _check_dominance(m: np.ndarray, rows: np.ndarray, tol: float) -> None:
    sub = m[rows, :]
    try:
        coeff = np.linalg.solve(sub.T, m.T).T
    except np.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError("singular maxvol submatrix") from err
    bound = np.abs(coeff).max()
    if bound > 1.0 + max(tol, 1e-2) + 1e-9:
        raise np.linalg.LinAlgError(
            f"maxvol postcondition violated: dominance bound {bound:.6g}"
        )


def truncated_svd(
    m: np.ndarray, tol: float, rmax: int | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """SVD truncated at the smallest rank with tail l2-norm <= tol*||S||."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    total = np.linalg.norm(s)
    if total == 0.0:
        return u[:, :0], s[:0], vt[:0, :], 0
    tails = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]  # tails[r] = ||s[r:]||
    tails = np.append(tails, 0.0)
    r = int(np.searchsorted(-tails, -tol * total))  # smallest r with tail <= tol*total
    r = max(min(r, rmax if rmax is not None else len(s)), 0)
    return u[:, :r], s[:r], vt[:r, :], r


def matrix_cross(oracle: FunctionOracle, rank: int, iters: int = 5):
    """Skeleton (cross) approximation of a 2D function oracle.

    Returns (row_set, col_set, C, core, R) with the approximation
    C @ inv(core) @ R, where C = A(:, cols), R = A(rows, :), and
    core = A(rows, cols).
    """
    if len(oracle.dims) != 2:
        raise ValueError("matrix_cross expects a 2D oracle")
    n1, n2 = oracle.dims
    if rank > min(n1, n2):
        raise ValueError(f"rank {rank} exceeds min dimension {min(n1, n2)}")

    cols = np.arange(rank)
    rows = np.arange(rank)
    for _ in range(iters):
        c_block = np.array([[oracle((i, j)) for j in cols] for i in range(n1)])
        new_rows = maxvol(c_block)
        r_block = np.array([[oracle((i, j)) for j in range(n2)] for i in new_rows])
        new_cols = maxvol(r_block.T)
        if np.array_equal(new_rows, rows) and np.array_equal(new_cols, cols):
            break
        rows, cols = new_rows, new_cols

    c_mat = np.array([[oracle((i, j)) for j in cols] for i in range(n1)])
    r_mat = np.array([[oracle((i, j)) for j in range(n2)] for i in rows])
    core = c_mat[rows, :]
    if np.linalg.matrix_rank(core) < rank:
        raise np.linalg.LinAlgError(
            "singular cross core submatrix; try a different rank"
        )
    return rows, cols, c_mat, core, r_mat


# ---------------------------------------------------------------------------
# TT-cross drivers


def _interp_factor(c_mat: np.ndarray, core: np.ndarray) -> np.ndarray:
    """Solve c_mat @ inv(core) robustly (least-squares fallback)."""
    try:
        return np.linalg.solve(core.T, c_mat.T).T
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(core.T, c_mat.T, rcond=None)[0].T


def _eval_block(oracle, prefixes, mids, suffixes) -> np.ndarray:
    """Oracle values on (prefix x mid x suffix), shape (P, M, S)."""
    out = np.empty((len(prefixes), len(mids), len(suffixes)))
    for a, p in enumerate(prefixes):
        for b, m in enumerate(mids):
            for c, s in enumerate(suffixes):
                out[a, b, c] = oracle(p + (m,) + s)
    return out


def _assemble_tt(oracle, left_sets, right_sets) -> TTTensor:
    """TT cores from the nested-cross interpolation formula."""
    ndim = len(oracle.dims)
    cores = []
    for n in range(ndim):
        prefixes = left_sets[n - 1] if n > 0 else [()]
        suffixes = right_sets[n] if n < ndim - 1 else [()]
        block = _eval_block(oracle, prefixes, range(oracle.dims[n]), suffixes)
        if n < ndim - 1:
            core_mat = np.array(
                [[oracle(p + s) for s in suffixes] for p in left_sets[n]]
            )
            flat = block.reshape(-1, len(suffixes))
            flat = _interp_factor(flat, core_mat)
            cores.append(flat.reshape(len(prefixes), oracle.dims[n], -1))
        else:
            cores.append(block)
    return TTTensor(cores)


def tt_cross_fixed_rank(
    oracle: FunctionOracle,
    ranks,
    sweeps: int = 4,
    seed: int = 0,
) -> TTTensor:
    """Alternating maxvol TT-cross at prescribed interface ranks.

    ranks is the full vector (R_0, ..., R_N) with R_0 = R_N = 1, or just
    the interior interfaces (R_1, ..., R_{N-1}).
    """
    dims = oracle.dims
    ndim = len(dims)
    ranks = list(int(r) for r in ranks)
    if len(ranks) == ndim + 1:
        if ranks[0] != 1 or ranks[-1] != 1:
            raise ValueError("boundary ranks must be 1")
        ranks = ranks[1:-1]
    if len(ranks) != ndim - 1:
        raise ValueError(f"need {ndim - 1} interface ranks, got {len(ranks)}")
    for n, r in enumerate(ranks):
        cap = min(int(np.prod(dims[: n + 1])), int(np.prod(dims[n + 1 :])))
        if not 1 <= r <= cap:
            raise ValueError(f"interface {n + 1}: rank {r} not in [1, {cap}]")

    rng = np.random.default_rng(seed)
    # Random but valid initial suffix sets (distinct suffixes per interface).
    right_sets: list[list[tuple[int, ...]]] = []
    for n in range(ndim - 1):
        chosen: set[tuple[int, ...]] = set()
        while len(chosen) < ranks[n]:
            chosen.add(tuple(int(rng.integers(d)) for d in dims[n + 1 :]))
        right_sets.append(sorted(chosen))
    left_sets: list[list[tuple[int, ...]]] = [[] for _ in range(ndim - 1)]

    for _ in range(sweeps):
        # Left-to-right: refresh prefix sets via maxvol on fiber crosses.
        for n in range(ndim - 1):
            prefixes = left_sets[n - 1] if n > 0 else [()]
            block = _eval_block(oracle, prefixes, range(dims[n]), right_sets[n])
            mat = block.reshape(-1, len(right_sets[n]))
            q, _ = np.linalg.qr(mat)
            try:
                sel = maxvol(q)
            except np.linalg.LinAlgError as err:
                raise np.linalg.LinAlgError(
                    f"cross submatrix at interface {n + 1} is rank deficient; "
                    "the prescribed ranks are likely too large"
                ) from err
            combos = [(p, m) for p in prefixes for m in range(dims[n])]
            left_sets[n] = [combos[i][0] + (combos[i][1],) for i in sel]
        # Right-to-left: refresh suffix sets.
        for n in range(ndim - 2, -1, -1):
            suffixes = right_sets[n + 1] if n < ndim - 2 else [()]
            block = _eval_block(oracle, left_sets[n], range(dims[n + 1]), suffixes)
            mat = block.reshape(len(left_sets[n]), -1)
            q, _ = np.linalg.qr(mat.T)
            try:
                sel = maxvol(q)
            except np.linalg.LinAlgError as err:
                raise np.linalg.LinAlgError(
                    f"cross submatrix at interface {n + 1} is rank deficient; "
                    "the prescribed ranks are likely too large"
                ) from err
            combos = [(m, s) for m in range(dims[n + 1]) for s in suffixes]
            right_sets[n] = [(combos[i][0],) + combos[i][1] for i in sel]

    return _assemble_tt(oracle, left_sets, right_sets)


def greedy_tt_cross(
    oracle: FunctionOracle,
    sweep_budget: int = 10,
    tol: float = 1e-10,
    rank_cap: int = 64,
    seed: int = 0,
) -> tuple[TTTensor, CrossDiagnostics]:
    """Rank-revealing greedy TT-cross with per-interface pivot growth.

    One compound sweep = a left-to-right plus a right-to-left pass over the
    interfaces; each interface gains at most one pivot per sweep, so after
    s sweeps every interface rank is at most s + 1.  At interface n the
    two-mode supercore restricted to the current cross sets is formed, the
    entry where the current cross interpolant errs most is appended as a
    new pivot, and the interface rank revealed by a truncated SVD of the
    supercore caps the growth (decimation).
    """
    if sweep_budget < 1:
        raise ValueError("sweep_budget must be >= 1")
    dims = oracle.dims
    ndim = len(dims)
    rng = np.random.default_rng(seed)
    diag = CrossDiagnostics(seed=seed)

    if ndim == 1:
        vals = np.array([oracle((i,)) for i in range(dims[0])])
        diag.sweeps_run = 1
        diag.converged = True
        diag.calls_per_sweep = [oracle.calls]
        diag.max_rank_per_sweep = [1]
        diag.residual_per_sweep = [0.0]
        return TTTensor([vals.reshape(1, -1, 1)]), diag

    # Seed every interface with the prefixes/suffixes of one random index,
    # which keeps the cross sets nested by construction.
    pivot0 = tuple(int(rng.integers(d)) for d in dims)
    left_sets = [[pivot0[: n + 1]] for n in range(ndim - 1)]
    right_sets = [[pivot0[n + 1 :]] for n in range(ndim - 1)]

    scale = max(abs(oracle(pivot0)), 1.0)

    for sweep in range(1, sweep_budget + 1):
        calls_before = oracle.calls
        grown = [False] * (ndim - 1)
        max_err = 0.0
        order = list(range(ndim - 1)) + list(range(ndim - 2, -1, -1))
        for n in order:
            err = _greedy_step(
                oracle, dims, left_sets, right_sets, n, tol, rank_cap, scale,
                allow_growth=not grown[n],
            )
            if err is not None:
                max_err = max(max_err, err[0])
                if err[1]:
                    grown[n] = True
                    scale = max(scale, err[0])
        diag.sweeps_run = sweep
        diag.calls_per_sweep.append(oracle.calls - calls_before)
        diag.max_rank_per_sweep.append(max(len(s) for s in left_sets))
        diag.residual_per_sweep.append(max_err)
        if not any(grown):
            diag.converged = True
            break

    tt = _assemble_tt(oracle, left_sets, right_sets)
    return tt, diag


def _greedy_step(
    oracle, dims, left_sets, right_sets, n, tol, rank_cap, scale, allow_growth
):
    """One supercore visit at interface n; returns (max_error, grew)."""
    ndim = len(dims)
    prefixes = left_sets[n - 1] if n > 0 else [()]
    suffixes = right_sets[n + 1] if n < ndim - 2 else [()]
    mids_l = list(range(dims[n]))
    mids_r = list(range(dims[n + 1]))

    # Supercore W over modes (n, n+1) restricted to the current cross sets.
    rows = [p + (m,) for p in prefixes for m in mids_l]
    cols = [(m,) + s for m in mids_r for s in suffixes]
    w = np.array([[oracle(r + c) for c in cols] for r in rows])

    # Current cross interpolant of W from the interface-n sets, which are
    # subsets of the supercore's rows/columns by nestedness.
    row_pos = {r: i for i, r in enumerate(rows)}
    col_pos = {c: i for i, c in enumerate(cols)}
    rsel = [row_pos[t] for t in left_sets[n]]
    csel = [col_pos[t] for t in right_sets[n]]
    core = w[np.ix_(rsel, csel)]
    approx = _interp_factor(w[:, csel], core) @ w[rsel, :]

    resid = np.abs(w - approx)
    flat = int(np.argmax(resid))
    i, j = np.unravel_index(flat, resid.shape)
    err = float(resid[i, j])
    if not allow_growth or err <= tol * scale or len(left_sets[n]) >= rank_cap:
        return (err, False)

    # Rank revealed by decimation: do not grow past the supercore's
    # numerical rank.
    _, _, _, r_svd = truncated_svd(w, tol)
    if len(left_sets[n]) >= max(r_svd, 1):
        return (err, False)

    left_sets[n] = left_sets[n] + [rows[i]]
    right_sets[n] = right_sets[n] + [cols[j]]
    return (err, True)


# ---------------------------------------------------------------------------
# Serialization


def tt_save_json(tt: TTTensor, path: str) -> None:
    """Versioned JSON container with dims, ranks and row-major core payloads."""
    payload = {
        "format": "tt-tensor",
        "version": TT_FORMAT_VERSION,
        "dims": list(tt.dims),
        "ranks": list(tt.ranks),
        "cores": [c.ravel(order="C").tolist() for c in tt.cores],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def tt_load_json(path: str) -> TTTensor:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != "tt-tensor":
        raise ValueError("not a TT tensor container")
    if payload.get("version") != TT_FORMAT_VERSION:
        raise ValueError(f"unsupported container version {payload.get('version')}")
    dims = payload["dims"]
    ranks = payload["ranks"]
    cores = [
        np.array(flat, dtype=float).reshape(ranks[n], dims[n], ranks[n + 1], order="C")
        for n, flat in enumerate(payload["cores"])
    ]
    return TTTensor(cores)
