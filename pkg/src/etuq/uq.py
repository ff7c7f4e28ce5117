"""Moment estimators for the maximum wire temperature.

Three non-intrusive routes to mean and standard deviation of the QoI:
seeded Monte Carlo, sparse-grid collocation, and greedy tensor-train cross
approximation on the full tensor grid.  All of them drive the same cached
QoI oracle, so solver calls are counted once per distinct input.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np
from joblib import Parallel, delayed

from .fit_model import ETModel, save_model
from .fit_solver import DELTA_SUPPORT, ETSolver
from .quadrature import gauss_legendre, map_rule
from .sparse_grid import build_sparse_grid, sparse_quadrature
from .tensor_train import (
    FunctionOracle,
    greedy_tt_cross,
    rank_one_weights,
    tt_dot,
    tt_hadamard,
)

__all__ = [
    "RandomVector",
    "QoIOracle",
    "MomentEstimate",
    "mc_estimate",
    "sg_estimate",
    "tt_estimate",
    "relative_errors",
]


@dataclass(frozen=True)
class RandomVector:
    """Independent uniform inputs, one per bondwire."""

    dim: int
    supports: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        sup = self.supports or tuple([DELTA_SUPPORT] * self.dim)
        if len(sup) != self.dim:
            raise ValueError("need one support per dimension")
        for a, b in sup:
            if not a < b:
                raise ValueError(f"invalid support [{a}, {b}]")
        object.__setattr__(self, "supports", tuple((float(a), float(b)) for a, b in sup))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo = np.array([s[0] for s in self.supports])
        hi = np.array([s[1] for s in self.supports])
        return lo + (hi - lo) * rng.random((n, self.dim))


# Per-process solver cache for parallel batch evaluation.
_SOLVERS: dict[str, ETSolver] = {}


def _fingerprint(model: ETModel) -> str:
    import tempfile
    import os

    fd, path = tempfile.mkstemp(suffix=".json")
    os.close(fd)
    try:
        save_model(model, path)
        with open(path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()
    finally:
        os.unlink(path)


def _solve_remote(model: ETModel, key: str, delta: tuple[float, ...]) -> float:
    solver = _SOLVERS.get(key)
    if solver is None:
        solver = ETSolver(model)
        _SOLVERS[key] = solver
    return solver.run_transient(np.array(delta))[0]


class QoIOracle:
    """Caching, call-counting front end to the transient solver.

    Batch evaluations may run in parallel worker processes; results are
    stored and reduced in input order, so estimates are deterministic
    regardless of scheduling.
    """

    def __init__(self, model: ETModel, n_jobs: int = 1):
        self.model = model
        self.n_jobs = max(int(n_jobs), 1)
        self._key = _fingerprint(model)
        self._cache: dict[tuple[float, ...], float] = {}

    @property
    def calls(self) -> int:
        return len(self._cache)

    @property
    def dim(self) -> int:
        return len(self.model.wires)

    def evaluate(self, delta) -> float:
        return self.evaluate_batch([delta])[0]

    def evaluate_batch(self, deltas) -> np.ndarray:
        keys = [tuple(float(x) for x in d) for d in deltas]
        missing = list(dict.fromkeys(k for k in keys if k not in self._cache))
        if missing:
            if self.n_jobs == 1 or len(missing) == 1:
                results = [_solve_remote(self.model, self._key, k) for k in missing]
            else:
                results = Parallel(n_jobs=self.n_jobs)(
                    delayed(_solve_remote)(self.model, self._key, k) for k in missing
                )
            for k, v in zip(missing, results):
                self._cache[k] = float(v)
        return np.array([self._cache[k] for k in keys])


@dataclass
class MomentEstimate:
    """Mean/std of the QoI plus the solver-call price of one method run."""

    method: str
    mean: float
    std: float
    second_moment: float
    solver_calls: int
    level: int | None = None
    sweeps: int | None = None
    seed: int | None = None
    samples: int | None = None
    variance_clamped: bool = False
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _clamped_std(mean: float, second_moment: float) -> tuple[float, bool]:
    var = second_moment - mean**2
    if var < 0.0:
        return 0.0, True
    return float(np.sqrt(var)), False


def mc_estimate(
    oracle: QoIOracle, rv: RandomVector, n_samples: int, seed: int
) -> MomentEstimate:
    """Plain seeded Monte Carlo with the unbiased sample deviation."""
    if n_samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    samples = rv.sample(rng, n_samples)
    values = oracle.evaluate_batch(samples)
    mean = float(values.mean())
    second = float((values**2).mean())
    std = float(values.std(ddof=1))
    return MomentEstimate(
        method="mc",
        mean=mean,
        std=std,
        second_moment=second,
        solver_calls=n_samples,
        seed=seed,
        samples=n_samples,
    )


def sg_estimate(
    oracle: QoIOracle, rv: RandomVector, level: int, growth: str = "smolyak"
) -> MomentEstimate:
    """Sparse-grid collocation: quadrature over the combination grid."""
    if level < 0:
        raise ValueError("level must be >= 0")
    grid = build_sparse_grid(rv.dim, level, growth, list(rv.supports))
    values = oracle.evaluate_batch(grid.points)
    mean, second = sparse_quadrature(grid, values)
    std, clamped = _clamped_std(mean, second)
    return MomentEstimate(
        method="sg",
        mean=mean,
        std=std,
        second_moment=second,
        solver_calls=grid.n_points,
        level=level,
        variance_clamped=clamped,
        diagnostics={"growth": growth},
    )


def tt_estimate(
    oracle: QoIOracle,
    rv: RandomVector,
    level: int,
    sweep_budget: int,
    tol: float = 1e-10,
    rank_cap: int = 64,
    seed: int = 0,
) -> MomentEstimate:
    """Greedy TT-cross on the full Gauss tensor grid, then TT quadrature.

    The grid has level + 1 Gauss-Legendre nodes per dimension; the weight
    tensor is the exact rank-1 TT of the per-dimension weights, so both
    moments are TT inner products.
    """
    if level < 1:
        raise ValueError("level must be >= 1 (at least two nodes per dimension)")
    rules = [map_rule(gauss_legendre(level + 1), a, b) for a, b in rv.supports]
    nodes = [r.nodes for r in rules]

    def qoi_at(idx):
        delta = tuple(nodes[n][idx[n]] for n in range(rv.dim))
        return oracle.evaluate(delta)

    fn_oracle = FunctionOracle([level + 1] * rv.dim, qoi_at)
    q_tt, diag = greedy_tt_cross(
        fn_oracle, sweep_budget=sweep_budget, tol=tol, rank_cap=rank_cap, seed=seed
    )
    w_tt = rank_one_weights([r.weights for r in rules])
    mean = tt_dot(q_tt, w_tt)
    second = tt_dot(tt_hadamard(q_tt, q_tt), w_tt)
    std, clamped = _clamped_std(mean, second)
    max_rank = max(q_tt.ranks)
    if max_rank >= rank_cap:
        diag_extra = {"rank_cap_reached": True}
    else:
        diag_extra = {}
    return MomentEstimate(
        method="tt",
        mean=float(mean),
        std=std,
        second_moment=float(second),
        solver_calls=fn_oracle.calls,
        level=level,
        sweeps=sweep_budget,
        seed=seed,
        variance_clamped=clamped,
        diagnostics={
            "max_tt_rank": max_rank,
            "converged": diag.converged,
            "sweeps_run": diag.sweeps_run,
            "calls_per_sweep": diag.calls_per_sweep,
            "max_rank_per_sweep": diag.max_rank_per_sweep,
            **diag_extra,
        },
    )


def relative_errors(est: MomentEstimate, reference: MomentEstimate) -> tuple[float, float]:
    """Percent deviations of mean and std from a reference estimate."""
    if reference.mean == 0.0:
        raise ZeroDivisionError("reference mean is zero")
    if reference.std <= 0.0:
        raise ZeroDivisionError("reference standard deviation is not positive")
    eps_mu = abs(est.mean - reference.mean) / abs(reference.mean) * 100.0
    eps_sigma = abs(est.std - reference.std) / reference.std * 100.0
    return eps_mu, eps_sigma
