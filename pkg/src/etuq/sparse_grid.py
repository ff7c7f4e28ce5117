"""Smolyak sparse grids: multi-index sets, combined quadrature, interpolation.

The combination formula attaches coefficient (-1)^(l-|j|) * C(N-1, l-|j|)
to every multi-index j in the band l-N+1 <= |j| <= l.  Each band index
contributes a full tensor grid; points coinciding across tensor grids are
deduplicated by canonical rounding and their signed weights accumulated.

Growth rules:
  * "smolyak":      p(0) = 0, p(j) = 2^j, paired with nested Clenshaw-Curtis
                    nodes (2^j + 1 per dimension).
  * "total_degree": p(j) = j, paired with Gauss-Legendre nodes (j + 1 per
                    dimension).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import (
    MappedRule1D,
    cc_level_size,
    clenshaw_curtis,
    gauss_legendre,
    lagrange_basis,
    map_rule,
)

__all__ = [
    "MultiIndexSet",
    "SparseGrid",
    "build_multi_index_set",
    "build_sparse_grid",
    "sparse_quadrature",
    "smolyak_interpolate",
    "export_grid_csv",
]

ENUMERATION_CAP = 10**7
_ROUND_DECIMALS = 12  # canonical rounding for point deduplication


@dataclass(frozen=True)
class MultiIndexSet:
    """All multi-indices |j| <= level with Smolyak combination coefficients."""

    dim: int
    level: int
    growth: str
    indices: list[tuple[int, ...]]
    coefficients: dict[tuple[int, ...], int]

    def coefficient(self, j: tuple[int, ...]) -> int:
        return self.coefficients.get(tuple(j), 0)

    @property
    def band(self) -> list[tuple[int, ...]]:
        """Indices with a nonzero combination coefficient."""
        return [j for j in self.indices if self.coefficients.get(j, 0) != 0]


@dataclass
class _TensorTerm:
    """One tensor grid of the combination formula, linked to global points."""

    index: tuple[int, ...]
    coefficient: int
    rules: list[MappedRule1D]
    point_ids: np.ndarray  # global point index per tensor-grid point


@dataclass
class SparseGrid:
    """Deduplicated collocation points with signed combination weights."""

    dim: int
    level: int
    growth: str
    intervals: list[tuple[float, float]]
    points: np.ndarray  # (n_points, dim)
    weights: np.ndarray  # signed, sum to 1
    provenance: list[set[tuple[int, ...]]] = field(repr=False)
    terms: list[_TensorTerm] = field(repr=False)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def _growth_sizes(growth: str, j: int) -> int:
    if growth == "smolyak":
        return cc_level_size(j)
    if growth == "total_degree":
        return j + 1
    raise ValueError(f"unknown growth rule: {growth!r}")


def _rule_for(growth: str, j: int) -> "np.ndarray":
    if growth == "smolyak":
        return clenshaw_curtis(j)
    return gauss_legendre(j + 1)


def build_multi_index_set(dim: int, level: int, growth: str = "smolyak") -> MultiIndexSet:
    """Enumerate |j| <= level and attach combination coefficients."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if level < 0:
        raise ValueError("level must be >= 0")
    _growth_sizes(growth, 0)  # validate growth name

    indices: list[tuple[int, ...]] = []
    coeffs: dict[tuple[int, ...], int] = {}
    count = 0
    for j in _compositions_upto(dim, level):
        count += 1
        if count > ENUMERATION_CAP:
            raise MemoryError("multi-index enumeration cap exceeded")
        indices.append(j)
        s = sum(j)
        if level - dim + 1 <= s <= level:
            coeffs[j] = (-1) ** (level - s) * math.comb(dim - 1, level - s)
    return MultiIndexSet(dim, level, growth, indices, coeffs)


def _compositions_upto(dim: int, level: int):
    """All j in N^dim with |j| <= level, lexicographic order."""
    if dim == 1:
        for j in range(level + 1):
            yield (j,)
        return
    for j0 in range(level + 1):
        for rest in _compositions_upto(dim - 1, level - j0):
            yield (j0,) + rest


def build_sparse_grid(
    dim: int,
    level: int,
    growth: str = "smolyak",
    intervals: list[tuple[float, float]] | None = None,
) -> SparseGrid:
    """Assemble the sparse collocation grid for the given level and growth."""
    if intervals is None:
        intervals = [(-1.0, 1.0)] * dim
    if len(intervals) != dim:
        raise ValueError("need one interval per dimension")

    mis = build_multi_index_set(dim, level, growth)
    rule_cache: dict[tuple[int, int], MappedRule1D] = {}

    def mapped(dim_i: int, j: int) -> MappedRule1D:
        key = (dim_i, j)
        if key not in rule_cache:
            a, b = intervals[dim_i]
            rule_cache[key] = map_rule(_rule_for(growth, j), a, b)
        return rule_cache[key]

    point_ids: dict[tuple[float, ...], int] = {}
    points: list[tuple[float, ...]] = []
    weights: list[float] = []
    provenance: list[set[tuple[int, ...]]] = []
    terms: list[_TensorTerm] = []

    total = 0
    for j in mis.band:
        coeff = mis.coefficient(j)
        rules = [mapped(n, j[n]) for n in range(dim)]
        card = math.prod(r.size for r in rules)
        total += card
        if total > ENUMERATION_CAP:
            raise MemoryError("sparse grid point cap exceeded")
        ids = np.empty(card, dtype=np.int64)
        for flat, combo in enumerate(itertools.product(*(range(r.size) for r in rules))):
            pt = tuple(rules[n].nodes[combo[n]] for n in range(dim))
            key = tuple(np.round(pt, _ROUND_DECIMALS))
            w = coeff * math.prod(rules[n].weights[combo[n]] for n in range(dim))
            pid = point_ids.get(key)
            if pid is None:
                pid = len(points)
                point_ids[key] = pid
                points.append(pt)
                weights.append(w)
                provenance.append({j})
            else:
                weights[pid] += w
                provenance[pid].add(j)
            ids[flat] = pid
        terms.append(_TensorTerm(j, coeff, rules, ids))

    return SparseGrid(
        dim=dim,
        level=level,
        growth=growth,
        intervals=[(float(a), float(b)) for a, b in intervals],
        points=np.array(points, dtype=float),
        weights=np.array(weights, dtype=float),
        provenance=provenance,
        terms=terms,
    )


def sparse_quadrature(grid: SparseGrid, values: np.ndarray) -> tuple[float, float]:
    """First and second moments of tabulated point values under the grid."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_points,):
        raise ValueError(
            f"expected {grid.n_points} values, got shape {values.shape}"
        )
    e1 = float(grid.weights @ values)
    e2 = float(grid.weights @ values**2)
    return e1, e2


def smolyak_interpolate(grid: SparseGrid, values: np.ndarray, y) -> float:
    """Evaluate the Smolyak interpolant of tabulated point values at y."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_points,):
        raise ValueError("values must align with grid points")
    y = np.asarray(y, dtype=float)
    if y.shape != (grid.dim,):
        raise ValueError(f"point must have dimension {grid.dim}")
    for n, (a, b) in enumerate(grid.intervals):
        if not (a <= y[n] <= b):
            raise ValueError(f"coordinate {n} = {y[n]} outside [{a}, {b}]")

    result = 0.0
    for term in grid.terms:
        # Tensor-product Lagrange interpolation on this term's grid.
        basis = [
            np.array([lagrange_basis(r.nodes, i, y[n]) for i in range(r.size)])
            for n, r in enumerate(term.rules)
        ]
        vals = values[term.point_ids].reshape([r.size for r in term.rules])
        for bn in basis:
            vals = np.tensordot(bn, vals, axes=(0, 0))
        result += term.coefficient * float(vals)
    return result


def export_grid_csv(grid: SparseGrid, path: str) -> None:
    """Write one row per point: N coordinates followed by the signed weight."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"y{n+1}" for n in range(grid.dim)] + ["weight"])
        for pt, w in zip(grid.points, grid.weights):
            writer.writerow([repr(float(c)) for c in pt] + [repr(float(w))])
