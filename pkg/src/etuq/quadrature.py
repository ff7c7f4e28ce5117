"""One-dimensional interpolation and quadrature rules.

All rules live on the reference interval [-1, 1] and carry *probabilistic*
weights, i.e. weights normalized against the uniform PDF so that they sum
to one.  Affine mapping to an arbitrary interval [a, b] leaves the weights
unchanged, because the uniform density renormalizes with the interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Rule1D",
    "MappedRule1D",
    "clenshaw_curtis",
    "gauss_legendre",
    "map_rule",
    "lagrange_basis",
    "cc_level_size",
]

MAX_CC_LEVEL = 16
MAX_GL_ORDER = 64


@dataclass(frozen=True)
class Rule1D:
    """A 1D rule: ordered nodes on [-1, 1] and probabilistic weights."""

    kind: str  # "clenshaw_curtis" | "gauss_legendre"
    order: int  # level for CC, node count for GL
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self) -> int:
        return self.nodes.size


@dataclass(frozen=True)
class MappedRule1D:
    """A Rule1D affinely mapped onto [a, b]; weights stay probabilistic."""

    rule: Rule1D
    a: float
    b: float
    nodes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        self.nodes.setflags(write=False)

    @property
    def weights(self) -> np.ndarray:
        return self.rule.weights

    @property
    def size(self) -> int:
        return self.nodes.size


def cc_level_size(level: int) -> int:
    """Node count of the nested Clenshaw-Curtis rule at a given level."""
    return 1 if level == 0 else 2**level + 1


def _symmetrize(nodes: np.ndarray) -> np.ndarray:
    # Force exact negation symmetry so that nested node sets coincide
    # bitwise across levels.
    sym = 0.5 * (nodes - nodes[::-1])
    m = nodes.size
    if m % 2 == 1:
        sym[m // 2] = 0.0
    return sym


def clenshaw_curtis(level: int) -> Rule1D:
    """Nested Clenshaw-Curtis rule at the given level (2^level + 1 nodes).

    Nodes are the Chebyshev extrema cos(pi*k/2^level); weights are the
    classical CC weights divided by the interval length, hence exact for
    the uniform PDF on polynomials up to the node-count degree.
    """
    if level < 0:
        raise ValueError("level must be non-negative")
    if level > MAX_CC_LEVEL:
        raise ValueError(f"CC level {level} exceeds cap {MAX_CC_LEVEL}")
    if level == 0:
        return Rule1D("clenshaw_curtis", 0, np.array([0.0]), np.array([1.0]))

    n = 2**level  # polynomial order; n+1 nodes
    k = np.arange(n + 1)
    nodes = _symmetrize(np.cos(np.pi * k[::-1] / n))

    # Exact cosine-sum formula for CC weights on [-1, 1] (O(n^2), fine at
    # desk scale), then normalized by the interval length 2.
    j = np.arange(1, n // 2 + 1)
    b = np.where(j == n // 2, 1.0, 2.0)
    c = np.where((k == 0) | (k == n), 1.0, 2.0)
    # weights[k] = c_k/n * (1 - sum_j b_j/(4j^2-1) * cos(2jk pi/n))
    cosmat = np.cos(2.0 * np.pi * np.outer(k, j) / n)
    w = (c / n) * (1.0 - cosmat @ (b / (4.0 * j**2 - 1.0)))
    w = w[::-1]  # align with ascending nodes
    w = 0.5 * (w + w[::-1])  # enforce symmetry
    return Rule1D("clenshaw_curtis", level, nodes, 0.5 * w)


def gauss_legendre(n: int) -> Rule1D:
    """Gauss-Legendre rule with n nodes, probabilistic weights."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > MAX_GL_ORDER:
        raise ValueError(f"GL order {n} exceeds cap {MAX_GL_ORDER}")
    nodes, w = np.polynomial.legendre.leggauss(n)
    nodes = _symmetrize(nodes)
    w = 0.5 * (w + w[::-1])
    return Rule1D("gauss_legendre", n, nodes, 0.5 * w)


def map_rule(rule: Rule1D, a: float, b: float) -> MappedRule1D:
    """Affinely map a reference rule onto [a, b]."""
    if not a < b:
        raise ValueError(f"invalid interval: a={a} must be < b={b}")
    mapped = a + (b - a) * (rule.nodes + 1.0) / 2.0
    # Pin the endpoints exactly when the reference rule contains them.
    mapped = np.where(rule.nodes == -1.0, a, mapped)
    mapped = np.where(rule.nodes == 1.0, b, mapped)
    return MappedRule1D(rule, float(a), float(b), mapped)


def lagrange_basis(nodes: np.ndarray, i: int, y: float) -> float:
    """Evaluate the i-th Lagrange cardinal polynomial on the given nodes."""
    nodes = np.asarray(nodes, dtype=float)
    if not 0 <= i < nodes.size:
        raise IndexError(f"basis index {i} out of range for {nodes.size} nodes")
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    if np.any(diff == 0.0):
        raise ValueError("nodes must be pairwise distinct")
    mask = np.arange(nodes.size) != i
    return float(np.prod((y - nodes[mask]) / (nodes[i] - nodes[mask])))
