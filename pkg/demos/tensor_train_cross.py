"""Greedy TT-cross on a 12-dimensional function, touching few entries.

Run from the repository root:

    python3 demos/tensor_train_cross.py
"""

import numpy as np

from etuq.tensor_train import FunctionOracle, greedy_tt_cross, rank_one_weights, tt_dot
from etuq.quadrature import gauss_legendre, map_rule

N = 12
rule = map_rule(gauss_legendre(2), 0.122, 0.218)


def f(idx):
    """Smooth but not separable: a product plus a coupled cosine."""
    y = rule.nodes[list(idx)]
    s = 10.0 * (y - 0.170)
    return float(np.prod(np.exp(0.3 * s)) + 0.5 * np.cos(s.sum()))


oracle = FunctionOracle([2] * N, f)
tt, diag = greedy_tt_cross(oracle, sweep_budget=8)

print(f"full grid size      : {2**N}")
print(f"entries evaluated   : {oracle.calls}")
print(f"TT ranks            : {tt.ranks}")
print(f"converged           : {diag.converged} after {diag.sweeps_run} sweeps")
print(f"max rank per sweep  : {diag.max_rank_per_sweep}")

# Quadrature becomes a rank-1 inner product against the weight tensor.
w = rank_one_weights([rule.weights] * N)
mean = tt_dot(tt, w)

# Brute force for comparison (cheap here, impossible for larger grids).
import itertools

brute = sum(
    f(idx) * np.prod(rule.weights[list(idx)])
    for idx in itertools.product(range(2), repeat=N)
)
print(f"\nTT quadrature       : {mean:.12f}")
print(f"dense contraction   : {brute:.12f}")
