"""Tour of the 1D rules and the Smolyak construction.

Run from the repository root:

    python3 demos/quadrature_and_grids.py
"""

import numpy as np

from etuq.quadrature import clenshaw_curtis, gauss_legendre, map_rule
from etuq.sparse_grid import build_sparse_grid, sparse_quadrature

# 1D rules on [-1, 1] with the uniform probability weight.
print("Clenshaw-Curtis levels 0..3 (nested):")
for level in range(4):
    rule = clenshaw_curtis(level)
    print(f"  level {level}: {rule.size:2d} nodes, weight sum = {rule.weights.sum():.15f}")

rule = gauss_legendre(3)
print("\nGL(3) integrates y^4 exactly:", rule.weights @ rule.nodes**4, "(exact 0.2)")

# Mapping to the elongation support moves the midpoint to 0.170.
mapped = map_rule(clenshaw_curtis(0), 0.122, 0.218)
print("midpoint of [0.122, 0.218]:", mapped.nodes[0])

# Sparse grids in 12 dimensions stay small where the full tensor grid
# would have 3^12 = 531441 points at level 1.
print("\n12-dimensional Smolyak grids:")
for level in (1, 2, 3):
    grid = build_sparse_grid(12, level)
    print(f"  level {level}: {grid.n_points:5d} points")

# Quadrature of a polynomial the level-2 grid captures exactly.
grid = build_sparse_grid(12, 2, intervals=[(0.122, 0.218)] * 12)
vals = grid.points[:, 0] * grid.points[:, 1]
e1, e2 = sparse_quadrature(grid, vals)
print("\nE[y1 y2] on the elongation box:", e1, "(exact", 0.170**2, ")")
