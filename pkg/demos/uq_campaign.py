"""Small moment-estimation campaign on the desk model.

Compares a seeded Monte Carlo baseline against sparse-grid collocation
and greedy TT-cross, all sharing one cached solver oracle.  Uses a small
sample count so it finishes in about a minute; the shipped acceptance
suite runs the full 20000-sample comparison.

Run from the repository root:

    python3 demos/uq_campaign.py
"""

from etuq.fit_model import desk_model
from etuq.uq import (
    QoIOracle,
    RandomVector,
    mc_estimate,
    relative_errors,
    sg_estimate,
    tt_estimate,
)

oracle = QoIOracle(desk_model())
rv = RandomVector(12)

mc = mc_estimate(oracle, rv, 500, seed=2024)
print(f"mc  n=500 : mean = {mc.mean:8.3f} K  std = {mc.std:.4f} K  calls = {mc.solver_calls}")

sg = sg_estimate(oracle, rv, level=1)
eps_mu, eps_sigma = relative_errors(sg, mc)
print(f"sg  l=1   : mean = {sg.mean:8.3f} K  std = {sg.std:.4f} K  calls = {sg.solver_calls}"
      f"  (vs mc: {eps_mu:.3f}% / {eps_sigma:.2f}%)")

tt = tt_estimate(oracle, rv, level=1, sweep_budget=6)
eps_mu, eps_sigma = relative_errors(tt, mc)
print(f"tt  s=6   : mean = {tt.mean:8.3f} K  std = {tt.std:.4f} K  calls = {tt.solver_calls}"
      f"  (vs mc: {eps_mu:.3f}% / {eps_sigma:.2f}%)")

print(f"\ndistinct solver runs overall: {oracle.calls} (shared cache)")
print("the same campaign is available from the command line:")
print("  etuq run --config campaign.json && etuq report results/manifest.csv")
