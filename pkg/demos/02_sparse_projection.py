"""Why structure matters when measurements are few.

With 25 linear measurements of a 50-dimensional 3-sparse vector, the
feasible set contains a whole null-space direction, so plain Kaczmarz
stalls no matter how many dithers are added.  Projecting onto s-sparse
vectors every few hundred iterations removes that freedom.
"""
from onebit import experiments as E
from onebit.models import Sparse
from onebit.solvers import SolverConfig

common = dict(
    model={"kind": "linear", "m": 25, "d": 50},
    L_values=[50, 200, 800],
    trials=5,
    structure=Sparse(3),
    solver=SolverConfig(algorithm="skm", gamma=100, max_iters=50_000, check_every=1000),
    master_seed=7,
)

for project in (False, True):
    res = E.run_sweep(E.SweepPlan(project=project, **common))
    med = res.median_errors()
    label = "projected  " if project else "unprojected"
    print(label, "  ".join(f"L={L}: {med[L]:.4f}" for L in common["L_values"]),
          f" slope={res.fit.slope:.2f}")
