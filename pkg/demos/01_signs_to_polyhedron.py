"""From one-bit signs to a feasibility problem.

A 6-dimensional signal is observed only through the signs of
``x - tau`` for many random dithers ``tau``.  Every sign is a half-space
that contains the signal, so recovery becomes "find any point in the
intersection".  Randomized Kaczmarz does exactly that.
"""
import numpy as np

from onebit import (
    Direct,
    SolverConfig,
    ThresholdScheme,
    UniformRange,
    build,
    generate_thresholds,
    measure,
    membership,
    quantize,
    solve,
)
from onebit.models import random_truth

rng = np.random.default_rng(1)
model = Direct(6)
truth = random_truth((6,), None, rng)
print("signal:", np.round(truth.flat(), 3))

for L in (10, 100, 1000):
    scheme = ThresholdScheme(UniformRange(-3.0, 3.0), sequences=L, seed=2)
    signs = quantize(measure(model, truth), generate_thresholds(scheme, model.m))
    p = build(model, signs)
    inside, _ = membership(p, truth.flat())
    rep = solve(p, SolverConfig(max_iters=1_000_000, check_every=500, seed=3))
    err = np.linalg.norm(rep.final_iterate - truth.flat())
    print(f"L={L:5d}  rows={p.N:5d}  truth feasible={inside}  "
          f"iterations={rep.iterations_run:6d}  error={err:.4f}")

# More dithers carve a smaller cell around the signal, so any feasible
# point is forced closer to it.
