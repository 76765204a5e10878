"""Phase retrieval by lifting.

Measurements ``|<a_j, x>|^2`` are linear in ``X = x x^T``.  The one-bit
polyhedron lives in the space of 8x8 matrices; after solving, the leading
eigenvector recovers ``x`` up to a global sign.
"""
import numpy as np

from onebit import (
    QuadraticLifted,
    Rank1Symmetric,
    SolverConfig,
    build,
    extract_vector,
    generate_thresholds,
    measure,
    quantize,
    solve,
)
from onebit.models import random_truth
from onebit.quantizer import covering_scheme

rng = np.random.default_rng(4)
n = 8
model = QuadraticLifted(rng.standard_normal((64, n)))
truth = random_truth((n, n), Rank1Symmetric(), rng)
x_true = extract_vector(truth.value)
y = measure(model, truth)

for L in (20, 320):
    p = build(model, quantize(y, generate_thresholds(covering_scheme(y, L, seed=5), model.m)))
    for structure in (None, Rank1Symmetric()):
        cfg = SolverConfig(algorithm="skm", gamma=100, max_iters=100_000, check_every=1000,
                           seed=6, structure=structure)
        X = solve(p, cfg).final_iterate.reshape(n, n)
        x_hat = extract_vector((X + X.T) / 2)
        err = min(np.linalg.norm(x_hat - x_true), np.linalg.norm(x_hat + x_true)) / np.linalg.norm(x_true)
        tag = "rank-1 projection" if structure else "no projection    "
        print(f"L={L:4d}  {tag}  relative vector error {err:.4f}")
