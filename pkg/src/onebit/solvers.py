"""Randomized Kaczmarz (RKA) and Sampling Kaczmarz-Motzkin (SKM) over a polyhedron.

Both methods repeatedly pick one row ``j`` and move the iterate onto its
half-space (or hyperplane, for equality rows)::

    x <- x + relaxation * beta_j / ||c_j||^2 * c_j

with ``beta_j = (b_j - c_j . x)^+`` for inequalities and ``b_j - c_j . x``
for equalities.  RKA draws ``j`` with probability ``||c_j||^2 / ||C||_F^2``;
SKM draws ``gamma`` distinct rows uniformly and keeps the most violated one.

The inner loops run in numba kernels that consume pre-drawn uniforms, so
the random stream of a run does not depend on how it is split into blocks.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numba
import numpy as np

from .models import project_structure, structure_to_dict

__all__ = [
    "SolverConfig",
    "SolverReport",
    "rka_step",
    "skm_step",
    "solve",
    "sampling_histogram",
]


@numba.njit(cache=True, nogil=True)
def _pick_weighted(cum, u):
    j = np.searchsorted(cum, u * cum[-1], side="right")
    if j >= cum.shape[0]:
        j = cum.shape[0] - 1
    return j


@numba.njit(cache=True, nogil=True)
def _signed_residual(C, b, j, x):
    r = b[j]
    for k in range(x.shape[0]):
        r -= C[j, k] * x[k]
    return r


@numba.njit(cache=True, nogil=True)
def _project(C, eq, norms, j, r, x, lam):
    if not eq[j] and r <= 0.0:
        return
    step = lam * r / norms[j]
    for k in range(x.shape[0]):
        x[k] += step * C[j, k]


@numba.njit(cache=True, nogil=True)
def _rka_block(C, b, eq, norms, cum, x, draws, lam, chosen):
    for t in range(draws.shape[0]):
        j = _pick_weighted(cum, draws[t])
        _project(C, eq, norms, j, _signed_residual(C, b, j, x), x, lam)
        chosen[t] = j


@numba.njit(cache=True, nogil=True)
def _floyd_sample(N, u, out, mark):
    # Floyd's algorithm: gamma distinct indices, every subset equally likely
    gamma = u.shape[0]
    for i in range(gamma):
        top = N - gamma + i
        t = int(u[i] * (top + 1))
        if t > top:
            t = top
        if mark[t]:
            t = top
        mark[t] = True
        out[i] = t
    for i in range(gamma):
        mark[out[i]] = False


@numba.njit(cache=True, nogil=True)
def _skm_block(C, b, eq, norms, x, draws, lam, chosen):
    N = C.shape[0]
    gamma = draws.shape[1]
    sample = np.empty(gamma, dtype=np.int64)
    mark = np.zeros(N, dtype=np.bool_)
    for t in range(draws.shape[0]):
        _floyd_sample(N, draws[t], sample, mark)
        best = -1
        best_viol = -1.0
        best_r = 0.0
        for i in range(gamma):
            j = sample[i]
            r = _signed_residual(C, b, j, x)
            viol = abs(r) if eq[j] else max(r, 0.0)
            if viol > best_viol or (viol == best_viol and j < best):
                best, best_viol, best_r = j, viol, r
        _project(C, eq, norms, best, best_r, x, lam)
        chosen[t] = best


def _cumulative_weights(p):
    return np.cumsum(p.row_sq_norms)


def _check_relaxation(lam):
    if not 0.0 < lam < 2.0:
        raise ValueError(f"relaxation must lie in (0, 2), got {lam}")


def rka_step(p, x, rng, relaxation=1.0):
    """One randomized Kaczmarz projection.

    Parameters
    ----------
    p : OneBitPolyhedron
    x : ndarray
        Current iterate of length ``p.D``; not modified.
    rng : numpy.random.Generator
        Consumes exactly one uniform draw.
    relaxation : float
        Step multiplier in ``(0, 2)``.

    Returns
    -------
    x_next : ndarray
    chosen_row : int
    """
    _check_relaxation(relaxation)
    x_next = np.array(x, dtype=float).ravel()
    if x_next.shape[0] != p.D:
        raise ValueError(f"iterate has length {x_next.shape[0]}, polyhedron has D={p.D}")
    chosen = np.empty(1, dtype=np.int64)
    _rka_block(p.C, p.b, p.equality, p.row_sq_norms, _cumulative_weights(p), x_next,
               rng.random(1), float(relaxation), chosen)
    return x_next, int(chosen[0])


def skm_step(p, x, gamma, rng, relaxation=1.0):
    """One sampling Kaczmarz-Motzkin projection.

    Samples ``gamma`` distinct rows uniformly (consuming ``gamma`` uniform
    draws) and projects onto the one with the largest violation, breaking
    ties by the lowest row index.  With ``gamma == p.N`` this is the
    greedy Motzkin rule.
    """
    _check_relaxation(relaxation)
    gamma = int(gamma)
    if not 1 <= gamma <= p.N:
        raise ValueError(f"gamma must satisfy 1 <= gamma <= N={p.N}, got {gamma}")
    x_next = np.array(x, dtype=float).ravel()
    if x_next.shape[0] != p.D:
        raise ValueError(f"iterate has length {x_next.shape[0]}, polyhedron has D={p.D}")
    chosen = np.empty(1, dtype=np.int64)
    _skm_block(p.C, p.b, p.equality, p.row_sq_norms, x_next, rng.random((1, gamma)),
               float(relaxation), chosen)
    return x_next, int(chosen[0])


def sampling_histogram(p, draws, rng):
    """Empirical frequencies of the RKA row choice over ``draws`` samples."""
    if draws < 1:
        raise ValueError("draws must be at least 1")
    cum = _cumulative_weights(p)
    idx = np.searchsorted(cum, rng.random(int(draws)) * cum[-1], side="right")
    np.minimum(idx, p.N - 1, out=idx)
    return np.bincount(idx, minlength=p.N) / float(draws)


@dataclass
class SolverConfig:
    """Run parameters for :func:`solve`.

    ``structure`` switches on the projected variant: every ``check_every``
    iterations the iterate is projected onto the structure set before the
    feasibility check.  This is a heuristic for comparison runs, not part
    of plain RKA/SKM.
    """

    algorithm: str = "rka"
    gamma: int = 1
    relaxation: float = 1.0
    max_iters: int = 100_000
    stop_tol: float = 1e-8
    check_every: int = 100
    seed: int = 0
    x0: np.ndarray | None = None
    structure: object = None

    def validate(self, p=None):
        if self.algorithm not in ("rka", "skm"):
            raise ValueError(f"algorithm must be 'rka' or 'skm', got {self.algorithm!r}")
        _check_relaxation(self.relaxation)
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.check_every < 1:
            raise ValueError("check_every must be at least 1")
        if self.stop_tol < 0:
            raise ValueError("stop_tol must be nonnegative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.algorithm == "skm" and self.gamma < 1:
            raise ValueError("gamma must be at least 1")
        if p is not None:
            if self.algorithm == "skm" and self.gamma > p.N:
                raise ValueError(f"gamma={self.gamma} exceeds the number of rows N={p.N}")
            if self.x0 is not None and np.asarray(self.x0).size != p.D:
                raise ValueError(f"x0 has {np.asarray(self.x0).size} entries, expected D={p.D}")

    def to_dict(self):
        return {
            "algorithm": self.algorithm,
            "gamma": int(self.gamma),
            "relaxation": float(self.relaxation),
            "max_iters": int(self.max_iters),
            "stop_tol": float(self.stop_tol),
            "check_every": int(self.check_every),
            "seed": int(self.seed),
            "x0": None if self.x0 is None else np.asarray(self.x0, dtype=float).ravel().tolist(),
            "structure": structure_to_dict(self.structure),
        }


@dataclass
class SolverReport:
    final_iterate: np.ndarray
    iterations_run: int
    violation_history: list = field(default_factory=list)
    distance_history: list | None = None
    converged: bool = False
    wall_time: float = 0.0

    @property
    def final_violation(self):
        return self.violation_history[-1][1]

    def to_dict(self, include_timing=True):
        d = {
            "final_iterate": self.final_iterate.tolist(),
            "iterations_run": int(self.iterations_run),
            "converged": bool(self.converged),
            "violation_history": {
                "iter": [int(i) for i, _ in self.violation_history],
                "violation": [float(v) for _, v in self.violation_history],
            },
            "distance_history": None,
        }
        if self.distance_history is not None:
            d["distance_history"] = {
                "iter": [int(i) for i, _ in self.distance_history],
                "distance": [float(v) for _, v in self.distance_history],
            }
        if include_timing:
            d["wall_time"] = float(self.wall_time)
        return d

    def to_json(self, include_timing=True, **kwargs):
        return json.dumps(self.to_dict(include_timing), **kwargs)

    def write_history_csv(self, path, comment=None):
        dist = dict(self.distance_history or [])
        with open(path, "w", newline="") as fh:
            if comment:
                for line in str(comment).splitlines():
                    fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "violation", "distance"])
            for it, viol in self.violation_history:
                w.writerow([it, repr(float(viol)), repr(float(dist[it])) if it in dist else ""])


def solve(p, cfg, truth=None):
    """Run RKA or SKM until the iterate is feasible or ``max_iters`` is spent.

    Feasibility (max violation <= ``cfg.stop_tol``) is checked at iteration
    0 and then every ``cfg.check_every`` iterations, plus once at the end.

    Parameters
    ----------
    p : OneBitPolyhedron
    cfg : SolverConfig
    truth : ndarray, optional
        Flattened reference point; when given, ``||x_i - truth||_2`` is
        recorded at every check.

    Returns
    -------
    SolverReport
        Non-convergence is reported through ``converged=False``.
    """
    cfg.validate(p)
    t0 = time.perf_counter()
    rng = np.random.default_rng(int(cfg.seed))
    x = np.zeros(p.D) if cfg.x0 is None else np.array(cfg.x0, dtype=float).ravel()
    ref = None if truth is None else np.asarray(truth, dtype=float).ravel()
    lam = float(cfg.relaxation)
    cum = _cumulative_weights(p) if cfg.algorithm == "rka" else None
    chosen = np.empty(cfg.check_every, dtype=np.int64)

    viol_hist = []
    dist_hist = [] if ref is not None else None

    def record(it):
        viol = p.max_violation(x)
        viol_hist.append((it, viol))
        if ref is not None:
            dist_hist.append((it, float(np.linalg.norm(x - ref))))
        return viol <= cfg.stop_tol

    it = 0
    converged = record(0)
    while not converged and it < cfg.max_iters:
        k = min(cfg.check_every, cfg.max_iters - it)
        if cfg.algorithm == "rka":
            _rka_block(p.C, p.b, p.equality, p.row_sq_norms, cum, x, rng.random(k), lam, chosen)
        else:
            _skm_block(p.C, p.b, p.equality, p.row_sq_norms, x, rng.random((k, cfg.gamma)), lam, chosen)
        it += k
        if cfg.structure is not None:
            x = project_structure(p.unknown_shape, x, cfg.structure).ravel()
        converged = record(it)

    return SolverReport(
        final_iterate=x,
        iterations_run=it,
        violation_history=viol_hist,
        distance_history=dist_hist,
        converged=converged,
        wall_time=time.perf_counter() - t0,
    )
