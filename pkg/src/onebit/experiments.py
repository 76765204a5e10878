"""Recovery-error sweeps, polyhedron spread and structure-redundancy gaps.

Randomness
----------
Every random object in a sweep comes from its own stream::

    SeedSequence(master_seed, spawn_key=(purpose, trial))

with ``purpose`` one of :data:`STREAMS`.  Truth, sensing model, dithers
and solver seed depend on the trial only, never on ``L``.  Because
threshold columns are themselves drawn per sequence, the polyhedron for a
larger ``L`` contains every row of the smaller one, so a trial sees nested
feasible sets as ``L`` grows.
"""
from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import models as M
from .polyhedron import build
from .quantizer import Gaussian, ThresholdScheme, UniformRange, covering_scheme, generate_thresholds, quantize
from .solvers import SolverConfig, solve

__all__ = [
    "STREAMS",
    "SweepPlan",
    "SweepResult",
    "SlopeFit",
    "run_sweep",
    "fit_slope",
    "spread_proxy",
    "spread_table",
    "singularity_gap",
    "sign_test_nonincreasing",
    "recovery_error",
]

STREAMS = {"truth": 0, "model": 1, "thresholds": 2, "solver": 3, "start": 4}


def derive_seed(master_seed, purpose, *keys):
    """64-bit seed for ``purpose`` (a key of :data:`STREAMS`) and cell ``keys``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(STREAMS[purpose],) + tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_rng(master_seed, purpose, *keys):
    return np.random.default_rng(derive_seed(master_seed, purpose, *keys))


def recovery_error(metric, estimate, truth):
    """Distance between a flattened estimate and a :class:`GroundTruth`.

    ``l2`` and ``frobenius`` are absolute norms of the difference.
    ``vector`` extracts the leading factor of a lifted estimate and returns
    ``min_sign ||x_hat -+ x|| / ||x||``; a degenerate estimate scores 1.
    """
    est = np.asarray(estimate, dtype=float).ravel()
    if metric in ("l2", "frobenius"):
        return float(np.linalg.norm(est - truth.flat()))
    if metric == "vector":
        x = M.extract_vector(truth.value)
        X_hat = est.reshape(truth.value.shape)
        try:
            x_hat = M.extract_vector(0.5 * (X_hat + X_hat.T))
        except M.DegenerateRecoveryError:
            return 1.0
        nx = np.linalg.norm(x)
        return float(min(np.linalg.norm(x_hat - x), np.linalg.norm(x_hat + x)) / nx)
    raise ValueError(f"unknown error metric {metric!r}")


@dataclass
class SweepPlan:
    """Everything needed to reproduce a sweep from ``master_seed``.

    ``model`` is a dict such as ``{"kind": "linear", "m": 25, "d": 50}``
    (see :func:`onebit.models.random_model`).  ``thresholds`` is either
    ``{"kind": "covering", "width": 3.0}`` (uniform over +-width times the
    RMS of the trial's measurements) or a fixed ``uniform``/``gaussian``
    distribution.  With ``project`` set, the solver interleaves projection
    onto ``structure``.
    """

    model: dict
    L_values: list
    trials: int = 20
    structure: object = None
    thresholds: dict = field(default_factory=lambda: {"kind": "covering", "width": 3.0})
    solver: SolverConfig = field(default_factory=SolverConfig)
    error_metric: str = "l2"
    project: bool = False
    fixed_truth: bool = False
    master_seed: int = 0

    def validate(self):
        Ls = list(self.L_values)
        if len(Ls) < 2:
            raise ValueError("L_values needs at least two entries for slope fitting")
        if any(int(L) != L or L < 1 for L in Ls) or any(b <= a for a, b in zip(Ls, Ls[1:])):
            raise ValueError(f"L_values must be strictly increasing positive integers, got {Ls}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.error_metric not in ("l2", "frobenius", "vector"):
            raise ValueError(f"unknown error metric {self.error_metric!r}")
        if self.project and self.structure is None:
            raise ValueError("project=True needs a declared structure")
        self.solver.validate()

    def unknown_shape(self):
        spec = self.model
        kind = spec["kind"]
        if kind == "direct":
            return (int(spec["n"]),)
        if kind == "linear":
            return (int(spec["d"]),)
        if kind == "quadratic":
            return (int(spec["n"]), int(spec["n"]))
        if kind == "trace":
            return (int(spec["n1"]), int(spec["n2"]))
        raise ValueError(f"unknown model kind {kind!r}")


@dataclass(frozen=True)
class Instance:
    model: object
    truth: M.GroundTruth
    y: np.ndarray
    scheme: ThresholdScheme


def make_instance(plan, trial, L):
    """Truth, sensing model and dither scheme for one trial at ``L`` sequences."""
    truth_trial = 0 if plan.fixed_truth else trial
    truth = M.random_truth(plan.unknown_shape(), plan.structure, derive_rng(plan.master_seed, "truth", truth_trial),
                           symmetric=plan.model["kind"] == "quadratic")
    spec = dict(plan.model)
    model = M.random_model(spec.pop("kind"), derive_rng(plan.master_seed, "model", trial), **spec)
    y = M.measure(model, truth)
    thr_seed = derive_seed(plan.master_seed, "thresholds", trial)
    scheme = scheme_from_spec(plan.thresholds, y, L, thr_seed)
    return Instance(model, truth, y, scheme)


def scheme_from_spec(spec, y, L, seed):
    kind = spec.get("kind", "covering")
    if kind == "covering":
        return covering_scheme(y, L, seed, width=float(spec.get("width", 3.0)))
    if kind == "uniform":
        return ThresholdScheme(UniformRange(float(spec["lo"]), float(spec["hi"])), L, seed)
    if kind == "gaussian":
        return ThresholdScheme(Gaussian(float(spec.get("mean", 0.0)), float(spec.get("std", 1.0))), L, seed)
    raise ValueError(f"unknown threshold kind {kind!r}")


def polyhedron_for(inst):
    return build(inst.model, quantize(inst.y, generate_thresholds(inst.scheme, inst.model.m)))


@dataclass(frozen=True)
class Cell:
    L: int
    N: int
    trial: int
    error: float
    iterations: int
    converged: bool
    wall_time: float


def _run_cell(plan, L, trial):
    inst = make_instance(plan, trial, L)
    p = polyhedron_for(inst)
    cfg = replace(
        plan.solver,
        seed=derive_seed(plan.master_seed, "solver", trial),
        structure=plan.structure if plan.project else None,
    )
    rep = solve(p, cfg)
    err = recovery_error(plan.error_metric, rep.final_iterate, inst.truth)
    return Cell(int(L), p.N, int(trial), err, rep.iterations_run, rep.converged, rep.wall_time)


def _map_cells(fn, jobs, threads):
    # each job writes its own slot, so results do not depend on scheduling
    if threads is None or threads <= 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    ci: tuple


@dataclass
class SweepResult:
    plan: SweepPlan
    cells: list
    fit: SlopeFit

    def errors(self, L):
        return np.array([c.error for c in self.cells if c.L == L])

    def median_errors(self):
        return {L: float(np.median(self.errors(L))) for L in self.plan.L_values}

    def summary(self):
        per_L = []
        for L in self.plan.L_values:
            e = self.errors(L)
            per_L.append({
                "L": int(L),
                "N": int(next(c.N for c in self.cells if c.L == L)),
                "median_error": float(np.median(e)),
                "mean_error": float(e.mean()),
                "stderr": float(e.std(ddof=1) / np.sqrt(e.size)) if e.size > 1 else 0.0,
                "converged": int(sum(c.converged for c in self.cells if c.L == L)),
            })
        return {
            "slope": self.fit.slope,
            "intercept": self.fit.intercept,
            "slope_ci": list(self.fit.ci),
            "per_L": per_L,
        }

    def write_csv(self, path, comment=None, timings_path=None):
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["L", "N", "trial", "error", "iterations", "converged"])
            for c in self.cells:
                w.writerow([c.L, c.N, c.trial, repr(c.error), c.iterations, int(c.converged)])
        if timings_path is not None:
            with open(timings_path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["L", "trial", "wall_time"])
                for c in self.cells:
                    w.writerow([c.L, c.trial, f"{c.wall_time:.6f}"])


def run_sweep(plan, threads=1):
    """Solve every ``(L, trial)`` cell and fit the decay of the median error.

    Cells that fail to converge keep their final iterate's error and are
    flagged in the result; they do not abort the sweep.
    """
    plan.validate()
    jobs = [(plan, L, t) for L in plan.L_values for t in range(plan.trials)]
    cells = _map_cells(_run_cell, jobs, threads)
    m = _model_m(plan)
    fit = fit_slope([(m * c.L, c.error) for c in cells], seed=plan.master_seed)
    return SweepResult(plan, cells, fit)


def _model_m(plan):
    spec = plan.model
    return int(spec["n"]) if spec["kind"] == "direct" else int(spec["m"])


def fit_slope(points, n_boot=2000, level=0.95, seed=0):
    """Least-squares line through ``(log10 N, log10 median error)``.

    Parameters
    ----------
    points : iterable of (N, error)
        Several errors may share an ``N`` (one per trial); they are
        reduced to their median.  Nonpositive errors are dropped with a
        warning.
    n_boot : int
        Bootstrap replicates.  Each replicate resamples the errors within
        every ``N`` group and refits.

    Returns
    -------
    SlopeFit
        Slope, intercept and a percentile bootstrap interval for the slope.
    """
    groups = {}
    dropped = 0
    for N, err in points:
        if not err > 0:
            dropped += 1
            continue
        groups.setdefault(float(N), []).append(float(err))
    if dropped:
        warnings.warn(f"fit_slope dropped {dropped} nonpositive errors", stacklevel=2)
    if len(groups) < 2:
        raise ValueError("need positive errors at two or more distinct N to fit a slope")
    Ns = np.array(sorted(groups))
    samples = [np.array(groups[N]) for N in Ns]
    lx = np.log10(Ns)

    def line(meds):
        slope, icpt = np.polyfit(lx, np.log10(meds), 1)
        return float(slope), float(icpt)

    slope, icpt = line(np.array([np.median(s) for s in samples]))
    rng = np.random.default_rng(int(seed))
    boots = np.empty(n_boot)
    for i in range(n_boot):
        meds = np.array([np.median(s[rng.integers(0, s.size, s.size)]) for s in samples])
        boots[i] = line(meds)[0]
    alpha = (1.0 - level) / 2
    lo, hi = np.quantile(boots, [alpha, 1 - alpha])
    return SlopeFit(slope, icpt, (float(min(lo, slope)), float(max(hi, slope))))


def sign_test_nonincreasing(before, after, alpha=0.05):
    """One-sided paired sign test against ``after`` tending to exceed ``before``.

    Ties are discarded.  The monotone claim passes unless increases are
    significantly more frequent than decreases at level ``alpha``.

    Returns
    -------
    (passed, p_value, n_increase, n_decrease)
    """
    before = np.asarray(before, dtype=float)
    after = np.asarray(after, dtype=float)
    inc = int(np.sum(after > before))
    dec = int(np.sum(after < before))
    if inc + dec == 0:
        return True, 1.0, 0, 0
    pval = float(stats.binomtest(inc, inc + dec, 0.5, alternative="greater").pvalue)
    return pval >= alpha, pval, inc, dec


@dataclass(frozen=True)
class SpreadResult:
    median_distance: float
    excluded: int
    iterates: np.ndarray


def spread_proxy(model, truth, scheme, K, solver=None, seeds=None, radius=1.0):
    """Median pairwise distance between ``K`` independent feasible points.

    All runs share one polyhedron.  Run ``k`` uses ``seeds[k]`` both as
    solver seed and to draw its starting point uniformly from the ball of
    ``radius`` around zero.  Runs that do not converge are excluded.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    seeds = list(range(K)) if seeds is None else [int(s) for s in seeds]
    if len(seeds) != K:
        raise ValueError("need one seed per run")
    solver = SolverConfig() if solver is None else solver
    inst = Instance(model, truth, M.measure(model, truth), scheme)
    p = polyhedron_for(inst)
    finals = []
    for s in seeds:
        cfg = replace(solver, seed=s, x0=_ball_point(p.D, radius, s))
        rep = solve(p, cfg)
        if rep.converged:
            finals.append(rep.final_iterate)
    excluded = K - len(finals)
    if len(finals) < 2:
        return SpreadResult(float("nan"), excluded, np.array(finals))
    X = np.array(finals)
    i, j = np.triu_indices(len(finals), 1)
    d = np.linalg.norm(X[i] - X[j], axis=1)
    return SpreadResult(float(np.median(d)), excluded, X)


def _ball_point(D, radius, seed):
    rng = derive_rng(seed, "start")
    g = rng.standard_normal(D)
    g /= np.linalg.norm(g)
    return radius * rng.random() ** (1.0 / D) * g


def spread_table(plan, K=8, radius=1.0, threads=1):
    """Spread proxy for every ``(L, trial)`` cell of ``plan``.

    Returns a list of dicts with keys ``L, N, trial, spread, excluded``.
    """
    plan.validate()

    def cell(L, trial):
        inst = make_instance(plan, trial, L)
        base = derive_seed(plan.master_seed, "solver", trial)
        seeds = [derive_seed(base, "solver", k) for k in range(K)]
        res = spread_proxy(inst.model, inst.truth, inst.scheme, K, plan.solver, seeds, radius)
        return {"L": int(L), "N": inst.model.m * int(L), "trial": int(trial),
                "spread": res.median_distance, "excluded": res.excluded}

    jobs = [(L, t) for L in plan.L_values for t in range(plan.trials)]
    return _map_cells(cell, jobs, threads)


@dataclass(frozen=True)
class GapRow:
    L: int
    N: int
    trial: int
    error_plain: float
    error_projected: float
    truth_norm: float

    @property
    def gap(self):
        return self.error_plain - self.error_projected


def _gap_cell(plan, L, trial):
    inst = make_instance(plan, trial, L)
    p = polyhedron_for(inst)
    cfg = replace(plan.solver, seed=derive_seed(plan.master_seed, "solver", trial))
    plain = solve(p, replace(cfg, structure=None))
    proj = solve(p, replace(cfg, structure=plan.structure))
    return GapRow(
        int(L), p.N, int(trial),
        recovery_error(plan.error_metric, plain.final_iterate, inst.truth),
        recovery_error(plan.error_metric, proj.final_iterate, inst.truth),
        float(np.linalg.norm(inst.truth.value)),
    )


def singularity_gap(plan, threads=1):
    """Plain versus structure-projected recovery error for every ``(L, trial)``.

    Both runs of a cell share the polyhedron and the solver seed, so with
    no declared structure the two errors coincide and every gap is 0.
    """
    plan.validate()
    jobs = [(plan, L, t) for L in plan.L_values for t in range(plan.trials)]
    return _map_cells(_gap_cell, jobs, threads)


def gap_summary(plan, rows, alpha=0.05, tolerance=0.05):
    """Per-L median gaps plus sign tests between consecutive ``L`` values."""
    by_L = {L: sorted((r for r in rows if r.L == L), key=lambda r: r.trial) for L in plan.L_values}
    per_L = []
    for L, rs in by_L.items():
        per_L.append({
            "L": int(L),
            "N": rs[0].N,
            "median_error_plain": float(np.median([r.error_plain for r in rs])),
            "median_error_projected": float(np.median([r.error_projected for r in rs])),
            "median_gap": float(np.median([r.gap for r in rs])),
            "median_relative_gap": float(np.median([r.gap / r.truth_norm for r in rs])),
        })
    tests = []
    Ls = list(plan.L_values)
    for a, b in zip(Ls, Ls[1:]):
        ok, pval, inc, dec = sign_test_nonincreasing([r.gap for r in by_L[a]], [r.gap for r in by_L[b]], alpha)
        tests.append({"from_L": int(a), "to_L": int(b), "passed": ok, "p_value": pval,
                      "increases": inc, "decreases": dec})
    last = by_L[Ls[-1]]
    within = bool(np.median([r.gap / r.truth_norm for r in last]) <= tolerance)
    return {"per_L": per_L, "sign_tests": tests, "final_gap_within_tolerance": within, "tolerance": tolerance}
