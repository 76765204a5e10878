import numpy as np
import pytest

from onebit import experiments as E
from onebit.models import Direct, Rank1Symmetric, random_truth
from onebit.quantizer import ThresholdScheme, UniformRange
from onebit.solvers import SolverConfig


def test_fit_exact_power_law():
    pts = [(N, N ** -0.5) for N in (10, 100, 1000, 10_000)]
    fit = E.fit_slope(pts, n_boot=50)
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)


def test_fit_two_points():
    assert E.fit_slope([(10, 1.0), (1000, 0.01)], n_boot=10).slope == pytest.approx(-1.0, abs=1e-12)


def test_fit_one_third_table():
    pts = [(10, 1.0), (100, 10 ** (-1 / 3)), (1000, 10 ** (-2 / 3))]
    assert E.fit_slope(pts, n_boot=10).slope == pytest.approx(-1 / 3, abs=1e-12)


def test_fit_noisy_power_law_inside_ci():
    rng = np.random.default_rng(0)
    pts = [(N, 3.0 * N ** (-1 / 3) * np.exp(0.3 * rng.standard_normal())) for N in (50, 100, 200, 400, 800, 1600, 3200)
           for _ in range(30)]
    fit = E.fit_slope(pts, seed=1)
    lo, hi = fit.ci
    assert lo <= -1 / 3 <= hi
    assert hi - lo < 0.2


def test_fit_drops_nonpositive():
    with pytest.warns(UserWarning, match="dropped 1"):
        fit = E.fit_slope([(10, 1.0), (100, 0.0), (100, 0.1)], n_boot=10)
    assert fit.slope == pytest.approx(-1.0)
    with pytest.raises(ValueError), pytest.warns(UserWarning):
        E.fit_slope([(10, 1.0), (100, -1.0)], n_boot=10)


def test_sign_test():
    ok, p, inc, dec = E.sign_test_nonincreasing([3, 3, 3, 3, 3, 3, 3, 3, 3, 3], [1, 1, 1, 1, 1, 1, 1, 1, 1, 1])
    assert ok and inc == 0 and dec == 10
    ok, p, inc, dec = E.sign_test_nonincreasing([1] * 10, [2] * 10)
    assert not ok and p == pytest.approx(0.5**10)
    assert E.sign_test_nonincreasing([1, 2], [1, 2])[0]


def test_derived_seeds_are_distinct_and_stable():
    seeds = {E.derive_seed(7, purpose, t) for purpose in E.STREAMS for t in range(5)}
    assert len(seeds) == 5 * len(E.STREAMS)
    assert E.derive_seed(7, "truth", 3) == E.derive_seed(7, "truth", 3)


def direct_plan(**kw):
    base = dict(model={"kind": "direct", "n": 20}, L_values=[50, 100, 200, 400, 800], trials=20,
                solver=SolverConfig(max_iters=2_000_000, check_every=1000), master_seed=3)
    base.update(kw)
    return E.SweepPlan(**base)


def test_direct_sweep_median_error_decreases():
    res = E.run_sweep(direct_plan())
    med = [res.median_errors()[L] for L in res.plan.L_values]
    assert all(b < a for a, b in zip(med, med[1:]))
    assert all(c.converged for c in res.cells)
    s = res.summary()
    assert s["per_L"][0]["N"] == 20 * 50
    assert s["slope_ci"][0] <= s["slope"] <= s["slope_ci"][1]


def test_sweep_reproducible_and_thread_independent():
    plan = direct_plan(L_values=[20, 40], trials=4)
    a = E.run_sweep(plan)
    b = E.run_sweep(plan, threads=3)
    key = lambda r: [(c.L, c.N, c.trial, c.error, c.iterations, c.converged) for c in r.cells]
    assert key(a) == key(b)
    assert a.fit == b.fit


def test_fixed_truth_shared_across_trials():
    plan = direct_plan(L_values=[5, 10], trials=3, fixed_truth=True)
    truths = {tuple(E.make_instance(plan, t, 5).truth.flat()) for t in range(3)}
    assert len(truths) == 1
    plan = direct_plan(L_values=[5, 10], trials=3)
    assert len({tuple(E.make_instance(plan, t, 5).truth.flat()) for t in range(3)}) == 3


def test_plan_validation():
    with pytest.raises(ValueError):
        direct_plan(L_values=[10]).validate()
    with pytest.raises(ValueError):
        direct_plan(L_values=[10, 10]).validate()
    with pytest.raises(ValueError):
        direct_plan(project=True).validate()


def test_vector_error_sign_invariant():
    truth = random_truth((4, 4), Rank1Symmetric(), np.random.default_rng(1))
    assert E.recovery_error("vector", truth.flat(), truth) == pytest.approx(0.0, abs=1e-12)
    assert E.recovery_error("vector", -truth.flat(), truth) == 1.0


def test_spread_identical_seeds_zero():
    rng = np.random.default_rng(2)
    truth = random_truth((5,), None, rng)
    scheme = ThresholdScheme(UniformRange(-3, 3), 50, 4)
    res = E.spread_proxy(Direct(5), truth, scheme, 2, seeds=[11, 11])
    assert res.median_distance == 0.0 and res.excluded == 0


def test_spread_shrinks_at_abundance():
    rng = np.random.default_rng(3)
    truth = random_truth((5,), None, rng)
    cfg = SolverConfig(max_iters=2_000_000, check_every=5000)
    big = E.spread_proxy(Direct(5), truth, ThresholdScheme(UniformRange(-3, 3), 10_000, 4), 6, cfg)
    single = E.spread_proxy(Direct(5), truth, ThresholdScheme(UniformRange(-3, 3), 10_000, 4), 2, cfg)
    err = np.linalg.norm(single.iterates[0] - truth.flat())
    assert big.median_distance < 10 * err
    assert big.median_distance < 5e-3


def test_spread_table_nonincreasing():
    plan = E.SweepPlan(model={"kind": "direct", "n": 5}, L_values=[100, 1000], trials=10,
                       solver=SolverConfig(max_iters=1_000_000, check_every=1000), master_seed=5)
    rows = E.spread_table(plan, K=5)
    before = [r["spread"] for r in rows if r["L"] == 100]
    after = [r["spread"] for r in rows if r["L"] == 1000]
    assert E.sign_test_nonincreasing(before, after)[0]
    assert np.median(after) < np.median(before)


def test_gap_zero_without_structure():
    plan = E.SweepPlan(model={"kind": "quadratic", "m": 20, "n": 3}, L_values=[5, 10], trials=2,
                       error_metric="frobenius",
                       solver=SolverConfig(algorithm="skm", gamma=20, max_iters=5000), master_seed=1)
    rows = E.singularity_gap(plan)
    assert all(r.gap == 0.0 for r in rows)


def test_gap_structure_helps_when_scarce():
    plan = E.SweepPlan(model={"kind": "quadratic", "m": 40, "n": 5}, L_values=[10, 40], trials=6,
                       structure=Rank1Symmetric(), error_metric="frobenius",
                       solver=SolverConfig(algorithm="skm", gamma=50, max_iters=50_000, check_every=500),
                       master_seed=2)
    rows = E.singularity_gap(plan)
    scarce = [r for r in rows if r.L == 10]
    assert sum(r.error_projected <= r.error_plain for r in scarce) >= 5
    summary = E.gap_summary(plan, rows)
    assert [t["from_L"] for t in summary["sign_tests"]] == [10]
