"""End-to-end acceptance checks. Each test prints one PASS/FAIL line.

The scenario runs are expensive, so runs shared between checks are cached per
module.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from tunnelmpc.aero import CeilingCoeffs, ceiling_effect_ratio, ceiling_singular_distance, ground_effect_ratio
from tunnelmpc.cbf import CbfParams, calibrate_lambda, invariance_harness
from tunnelmpc.exceptions import AeroSingularityError
from tunnelmpc.mpc import Case, Mode
from tunnelmpc.sim import STANDOFF_WALLS, ScenarioConfig, TrajectorySpec, records_to_csv, run_scenario, standoff_analysis

pytestmark = pytest.mark.acceptance

D_M = 0.8
SEEDS = range(10)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {number:>2}] {'PASS' if ok else 'FAIL'}: {detail}")

    return emit


@pytest.fixture(scope="module")
def margin():
    lam, _ = calibrate_lambda(CbfParams(), D_M)
    return lam


@pytest.fixture(scope="module")
def runs(margin):
    cache = {}

    def get(case, controller, seed, **traj):
        key = (case, controller, seed, tuple(sorted(traj.items())))
        if key not in cache:
            cfg = ScenarioConfig(
                case=case, controller=controller, seed=seed, d_m=D_M,
                cbf=CbfParams(lam=margin), trajectory=TrajectorySpec(**traj),
            )
            start = time.perf_counter()
            records, metrics = run_scenario(cfg)
            cache[key] = (cfg, records, metrics, time.perf_counter() - start)
        return cache[key]

    return get


def test_case_one_boundary(runs, report):
    cbf = [runs(Case.BOUND_REGION, Mode.CBF, s) for s in SEEDS]
    naive = [runs(Case.BOUND_REGION, Mode.NAIVE, s) for s in SEEDS]
    elapsed = sum(r[3] for r in cbf + naive)
    cbf_violations = [r[2].boundary_violations for r in cbf]
    naive_hit = sum(r[2].boundary_violations >= 1 for r in naive)
    ok = sum(cbf_violations) == 0 and naive_hit >= 8 and elapsed <= 300
    report(1, ok, f"CBF violations per seed {cbf_violations}; Naive seeds with a violation {naive_hit}/10 (need >= 8); "
                  f"runtime {elapsed:.0f} s (limit 300)")
    assert sum(cbf_violations) == 0
    assert naive_hit >= 8
    assert elapsed <= 300


def test_case_one_tracking_order(runs, report):
    te = {m: np.array([runs(Case.BOUND_REGION, m, s)[2].T_e for s in SEEDS]) for m in Mode}
    ordered = int(np.sum((te[Mode.NAIVE] > te[Mode.HC]) & (te[Mode.HC] > te[Mode.CBF])))
    gain = 1.0 - te[Mode.CBF].mean() / te[Mode.NAIVE].mean()
    ok = ordered >= 8 and gain >= 0.30
    report(2, ok, f"mean T_e Naive {te[Mode.NAIVE].mean():.3f} / HC {te[Mode.HC].mean():.3f} / CBF {te[Mode.CBF].mean():.3f}; "
                  f"ordered seeds {ordered}/10 (need >= 8); CBF gain {gain:.1%} (need >= 30%)")
    assert ordered >= 8
    assert gain >= 0.30


def test_case_two_standoff(runs, report):
    standoff = {}
    for mode in (Mode.NAIVE, Mode.CBF):
        for wall in STANDOFF_WALLS:
            values = []
            for seed in range(5):
                cfg, records, _, _ = runs(Case.MIN_STANDOFF, mode, seed, standoff_wall=wall)
                values.append(standoff_analysis(records, cfg).min_stable_standoff)
            standoff[mode, wall] = float(np.mean(values))
    ratios = {w: standoff[Mode.CBF, w] / standoff[Mode.NAIVE, w] for w in STANDOFF_WALLS}
    ok = all(r <= 0.7 for r in ratios.values())
    detail = "; ".join(
        f"{w}: Naive {standoff[Mode.NAIVE, w]:.3f} m, CBF {standoff[Mode.CBF, w]:.3f} m, ratio {ratios[w]:.2f}"
        for w in STANDOFF_WALLS
    )
    report(3, ok, f"{detail} (need ratio <= 0.70 on every wall)")
    for w in STANDOFF_WALLS:
        assert ratios[w] <= 0.7, w


def test_case_three_collisions(runs, report):
    collided = {m: [runs(Case.CLOSE_PROXIMITY, m, s)[2].collided for s in SEEDS] for m in Mode}
    cbf_te = [runs(Case.CLOSE_PROXIMITY, Mode.CBF, s)[2].T_e for s in SEEDS]
    ok = all(collided[Mode.NAIVE]) and all(collided[Mode.HC]) and not any(collided[Mode.CBF]) and max(cbf_te) < 1.0
    report(4, ok, f"collisions Naive {sum(collided[Mode.NAIVE])}/10, HC {sum(collided[Mode.HC])}/10, "
                  f"CBF {sum(collided[Mode.CBF])}/10; CBF max T_e {max(cbf_te):.3f} m")
    assert all(collided[Mode.NAIVE]) and all(collided[Mode.HC])
    assert not any(collided[Mode.CBF])
    assert max(cbf_te) < 1.0


def _effort(records, steps):
    u = np.array([r.mpc_input.as_array() for r in records[:steps] if r.solver_status != "collision"])
    return float(np.sum(u * u))


def test_case_three_effort(runs, report):
    naive_e, cbf_e = [], []
    for s in SEEDS:
        naive_records = runs(Case.CLOSE_PROXIMITY, Mode.NAIVE, s)[1]
        completed = sum(r.solver_status != "collision" for r in naive_records)
        naive_e.append(_effort(naive_records, completed))
        cbf_e.append(_effort(runs(Case.CLOSE_PROXIMITY, Mode.CBF, s)[1], completed))
    ratio = np.mean(cbf_e) / np.mean(naive_e)
    report(5, ratio <= 0.9, f"c_e over Naive's completed window: Naive {np.mean(naive_e):.1f}, CBF {np.mean(cbf_e):.1f}, "
                            f"ratio {ratio:.3f} (need <= 0.90)")
    assert ratio <= 0.9


def test_invariance_suite(margin, report):
    start = time.perf_counter()
    base = CbfParams(lam=0.0)
    with_margin = invariance_harness(replace(base, lam=margin), D_M, episodes=10_000, seed=1)
    without = invariance_harness(base, D_M, episodes=10_000, seed=1)
    elapsed = time.perf_counter() - start
    ok = with_margin.violations == 0 and with_margin.min_h_overall > without.min_h_overall and elapsed <= 60
    report(6, ok, f"lambda {margin:.3g}: violations {with_margin.violations}, min h {with_margin.min_h_overall:.4f} "
                  f"vs {without.min_h_overall:.4f} at lambda 0; {elapsed:.1f} s")
    assert with_margin.violations == 0
    assert with_margin.min_h_overall > without.min_h_overall
    assert elapsed <= 60


def test_aero_unit_values(report):
    R = 0.12
    coeffs = CeilingCoeffs()
    value = ground_effect_ratio(0.24, R)
    far_ge = abs(ground_effect_ratio(1e5, R) - 1.0)
    far_ce = abs(ceiling_effect_ratio(1e5, R, coeffs) - 1.0)
    threshold_ok = True
    for fn, edge in ((lambda d: ground_effect_ratio(d, R), R / 4), (lambda d: ceiling_effect_ratio(d, R, coeffs), ceiling_singular_distance(R, coeffs))):
        with pytest.raises(AeroSingularityError):
            fn(edge)
        threshold_ok &= math.isfinite(fn(math.nextafter(edge, math.inf)))
    ok = abs(value - 1.015873) <= 1e-6 and far_ge <= 1e-9 and far_ce <= 1e-9 and threshold_ok
    report(7, ok, f"ground ratio at 2R {value:.7f}; far-field deviations {far_ge:.1e}, {far_ce:.1e}; singular thresholds exact")
    assert value == pytest.approx(1.015873, abs=1e-6)
    assert far_ge <= 1e-9 and far_ce <= 1e-9


def test_optimizer_oracle(report):
    from test_optimizer import TestConvexQpOracle, TestSolveExamples

    errors = []
    try:
        TestConvexQpOracle().test_hundred_random_qps()
        TestSolveExamples().test_rosenbrock_with_box()
    except AssertionError as exc:
        errors.append(str(exc).splitlines()[0])
    report(8, not errors, "100 random QPs match the active-set KKT oracle to 1e-6; box Rosenbrock to 1e-4" if not errors else errors[0])
    assert not errors


def test_gradient_checks(report):
    from test_cbf import TestGradients
    from test_mpc import TestConstraints, TestCosts

    errors = []
    checks = [
        TestGradients().test_point_and_wall,
        TestGradients().test_bounding,
        TestCosts().test_objective_gradient,
    ]
    checks += [lambda m=m, c=c: TestConstraints().test_jacobians(m, c) for m, c in
               ((Mode.CBF, Case.CLOSE_PROXIMITY), (Mode.CBF, Case.BOUND_REGION), (Mode.HC, Case.BOUND_REGION))]
    for check in checks:
        try:
            check()
        except AssertionError as exc:
            errors.append(str(exc).splitlines()[0])
    report(9, not errors, "barrier, cost and constraint gradients match central differences (rel 1e-4)" if not errors else errors[0])
    assert not errors


def test_determinism(report):
    outputs = []
    for _ in range(2):
        cfg = ScenarioConfig(case=Case.CLOSE_PROXIMITY, controller=Mode.CBF, cbf=CbfParams(lam=0.39), total_time=15.0, seed=11)
        outputs.append(records_to_csv(run_scenario(cfg)[0]).encode())
    ok = outputs[0] == outputs[1]
    report(10, ok, f"two runs of the same config and seed give {'identical' if ok else 'different'} records.csv ({len(outputs[0])} bytes)")
    assert ok
