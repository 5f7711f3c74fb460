import numpy as np
import pytest

from suites import scvrp_suite, tiny_scvrp
from tulip.bnc import filter_tight, solve_bnc, solve_root
from tulip.core import ScenarioSet, cut_violation
from tulip.driver import (convergence_curve, first_stage_decision, fix_first_stage_and_resolve,
                          solve_direct, transfer_by_meta, tulip_solve)
from tulip.reduction import fast_forward_select, reduction_fraction_to_target
from tulip.scvrp import ScvrpInstance, build_scvrp_model, generate_demands, random_base, scvrp_problem
from tulip.ssfp import toy_forest_instance, ssfp_problem


def _toy(S=4, seed=2):
    return generate_demands(random_base(5, 300 + seed, max_demand=6), 0.75, S, seed)


def test_full_fraction_reproduces_direct():
    problem = scvrp_problem(_toy())
    assert tulip_solve(problem, 1.0).objective == solve_direct(problem).objective


@pytest.mark.parametrize("seed", range(3))
def test_half_fraction_matches_direct(seed):
    problem = scvrp_problem(_toy(4, seed))
    rep = tulip_solve(problem, 0.5)
    assert rep.status == "optimal"
    assert rep.objective == pytest.approx(solve_direct(problem).objective, abs=1e-6)
    assert 0.0 <= rep.tight_ratio <= 1.0
    assert rep.cuts_transferred == round(rep.tight_ratio * rep.root_pool_size)
    assert set(rep.wall_time) == {"reduction", "root", "bnc"}


def test_toy_forest_pipeline():
    rep = tulip_solve(ssfp_problem(toy_forest_instance(0.4)), 0.5)
    assert rep.objective == pytest.approx(4.6, abs=1e-9)


def _replay_transfer(problem, fraction):
    """Re-run the reduction and root phases to recover the transferred cuts."""
    S = problem.num_scenarios
    red = fast_forward_select(problem.distances(), problem.scenario_set.probabilities,
                              reduction_fraction_to_target(S, fraction))
    reduced = problem.reduced_model(red)
    sol, pool = solve_root(reduced)
    tight = filter_tight(pool, sol.point)
    full = problem.full_model()
    return red, reduced, full, pool, [problem.transfer_cut(c, reduced, full) for c in tight]


def test_transferred_cuts_keep_their_scenario_and_hold_at_the_optimum():
    problem = scvrp_problem(scvrp_suite()[10])
    red, reduced, full, pool, moved = _replay_transfer(problem, 0.5)
    rep = tulip_solve(problem, 0.5)
    assert rep.cuts_transferred == len(moved) and rep.root_pool_size == len(pool)
    assert moved
    kept = {i + 1 for i in red.selected}
    for cut in moved:
        assert cut.scenario == 0 or cut.scenario in kept
        stages = {full.var_meta[j][0] for j in cut.row.idx}
        assert stages <= {cut.scenario}
        assert cut_violation(cut, rep.point) <= 1e-9


def test_transfer_by_meta_is_identity_on_equal_models():
    model = build_scvrp_model(tiny_scvrp(4))
    _, pool = solve_root(model)
    for cut in pool:
        assert transfer_by_meta(cut, model, model) == cut


def test_fix_optimal_first_stage():
    problem = scvrp_problem(_toy(3, 1))
    model = problem.full_model()
    rep = solve_bnc(model)
    fixed = fix_first_stage_and_resolve(problem, first_stage_decision(problem, model, rep.point))
    assert fixed.objective == pytest.approx(rep.objective, abs=1e-9)


def test_fix_deterministic_tour_is_no_better():
    inst = _toy(2, 5)
    mean = tuple(np.mean(inst.scenarios.payload, axis=0))
    det = ScvrpInstance(inst.dist, inst.capacity, ScenarioSet((1.0,), (mean,)))
    det_problem = scvrp_problem(det)
    det_model = det_problem.full_model()
    det_rep = solve_bnc(det_model)
    problem = scvrp_problem(inst)
    fixed = fix_first_stage_and_resolve(problem,
                                        first_stage_decision(det_problem, det_model, det_rep.point))
    assert fixed.objective >= solve_direct(problem).objective - 1e-9


def test_convergence_curve_endpoints():
    problem = scvrp_problem(_toy(6, 3))
    S = problem.num_scenarios
    rows = convergence_curve(problem, [1, S])
    assert rows[-1]["mean"] == pytest.approx(solve_direct(problem).objective, abs=1e-9)
    assert rows[0]["mean"] >= rows[-1]["mean"] - 1e-9
    rnd = convergence_curve(problem, [S], "random", repeats=2)
    assert rnd[0]["min"] == rnd[0]["max"] == pytest.approx(rows[-1]["mean"], abs=1e-9)
    one = convergence_curve(problem, [2], "random", repeats=1)
    assert one[0]["min"] == one[0]["mean"] == one[0]["max"]


def test_convergence_curve_validates():
    problem = scvrp_problem(_toy(3, 0))
    with pytest.raises(ValueError):
        convergence_curve(problem, [0])
    with pytest.raises(ValueError):
        convergence_curve(problem, [4])
    with pytest.raises(ValueError):
        convergence_curve(problem, [1], mode="backward")


def test_time_limit_spans_all_phases():
    rep = tulip_solve(scvrp_problem(scvrp_suite()[14]), 0.5, time_limit=0.5)
    assert rep.status == "time_limit"
    assert rep.bound <= rep.objective
