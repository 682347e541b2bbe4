"""Period loop: cut bookkeeping, gap audits, settling, simulation."""

import numpy as np
import pytest

from fixtures import SETTLE_W_STAR, settle_setup
from toys import TinyData, toy_template

from hmpc.battery import BatteryParams, build_template, design_cost, target_box, with_offset
from hmpc.controller import (
    initial_state,
    intra_period_mpc,
    run_simulation,
    running_cost,
    step_period,
)
from hmpc.oracle import solve_saa
from hmpc.scenarios import sample_period, stream, synthetic_pool
from hmpc.stage import solve_stage

TOY_BOX = np.array([[0.0, 4.0], [0.0, 2.0]])
TOY_CW = np.array([0.0, 1.0])


def mini_setup():
    """Two-step battery day, three scenarios; small enough to hammer."""
    pool = synthetic_pool(n_steps=2, n_scenarios=3, seed=5, base_load=300.0)
    base = BatteryParams(
        capacity_Ebar=100.0,
        discharge_Pbar=60.0,
        charge_Punder=60.0,
        fr_reserve_rho=0.4,
        ramp_dPbar=120.0,
        demand_charge_piD=1.0,
        period_length_n=2,
    )
    params = with_offset(base, pool)
    max_load = float(max(d.load.max() for d in pool.support))
    return params, pool, target_box(params, max_load), design_cost(params)


def test_initial_state_defaults_and_box_check():
    template = toy_template()
    state = initial_state(template, TOY_CW, TOY_BOX)
    np.testing.assert_allclose(state.targets_w, [2.0, 1.0])
    assert state.period_m == 1 and not state.cuts and not state.history
    with pytest.raises(ValueError, match="box"):
        initial_state(template, TOY_CW, TOY_BOX, w1=np.array([5.0, 1.0]))


def test_first_period_cut_is_tight_at_its_targets():
    template = toy_template()
    d = TinyData(cost=(2.0, 1.0, 2.0))
    state = initial_state(template, TOY_CW, TOY_BOX, w1=np.array([1.0, 1.0]))
    state, rec = step_period(state, d)

    assert len(state.cuts) == 1 and state.period_m == 2
    phi_1 = TOY_CW @ rec.targets + solve_stage(template, rec.targets, d).cost_h
    assert rec.running_cost == pytest.approx(phi_1, abs=1e-9)
    # one cut, generated here: envelope is exact at w_1
    assert rec.lower_bound == pytest.approx(phi_1, abs=1e-9)
    assert rec.master_bound <= rec.lower_bound + 1e-9

    # master minimum agrees with a brute grid over the same single cut
    cut = state.cuts[0]
    grid = np.linspace(TOY_BOX[:, 0], TOY_BOX[:, 1], 41)
    best = min(
        cut.value_at(np.array([a, b]), TOY_CW) for a in grid[:, 0] for b in grid[:, 1]
    )
    assert rec.master_bound == pytest.approx(best, abs=1e-9)
    np.testing.assert_allclose(state.targets_w, rec.targets_next)


def test_fifty_periods_of_invariants():
    params, pool, box, cw = mini_setup()
    template = build_template(params)
    state = initial_state(template, cw, box)
    rng = stream(21)

    births = []  # (birth period, alpha at birth)
    records = []
    for m in range(1, 51):
        state, rec = step_period(state, sample_period(pool, rng))
        births.append((m, state.cuts[-1].alpha))
        records.append(rec)

    assert state.period_m == 51
    assert len(state.cuts) == 50 and len(state.history) == 50

    for rec in records:
        scale = 1 + abs(rec.running_cost)
        assert rec.running_cost >= rec.lower_bound - 1e-6 * scale
        assert rec.current_gap_eps >= -1e-6
        assert rec.master_bound <= rec.lower_bound + 1e-9 * scale
        assert rec.slack_activation >= 0.0

    # rescaling telescopes: a cut born at period b keeps alpha_b * b / m
    for cut, (b, alpha_birth) in zip(state.cuts, births):
        assert cut.birth_period == b
        assert cut.alpha == pytest.approx(alpha_birth * b / 50, rel=1e-12)

    paid = sum(r.stage_cost + cw @ r.targets for r in records)
    assert state.realized_cost_accum == pytest.approx(paid, rel=1e-12)


def test_master_bound_sandwiches_the_saa_optimum():
    params, pool, box, cw = mini_setup()
    template = build_template(params)
    state = initial_state(template, cw, box)
    rng = stream(3)
    for m in range(1, 9):
        state, rec = step_period(state, sample_period(pool, rng))
        _, saa_val = solve_saa(template, state.history, box, cw)
        tol = 1e-6 * (1 + abs(saa_val))
        assert rec.master_bound <= saa_val + tol
        assert saa_val <= rec.running_cost + tol


def test_targets_settle_on_the_arbitrage_fixture():
    params, pool, box, cw = settle_setup()
    template = build_template(params)
    sim = run_simulation(
        template, cw, box, pool, periods=40, seed=3, keep_planned=0,
        track_overall_gap=False,
    )
    tail = np.array([r.targets_next for r in sim.records[-10:]])
    assert np.ptp(tail, axis=0).max() <= 1e-6
    np.testing.assert_allclose(tail[-1], SETTLE_W_STAR, atol=2e-6)


def test_overall_gap_closes_on_the_arbitrage_fixture():
    params, pool, box, cw = settle_setup()
    template = build_template(params)
    sim = run_simulation(
        template, cw, box, pool, periods=40, seed=3, keep_planned=0,
        track_overall_gap=True,
    )
    last = sim.records[-1]
    assert last.overall_gap_epsbar is not None
    assert -1e-6 <= last.current_gap_eps < 0.01
    assert abs(last.overall_gap_epsbar) < 0.01


def test_mpc_plan_matches_stage_solve_under_perfect_forecast():
    template = toy_template()
    d = TinyData(cost=(2.0, 1.0, 2.0))
    w = np.array([1.5, 0.5])
    plan = intra_period_mpc(template, w, d)
    assert plan.cost_h == pytest.approx(solve_stage(template, w, d).cost_h, abs=1e-12)
    free = intra_period_mpc(template, w, TinyData(cost=(0.0, 0.0, 0.0)))
    assert free.cost_h == pytest.approx(0.0, abs=1e-12)


def test_simulation_is_deterministic_in_the_seed():
    params, pool, box, cw = mini_setup()
    template = build_template(params)
    kwargs = dict(periods=12, seed=9, forecast_sigma=0.1, keep_planned=3)
    a = run_simulation(template, cw, box, pool, **kwargs)
    b = run_simulation(template, cw, box, pool, **kwargs)
    assert np.array_equal(a.targets_trace, b.targets_trace)
    assert a.state.realized_cost_accum == b.state.realized_cost_accum
    assert len(a.planned) == 3 and len(a.realizations) == 12
    assert [d.key for d in a.realizations] == [d.key for d in b.realizations]


def test_audit_stride_skips_running_cost():
    params, pool, box, cw = mini_setup()
    template = build_template(params)
    sim = run_simulation(
        template, cw, box, pool, periods=8, seed=2,
        audit_full_until=3, audit_stride=2, keep_planned=0,
    )
    audited = {1, 2, 3, 4, 6, 8}
    for rec in sim.records:
        if rec.period in audited:
            assert rec.running_cost is not None
            assert rec.overall_gap_epsbar is not None
        else:
            assert rec.running_cost is None
            assert rec.overall_gap_epsbar is None


def test_forecast_error_decays_with_sigma():
    params, pool, box, cw = mini_setup()
    template = build_template(params)

    def mean_error(sigma):
        errs = []
        for seed in range(12):
            sim = run_simulation(
                template, cw, box, pool, periods=4, seed=100 + seed,
                forecast_sigma=sigma, keep_planned=4,
                audit_full_until=0, audit_stride=10**9, track_overall_gap=False,
            )
            for (m, w, plan), truth in zip(sim.planned, sim.realizations):
                actual = sim.state.cache.solve(w, truth).cost_h
                errs.append(abs(plan.cost_h - actual))
        return np.mean(errs)

    assert mean_error(0.0) == 0.0
    assert mean_error(0.25) > mean_error(0.05) > 0.0


def test_running_cost_requires_history():
    template = toy_template()
    state = initial_state(template, TOY_CW, TOY_BOX)
    with pytest.raises(ValueError, match="period"):
        running_cost(state, state.targets_w)
