import numpy as np
import pytest

from bloodbank.errors import ParameterError
from bloodbank.inventory import AgeProfile, CostParams, simulate, young_stock
from bloodbank.policy import (
    PolicyParams,
    Schedule,
    comparison_table,
    cost_under_actual,
    evaluate_strategy,
    optimize_reorder,
    optimize_target,
    order_quantity,
    read_comparison_csv,
    reorder_sweep,
    round_units,
    run_policy,
    target_sweep,
    write_comparison_csv,
)

COSTS = CostParams()
MONDAY = 0
THURSDAY = 3


class TestOrderQuantity:
    def test_forecast_within_band(self):
        params = PolicyParams(inventory_target=1040, reorder_level=830)
        assert order_quantity(800, 150, params) == 150  # inside [30, 240]

    def test_above_reorder_level_orders_nothing(self):
        params = PolicyParams(inventory_target=1040, reorder_level=830)
        for forecast in (0, 150, 10_000):
            assert order_quantity(900, forecast, params) == 0

    def test_upper_clamp_at_target(self):
        params = PolicyParams(inventory_target=1040, reorder_level=830)
        assert order_quantity(800, 500, params) == 240  # capped at S - I

    def test_lower_lift_to_reorder_level(self):
        params = PolicyParams(inventory_target=1040, reorder_level=830)
        assert order_quantity(800, 10, params) == 30  # lifted to s - I

    def test_reorder_above_target_rejected(self):
        with pytest.raises(ParameterError):
            PolicyParams(inventory_target=100, reorder_level=200)

    def test_negative_inputs_rejected(self):
        params = PolicyParams(inventory_target=10, reorder_level=5)
        with pytest.raises(ParameterError):
            order_quantity(-1, 0, params)


def test_round_units_half_up():
    assert round_units(2.5) == 3
    assert round_units(2.49) == 2
    assert round_units(-4.0) == 0
    assert round_units(0.5) == 1


class TestCostUnderActual:
    def test_constant_demand_young_stock(self):
        assert cost_under_actual([93] * 365, 780, COSTS) == pytest.approx(880.0)

    def test_zero_demand_empty_system(self):
        assert cost_under_actual([0] * 50, AgeProfile.empty(32), COSTS) == 0.0

    def test_inventory_stationary_for_any_stream(self):
        rng = np.random.default_rng(12)
        demands = rng.integers(50, 150, size=200).tolist()
        profile = young_stock(780, float(np.mean(demands)), 32)
        outcomes, _ = simulate(profile, demands, demands, COSTS)
        assert all(o.end_inventory == 780 for o in outcomes)
        assert all(o.expired == 0 for o in outcomes)

    def test_empty_stream_rejected(self):
        with pytest.raises(ParameterError):
            cost_under_actual([], 780, COSTS)


class TestOptimizeTarget:
    def test_perfect_forecast_non_binding(self):
        rng = np.random.default_rng(7)
        demands = rng.integers(60, 130, size=120).tolist()
        y_hat = [float(v) for v in demands]
        grid = [780, 900, 1000, 2000]
        best = optimize_target(y_hat, demands, 780, COSTS, grid)
        # every candidate >= 780 + max(y) gives an exact cost match; the
        # smallest non-binding one wins, and the curve shows a zero there
        rows = {target: objective for target, _, objective in
                target_sweep(y_hat, demands, 780, COSTS, grid)}
        zero_targets = [t for t, obj in rows.items() if obj == 0.0]
        assert best == min(zero_targets)
        assert best >= 780 + max(demands) - 1

    def test_over_forecast_bias_binds_target(self):
        rng = np.random.default_rng(21)
        demands = rng.integers(80, 110, size=240).tolist()
        y_hat = [v + 10.0 for v in demands]  # persistent over-forecast
        grid = range(780, 1561, 10)
        best = optimize_target(y_hat, demands, 780, COSTS, grid)
        rows = target_sweep(y_hat, demands, 780, COSTS, grid)
        objective = {t: o for t, _, o in rows}
        unconstrained = objective[1560]
        assert objective[best] < unconstrained
        # the chosen cap actually bites: some order is cut short by it
        units = [round_units(v) for v in y_hat]
        run = run_policy(y_hat, demands, 780, COSTS,
                         PolicyParams(best, best))  # order-up-to best
        assert best < 1560

    def test_singleton_grid(self):
        assert optimize_target([90.0], [90], 100, COSTS, [500]) == 500

    def test_sweep_matches_brute_force_recomputation(self):
        rng = np.random.default_rng(4)
        demands = rng.integers(40, 90, size=150).tolist()
        y_hat = (np.asarray(demands) + rng.normal(0, 8, size=150)).tolist()
        grid = range(400, 801, 50)
        rows = target_sweep(y_hat, demands, 400, COSTS, grid)
        gold = cost_under_actual(demands, 400, COSTS)
        profile = young_stock(400, float(np.mean(demands)), 32)
        units = [round_units(v) for v in y_hat]
        for target, average, objective in rows:
            state = profile
            level = state.total
            orders = []
            from bloodbank.inventory import step

            for i in range(len(demands)):
                z = max(0, min(units[i], target - level))
                state, outcome = step(state, z, demands[i], COSTS)
                orders.append(z)
                level = outcome.end_inventory
            check_outcomes, check_avg = simulate(profile, orders, demands, COSTS)
            assert average == check_avg
            assert objective == abs(gold - check_avg)

    def test_empty_grid(self):
        with pytest.raises(ParameterError):
            optimize_target([1.0], [1], 10, COSTS, [])


class TestOptimizeReorder:
    def test_under_forecast_bias_needs_floor(self):
        rng = np.random.default_rng(31)
        demands = rng.integers(80, 110, size=240).tolist()
        y_hat = [max(0.0, v - 10.0) for v in demands]  # persistent under-forecast
        target = 1600
        best = optimize_reorder(y_hat, demands, 780, COSTS, target, range(0, 1601, 20))
        assert best > 0
        run = run_policy(y_hat, demands, 780, COSTS, PolicyParams(target, best))
        lifted = [i for i, z in enumerate(run.orders)
                  if z > 0 and z > round_units(y_hat[i])]
        assert lifted  # the floor actively lifts some orders

    def test_zero_grid(self):
        assert optimize_reorder([5.0] * 10, [5] * 10, 30, COSTS, 100, [0]) == 0

    def test_daily_and_semiweekly_optimized_separately(self, small_records):
        demands = [int(r.demand) for r in small_records[:365]]
        rng = np.random.default_rng(2)
        y_hat = (np.asarray(demands) + rng.normal(0, 6, size=365)).tolist()
        start_wd = small_records[0].date.weekday()
        target = 1400
        grid = range(0, 1401, 50)
        daily = optimize_reorder(y_hat, demands, 780, COSTS, target, grid,
                                 Schedule("daily", start_wd))
        semi = optimize_reorder(y_hat, demands, 780, COSTS, target, grid,
                                Schedule("semiweekly", start_wd))
        assert isinstance(daily, int) and isinstance(semi, int)
        assert daily != semi  # independent optimizations on different dynamics

    def test_grid_exceeding_target_rejected(self):
        with pytest.raises(ParameterError):
            optimize_reorder([1.0], [1], 10, COSTS, 50, [0, 60])

    def test_sweep_matches_brute_force(self):
        rng = np.random.default_rng(9)
        demands = rng.integers(40, 90, size=140).tolist()
        y_hat = (np.asarray(demands) + rng.normal(0, 8, size=140)).tolist()
        target = 700
        schedule = Schedule("semiweekly", start_weekday=2)
        rows = reorder_sweep(y_hat, demands, 400, COSTS, target, range(0, 701, 100), schedule)
        gold = cost_under_actual(demands, 400, COSTS)
        profile = young_stock(400, float(np.mean(demands)), 32)
        from bloodbank.inventory import step

        for level_candidate, average, objective in rows:
            state = profile
            level = state.total
            horizon = len(demands)
            costs_sum = 0.0
            for i in range(horizon):
                placement = (2 + i - 1) % 7
                if placement in (0, 3):
                    block = 3 if placement == 0 else 4
                    forecast = round_units(sum(y_hat[i : min(i + block, horizon)]))
                    if level < level_candidate:
                        z = min(max(forecast, level_candidate - level), target - level)
                    else:
                        z = 0
                else:
                    z = 0
                state, outcome = step(state, z, demands[i], COSTS)
                level = outcome.end_inventory
                costs_sum += outcome.cost
            assert average == pytest.approx(costs_sum / horizon, abs=0.0)
            assert objective == pytest.approx(abs(gold - costs_sum / horizon), abs=0.0)


class TestRunPolicy:
    def test_order_band_respected_every_period(self):
        rng = np.random.default_rng(3)
        demands = rng.integers(70, 120, size=300).tolist()
        y_hat = (np.asarray(demands) + rng.normal(0, 10, size=300)).tolist()
        params = PolicyParams(inventory_target=1100, reorder_level=850)
        run = run_policy(y_hat, demands, 780, COSTS, params)
        for level, z in zip(run.prior_inventory, run.orders):
            if level >= 850:
                assert z == 0
            else:
                assert 850 - level <= z <= 1100 - level

    def test_post_arrival_cap_never_overshot(self):
        rng = np.random.default_rng(13)
        demands = rng.integers(70, 120, size=300).tolist()
        y_hat = (np.asarray(demands) + 15.0).tolist()  # over-forecast pushes at the cap
        params = PolicyParams(inventory_target=1000, reorder_level=900)
        run = run_policy(y_hat, demands, 780, COSTS, params)
        for level, z in zip(run.prior_inventory, run.orders):
            if z > 0:
                assert level + z <= 1000

    def test_semiweekly_orders_only_mon_thu(self):
        rng = np.random.default_rng(23)
        demands = rng.integers(70, 120, size=120).tolist()
        y_hat = [float(v) for v in demands]
        start_weekday = 5  # first period is a Saturday
        params = PolicyParams(1400, 1200, Schedule("semiweekly", start_weekday))
        run = run_policy(y_hat, demands, 780, COSTS, params)
        for i, z in enumerate(run.orders):
            if z > 0:
                assert (start_weekday + i - 1) % 7 in (MONDAY, THURSDAY)

    def test_stream_mismatch(self):
        with pytest.raises(ParameterError):
            run_policy([1.0], [1, 2], 10, COSTS, PolicyParams(100, 0))


class TestEvaluateStrategy:
    def test_gold_matches_cost_under_actual(self):
        demands = [93] * 365
        summary = evaluate_strategy("gold", None, demands, 780, COSTS)
        assert summary.cost_mean == pytest.approx(880.0)
        assert summary.cost_sd == pytest.approx(0.0)
        assert summary.days_with_orders == 365
        assert summary.order_day_fraction == 1.0
        assert summary.inventory_mean == pytest.approx(780.0)
        assert summary.doh == pytest.approx(780.0 / 93.0)

    def test_semiweekly_fraction_bounded_by_schedule(self, small_records):
        demands = [int(r.demand) for r in small_records[:365]]
        y_hat = [float(v) for v in demands]
        start_wd = small_records[0].date.weekday()
        summary = evaluate_strategy(
            "semiweekly", y_hat, demands, 780, COSTS,
            params=PolicyParams(1400, 900), start_weekday=start_wd,
        )
        assert summary.order_day_fraction <= 2.0 / 7.0 + 0.01
        assert set(summary.placement_weekdays) <= {MONDAY, THURSDAY}

    def test_daily_leaner_than_fat_baseline(self, small_records):
        demands = [int(r.demand) for r in small_records[:365]]
        rng = np.random.default_rng(5)
        y_hat = (np.asarray(demands) + rng.normal(0, 5, size=365)).tolist()
        start_wd = small_records[0].date.weekday()
        daily = evaluate_strategy("daily", y_hat, demands, 780, COSTS,
                                  params=PolicyParams(1100, 820), start_weekday=start_wd)
        baseline = evaluate_strategy("baseline", y_hat, demands, 780, COSTS,
                                     baseline_target=round(1.4 * 780),
                                     start_weekday=start_wd)
        assert daily.inventory_mean < baseline.inventory_mean
        assert baseline.urgent_mean is None  # reported as unavailable

    def test_perfect_forecast_recovers_gold_exactly(self):
        import dataclasses

        rng = np.random.default_rng(8)
        demands = rng.integers(60, 120, size=200).tolist()
        y_hat = [float(v) for v in demands]
        gold = evaluate_strategy("gold", None, demands, 780, COSTS)
        # reorder level just above the stationary stock forces an order every
        # day, and the wide target never clips it
        params = PolicyParams(inventory_target=780 + max(demands) + 10, reorder_level=781)
        daily = evaluate_strategy("daily", y_hat, demands, 780, COSTS, params=params)
        assert dataclasses.replace(daily, strategy="gold") == gold

    def test_unknown_strategy(self):
        with pytest.raises(ParameterError):
            evaluate_strategy("weekly", [1.0], [1], 10, COSTS)

    def test_baseline_needs_target(self):
        with pytest.raises(ParameterError):
            evaluate_strategy("baseline", [1.0], [1], 10, COSTS)


def test_comparison_outputs(tmp_path, small_records):
    demands = [int(r.demand) for r in small_records[:200]]
    rng = np.random.default_rng(3)
    y_hat = (np.asarray(demands) + rng.normal(0, 5, size=200)).tolist()
    summaries = [
        evaluate_strategy("baseline", y_hat, demands, 780, COSTS, baseline_target=1100),
        evaluate_strategy("gold", y_hat, demands, 780, COSTS),
        evaluate_strategy("daily", y_hat, demands, 780, COSTS,
                          params=PolicyParams(1100, 800)),
        evaluate_strategy("semiweekly", y_hat, demands, 780, COSTS,
                          params=PolicyParams(1100, 850)),
    ]
    table = comparison_table(summaries)
    assert "baseline" in table and "semiweekly" in table
    assert table.count("\n") >= 8

    path = tmp_path / "comparison.csv"
    write_comparison_csv(path, summaries)
    loaded = read_comparison_csv(path)
    assert loaded["gold"]["cost_mean"] == pytest.approx(summaries[1].cost_mean)
    assert loaded["baseline"]["urgent_mean"] is None
    assert loaded["daily"]["total_cost"] == pytest.approx(summaries[2].total_cost)
