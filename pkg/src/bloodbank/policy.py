"""Ordering strategies over the FIFO inventory model.

The proposed rule orders the forecast demand, lifted to at least the reorder
level and capped so inventory never exceeds the target: when stock has fallen
below the reorder level ``s`` the order is ``clamp(forecast, s - I, S - I)``,
otherwise no order is placed.  The target ``S`` and reorder level ``s`` are
learned on training data by matching the average cost of ordering the realized
demand itself (the gold standard), sweeping candidate grids.

A semiweekly variant places orders only on Mondays and Thursdays; the forecast
at an order point covers every period until the next delivery (Tue-Thu after a
Monday order, Fri-Mon after a Thursday order).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SchemaError
from .inventory import AgeProfile, CostParams, PeriodOutcome, simulate, step, young_stock

__all__ = [
    "Schedule",
    "PolicyParams",
    "StrategySummary",
    "PolicyRun",
    "round_units",
    "order_quantity",
    "run_policy",
    "cost_under_actual",
    "target_sweep",
    "optimize_target",
    "reorder_sweep",
    "optimize_reorder",
    "evaluate_strategy",
    "comparison_table",
    "write_comparison_csv",
    "read_comparison_csv",
    "write_sweep_csv",
    "read_sweep_csv",
]

ORDER_WEEKDAYS = (0, 3)  # orders may be placed on Mondays and Thursdays
_BLOCK_AFTER = {0: 3, 3: 4}  # Monday order covers 3 days, Thursday order 4


@dataclass(frozen=True)
class Schedule:
    """Order timing: every day, or Mondays and Thursdays only.

    ``start_weekday`` is the weekday (Monday=0) of the first simulated
    period; orders are decided at the end of the previous day and arrive the
    next morning, so an order placed on Monday covers Tuesday through
    Thursday.
    """

    kind: str = "daily"
    start_weekday: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("daily", "semiweekly"):
            raise ParameterError(f"unknown schedule kind {self.kind!r}")
        if not 0 <= self.start_weekday <= 6:
            raise ParameterError("start_weekday must lie in 0..6")


@dataclass(frozen=True)
class PolicyParams:
    inventory_target: int
    reorder_level: int
    schedule: Schedule = Schedule()

    def __post_init__(self) -> None:
        if self.inventory_target < 0 or self.reorder_level < 0:
            raise ParameterError("inventory target and reorder level must be non-negative")
        if self.reorder_level > self.inventory_target:
            raise ParameterError(
                f"reorder level {self.reorder_level} exceeds inventory target "
                f"{self.inventory_target}"
            )


def round_units(value: float) -> int:
    """Half-up rounding to whole units, clamped at zero."""
    return max(0, int(math.floor(value + 0.5)))


def order_quantity(inventory: int, forecast_units: int, params: PolicyParams) -> int:
    """Order size for one decision point under the target/reorder rule."""
    if inventory < 0 or forecast_units < 0:
        raise ParameterError("inventory and forecast must be non-negative")
    s, target = params.reorder_level, params.inventory_target
    if inventory >= s:
        return 0
    return min(max(forecast_units, s - inventory), target - inventory)


@dataclass(frozen=True)
class PolicyRun:
    outcomes: list[PeriodOutcome]
    average_cost: float
    orders: list[int]
    prior_inventory: list[int]  # stock level each order decision saw


def _drive(initial: AgeProfile, demands, costs: CostParams, order_fn) -> PolicyRun:
    state = initial
    outcomes: list[PeriodOutcome] = []
    orders: list[int] = []
    prior: list[int] = []
    for i, y in enumerate(demands):
        level = state.total
        z = order_fn(i, level)
        state, outcome = step(state, z, y, costs)
        outcomes.append(outcome)
        orders.append(z)
        prior.append(level)
    average = sum(o.cost for o in outcomes) / len(outcomes) if outcomes else 0.0
    return PolicyRun(outcomes=outcomes, average_cost=average, orders=orders, prior_inventory=prior)


def _as_profile(initial, demands, shelf_life: int) -> AgeProfile:
    if isinstance(initial, AgeProfile):
        return initial
    demands = list(demands)
    mean_demand = sum(demands) / len(demands) if demands else 1.0
    return young_stock(int(initial), max(mean_demand, 1.0), shelf_life)


def run_policy(y_hat, demands, initial, costs: CostParams, params: PolicyParams,
               shelf_life: int = 32) -> PolicyRun:
    """Simulate the target/reorder rule over aligned forecast/demand streams."""
    y_hat = [float(v) for v in y_hat]
    demands = list(demands)
    if len(y_hat) != len(demands):
        raise ParameterError(
            f"stream length mismatch: {len(y_hat)} forecasts vs {len(demands)} demands"
        )
    profile = _as_profile(initial, demands, shelf_life)
    horizon = len(demands)
    schedule = params.schedule

    def decide(i: int, level: int) -> int:
        if schedule.kind == "semiweekly":
            placement = (schedule.start_weekday + i - 1) % 7
            if placement not in ORDER_WEEKDAYS:
                return 0
            block = min(_BLOCK_AFTER[placement], horizon - i)
        else:
            block = 1
        forecast = round_units(sum(y_hat[i : i + block]))
        return order_quantity(level, forecast, params)

    return _drive(profile, demands, costs, decide)


def cost_under_actual(demands, initial, costs: CostParams, shelf_life: int = 32) -> float:
    """Average cost when every period orders exactly the realized demand."""
    demands = list(demands)
    if not demands:
        raise ParameterError("demand stream must be non-empty")
    profile = _as_profile(initial, demands, shelf_life)
    _, average = simulate(profile, demands, demands, costs)
    return average


def target_sweep(y_hat, demands, initial, costs: CostParams, target_grid,
                 shelf_life: int = 32) -> list[tuple[int, float, float]]:
    """(target, average cost, |gold - cost|) for every candidate target.

    Candidate orders are the rounded daily forecasts capped so stock never
    exceeds the target.
    """
    y_hat = [float(v) for v in y_hat]
    demands = list(demands)
    if len(y_hat) != len(demands):
        raise ParameterError(
            f"stream length mismatch: {len(y_hat)} forecasts vs {len(demands)} demands"
        )
    targets = sorted(set(int(t) for t in target_grid))
    if not targets:
        raise ParameterError("target grid is empty")
    profile = _as_profile(initial, demands, shelf_life)
    gold = cost_under_actual(demands, profile, costs, shelf_life)
    units = [round_units(v) for v in y_hat]
    rows = []
    for target in targets:
        run = _drive(profile, demands, costs,
                     lambda i, level: max(0, min(units[i], target - level)))
        rows.append((target, run.average_cost, abs(gold - run.average_cost)))
    return rows


def optimize_target(y_hat, demands, initial, costs: CostParams, target_grid,
                    shelf_life: int = 32, objective: str = "match_gold") -> int:
    """Target whose simulated cost best matches the gold standard.

    ``objective="min_cost"`` instead picks the cheapest candidate outright.
    Ties go to the smallest target.
    """
    if objective not in ("match_gold", "min_cost"):
        raise ParameterError(f"unknown objective {objective!r}")
    rows = target_sweep(y_hat, demands, initial, costs, target_grid, shelf_life)
    key = 2 if objective == "match_gold" else 1
    best = rows[0]
    for row in rows[1:]:
        if row[key] < best[key]:
            best = row
    return best[0]


def reorder_sweep(y_hat, demands, initial, costs: CostParams, target: int, reorder_grid,
                  schedule: Schedule = Schedule(), shelf_life: int = 32,
                  ) -> list[tuple[int, float, float]]:
    """(reorder level, average cost, |gold - cost|) for every candidate level."""
    levels = sorted(set(int(s) for s in reorder_grid))
    if not levels:
        raise ParameterError("reorder grid is empty")
    if levels[-1] > target:
        raise ParameterError(
            f"reorder candidate {levels[-1]} exceeds the inventory target {target}"
        )
    profile = _as_profile(initial, demands, shelf_life)
    gold = cost_under_actual(demands, profile, costs, shelf_life)
    rows = []
    for level in levels:
        params = PolicyParams(inventory_target=target, reorder_level=level, schedule=schedule)
        run = run_policy(y_hat, demands, profile, costs, params, shelf_life)
        rows.append((level, run.average_cost, abs(gold - run.average_cost)))
    return rows


def optimize_reorder(y_hat, demands, initial, costs: CostParams, target: int, reorder_grid,
                     schedule: Schedule = Schedule(), shelf_life: int = 32,
                     objective: str = "match_gold") -> int:
    """Reorder level whose simulated cost best matches the gold standard."""
    if objective not in ("match_gold", "min_cost"):
        raise ParameterError(f"unknown objective {objective!r}")
    rows = reorder_sweep(y_hat, demands, initial, costs, target, reorder_grid,
                         schedule, shelf_life)
    key = 2 if objective == "match_gold" else 1
    best = rows[0]
    for row in rows[1:]:
        if row[key] < best[key]:
            best = row
    return best[0]


@dataclass(frozen=True)
class StrategySummary:
    strategy: str
    periods: int
    days_with_orders: int
    order_day_fraction: float
    order_qty_mean: float
    order_qty_sd: float
    inventory_mean: float
    inventory_sd: float
    urgent_mean: float | None
    urgent_sd: float | None
    wastage_mean: float
    wastage_sd: float
    cost_mean: float
    cost_sd: float
    total_cost: float
    doh: float
    placement_weekdays: tuple[int, ...]


def _summarize(strategy: str, run: PolicyRun, start_weekday: int,
               urgent_available: bool = True) -> StrategySummary:
    outcomes = run.outcomes
    periods = len(outcomes)
    order_days = [i for i, o in enumerate(outcomes) if o.order_qty > 0]
    qty = np.array([outcomes[i].order_qty for i in order_days], dtype=float)
    inventory = np.array([o.end_inventory for o in outcomes], dtype=float)
    urgent = np.array([o.urgent for o in outcomes], dtype=float)
    wastage = np.array([o.expired for o in outcomes], dtype=float)
    cost = np.array([o.cost for o in outcomes], dtype=float)
    demand = np.array([o.demand for o in outcomes], dtype=float)
    placements = sorted({(start_weekday + i - 1) % 7 for i in order_days})
    demand_mean = demand.mean() if periods else 0.0
    return StrategySummary(
        strategy=strategy,
        periods=periods,
        days_with_orders=len(order_days),
        order_day_fraction=len(order_days) / periods if periods else 0.0,
        order_qty_mean=float(qty.mean()) if qty.size else float("nan"),
        order_qty_sd=float(qty.std()) if qty.size else float("nan"),
        inventory_mean=float(inventory.mean()) if periods else 0.0,
        inventory_sd=float(inventory.std()) if periods else 0.0,
        urgent_mean=float(urgent.mean()) if urgent_available and periods else None,
        urgent_sd=float(urgent.std()) if urgent_available and periods else None,
        wastage_mean=float(wastage.mean()) if periods else 0.0,
        wastage_sd=float(wastage.std()) if periods else 0.0,
        cost_mean=float(cost.mean()) if periods else 0.0,
        cost_sd=float(cost.std()) if periods else 0.0,
        total_cost=float(cost.sum()),
        doh=float(inventory.mean() / demand_mean) if demand_mean > 0 else float("nan"),
        placement_weekdays=tuple(placements),
    )


def evaluate_strategy(strategy: str, y_hat, demands, initial, costs: CostParams, *,
                      params: PolicyParams | None = None,
                      baseline_target: int | None = None,
                      start_weekday: int = 0,
                      shelf_life: int = 32) -> StrategySummary:
    """Summary statistics for one named ordering strategy.

    ``gold`` orders the realized demand, ``baseline`` tops stock up to a fixed
    target every day (urgent statistics are reported as unavailable, matching
    how such systems are audited), and ``daily``/``semiweekly`` run the
    target/reorder rule with the given ``params``.
    """
    demands = list(demands)
    profile = _as_profile(initial, demands, shelf_life)
    if strategy == "gold":
        run = _drive(profile, demands, costs, lambda i, level: demands[i])
        return _summarize("gold", run, start_weekday)
    if strategy == "baseline":
        if baseline_target is None:
            raise ParameterError("baseline strategy needs baseline_target")
        run = _drive(profile, demands, costs,
                     lambda i, level: max(0, baseline_target - level))
        return _summarize("baseline", run, start_weekday, urgent_available=False)
    if strategy in ("daily", "semiweekly"):
        if params is None:
            raise ParameterError(f"{strategy} strategy needs policy params")
        schedule = Schedule(kind=strategy, start_weekday=start_weekday)
        params = PolicyParams(params.inventory_target, params.reorder_level, schedule)
        run = run_policy(y_hat, demands, profile, costs, params, shelf_life)
        return _summarize(strategy, run, start_weekday)
    raise ParameterError(f"unknown strategy {strategy!r}")


def _mean_sd(mean: float | None, sd: float | None) -> str:
    if mean is None or sd is None:
        return "n/a"
    if math.isnan(mean):
        return "n/a"
    return f"{mean:.2f} ({sd:.2f})"


_TABLE_ROWS = [
    ("days with orders", lambda s: f"{s.days_with_orders} ({100 * s.order_day_fraction:.2f}%)"),
    ("order qty on order days - mean (sd)", lambda s: _mean_sd(s.order_qty_mean, s.order_qty_sd)),
    ("inventory level - mean (sd)", lambda s: _mean_sd(s.inventory_mean, s.inventory_sd)),
    ("urgent units - mean (sd)", lambda s: _mean_sd(s.urgent_mean, s.urgent_sd)),
    ("wasted units - mean (sd)", lambda s: _mean_sd(s.wastage_mean, s.wastage_sd)),
    ("cost - mean (sd)", lambda s: _mean_sd(s.cost_mean, s.cost_sd)),
    ("total cost", lambda s: f"{s.total_cost:.2f}"),
    ("days of inventory on hand", lambda s: f"{s.doh:.2f}"),
]


def comparison_table(summaries: list[StrategySummary]) -> str:
    """Aligned text table: one row per summary field, one column per strategy."""
    headers = ["summary"] + [s.strategy for s in summaries]
    rows = [[label] + [render(s) for s in summaries] for label, render in _TABLE_ROWS]
    widths = [max(len(str(cell)) for cell in column) for column in zip(headers, *rows)]
    lines = ["  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in [headers] + rows]
    return "\n".join(lines)


_CSV_FIELDS = [
    "periods", "days_with_orders", "order_day_fraction", "order_qty_mean", "order_qty_sd",
    "inventory_mean", "inventory_sd", "urgent_mean", "urgent_sd", "wastage_mean",
    "wastage_sd", "cost_mean", "cost_sd", "total_cost", "doh",
]


def write_comparison_csv(path, summaries: list[StrategySummary]) -> None:
    """One row per summary field, one column per strategy."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["field", *(s.strategy for s in summaries)])
        for field_name in _CSV_FIELDS:
            row = [field_name]
            for summary in summaries:
                value = getattr(summary, field_name)
                row.append("" if value is None else repr(float(value)))
            writer.writerow(row)


def read_comparison_csv(path) -> dict[str, dict[str, float | None]]:
    """Mapping strategy -> field -> value (None where unavailable)."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header or header[0] != "field":
            raise SchemaError(f"unexpected comparison header: {header}")
        strategies = header[1:]
        table: dict[str, dict[str, float | None]] = {name: {} for name in strategies}
        for row_number, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(
                    f"row {row_number}: expected {len(header)} columns, got {len(row)}"
                )
            for name, cell in zip(strategies, row[1:]):
                table[name][row[0]] = float(cell) if cell != "" else None
    return table


def write_sweep_csv(path, label: str, rows: list[tuple[int, float, float]]) -> None:
    """Columns: <label>, average_cost, objective."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([label, "average_cost", "objective"])
        for candidate, average, objective in rows:
            writer.writerow([candidate, repr(float(average)), repr(float(objective))])


def read_sweep_csv(path) -> list[tuple[int, float, float]]:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or len(header) != 3 or header[1:] != ["average_cost", "objective"]:
            raise SchemaError(f"unexpected sweep header: {header}")
        rows = []
        for row_number, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise SchemaError(f"row {row_number}: expected 3 columns, got {len(row)}")
            rows.append((int(row[0]), float(row[1]), float(row[2])))
    return rows
