"""Age-stratified FIFO inventory state machine for perishable units.

Each period runs the same event sequence: ordered units arrive as the
freshest stock, demand is issued oldest-first, unmet demand is covered by a
same-period urgent delivery that never enters inventory, and surviving units
then age by one period.  Units reaching the shelf-life limit are discarded
and charged as wastage.  The period cost is

    delivery * (order placed) + holding * end inventory
    + urgent * shortage units + wastage * expired units.

``brute_force_unit_sim`` re-runs the same dynamics tracking every physical
unit individually and exists purely as a verification oracle for
``simulate``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SchemaError

__all__ = [
    "AgeProfile",
    "CostParams",
    "PeriodOutcome",
    "step",
    "simulate",
    "brute_force_unit_sim",
    "young_stock",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_stream_csv",
    "read_stream_csv",
]


@dataclass(frozen=True)
class CostParams:
    """Per-order delivery, per-unit holding/urgent/wastage cost coefficients."""

    routine_delivery: float = 100.0
    holding: float = 1.0
    urgent: float = 300.0
    wastage: float = 50.0

    def __post_init__(self) -> None:
        for name in ("routine_delivery", "holding", "urgent", "wastage"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"{name} must be non-negative")


@dataclass(frozen=True)
class AgeProfile:
    """Unit counts by age; ``counts[j]`` holds units of age ``j + 1`` periods.

    Ages run from 1 to ``shelf_life - 1``: units reaching ``shelf_life``
    expire and leave the profile.
    """

    counts: np.ndarray
    shelf_life: int = 32

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if self.shelf_life < 2:
            raise ParameterError(f"shelf_life must be >= 2, got {self.shelf_life}")
        if counts.ndim != 1 or counts.size != self.shelf_life - 1:
            raise ParameterError(
                f"age profile needs exactly {self.shelf_life - 1} buckets, got {counts.size}"
            )
        if (counts < 0).any():
            raise ParameterError("age counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def empty(cls, shelf_life: int = 32) -> "AgeProfile":
        return cls(np.zeros(shelf_life - 1, dtype=np.int64), shelf_life)

    def unit_ages(self) -> np.ndarray:
        """Expand to one age entry per physical unit (ascending)."""
        return np.repeat(np.arange(1, self.shelf_life), self.counts)


def young_stock(total: int, mean_demand: float, shelf_life: int = 32) -> AgeProfile:
    """Spread ``total`` units uniformly over ages 1..ceil(total / mean_demand).

    Mirrors a bank that has been ordering its mean demand every period, so
    ordering exactly the realized demand keeps the level constant with no
    expiry.
    """
    if total < 0:
        raise ParameterError("total stock must be non-negative")
    counts = np.zeros(shelf_life - 1, dtype=np.int64)
    if total == 0:
        return AgeProfile(counts, shelf_life)
    if mean_demand <= 0:
        raise ParameterError("mean_demand must be positive to spread stock")
    n_ages = min(int(math.ceil(total / mean_demand)), shelf_life - 1)
    base, extra = divmod(total, n_ages)
    counts[:n_ages] = base
    counts[:extra] += 1
    return AgeProfile(counts, shelf_life)


@dataclass(frozen=True)
class PeriodOutcome:
    order_placed: bool
    order_qty: int
    demand: int
    urgent: int
    expired: int
    end_inventory: int
    cost: float


def _check_units(name: str, value: int) -> int:
    if value != int(value) or value < 0:
        raise ParameterError(f"{name} must be a non-negative integer, got {value}")
    return int(value)


def step(
    state: AgeProfile, order_qty: int, demand: int, costs: CostParams
) -> tuple[AgeProfile, PeriodOutcome]:
    """Advance one period: arrivals, FIFO issue, urgent top-up, aging, expiry."""
    z = _check_units("order_qty", order_qty)
    y = _check_units("demand", demand)
    prior = state.counts
    m = state.shelf_life

    # issue oldest first: demand left over before reaching age bucket j is
    # y minus everything already taken from older buckets
    oldest_first = prior[::-1]
    older_cum = np.cumsum(oldest_first) - oldest_first
    take = np.minimum(oldest_first, np.maximum(y - older_cum, 0))
    survivors = (oldest_first - take)[::-1]  # back in age order

    new_counts = np.zeros(m - 1, dtype=np.int64)
    new_counts[1:] = survivors[:-1]  # each surviving bucket ages one period
    expired = int(survivors[-1])  # age m-1 survivors reach the limit
    remaining = y - int(take.sum())
    take_arrivals = min(remaining, z)  # arrivals are issued last
    new_counts[0] = z - take_arrivals
    urgent = remaining - take_arrivals

    end_inventory = int(new_counts.sum())
    cost = (
        costs.routine_delivery * (1 if z > 0 else 0)
        + costs.holding * end_inventory
        + costs.urgent * urgent
        + costs.wastage * expired
    )
    outcome = PeriodOutcome(
        order_placed=z > 0,
        order_qty=z,
        demand=y,
        urgent=urgent,
        expired=expired,
        end_inventory=end_inventory,
        cost=cost,
    )
    return AgeProfile(new_counts, m), outcome


def simulate(
    initial: AgeProfile, orders, demands, costs: CostParams
) -> tuple[list[PeriodOutcome], float]:
    """Fold ``step`` over aligned order/demand streams; also return mean cost."""
    orders = list(orders)
    demands = list(demands)
    if len(orders) != len(demands):
        raise ParameterError(
            f"stream length mismatch: {len(orders)} orders vs {len(demands)} demands"
        )
    state = initial
    outcomes: list[PeriodOutcome] = []
    for z, y in zip(orders, demands):
        state, outcome = step(state, z, y, costs)
        outcomes.append(outcome)
    average = sum(o.cost for o in outcomes) / len(outcomes) if outcomes else 0.0
    return outcomes, average


def brute_force_unit_sim(
    initial_ages, orders, demands, costs: CostParams, shelf_life: int = 32
) -> tuple[list[PeriodOutcome], float]:
    """Unit-level re-implementation of ``simulate`` (verification oracle).

    Every physical unit carries its own age; issue is strictly oldest-first
    and units are discarded the period they reach ``shelf_life``.
    """
    orders = list(orders)
    demands = list(demands)
    if len(orders) != len(demands):
        raise ParameterError(
            f"stream length mismatch: {len(orders)} orders vs {len(demands)} demands"
        )
    ages = np.sort(np.asarray(list(initial_ages), dtype=np.int64))
    if ages.size and (ages.min() < 1 or ages.max() > shelf_life - 1):
        raise ParameterError("initial unit ages must lie in 1..shelf_life-1")

    outcomes: list[PeriodOutcome] = []
    for z, y in zip(orders, demands):
        z = _check_units("order_qty", z)
        y = _check_units("demand", y)
        ages = np.concatenate([np.zeros(z, dtype=np.int64), ages])  # freshest first
        issued = min(y, ages.size)
        urgent = y - issued
        if issued:
            ages = ages[: ages.size - issued]  # oldest live at the array tail
        ages = ages + 1
        expired = int((ages >= shelf_life).sum())
        ages = ages[ages < shelf_life]
        end_inventory = int(ages.size)
        cost = (
            costs.routine_delivery * (1 if z > 0 else 0)
            + costs.holding * end_inventory
            + costs.urgent * urgent
            + costs.wastage * expired
        )
        outcomes.append(
            PeriodOutcome(
                order_placed=z > 0,
                order_qty=z,
                demand=y,
                urgent=urgent,
                expired=expired,
                end_inventory=end_inventory,
                cost=cost,
            )
        )
    average = sum(o.cost for o in outcomes) / len(outcomes) if outcomes else 0.0
    return outcomes, average


def write_trajectory_csv(path, outcomes) -> None:
    """Columns: period, order, demand, urgent, expired, end_inventory, cost."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["period", "order", "demand", "urgent", "expired", "end_inventory", "cost"]
        )
        for i, o in enumerate(outcomes, start=1):
            writer.writerow(
                [i, o.order_qty, o.demand, o.urgent, o.expired, o.end_inventory, repr(o.cost)]
            )


def write_stream_csv(path, values) -> None:
    """Columns: period, units (one order or demand quantity per period)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["period", "units"])
        for i, value in enumerate(values, start=1):
            writer.writerow([i, _check_units("units", value)])


def read_stream_csv(path) -> list[int]:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["period", "units"]:
            raise SchemaError(f"stream header must be period,units: {header}")
        values = []
        for row_number, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise SchemaError(f"row {row_number}: expected 2 columns, got {len(row)}")
            values.append(int(row[1]))
    return values


def read_trajectory_csv(path) -> list[PeriodOutcome]:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        expected = ["period", "order", "demand", "urgent", "expired", "end_inventory", "cost"]
        if header != expected:
            raise SchemaError(f"unexpected trajectory header: {header}")
        outcomes = []
        for row_number, row in enumerate(reader, start=2):
            if len(row) != 7:
                raise SchemaError(f"row {row_number}: expected 7 columns, got {len(row)}")
            order_qty = int(row[1])
            outcomes.append(
                PeriodOutcome(
                    order_placed=order_qty > 0,
                    order_qty=order_qty,
                    demand=int(row[2]),
                    urgent=int(row[3]),
                    expired=int(row[4]),
                    end_inventory=int(row[5]),
                    cost=float(row[6]),
                )
            )
    return outcomes
