"""
Learning an ordering policy and comparing strategies
====================================================

End to end: fit the hybrid forecaster on ten years, learn the inventory target
and reorder levels on the training window by matching the cost of ordering the
realized demand, then score four strategies on the held-out year: the
order-up-to-a-fat-target status quo, the unattainable gold standard, and the
proposed daily and twice-weekly (Mon/Thu) rules.
"""

from bloodbank.datagen import CovariateSpec, GenConfig, generate
from bloodbank.forecast import fit_hybrid, predict_daily, predict_in_sample, rmse
from bloodbank.gbrt import GbrtConfig
from bloodbank.inventory import CostParams
from bloodbank.policy import (
    PolicyParams,
    Schedule,
    comparison_table,
    evaluate_strategy,
    optimize_reorder,
    optimize_target,
)
from bloodbank.timeseries import StlConfig

config = GenConfig(
    n_days=4015,
    seed=2024,
    noise_sd=8.0,
    covariates=(
        CovariateSpec(name="lab_lag7", effect_size=25.0, lag=7, nonlinearity="threshold"),
        CovariateSpec(name="lab_lag1", effect_size=12.0, lag=1),
    ),
)
records = generate(config)
train_part, test_part = records[:3650], records[3650:]
demands_train = [r.demand for r in train_part]
demands_test = [r.demand for r in test_part]

print("fitting the hybrid model on ten years ...")
model = fit_hybrid(
    train_part,
    StlConfig(s_window=35, t_window=201),
    GbrtConfig(n_rounds=300, learning_rate=0.05, max_depth=3, seed=7),
    trend_mode="flat",
)
y_hat_train = predict_in_sample(model, train_part)
y_hat_test = predict_daily(model, test_part)
print(f"  training rmse {rmse(y_hat_train, demands_train):.2f}, "
      f"test rmse {rmse(y_hat_test, demands_test):.2f}")

costs = CostParams()
initial = 780
train_wd = train_part[0].date.weekday()

print("sweeping inventory targets and reorder levels on the training window ...")
target = optimize_target(y_hat_train, demands_train, initial, costs,
                         range(initial, 2 * initial + 1, 10))
grid = range(0, target + 1, 10)
s_daily = optimize_reorder(y_hat_train, demands_train, initial, costs, target, grid,
                           Schedule("daily", train_wd))
s_semi = optimize_reorder(y_hat_train, demands_train, initial, costs, target, grid,
                          Schedule("semiweekly", train_wd))
print(f"  inventory target {target}, reorder level {s_daily} (daily) "
      f"/ {s_semi} (semiweekly)")

test_wd = test_part[0].date.weekday()
summaries = [
    evaluate_strategy("baseline", y_hat_test, demands_test, initial, costs,
                      baseline_target=round(1.7 * initial), start_weekday=test_wd),
    evaluate_strategy("gold", y_hat_test, demands_test, initial, costs,
                      start_weekday=test_wd),
    evaluate_strategy("daily", y_hat_test, demands_test, initial, costs,
                      params=PolicyParams(target, s_daily), start_weekday=test_wd),
    evaluate_strategy("semiweekly", y_hat_test, demands_test, initial, costs,
                      params=PolicyParams(target, s_semi), start_weekday=test_wd),
]

print("\nheld-out year, four strategies:\n")
print(comparison_table(summaries))

baseline, _, daily, semi = summaries
saving = 1.0 - daily.inventory_mean / baseline.inventory_mean
print(f"\nthe daily rule carries {100 * saving:.0f}% less inventory than the "
      f"baseline and orders on {100 * daily.order_day_fraction:.0f}% of days;")
print(f"the semiweekly rule orders on {100 * semi.order_day_fraction:.0f}% of days "
      f"with zero urgent deliveries and zero wastage.")
