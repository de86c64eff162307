"""Hybrid demand model: seasonal-trend decomposition plus boosted residuals.

The decomposition captures the trend and day-of-week cycle of the demand
series; a gradient-boosted ensemble then predicts the decomposition residual
from lagged operational features.  A forecast for a future day is the
extended trend+seasonal value plus the predicted residual.  Two reference
models share the surface: decomposition-only (residual forecast zero) and
decomposition plus ordinary least squares on the same features.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass

import numpy as np

from . import gbrt
from .errors import ParameterError, SchemaError
from .timeseries import Decomposition, Series, StlConfig, stl_decompose, stl_extend

__all__ = [
    "DailyRecord",
    "HybridModel",
    "StlOnlyModel",
    "StlLinearModel",
    "ForecastReport",
    "fit_hybrid",
    "predict_daily",
    "predict_in_sample",
    "fit_stl_only",
    "predict_stl_only",
    "fit_stl_linear",
    "predict_stl_linear",
    "aggregate_semiweekly",
    "grid_search_cv",
    "cv_rmse",
    "iterative_feature_selection",
    "rmse",
    "mape",
    "lagged_cross_correlation",
    "read_dataset_csv",
    "write_dataset_csv",
    "write_forecast_csv",
    "read_forecast_csv",
    "hybrid_to_dict",
    "hybrid_from_dict",
]


@dataclass(frozen=True)
class DailyRecord:
    """One calendar day: demand target plus feature values known before that day."""

    date: dt.date
    demand: float
    features: dict[str, float]


def feature_names_of(records: list[DailyRecord]) -> list[str]:
    names = list(records[0].features)
    expected = set(names)
    for record in records[1:]:
        if set(record.features) != expected:
            raise ParameterError(
                f"inconsistent feature names on {record.date.isoformat()}"
            )
    return names


def _check_contiguous(records: list[DailyRecord]) -> None:
    for prev, cur in zip(records, records[1:]):
        if cur.date != prev.date + dt.timedelta(days=1):
            raise ParameterError(
                f"dates must be contiguous: {prev.date} is followed by {cur.date}"
            )


def records_to_matrix(records: list[DailyRecord], names: list[str]) -> gbrt.FeatureMatrix:
    values = np.empty((len(records), len(names)))
    for i, record in enumerate(records):
        for j, name in enumerate(names):
            value = record.features.get(name)
            values[i, j] = np.nan if value is None else value
    return gbrt.FeatureMatrix(values, names)


def demand_series(records: list[DailyRecord], period: int = 7) -> Series:
    return Series(
        start_date=records[0].date,
        values=np.array([r.demand for r in records], dtype=float),
        period=period,
    )


@dataclass
class HybridModel:
    period: int
    stl_config: StlConfig
    decomposition: Decomposition
    train_start: dt.date
    train_end: dt.date
    residual_model: gbrt.Ensemble
    feature_names: list[str]
    trend_mode: str = "drift"


@dataclass
class StlOnlyModel:
    period: int
    stl_config: StlConfig
    decomposition: Decomposition
    train_start: dt.date
    train_end: dt.date
    trend_mode: str = "drift"


@dataclass
class StlLinearModel:
    period: int
    stl_config: StlConfig
    decomposition: Decomposition
    train_start: dt.date
    train_end: dt.date
    coefficients: np.ndarray  # intercept first
    feature_names: list[str]
    trend_mode: str = "drift"


@dataclass(frozen=True)
class ForecastReport:
    dates: list[dt.date]
    actual: np.ndarray
    predicted: np.ndarray

    @property
    def rmse(self) -> float:
        return rmse(self.predicted, self.actual)

    @property
    def mape(self) -> float:
        return mape(self.predicted, self.actual)


def fit_hybrid(
    train: list[DailyRecord],
    stl_config: StlConfig,
    gbrt_config: gbrt.GbrtConfig,
    feature_names: list[str] | None = None,
    period: int = 7,
    trend_mode: str = "drift",
) -> HybridModel:
    """Decompose the demand series, then boost the residuals on the features."""
    if len(train) < 2 * period:
        raise ParameterError(
            f"{len(train)} training days is fewer than two cycles of {period}"
        )
    _check_contiguous(train)
    names = feature_names if feature_names is not None else feature_names_of(train)
    if not names:
        raise ParameterError("at least one feature is required")
    dec = stl_decompose(demand_series(train, period), stl_config)
    X = records_to_matrix(train, names)
    residual_model = gbrt.train(X, dec.residual, gbrt_config)
    return HybridModel(
        period=period,
        stl_config=stl_config,
        decomposition=dec,
        train_start=train[0].date,
        train_end=train[-1].date,
        residual_model=residual_model,
        feature_names=list(names),
        trend_mode=trend_mode,
    )


def _check_future(
    future: list[DailyRecord], train_end: dt.date
) -> None:
    if future[0].date != train_end + dt.timedelta(days=1):
        raise ParameterError(
            f"forecast must start at {train_end + dt.timedelta(days=1)}, "
            f"got {future[0].date}"
        )
    _check_contiguous(future)


def predict_daily(model: HybridModel, future: list[DailyRecord]) -> np.ndarray:
    """Raw daily forecasts (may be negative; callers clamp at the order step)."""
    if not future:
        return np.empty(0)
    _check_future(future, model.train_end)
    base = stl_extend(model.decomposition, len(future), model.period, model.trend_mode)
    X = records_to_matrix(future, model.feature_names)
    return base + gbrt.predict(model.residual_model, X)


def predict_in_sample(model: HybridModel, train: list[DailyRecord]) -> np.ndarray:
    """Fitted values over the training window: trend + seasonal + boosted residual."""
    if not train:
        return np.empty(0)
    if train[0].date != model.train_start or train[-1].date != model.train_end:
        raise ParameterError(
            f"records span {train[0].date}..{train[-1].date} but the model was "
            f"trained on {model.train_start}..{model.train_end}"
        )
    _check_contiguous(train)
    X = records_to_matrix(train, model.feature_names)
    return (
        model.decomposition.trend
        + model.decomposition.seasonal
        + gbrt.predict(model.residual_model, X)
    )


def fit_stl_only(
    train: list[DailyRecord],
    stl_config: StlConfig,
    period: int = 7,
    trend_mode: str = "drift",
) -> StlOnlyModel:
    _check_contiguous(train)
    dec = stl_decompose(demand_series(train, period), stl_config)
    return StlOnlyModel(
        period=period,
        stl_config=stl_config,
        decomposition=dec,
        train_start=train[0].date,
        train_end=train[-1].date,
        trend_mode=trend_mode,
    )


def predict_stl_only(model: StlOnlyModel, horizon: int) -> np.ndarray:
    if horizon == 0:
        return np.empty(0)
    return stl_extend(model.decomposition, horizon, model.period, model.trend_mode)


def fit_stl_linear(
    train: list[DailyRecord],
    stl_config: StlConfig,
    feature_names: list[str] | None = None,
    period: int = 7,
    trend_mode: str = "drift",
) -> StlLinearModel:
    """Same decomposition, residuals fit with ordinary least squares."""
    _check_contiguous(train)
    names = feature_names if feature_names is not None else feature_names_of(train)
    dec = stl_decompose(demand_series(train, period), stl_config)
    X = records_to_matrix(train, names).values
    if np.isnan(X).any():
        raise ParameterError("linear baseline does not accept missing feature values")
    design = np.column_stack([np.ones(X.shape[0]), X])
    coefficients, *_ = np.linalg.lstsq(design, dec.residual, rcond=None)
    return StlLinearModel(
        period=period,
        stl_config=stl_config,
        decomposition=dec,
        train_start=train[0].date,
        train_end=train[-1].date,
        coefficients=coefficients,
        feature_names=list(names),
        trend_mode=trend_mode,
    )


def predict_stl_linear(model: StlLinearModel, future: list[DailyRecord]) -> np.ndarray:
    if not future:
        return np.empty(0)
    _check_future(future, model.train_end)
    base = stl_extend(model.decomposition, len(future), model.period, model.trend_mode)
    X = records_to_matrix(future, model.feature_names).values
    design = np.column_stack([np.ones(X.shape[0]), X])
    return base + design @ model.coefficients


def rmse(pred, actual) -> float:
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape:
        raise ParameterError(f"length mismatch: {pred.size} vs {actual.size}")
    if pred.size == 0:
        raise ParameterError("rmse needs at least one point")
    return float(np.sqrt(np.mean((pred - actual) ** 2)))


def mape(pred, actual) -> float:
    """Mean absolute percentage error, returned as a fraction."""
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape:
        raise ParameterError(f"length mismatch: {pred.size} vs {actual.size}")
    if pred.size == 0:
        raise ParameterError("mape needs at least one point")
    zeros = np.nonzero(actual == 0.0)[0]
    if zeros.size:
        raise ParameterError(f"mape undefined: actual value at index {zeros[0]} is zero")
    return float(np.mean(np.abs(pred - actual) / np.abs(actual)))


def lagged_cross_correlation(x, y, lag: int) -> float:
    """Pearson correlation of x_t against y_(t-lag) over the overlapping range."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1:
        raise ParameterError("inputs must be 1-d")
    if lag >= 0:
        a, b = x[lag:], y[: y.size - lag]
    else:
        a, b = x[: x.size + lag], y[-lag:]
    n = min(a.size, b.size)
    a, b = a[:n], b[:n]
    if n < 3:
        raise ParameterError(f"only {n} overlapping points after shifting by {lag}")
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a**2).sum() * (b**2).sum())
    if denom == 0.0:
        raise ParameterError("zero variance in the overlapping range")
    return float((a * b).sum() / denom)


_BLOCK_STARTS = {1: 3, 4: 4}  # Tuesday starts a 3-day block, Friday a 4-day block


def aggregate_semiweekly(daily: list[tuple[dt.date, float]]) -> list[tuple[dt.date, float]]:
    """Sum daily values into Tue-Thu and Fri-Mon blocks labeled by start date.

    Partial blocks at either end are dropped.
    """
    for (d1, _), (d2, _) in zip(daily, daily[1:]):
        if d2 != d1 + dt.timedelta(days=1):
            raise ParameterError(f"dates must be contiguous: {d1} is followed by {d2}")
    out: list[tuple[dt.date, float]] = []
    i = 0
    while i < len(daily):
        day, _ = daily[i]
        length = _BLOCK_STARTS.get(day.weekday())
        if length is None:
            i += 1  # leading partial block
            continue
        if i + length > len(daily):
            break  # trailing partial block
        total = float(sum(value for _, value in daily[i : i + length]))
        out.append((day, total))
        i += length
    return out


def cv_rmse(
    records: list[DailyRecord],
    stl_config: StlConfig,
    gbrt_config: gbrt.GbrtConfig,
    k: int = 5,
    feature_names: list[str] | None = None,
    period: int = 7,
) -> float:
    """Mean validation RMSE over k forward-chained contiguous blocks.

    The records are cut into k+1 time-ordered blocks; fold j trains on blocks
    1..j and scores block j+1, so validation data always follows its training
    window.
    """
    n = len(records)
    bounds = [round(j * n / (k + 1)) for j in range(k + 2)]
    if min(b - a for a, b in zip(bounds, bounds[1:])) < 2 * period:
        raise ParameterError(
            f"{n} records split {k + 1} ways leaves a fold shorter than two cycles"
        )
    scores = []
    for j in range(1, k + 1):
        train = records[: bounds[j]]
        valid = records[bounds[j] : bounds[j + 1]]
        model = fit_hybrid(train, stl_config, gbrt_config, feature_names, period)
        preds = predict_daily(model, valid)
        scores.append(rmse(preds, [r.demand for r in valid]))
    return float(np.mean(scores))


def grid_search_cv(
    records: list[DailyRecord],
    grid: list[tuple[StlConfig, gbrt.GbrtConfig]],
    k: int = 5,
    feature_names: list[str] | None = None,
    period: int = 7,
) -> tuple[StlConfig, gbrt.GbrtConfig]:
    """Best lattice point by cross-validated RMSE; ties keep the earlier entry."""
    if not grid:
        raise ParameterError("the configuration grid is empty")
    best_score = np.inf
    best = grid[0]
    for stl_config, gbrt_config in grid:
        score = cv_rmse(records, stl_config, gbrt_config, k, feature_names, period)
        if score < best_score:
            best_score = score
            best = (stl_config, gbrt_config)
    return best


def iterative_feature_selection(
    records: list[DailyRecord],
    stl_config: StlConfig,
    gbrt_config: gbrt.GbrtConfig,
    importance_threshold: float = 0.005,
    holdout_fraction: float = 0.2,
    period: int = 7,
) -> list[str]:
    """Prune features below an importance threshold until held-out RMSE stalls.

    Each round fits on the leading portion of the records, scores the held-out
    tail, and keeps only features whose normalized importance clears the
    threshold.  Returns the feature set of the best-scoring round.
    """
    if not 0.0 < importance_threshold < 1.0:
        raise ParameterError(
            f"importance_threshold must lie in (0, 1), got {importance_threshold}"
        )
    n = len(records)
    cut = n - max(1, round(holdout_fraction * n))
    train, holdout = records[:cut], records[cut:]
    if len(train) < 2 * period or not holdout:
        raise ParameterError("not enough records to split off a holdout")
    actual = [r.demand for r in holdout]

    current = feature_names_of(records)
    best_rmse = np.inf
    best_set = current
    while True:
        model = fit_hybrid(train, stl_config, gbrt_config, current, period)
        score = rmse(predict_daily(model, holdout), actual)
        if score < best_rmse:
            best_rmse = score
            best_set = current
        else:
            break
        importance = gbrt.variable_importance(model.residual_model)
        survivors = [f for f in current if importance.get(f, 0.0) >= importance_threshold]
        if not survivors or survivors == current:
            break
        current = survivors
    return best_set


def read_dataset_csv(path) -> list[DailyRecord]:
    """Columns: date, demand, then one column per feature; empty cells = missing."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or len(header) < 2 or header[0] != "date" or header[1] != "demand":
            raise SchemaError(f"dataset header must start with date,demand: {header}")
        names = header[2:]
        records = []
        for row_number, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(
                    f"row {row_number}: expected {len(header)} columns, got {len(row)}"
                )
            try:
                day = dt.date.fromisoformat(row[0])
            except ValueError as exc:
                raise SchemaError(f"row {row_number}, column date: {exc}") from exc
            try:
                demand = float(row[1])
            except ValueError as exc:
                raise SchemaError(f"row {row_number}, column demand: {exc}") from exc
            features = {}
            for name, cell in zip(names, row[2:]):
                features[name] = float(cell) if cell != "" else float("nan")
            records.append(DailyRecord(date=day, demand=demand, features=features))
    if not records:
        raise SchemaError("dataset has no rows")
    return records


def write_dataset_csv(path, records: list[DailyRecord]) -> None:
    names = feature_names_of(records)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["date", "demand", *names])
        for record in records:
            cells = [record.date.isoformat(), repr(float(record.demand))]
            for name in names:
                value = record.features[name]
                cells.append("" if np.isnan(value) else repr(float(value)))
            writer.writerow(cells)


def write_forecast_csv(path, report: ForecastReport) -> None:
    """Columns: date, actual, predicted."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["date", "actual", "predicted"])
        for day, actual, predicted in zip(report.dates, report.actual, report.predicted):
            writer.writerow([day.isoformat(), repr(float(actual)), repr(float(predicted))])


def read_forecast_csv(path) -> ForecastReport:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["date", "actual", "predicted"]:
            raise SchemaError(f"unexpected forecast header: {header}")
        dates, actual, predicted = [], [], []
        for row_number, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise SchemaError(f"row {row_number}: expected 3 columns, got {len(row)}")
            dates.append(dt.date.fromisoformat(row[0]))
            actual.append(float(row[1]))
            predicted.append(float(row[2]))
    return ForecastReport(dates=dates, actual=np.asarray(actual), predicted=np.asarray(predicted))


def hybrid_to_dict(model: HybridModel) -> dict:
    return {
        "format": "bloodbank.hybrid",
        "version": 1,
        "period": model.period,
        "trend_mode": model.trend_mode,
        "train_start": model.train_start.isoformat(),
        "train_end": model.train_end.isoformat(),
        "stl_config": {
            "s_window": model.stl_config.s_window,
            "t_window": model.stl_config.t_window,
            "n_inner": model.stl_config.n_inner,
            "n_outer": model.stl_config.n_outer,
            "loess_degree": model.stl_config.loess_degree,
        },
        "decomposition": {
            "trend": model.decomposition.trend.tolist(),
            "seasonal": model.decomposition.seasonal.tolist(),
            "residual": model.decomposition.residual.tolist(),
        },
        "feature_names": list(model.feature_names),
        "residual_model": gbrt.ensemble_to_dict(model.residual_model),
    }


def hybrid_from_dict(doc: dict) -> HybridModel:
    if doc.get("format") != "bloodbank.hybrid":
        raise SchemaError(f"not a hybrid model document: format={doc.get('format')!r}")
    if doc.get("version") != 1:
        raise SchemaError(f"unsupported hybrid model version {doc.get('version')!r}")
    dec = Decomposition(
        trend=np.asarray(doc["decomposition"]["trend"]),
        seasonal=np.asarray(doc["decomposition"]["seasonal"]),
        residual=np.asarray(doc["decomposition"]["residual"]),
    )
    return HybridModel(
        period=int(doc["period"]),
        stl_config=StlConfig(**doc["stl_config"]),
        decomposition=dec,
        train_start=dt.date.fromisoformat(doc["train_start"]),
        train_end=dt.date.fromisoformat(doc["train_end"]),
        residual_model=gbrt.ensemble_from_dict(doc["residual_model"]),
        feature_names=list(doc["feature_names"]),
        trend_mode=doc.get("trend_mode", "drift"),
    )
