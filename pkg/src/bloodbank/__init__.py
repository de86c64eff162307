"""Demand forecasting and ordering decisions for perishable stock.

The package pairs a hybrid short-term demand model (seasonal-trend
decomposition plus gradient-boosted residual trees) with an age-aware FIFO
inventory simulation and a target/reorder ordering policy learned from data.
"""

__version__ = "0.1.0"

from .errors import ParameterError, SchemaError
from .timeseries import (
    Series,
    Decomposition,
    StlConfig,
    loess_smooth,
    stl_decompose,
    stl_extend,
)
from .gbrt import (
    FeatureMatrix,
    TreeNode,
    Ensemble,
    GbrtConfig,
    gradients_squared_error,
    leaf_weight,
    split_gain,
    build_tree,
    train,
    predict,
    variable_importance,
)
from .forecast import (
    DailyRecord,
    HybridModel,
    ForecastReport,
    fit_hybrid,
    predict_daily,
    aggregate_semiweekly,
    grid_search_cv,
    iterative_feature_selection,
    rmse,
    mape,
    lagged_cross_correlation,
)
from .inventory import (
    AgeProfile,
    CostParams,
    PeriodOutcome,
    step,
    simulate,
    brute_force_unit_sim,
    young_stock,
)
from .policy import (
    Schedule,
    PolicyParams,
    StrategySummary,
    order_quantity,
    cost_under_actual,
    optimize_target,
    optimize_reorder,
    evaluate_strategy,
)
from .datagen import CovariateSpec, GenConfig, generate, generate_full
