"""Missingness-aware classification of irregularly sampled clinical time series.

The package turns raw event streams into hourly grids with observation
masks, fills the gaps (zero or forward fill), optionally appends
missing-data indicators, extracts windowed raw and hand-engineered
features, and trains LSTM, MLP, and logistic-regression classifiers whose
evaluation treats the missingness pattern itself as signal.
"""

from misseq.errors import (
    ConfigError,
    MisseqError,
    NumericError,
    ParseError,
    SchemaError,
)
from misseq.features import (
    FeatureVector,
    he_feature_vector,
    make_windows,
    measurement_features,
    missingness_features,
    raw_concat_features,
)
from misseq.impute import (
    AugmentedSequence,
    ImputePolicy,
    augment_with_indicators,
    compute_medians,
    impute,
    linear_score_with_indicators,
)
from misseq.ingest import (
    Grid,
    RawEpisode,
    VariableSpec,
    discretize,
    load_episodes,
    load_variable_specs,
    parse_episodes,
    scale_grid,
    truncate_grid,
)
from misseq.metrics import (
    EvalReport,
    build_report,
    f1_scores,
    micro_macro_auc,
    precision_at_10,
    roc_auc,
    select_thresholds,
)
from misseq.nn import (
    LinearModel,
    LstmModel,
    MlpModel,
    TrainConfig,
    TrainResult,
    log_loss,
    lstm_backward,
    lstm_cell_step,
    lstm_forward,
    sequence_loss,
    train,
)
from misseq.synth import SynthConfig, generate, summarize_missingness

__version__ = "0.1.0"
