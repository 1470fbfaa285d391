"""History context-aware policy optimization on a synthetic GridGUI environment.

All functionality lives in the compiled extension; this package re-exports it.
"""

from hcpo._hcpo import (  # noqa: F401
    compute_advantages,
    dataset_info,
    default_config,
    evaluate,
    expbias_pmf,
    flops_estimate,
    generate_dataset,
    history_preference_csv,
    init_policy,
    lambda_at,
    layer_drop_sweep,
    parse_action,
    score_response,
    short_long_ratio_csv,
    token_f1,
    train,
    uniform_pmf,
    validate_config,
)

__all__ = [
    "compute_advantages",
    "dataset_info",
    "default_config",
    "evaluate",
    "expbias_pmf",
    "flops_estimate",
    "generate_dataset",
    "history_preference_csv",
    "init_policy",
    "lambda_at",
    "layer_drop_sweep",
    "parse_action",
    "score_response",
    "short_long_ratio_csv",
    "token_f1",
    "train",
    "uniform_pmf",
    "validate_config",
]
