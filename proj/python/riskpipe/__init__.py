"""Speech+text risk assessment experiment pipeline (compiled core)."""

from riskpipe._core import (
    ConfigurationError,
    MissingArtifactError,
    accuracy,
    aggregate,
    cosine_lr,
    f1,
    generate_synthetic,
    head_parameter_count,
    mock_extract,
    render_prompt,
    run_experiment,
    softmax,
    split_sentences,
    validate_manifest,
    __version__,
)

__all__ = [
    "ConfigurationError",
    "MissingArtifactError",
    "accuracy",
    "aggregate",
    "cosine_lr",
    "f1",
    "generate_synthetic",
    "head_parameter_count",
    "mock_extract",
    "render_prompt",
    "run_experiment",
    "softmax",
    "split_sentences",
    "validate_manifest",
    "__version__",
]
