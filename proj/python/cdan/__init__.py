"""Python access to the cdan core library."""

from ._core import (
    ConfigError,
    FormatError,
    NumericError,
    ShapeError,
    UsageError,
    config_keys,
    lambda_schedule,
    lr_schedule,
    method_names,
    multilinear_map,
    randomized_multilinear_map,
    select_strategy,
    theorem1_verify,
)
from ._core import run as _run


def run(config=None, seed=0, method=""):
    """Train one model. `config` maps config keys to values (any type, sent as text)."""
    kv = {str(k): _text(v) for k, v in (config or {}).items()}
    return _run(kv, seed, method)


def _text(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


__all__ = [
    "ConfigError",
    "FormatError",
    "NumericError",
    "ShapeError",
    "UsageError",
    "config_keys",
    "lambda_schedule",
    "lr_schedule",
    "method_names",
    "multilinear_map",
    "randomized_multilinear_map",
    "run",
    "select_strategy",
    "theorem1_verify",
]
