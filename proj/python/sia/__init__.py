# Copyright 2026 The SiA Authors
# SPDX-License-Identifier: Apache-2.0
"""Open-vocabulary spatio-temporal action detection toolkit."""

from ._core import (  # noqa: F401
    ArgumentError,
    ConfigError,
    ContractError,
    DivergenceError,
    Error,
    IoError,
    KeyframeAnnotation,
    LookupError,
    Model,
    ParseError,
    ValidationError,
    average_precision,
    generate_synthetic,
    giou,
    hungarian,
    iou,
    load_model,
    nws_expand,
    parse_ava_csv,
    serialize_ava_csv,
    train,
)

__all__ = [
    "ArgumentError",
    "ConfigError",
    "ContractError",
    "DivergenceError",
    "Error",
    "IoError",
    "KeyframeAnnotation",
    "LookupError",
    "Model",
    "ParseError",
    "ValidationError",
    "average_precision",
    "generate_synthetic",
    "giou",
    "hungarian",
    "iou",
    "load_model",
    "nws_expand",
    "parse_ava_csv",
    "serialize_ava_csv",
    "train",
]
