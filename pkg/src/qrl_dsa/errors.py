"""Error types shared across the package."""
from __future__ import annotations

from pydantic import BaseModel, ValidationError


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


class UsageError(ValueError):
    """Invalid call arguments (bad index, shape, or non-finite input)."""


def format_validation_error(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        parts.append(f"{path}: {e['msg']}")
    return "; ".join(parts)


def validated(model_cls: type[BaseModel], data):
    """Instance of ``model_cls`` from an instance, a mapping or None; failures raise ConfigError."""
    if isinstance(data, model_cls):
        return data
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"expected {model_cls.__name__} or a mapping, got {type(data).__name__}")
    try:
        return model_cls.model_validate(data or {})
    except ValidationError as err:
        raise ConfigError(format_validation_error(err)) from None
