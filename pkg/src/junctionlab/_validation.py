"""Small input-validation helpers shared across modules."""
from __future__ import annotations

import numpy as np


class InvalidTargetError(ValueError):
    """Raised when a request is incompatible with the target tree Sigma_N."""


class ResolutionError(ValueError):
    """Raised when a radius is too small relative to the grid spacing."""


class DegenerateHeightError(ValueError):
    """Raised when the boundary height vanishes (frequency undefined)."""


def check_positive(name, value, strict=True):
    value = float(value)
    if not np.isfinite(value) or (value <= 0 if strict else value < 0):
        rel = ">" if strict else ">="
        raise ValueError(f"{name} must be finite and {rel} 0, got {value!r}")
    return value


def check_choice(name, value, choices):
    if value not in choices:
        raise ValueError(f"{name} must be one of {sorted(choices)}, got {value!r}")
    return value


def check_dim(d):
    d = int(d)
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")
    return d


def as_points(x, d):
    """Return ``x`` as a float array whose last axis has length ``d``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d:
        raise ValueError(f"points must have trailing dimension {d}, got shape {x.shape}")
    return x
