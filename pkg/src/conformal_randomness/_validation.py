from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .core import DomainError


def check_stream(X, y=None, needs_labels: bool = False):
    """Validate a stream: 2-D finite float features, optional aligned labels.

    1-D ``X`` is read as one scalar feature per observation.
    """
    X = np.asarray(X) if not hasattr(X, "iloc") else X
    if getattr(X, "ndim", 2) == 1:
        X = np.asarray(X).reshape(-1, 1)
    X = check_array(X, dtype=float, ensure_min_samples=0, ensure_all_finite=True)
    if y is not None:
        y = np.asarray(y)
        if y.ndim != 1:
            raise DomainError(f"labels must be one-dimensional, got shape {y.shape}")
        if len(y) != len(X):
            raise DomainError(f"{len(X)} observations but {len(y)} labels")
    elif needs_labels:
        raise DomainError("this nonconformity measure needs labels; pass y")
    return X, y


def check_threshold(c: float) -> float:
    c = float(c)
    if not c > 1:
        raise DomainError(f"threshold must exceed 1, got {c!r}")
    return c
