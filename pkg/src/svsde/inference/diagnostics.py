"""Monte Carlo standard errors."""
from __future__ import annotations

import math

import numpy as np

from ..errors import ArgumentError


def batch_means_mcse(samples) -> float:
    """Batch-means standard error of the sample mean with floor(sqrt(n)) batches.

    Trailing draws that do not fill a batch are discarded.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 4:
        raise ArgumentError(f"batch means needs at least 4 samples, got {n}")
    a = math.isqrt(n)
    b = n // a
    means = x[: a * b].reshape(a, b).mean(axis=1)
    var_hat = b * np.var(means, ddof=1)
    return float(math.sqrt(max(var_hat, 0.0) / n))
