"""Small numerical helpers shared across modules."""

from __future__ import annotations

from typing import Iterable

import numpy as np

__all__ = ["NumericError", "compensated_sum", "max_abs"]


class NumericError(ArithmeticError):
    """Non-finite intermediate, integrator blow-up, or similar numeric failure."""


def compensated_sum(terms: Iterable[np.ndarray | float]):
    """Neumaier-compensated elementwise sum, in iteration order.

    Cumulants are alternating sums with heavy cancellation; summing in a fixed
    order with compensation keeps results reproducible and tight.
    """
    total = None
    comp = None
    for x in terms:
        x = np.asarray(x, dtype=float)
        if total is None:
            total = x.copy()
            comp = np.zeros_like(total)
            continue
        total, x = np.broadcast_arrays(total, x)
        comp = np.broadcast_to(comp, total.shape)
        t = total + x
        big = np.abs(total) >= np.abs(x)
        comp = comp + np.where(big, (total - t) + x, (x - t) + total)
        total = t
    if total is None:
        return np.float64(0.0)
    return total + comp


def max_abs(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x)))
