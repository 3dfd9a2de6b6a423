"""Skill scores for paired observed/simulated series."""

import numpy as np


class UndefinedMetricError(ValueError):
    pass


def _paired(observed, simulated):
    o = np.asarray(observed, dtype=float)
    s = np.asarray(simulated, dtype=float)
    if o.ndim != 1 or o.shape != s.shape:
        raise ValueError(f"observed and simulated must be 1-D and equal length, got {o.shape} and {s.shape}")
    if len(o) < 2:
        raise ValueError("at least two pairs are required")
    if not (np.all(np.isfinite(o)) and np.all(np.isfinite(s))):
        raise ValueError("series must be finite")
    return o, s


def nse(observed, simulated) -> float:
    """Nash-Sutcliffe efficiency, 1 - SSE / sum((O - mean O)^2)."""
    o, s = _paired(observed, simulated)
    denom = float(np.sum((o - o.mean()) ** 2))
    if denom == 0.0:
        raise UndefinedMetricError("NSE is undefined for a constant observed series")
    return 1.0 - float(np.sum((s - o) ** 2)) / denom


def pbias(observed, simulated) -> float:
    """Percent bias; negative means the simulation under-predicts the total."""
    o, s = _paired(observed, simulated)
    total = float(np.sum(o))
    if total == 0.0:
        raise UndefinedMetricError("PBIAS is undefined when the observed total is zero")
    return 100.0 * float(np.sum(s - o)) / total


def rmse(observed, simulated) -> float:
    o, s = _paired(observed, simulated)
    return float(np.sqrt(np.mean((s - o) ** 2)))


def all_metrics(observed, simulated) -> dict[str, float]:
    return {
        "rmse": rmse(observed, simulated),
        "pbias": pbias(observed, simulated),
        "nse": nse(observed, simulated),
    }
