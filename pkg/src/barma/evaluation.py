"""Interval-quality metrics over Monte Carlo replicates and held-out windows."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "EvaluationReport",
    "coverage_rates",
    "average_length",
    "picp",
    "pinaw",
    "cwc",
    "winkler",
    "awd",
    "evaluate_window",
]


@dataclass
class EvaluationReport:
    """Per-horizon coverage/length plus the scalar figures of merit."""

    cr: np.ndarray
    cr_lower: np.ndarray
    cr_upper: np.ndarray
    avg_length: np.ndarray
    picp: float
    pinaw: float
    cwc: Optional[float] = None
    kappa: Optional[float] = None
    winkler_mean: Optional[float] = None
    awd: Optional[float] = None
    n_replicates: int = 1
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "cr": self.cr.tolist(),
            "cr_lower": self.cr_lower.tolist(),
            "cr_upper": self.cr_upper.tolist(),
            "avg_length": self.avg_length.tolist(),
            "picp": self.picp,
            "pinaw": self.pinaw,
            "cwc": self.cwc,
            "kappa": self.kappa,
            "winkler_mean": self.winkler_mean,
            "awd": self.awd,
            "n_replicates": self.n_replicates,
            **self.extras,
        }


def _stack(arr, name: str) -> np.ndarray:
    out = np.atleast_2d(np.asarray(arr, dtype=float))
    if out.ndim != 2:
        raise ValueError(f"{name} must be (replicates, horizons)")
    return out


def coverage_counts(lower, upper, actual):
    """Integer coverage partition per horizon: (inside, below, above, R).

    Boundary ties count as non-coverage on the offending side, so the three
    counts partition the replicates exactly.
    """
    lower = _stack(lower, "lower")
    upper = _stack(upper, "upper")
    actual = _stack(actual, "actual")
    if not lower.shape == upper.shape == actual.shape:
        raise ValueError(
            f"dimension mismatch: lower {lower.shape}, upper {upper.shape}, actual {actual.shape}"
        )
    below = actual <= lower
    above = (actual >= upper) & ~below
    inside = ~below & ~above
    return (
        inside.sum(axis=0),
        below.sum(axis=0),
        above.sum(axis=0),
        lower.shape[0],
    )


def coverage_rates(lower, upper, actual):
    """Coverage partition rates per horizon: inside, below-lower, above-upper."""
    inside, below, above, r = coverage_counts(lower, upper, actual)
    return inside / r, below / r, above / r


def average_length(lower, upper) -> np.ndarray:
    lower = _stack(lower, "lower")
    upper = _stack(upper, "upper")
    return (upper - lower).mean(axis=0)


def picp(cr: np.ndarray) -> float:
    """Mean coverage across horizons."""
    cr = np.asarray(cr, dtype=float)
    if cr.size < 1:
        raise ValueError("need at least one horizon")
    return float(cr.mean())


def pinaw(avg_length: np.ndarray, series_range: float) -> float:
    """Mean width normalized by the observed series range."""
    if series_range <= 0.0:
        raise ValueError("series range must be positive (constant series)")
    return float(np.mean(np.asarray(avg_length, dtype=float)) / series_range)


def cwc(picp_value: float, pinaw_value: float, alpha: float, kappa: float) -> float:
    """Coverage width-based criterion: width plus an exponential shortfall penalty."""
    if kappa <= 0.0:
        raise ValueError("kappa must be positive")
    nominal = 1.0 - alpha
    penalty = np.exp(-kappa * (picp_value - nominal)) if picp_value < nominal else 0.0
    return float(pinaw_value + penalty)


def winkler(lower, upper, actual, alpha: float):
    """Winkler scores per horizon and their mean absolute value.

    Inside the interval the score is -2*alpha*width; exceedances add four
    times the distance to the violated limit.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    actual = np.asarray(actual, dtype=float)
    width = upper - lower
    s = -2.0 * alpha * width
    s = np.where(actual < lower, s - 4.0 * (lower - actual), s)
    s = np.where(actual > upper, s - 4.0 * (actual - upper), s)
    return s, float(np.mean(np.abs(s)))


def awd(lower, upper, actual):
    """Accumulated width deviation: exceedance distance over interval width."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    actual = np.asarray(actual, dtype=float)
    width = upper - lower
    outside = (actual < lower) | (actual > upper)
    if np.any(outside & (width <= 0.0)):
        raise ValueError("zero-width interval with an outside actual")
    dev = np.zeros_like(width)
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.where(actual < lower, (lower - actual) / width, dev)
        dev = np.where(actual > upper, (actual - upper) / width, dev)
    return dev, float(np.mean(dev))


def evaluate_window(
    lower,
    upper,
    actual,
    alpha: float,
    series_range: float,
    kappa: float = 2.0,
) -> EvaluationReport:
    """Full report for one held-out window (single replicate)."""
    cr, crl, cru = coverage_rates(lower, upper, actual)
    lengths = average_length(lower, upper)
    p = picp(cr)
    w = pinaw(lengths, series_range)
    _, s_bar = winkler(lower, upper, actual, alpha)
    _, awd_bar = awd(lower, upper, actual)
    return EvaluationReport(
        cr=cr,
        cr_lower=crl,
        cr_upper=cru,
        avg_length=lengths,
        picp=p,
        pinaw=w,
        cwc=cwc(p, w, alpha, kappa),
        kappa=kappa,
        winkler_mean=s_bar,
        awd=awd_bar,
        n_replicates=1,
    )
