"""Sample ingestion, order statistics, and tail-index estimators.

The central object is OrderedSample: the input data sorted in decreasing
order, X_(1) >= X_(2) >= ... >= X_(n).  Everything downstream (mean-excess
evaluation, Hill/Pickands estimation, plot construction) works off the
order statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import (
    BadK,
    DegenerateSpacings,
    EmptyExceedanceSet,
    NonFiniteValue,
    NonPositiveOrderStatistic,
    ParseError,
    TooFewObservations,
)

HILL = "hill"
PICKANDS = "pickands"
FIXED = "fixed"


@dataclass(frozen=True)
class OrderedSample:
    """Validated sample in decreasing order.

    values is immutable (the underlying array is marked read-only) so an
    OrderedSample can be shared freely across threads.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1:
            raise TooFewObservations("sample must be one-dimensional")
        if arr.size < 2:
            raise TooFewObservations(f"need at least 2 observations, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue(int(np.flatnonzero(~np.isfinite(arr))[0]) + 1)
        if np.any(np.diff(arr) > 0):
            raise ValueError("values must be non-increasing; use OrderedSample.from_data")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_data(cls, data: Iterable[float]) -> "OrderedSample":
        """Sort raw observations into decreasing order (stable, ties kept)."""
        arr = np.asarray(list(data) if not isinstance(data, np.ndarray) else data, dtype=float)
        if arr.size >= 2 and np.all(np.isfinite(arr)):
            arr = np.sort(arr, kind="stable")[::-1]
        return cls(arr)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def order_statistic(self, i: int) -> float:
        """X_(i), 1-indexed from the top."""
        if not (1 <= i <= self.n):
            raise BadK(f"order statistic index {i} outside 1..{self.n}")
        return float(self.values[i - 1])


@dataclass(frozen=True)
class TailIndexEstimate:
    """Tail index (shape) estimate with its provenance.

    xi > 0 is required wherever the estimate is consumed (bands, normalized
    plots); the record itself admits any finite value because the Pickands
    estimator is signed for light-tailed input.
    """

    xi: float
    method: str
    k: int = 0

    def __post_init__(self):
        if self.method not in (HILL, PICKANDS, FIXED):
            raise ValueError(f"unknown method {self.method!r}")
        if not math.isfinite(self.xi):
            raise ValueError("xi must be finite")


def fixed_xi(xi: float) -> TailIndexEstimate:
    return TailIndexEstimate(float(xi), FIXED, 0)


# ---------------------------------------------------------------------------
# ingestion / serialization
# ---------------------------------------------------------------------------

PLAIN = "plain"
CSV_COLUMN = "csv-column"


def _parse_float(token: str, line_number: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(line_number, repr(token.strip())) from None
    if not math.isfinite(value):
        raise NonFiniteValue(line_number)
    return value


def ingest(path: str | Path, format: str = PLAIN, column: int = 0) -> OrderedSample:
    """Read a univariate sample from a text file.

    plain format: one number per line.  csv-column format: comma-separated
    rows, reading the 0-based `column`; a non-numeric first row is skipped as
    a header.  Lines starting with '#' are comments, blank lines are ignored,
    '.' is the decimal separator, scientific notation is accepted.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    if format not in (PLAIN, CSV_COLUMN):
        raise ParseError(0, f"unknown format {format!r}")
    out: list[float] = []
    header_allowed = format == CSV_COLUMN
    with path.open("r", encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if format == PLAIN:
                out.append(_parse_float(line, line_number))
                continue
            cells = line.split(",")
            if column >= len(cells):
                raise ParseError(line_number, f"no column {column}")
            token = cells[column]
            if header_allowed:
                header_allowed = False
                try:
                    out.append(_parse_float(token, line_number))
                except ParseError:
                    continue  # header row
            else:
                out.append(_parse_float(token, line_number))
    if len(out) < 2:
        raise TooFewObservations(f"{path}: found {len(out)} usable values, need at least 2")
    return OrderedSample.from_data(out)


def write_sample_file(sample: OrderedSample | np.ndarray, path: str | Path) -> None:
    """Write one value per line in the format `ingest` reads back.

    Floats are written in shortest round-trip form, so
    ingest(write(ingest(f))) is the identity on the ordered values.
    """
    values = sample.values if isinstance(sample, OrderedSample) else np.asarray(sample, dtype=float)
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for v in values:
            fh.write(repr(float(v)))
            fh.write("\n")


# ---------------------------------------------------------------------------
# empirical mean excess
# ---------------------------------------------------------------------------

def empirical_me(sample: OrderedSample, u: float) -> float:
    """Empirical mean excess over threshold u.

    Averages X_i - u over the strict exceedances X_i > u; raises
    EmptyExceedanceSet when nothing exceeds u.
    """
    values = sample.values
    count = int(np.searchsorted(-values, -float(u), side="left"))
    if count == 0:
        raise EmptyExceedanceSet(f"no observation exceeds u={u}")
    return float(values[:count].mean() - u)


def me_at_order_statistics(sample: OrderedSample, k: int) -> np.ndarray:
    """Empirical mean excess evaluated at thresholds X_(2), ..., X_(k).

    Returns the array [ME(X_(2)), ..., ME(X_(k))].  Under ties the strict
    indicator matters: the exceedance count of X_(i) is the number of values
    strictly above it, not i-1.  Raises EmptyExceedanceSet when a threshold
    equals the sample maximum (zero strict exceedances).
    """
    values = sample.values
    if not (2 <= k <= sample.n):
        raise BadK(f"k={k} outside 2..{sample.n}")
    idx = np.arange(1, k)  # 0-based positions of X_(2)..X_(k)
    thresholds = values[idx]
    counts = np.searchsorted(-values, -thresholds, side="left")
    if np.any(counts == 0):
        raise EmptyExceedanceSet("threshold ties the sample maximum")
    csum = np.cumsum(values)
    return csum[counts - 1] / counts - thresholds


# ---------------------------------------------------------------------------
# tail-index estimators
# ---------------------------------------------------------------------------

def hill_estimate(sample: OrderedSample, k: int) -> TailIndexEstimate:
    """Hill estimator from the top k order statistics.

    xi_hat = (1/k) * sum_{i<=k} log(X_(i) / X_(k+1)).  Requires
    1 <= k <= n-1 and X_(k+1) > 0.  Scale-invariant: hill(c*X) = hill(X)
    for any c > 0.
    """
    values = sample.values
    if not (1 <= k <= sample.n - 1):
        raise BadK(f"k={k} outside 1..{sample.n - 1}")
    pivot = values[k]
    if pivot <= 0:
        raise NonPositiveOrderStatistic(f"X_({k + 1}) = {pivot} <= 0")
    xi = float(np.mean(np.log(values[:k] / pivot)))
    return TailIndexEstimate(xi, HILL, k)


def hill_trajectory(sample: OrderedSample, k_max: int) -> np.ndarray:
    """Hill estimates for every k = 1..k_max in one pass (cumulative means)."""
    values = sample.values
    if not (1 <= k_max <= sample.n - 1):
        raise BadK(f"k_max={k_max} outside 1..{sample.n - 1}")
    if values[k_max] <= 0:
        raise NonPositiveOrderStatistic(f"X_({k_max + 1}) = {values[k_max]} <= 0")
    logs = np.log(values[: k_max + 1])
    k = np.arange(1, k_max + 1)
    return np.cumsum(logs[:-1])[: k_max] / k - logs[1 : k_max + 1]


def pickands_estimate(sample: OrderedSample, k: int) -> TailIndexEstimate:
    """Pickands estimator from order statistics at k, 2k and 4k.

    xi_hat = log((X_(k) - X_(2k)) / (X_(2k) - X_(4k))) / log 2.  Requires
    4k <= n and strictly decreasing spacings; location-scale invariant.
    The result may be <= 0 for light-tailed data.
    """
    if k < 1 or 4 * k > sample.n:
        raise BadK(f"need 4k <= n; got k={k}, n={sample.n}")
    x_k = sample.values[k - 1]
    x_2k = sample.values[2 * k - 1]
    x_4k = sample.values[4 * k - 1]
    upper = x_k - x_2k
    lower = x_2k - x_4k
    if lower <= 0 or upper <= 0:
        raise DegenerateSpacings(f"spacings ({upper}, {lower}) must be positive")
    return TailIndexEstimate(float(np.log(upper / lower) / np.log(2.0)), PICKANDS, k)
