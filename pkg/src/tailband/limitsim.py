"""Limit-process machinery: boundary-crossing series, Brownian bridge
simulation, and Monte Carlo quantiles of the bridge functionals that size
the confidence bands.

Two closed forms do the analytic work:

* cone_exit_probability: P(sup_{t >= delta} |W(t)|/t > M) for a standard
  Brownian motion, as a series of Gaussian-cdf differences.  Two index
  conventions of the series circulate; the shipped default is the one that
  matches both the classical reflection formula (after time inversion) and
  direct simulation.  The other is kept behind the `form` flag.
* doob_band_probability: P(-(alpha t + beta) <= W(t) <= a t + b for all
  t >= 0), Doob's two-linear-boundary formula.

Everything Monte Carlo is driven by RngStream batches so results are
reproducible bit-for-bit at any worker count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import ConvergenceFailure, DomainError, RegimeMismatch
from .parallel import batch_sizes, run_batches
from .rng import RngStream

SERIES_FORM_DEFAULT = "4k-1"   # leading Phi offsets of the validated series
SERIES_FORM_ALTERNATE = "4k+1"

DEFAULT_PATHS = 10_000
DEFAULT_GRID = 8192


@dataclass(frozen=True)
class QuantileEstimate:
    """A quantile value with its provenance and error estimate."""

    value: float
    level: float
    source: str              # "series" | "monte-carlo" | "cf-inversion"
    std_error: float = 0.0
    n_paths: int = 0
    grid_m: int = 0

    def __post_init__(self):
        if not (0.0 < self.level < 1.0):
            raise DomainError(f"level must lie in (0,1), got {self.level}")
        if self.source not in ("series", "monte-carlo", "cf-inversion"):
            raise DomainError(f"unknown source {self.source!r}")
        if self.source == "series" and self.std_error != 0.0:
            raise DomainError("series quantiles are exact; std_error must be 0")
        if self.source != "series" and not (self.std_error > 0.0):
            raise DomainError("stochastic/numerical quantiles need std_error > 0")

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "level": self.level,
            "source": self.source,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "grid_m": self.grid_m,
        }


def batch_quantile_std_error(samples: np.ndarray, level: float, n_batches: int = 10) -> float:
    """Standard error of an empirical quantile by the batch-means method."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n < n_batches * 2:
        raise DomainError("too few samples for batch-means error")
    usable = n - n % n_batches
    parts = samples[:usable].reshape(n_batches, -1)
    qs = np.quantile(parts, level, axis=1)
    return float(np.std(qs, ddof=1) / math.sqrt(n_batches))


# ---------------------------------------------------------------------------
# closed-form boundary-crossing probabilities
# ---------------------------------------------------------------------------

def cone_exit_probability(
    slope: float, delta: float, terms: int = 15, form: str = SERIES_FORM_DEFAULT
) -> float:
    """P(sup_{t >= delta} |W(t)|/t > slope) for standard Brownian motion.

    Series in x = slope * sqrt(delta): the default form sums
    4 * [Phi((4k-1)x) - Phi((4k-3)x)]; the alternate "4k+1" form sums
    4 * [Phi((4k+1)x) - Phi((4k-1)x)].  Only the default reproduces the
    reflection-formula value of the time-inverted two-sided exit problem
    (see reflection_exit_probability), which is why it ships as default.
    Truncation error of the partial sum is about 2*(1 - Phi((4*terms+1)x)),
    i.e. negligible once x >= 0.081 at terms = 15.
    """
    if not (slope > 0 and delta > 0):
        raise DomainError("slope and delta must be positive")
    if terms < 1:
        raise DomainError("terms must be >= 1")
    x = slope * math.sqrt(delta)
    k = np.arange(1, terms + 1, dtype=float)
    if form == SERIES_FORM_DEFAULT:
        total = 4.0 * float(np.sum(ndtr((4 * k - 1) * x) - ndtr((4 * k - 3) * x)))
    elif form == SERIES_FORM_ALTERNATE:
        total = 4.0 * float(np.sum(ndtr((4 * k + 1) * x) - ndtr((4 * k - 1) * x)))
    else:
        raise DomainError(f"unknown series form {form!r}")
    return min(1.0, max(0.0, total))


def reflection_exit_probability(slope: float, delta: float, terms: int = 200) -> float:
    """Same probability through time inversion and the reflection series.

    sup_{t>=delta}|W(t)|/t equals in law sup_{s<=1/delta}|W~(s)|, whose
    distribution is the classical alternating image series.  Used as an
    independent deterministic oracle for cone_exit_probability.
    """
    if not (slope > 0 and delta > 0):
        raise DomainError("slope and delta must be positive")
    x = slope * math.sqrt(delta)
    j = np.arange(-terms, terms + 1, dtype=float)
    stay = np.sum((-1.0) ** j * (ndtr((2 * j + 1) * x) - ndtr((2 * j - 1) * x)))
    return min(1.0, max(0.0, 1.0 - float(stay)))


def doob_band_probability(
    a: float, b: float, alpha: float, beta: float, terms: int = 15
) -> float:
    """P(-(alpha t + beta) <= W(t) <= a t + b for all t >= 0).

    Doob's formula: 1 - sum_k [e^{-2A_k} + e^{-2B_k} - e^{-2C_k} - e^{-2D_k}]
    with the quadratic-in-k exponents below.  Symmetric under swapping
    (a, b) <-> (alpha, beta); with alpha, beta -> inf it collapses to the
    one-sided linear boundary value 1 - e^{-2ab}.
    """
    if a < 0 or alpha < 0:
        raise DomainError("slopes a, alpha must be >= 0")
    if b <= 0 or beta <= 0:
        raise DomainError("intercepts b, beta must be > 0")
    if terms < 1:
        raise DomainError("terms must be >= 1")
    k = np.arange(1, terms + 1, dtype=float)
    ab, albe = a * b, alpha * beta
    cross = a * beta + b * alpha
    a_k = k**2 * ab + (k - 1) ** 2 * albe + k * (k - 1) * cross
    b_k = (k - 1) ** 2 * ab + k**2 * albe + k * (k - 1) * cross
    c_k = k**2 * (ab + albe) + k * (k - 1) * a * beta + k * (k + 1) * b * alpha
    d_k = k**2 * (ab + albe) + k * (k + 1) * a * beta + k * (k - 1) * b * alpha
    total = np.exp(-2 * a_k) + np.exp(-2 * b_k) - np.exp(-2 * c_k) - np.exp(-2 * d_k)
    return min(1.0, max(0.0, 1.0 - float(np.sum(total))))


def qq_sup_quantile(level: float, eps: float, terms: int = 15) -> QuantileEstimate:
    """level-quantile of sup_{t >= delta} |W(t)|/t with delta = eps/(1-eps).

    Solves cone_exit_probability(M, delta, terms) = 1 - level by bracketed
    root-finding; the returned M satisfies |P(sup > M) - (1-level)| <= 1e-8.
    The truncated series is only trustworthy for M*sqrt(delta) >= ~0.085,
    which covers every level >= 0.001; more extreme lower-tail levels are
    refused rather than silently mis-solved.
    """
    if not (0.0 < level < 1.0):
        raise DomainError(f"level must lie in (0,1), got {level}")
    if not (0.0 < eps < 1.0):
        raise DomainError(f"eps must lie in (0,1), got {eps}")
    delta = eps / (1.0 - eps)
    target = 1.0 - level
    sqrt_d = math.sqrt(delta)

    def prob_at_x(x: float) -> float:
        return cone_exit_probability(x / sqrt_d, delta, terms)

    x_lo = 0.085
    if prob_at_x(x_lo) < target:
        raise ConvergenceFailure(f"level {level} too extreme for {terms}-term series")
    x_hi = 0.5
    for _ in range(80):
        if prob_at_x(x_hi) < target:
            break
        x_hi *= 2.0
    else:
        raise ConvergenceFailure("failed to bracket the quantile")
    x_star = brentq(lambda x: prob_at_x(x) - target, x_lo, x_hi, xtol=1e-13, rtol=8.9e-16)
    if abs(prob_at_x(float(x_star)) - target) > 1e-8:
        raise ConvergenceFailure("root-find did not reach probability tolerance")
    return QuantileEstimate(value=float(x_star) / sqrt_d, level=level, source="series")


# ---------------------------------------------------------------------------
# Brownian bridge simulation and band functionals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BridgePath:
    """A Brownian bridge sampled at t_j = j/m, j = 1..m (last value exactly 0)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise DomainError("bridge needs at least 2 grid values")
        if not np.all(np.isfinite(arr)):
            raise DomainError("bridge values must be finite")
        if arr[-1] != 0.0:
            raise DomainError("bridge must end at exactly 0")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def m(self) -> int:
        return int(self.values.size)

    def grid(self) -> np.ndarray:
        return np.arange(1, self.m + 1) / self.m


def simulate_bridge(m: int, rng: RngStream) -> BridgePath:
    """Brownian bridge from cumulative Gaussian increments of variance 1/m.

    B(t_j) = W(t_j) - t_j W(1); the endpoint is pinned to exactly 0.
    """
    if m < 2:
        raise DomainError("grid size m must be >= 2")
    z = rng.generator().standard_normal(m) * math.sqrt(1.0 / m)
    w = np.cumsum(z)
    t = np.arange(1, m + 1) / m
    b = w - t * w[-1]
    b[-1] = 0.0
    return BridgePath(b)


def _bridge_functional_worker(args) -> tuple[np.ndarray, np.ndarray | None]:
    seed, stream_id, batch_index, size, xi_values, eps, m, include_integral = args
    g = RngStream(seed, stream_id).child(batch_index).generator()
    z = g.standard_normal((size, m)) * math.sqrt(1.0 / m)
    np.cumsum(z, axis=1, out=z)
    t = np.arange(1, m + 1) / m
    b = z - t[None, :] * z[:, -1:]
    b[:, -1] = 0.0
    mask = t >= eps - 1e-12
    t_mask = t[mask]
    c_part = np.empty((len(xi_values), size))
    d_part = np.empty((len(xi_values), size)) if include_integral else None
    for row, xi in enumerate(xi_values):
        weights = t ** (-(1.0 + xi))
        f = b * weights[None, :]
        c_part[row] = xi * f[:, mask].max(axis=1)
        if include_integral:
            cs = np.cumsum(f, axis=1)
            # trapezoid from y = 1/m: I_j = (sum_{l<=j} f_l - f_1/2 - f_j/2)/m
            integral = (cs - 0.5 * (f + f[:, :1])) / m
            d_part[row] = xi * (integral[:, mask] / t_mask[None, :]).max(axis=1)
    return c_part, d_part


def bridge_functional_samples(
    xi_values,
    eps: float,
    n_paths: int,
    m: int,
    rng: RngStream,
    include_integral: bool = True,
    batch: int = 256,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Per-path suprema of the band functionals, for each shape value.

    For each simulated bridge B, evaluates over the window t in [eps, 1]:
      c-functional: sup xi t^-(1+xi) B(t)
      d-functional: sup xi t^-1 * integral_0^t y^-(1+xi) B(y) dy
    (signed suprema; the integral is trapezoidal from y = 1/m, whose omitted
    head is O(m^(xi - 1/2)) pathwise for xi < 1/2).  Returns arrays of shape
    (len(xi_values), n_paths); results are independent of `threads`.
    """
    xi_values = tuple(float(x) for x in np.atleast_1d(xi_values))
    if not (0.0 < eps < 1.0):
        raise DomainError(f"eps must lie in (0,1), got {eps}")
    for xi in xi_values:
        if not (0.0 < xi < 1.0):
            raise DomainError(f"shape {xi} outside (0,1)")
        if include_integral and xi >= 0.5:
            raise RegimeMismatch(f"integral functional needs xi < 1/2, got {xi}")
    if m < 2:
        raise DomainError("grid size m must be >= 2")
    sizes = batch_sizes(n_paths, batch)
    args = [
        (rng.seed, rng.stream_id, i, size, xi_values, eps, m, include_integral)
        for i, size in enumerate(sizes)
    ]
    parts = run_batches(_bridge_functional_worker, args, threads)
    c_all = np.concatenate([p[0] for p in parts], axis=1)
    d_all = np.concatenate([p[1] for p in parts], axis=1) if include_integral else None
    return c_all, d_all


def me_band_quantiles(
    xi: float,
    eps: float,
    level: float,
    n_paths: int = DEFAULT_PATHS,
    m: int = DEFAULT_GRID,
    rng: RngStream | None = None,
    threads: int = 1,
) -> tuple[QuantileEstimate, QuantileEstimate]:
    """Monte Carlo level-quantiles (c, d) of the two band functionals, xi < 1/2.

    level is the quantile probability itself (a band at confidence 1 - a
    uses level = 1 - a/2 for each functional).  Standard errors come from
    10 path batches.
    """
    if not (0.0 < xi < 0.5):
        raise RegimeMismatch(f"me_band_quantiles needs 0 < xi < 1/2, got {xi}")
    if n_paths < 1000:
        raise DomainError("need at least 1000 paths")
    if m < 1000:
        raise DomainError("need grid size m >= 1000")
    if rng is None:
        raise DomainError("me_band_quantiles needs an RngStream")
    if not (0.0 < level < 1.0):
        raise DomainError(f"level must lie in (0,1), got {level}")
    c_samples, d_samples = bridge_functional_samples(
        [xi], eps, n_paths, m, rng, include_integral=True, threads=threads
    )
    c = QuantileEstimate(
        value=float(np.quantile(c_samples[0], level)),
        level=level,
        source="monte-carlo",
        std_error=batch_quantile_std_error(c_samples[0], level),
        n_paths=n_paths,
        grid_m=m,
    )
    d = QuantileEstimate(
        value=float(np.quantile(d_samples[0], level)),
        level=level,
        source="monte-carlo",
        std_error=batch_quantile_std_error(d_samples[0], level),
        n_paths=n_paths,
        grid_m=m,
    )
    return c, d


def bridge_sup_quantile(
    xi: float,
    eps: float,
    level: float,
    n_paths: int = DEFAULT_PATHS,
    m: int = DEFAULT_GRID,
    rng: RngStream | None = None,
    threads: int = 1,
) -> QuantileEstimate:
    """level-quantile of the c-functional alone; valid for any xi in (0, 1)."""
    if not (0.0 < xi < 1.0):
        raise RegimeMismatch(f"bridge_sup_quantile needs 0 < xi < 1, got {xi}")
    if rng is None:
        raise DomainError("bridge_sup_quantile needs an RngStream")
    c_samples, _ = bridge_functional_samples(
        [xi], eps, n_paths, m, rng, include_integral=False, threads=threads
    )
    return QuantileEstimate(
        value=float(np.quantile(c_samples[0], level)),
        level=level,
        source="monte-carlo",
        std_error=batch_quantile_std_error(c_samples[0], level),
        n_paths=n_paths,
        grid_m=m,
    )


# ---------------------------------------------------------------------------
# Monte Carlo oracle for the cone-exit probability
# ---------------------------------------------------------------------------

def _cone_exit_worker(args) -> np.ndarray:
    seed, stream_id, batch_index, size, grid, delta, slopes, corrected = args
    g = RngStream(seed, stream_id).child(batch_index).generator()
    z = g.standard_normal((size, grid), dtype=np.float32)
    np.cumsum(z, axis=1, out=z)
    mx = z.max(axis=1)
    mn = z.min(axis=1)
    sums = np.zeros(len(slopes))
    for si, slope in enumerate(slopes):
        c = slope * math.sqrt(delta * grid)  # barrier in cumulative-sum units
        exited = (mx >= c) | (mn <= -c)
        if not corrected:
            sums[si] = float(np.count_nonzero(exited))
            continue
        p_exit = exited.astype(float)
        near = ~exited & ((mx > c - 4.0) | (mn < -c + 4.0))
        idx = np.nonzero(near)[0]
        if idx.size:
            rows = z[idx].astype(np.float64)
            log_stay = np.zeros(idx.size)
            for sign in (1.0, -1.0):
                gap_a = c - sign * rows[:, :-1]
                gap_b = c - sign * rows[:, 1:]
                expo = -2.0 * gap_a * gap_b
                hit = expo > -30.0
                if hit.any():
                    pj = np.zeros_like(expo)
                    pj[hit] = np.exp(expo[hit])
                    log_stay += np.log1p(-np.clip(pj, 0.0, 1.0 - 1e-15)).sum(axis=1)
            p_exit[idx] = 1.0 - np.exp(log_stay)
        sums[si] = float(p_exit.sum())
    return sums


def mc_cone_exit_probability(
    slopes,
    delta: float,
    paths: int = 1_000_000,
    grid: int = 10_000,
    rng: RngStream | None = None,
    threads: int = 1,
    batch: int = 2048,
    corrected: bool = True,
) -> np.ndarray:
    """Simulation oracle for cone_exit_probability, shared across slopes.

    Time inversion maps sup_{t>=delta}|W(t)|/t to the running maximum of a
    Brownian motion on [0, 1/delta], simulated on `grid` equal steps.  With
    corrected=True each path contributes its exact conditional crossing
    probability (Brownian-bridge barrier crossing between grid points), which
    removes the discretization bias of the plain grid maximum and shrinks the
    variance; corrected=False gives the plain grid-max indicator.
    Deterministic for fixed rng at any thread count.
    """
    if rng is None:
        raise DomainError("mc_cone_exit_probability needs an RngStream")
    if not (delta > 0):
        raise DomainError("delta must be positive")
    slopes = tuple(float(s) for s in np.atleast_1d(slopes))
    sizes = batch_sizes(paths, batch)
    args = [
        (rng.seed, rng.stream_id, i, size, grid, delta, slopes, corrected)
        for i, size in enumerate(sizes)
    ]
    parts = run_batches(_cone_exit_worker, args, threads)
    return np.sum(np.stack(parts, axis=0), axis=0) / paths
