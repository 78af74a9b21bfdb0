"""Confidence bands around the truncated QQ and ME plots.

Band recipes by regime:

* QQ (any xi > 0): each plotted point gets the vertical interval
  +- xi_hat * c / sqrt(k), where c is the (1 - alpha/2)-quantile of
  sup_{t >= delta} |W(t)|/t with delta = eps/(1-eps), evaluated from the
  closed-form series.  The xi_hat factor carries the scale of the limit
  fluctuation xi B(t)/t.
* ME with xi_hat < 1/2: per-point rectangles with horizontal half-width
  c / sqrt(k) and vertical half-width d / sqrt(k); c and d are Monte Carlo
  quantiles of the two bridge functionals.
* ME with 1/2 < xi_hat < 1: the horizontal half-width is unchanged, while
  the vertical interval at the point with order-statistic index j is the
  equal-tailed quantile interval of the sum-over-max law scaled by
  X_(1) / (j X_(k)) (asymmetric: that law is skewed).

xi_hat in [0.48, 0.52] is refused (the boundary case has no usable limit),
and xi_hat >= 1 is refused (the mean excess has no meaningful band).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .data import OrderedSample, TailIndexEstimate, hill_estimate
from .distributions import (
    SUM_OVER_MAX,
    GpdParams,
    StableSpec,
    limit_quantile,
    sample_gpd,
    sample_pareto,
)
from .errors import DomainError, MeanDoesNotExist, RegimeBoundary
from .limitsim import (
    DEFAULT_GRID,
    DEFAULT_PATHS,
    QuantileEstimate,
    batch_quantile_std_error,
    bridge_functional_samples,
    me_band_quantiles,
    qq_sup_quantile,
)
from .plotsets import ME, QQ, PlotConfig, PlotSet, me_set, qq_set
from .rng import RngStream

REGIME_QQ = "qq"
REGIME_ME_LT_HALF = "me-lt-half"
REGIME_ME_GT_HALF = "me-gt-half"

_BOUNDARY_LO = 0.48
_BOUNDARY_HI = 0.52


@dataclass(frozen=True)
class ConfidenceBand:
    """Per-point offset rectangles around a base plot."""

    base: PlotSet
    dx_lo: np.ndarray
    dx_hi: np.ndarray
    dy_lo: np.ndarray
    dy_hi: np.ndarray
    level: float
    regime: str
    quantiles_used: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.base)
        for name in ("dx_lo", "dx_hi", "dy_lo", "dy_hi"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise DomainError(f"{name} must have one offset per point")
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} must be finite")
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not np.all(self.dy_lo < self.dy_hi):
            raise DomainError("vertical offsets must satisfy dy_lo < dy_hi")
        if not np.all(self.dx_lo <= self.dx_hi):
            raise DomainError("horizontal offsets must satisfy dx_lo <= dx_hi")
        if not (0.0 < self.level < 1.0):
            raise DomainError(f"level must lie in (0,1), got {self.level}")
        if self.regime not in (REGIME_QQ, REGIME_ME_LT_HALF, REGIME_ME_GT_HALF):
            raise DomainError(f"unknown regime {self.regime!r}")

    def rectangles(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Absolute (xlo, xhi, ylo, yhi) corners of each point's rectangle."""
        x, y = self.base.x, self.base.y
        return x + self.dx_lo, x + self.dx_hi, y + self.dy_lo, y + self.dy_hi

    def contains_line(self, slope: float, model_x: np.ndarray | None = None) -> bool:
        """Whether the line y = slope*x lies inside the band.

        Checked at the per-point model positions: for each banded point, the
        line's point at model_x (the plotted x itself when model_x is None)
        must fall inside that point's rectangle.  This is exactly the event
        whose asymptotic probability the band level calibrates.
        """
        xlo, xhi, ylo, yhi = self.rectangles()
        mx = self.base.x if model_x is None else np.asarray(model_x, dtype=float)
        my = slope * mx
        return bool(np.all((xlo <= mx) & (mx <= xhi) & (ylo <= my) & (my <= yhi)))


def qq_band(
    sample: OrderedSample, cfg: PlotConfig, xi: TailIndexEstimate, terms: int = 15
) -> ConfidenceBand:
    """(1 - alpha) confidence band around the truncated QQ plot."""
    if not (xi.xi > 0):
        raise DomainError(f"QQ band needs xi > 0, got {xi.xi}")
    base = qq_set(sample, cfg, truncated=True)
    c = qq_sup_quantile(1.0 - cfg.alpha / 2.0, cfg.eps, terms)
    half = xi.xi * c.value / math.sqrt(cfg.k)
    zeros = np.zeros(len(base))
    return ConfidenceBand(
        base=base,
        dx_lo=zeros,
        dx_hi=zeros,
        dy_lo=zeros - half,
        dy_hi=zeros + half,
        level=1.0 - cfg.alpha,
        regime=REGIME_QQ,
        quantiles_used={"c": c, "xi_hat": xi.xi},
    )


def me_band(
    sample: OrderedSample,
    cfg: PlotConfig,
    xi: TailIndexEstimate,
    rng: RngStream | None = None,
    n_paths: int = DEFAULT_PATHS,
    grid_m: int = DEFAULT_GRID,
    threads: int = 1,
    bridge_quantiles: tuple[QuantileEstimate, QuantileEstimate] | None = None,
    tilde_quantiles: tuple[QuantileEstimate, QuantileEstimate] | None = None,
) -> ConfidenceBand:
    """(1 - alpha) confidence band around the truncated ME plot.

    Regime selection by the supplied estimate: xi_hat < 1/2 uses symmetric
    bridge-functional rectangles; 1/2 < xi_hat < 1 uses the skewed
    sum-over-max quantiles per point.  Precomputed quantiles can be injected
    (bridge_quantiles / tilde_quantiles) to reuse simulations; otherwise the
    needed ones are computed here (Monte Carlo needs `rng`).
    """
    s = xi.xi
    if s <= 0:
        raise DomainError(f"ME band needs xi > 0, got {s}")
    if s >= 1:
        raise MeanDoesNotExist("no ME band for xi>=1")
    if _BOUNDARY_LO <= s <= _BOUNDARY_HI:
        raise RegimeBoundary(
            f"xi_hat={s:.4f} inside [{_BOUNDARY_LO}, {_BOUNDARY_HI}]: boundary case has no band"
        )
    base = me_set(sample, cfg, truncated=True)
    sqrt_k = math.sqrt(cfg.k)
    level = 1.0 - cfg.alpha
    if s < 0.5:
        if bridge_quantiles is None:
            if rng is None:
                raise DomainError("ME band Monte Carlo quantiles need an RngStream")
            bridge_quantiles = me_band_quantiles(
                s, cfg.eps, 1.0 - cfg.alpha / 2.0, n_paths, grid_m, rng, threads
            )
        c, d = bridge_quantiles
        n = len(base)
        half_x = np.full(n, c.value / sqrt_k)
        half_y = np.full(n, d.value / sqrt_k)
        return ConfidenceBand(
            base=base,
            dx_lo=-half_x,
            dx_hi=half_x,
            dy_lo=-half_y,
            dy_hi=half_y,
            level=level,
            regime=REGIME_ME_LT_HALF,
            quantiles_used={"c": c, "d": d, "xi_hat": s},
        )
    # heavy regime: 1/2 < xi_hat < 1
    if level >= 0.99:
        warnings.warn(
            "confidence bands above 99% are extremely wide in the infinite-variance regime",
            stacklevel=2,
        )
    if bridge_quantiles is None:
        if rng is None:
            raise DomainError("ME band Monte Carlo quantiles need an RngStream")
        from .limitsim import bridge_sup_quantile

        c = bridge_sup_quantile(s, cfg.eps, 1.0 - cfg.alpha / 2.0, n_paths, grid_m, rng, threads)
    else:
        c = bridge_quantiles[0]
    if tilde_quantiles is None:
        spec = StableSpec(alpha=1.0 / s, skew=1.0, kind=SUM_OVER_MAX)
        q_lo = limit_quantile(spec, cfg.alpha / 2.0, method="cf-inversion")
        q_hi = limit_quantile(spec, 1.0 - cfg.alpha / 2.0, method="cf-inversion")
    else:
        q_lo, q_hi = tilde_quantiles
    if not (q_lo.value < q_hi.value):
        raise DomainError("sum-over-max quantiles must be ordered")
    x_1 = sample.values[0]
    x_k = sample.values[cfg.k - 1]
    j = base.indices.astype(float)
    scale = x_1 / (j * x_k)
    half_x = np.full(len(base), c.value / sqrt_k)
    return ConfidenceBand(
        base=base,
        dx_lo=-half_x,
        dx_hi=half_x,
        dy_lo=scale * q_lo.value,
        dy_hi=scale * q_hi.value,
        level=level,
        regime=REGIME_ME_GT_HALF,
        quantiles_used={"c": c, "tilde_lo": q_lo, "tilde_hi": q_hi, "xi_hat": s},
    )


# ---------------------------------------------------------------------------
# coverage experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverageDistribution:
    """A simulation law with known shape, for coverage studies."""

    name: str                      # "pareto" | "gpd"
    xi: float
    beta: float = 1.0

    def __post_init__(self):
        if self.name not in ("pareto", "gpd"):
            raise DomainError(f"unsupported coverage distribution {self.name!r}")
        if not (self.xi > 0):
            raise DomainError("coverage study needs xi > 0")

    def sample(self, n: int, rng: RngStream) -> OrderedSample:
        if self.name == "pareto":
            return sample_pareto(self.xi, n, rng)
        return sample_gpd(GpdParams(self.xi, self.beta), n, rng)


@dataclass(frozen=True)
class BandQuantileTable:
    """Bridge-functional quantiles tabulated on a shape grid.

    Coverage experiments re-estimate xi in every replication; recomputing
    10^4 bridge paths per replication is wasteful, so the quantiles are
    tabulated once on a grid of shapes (one shared path set) and read off by
    monotone cubic interpolation.  Interpolation error is far below the
    Monte Carlo error of the quantiles themselves.
    """

    xis: np.ndarray
    c_values: np.ndarray
    d_values: np.ndarray
    level: float
    eps: float
    n_paths: int
    grid_m: int
    c_err: float
    d_err: float

    @classmethod
    def build(
        cls,
        xi_grid,
        eps: float,
        level: float,
        rng: RngStream,
        n_paths: int = DEFAULT_PATHS,
        grid_m: int = DEFAULT_GRID,
        threads: int = 1,
    ) -> "BandQuantileTable":
        xis = np.asarray(sorted(float(x) for x in xi_grid))
        c_samples, d_samples = bridge_functional_samples(
            xis, eps, n_paths, grid_m, rng, include_integral=True, threads=threads
        )
        c_values = np.quantile(c_samples, level, axis=1)
        d_values = np.quantile(d_samples, level, axis=1)
        mid = len(xis) // 2
        return cls(
            xis=xis,
            c_values=c_values,
            d_values=d_values,
            level=level,
            eps=eps,
            n_paths=n_paths,
            grid_m=grid_m,
            c_err=batch_quantile_std_error(c_samples[mid], level),
            d_err=batch_quantile_std_error(d_samples[mid], level),
        )

    def lookup(self, xi: float) -> tuple[QuantileEstimate, QuantileEstimate]:
        if not (self.xis[0] <= xi <= self.xis[-1]):
            raise DomainError(f"xi={xi:.4f} outside tabulated range [{self.xis[0]}, {self.xis[-1]}]")
        c = float(PchipInterpolator(self.xis, self.c_values)(xi))
        d = float(PchipInterpolator(self.xis, self.d_values)(xi))
        mk = lambda v, err: QuantileEstimate(
            value=v,
            level=self.level,
            source="monte-carlo",
            std_error=max(err, 1e-12),
            n_paths=self.n_paths,
            grid_m=self.grid_m,
        )
        return mk(c, self.c_err), mk(d, self.d_err)


@dataclass(frozen=True)
class CoverageResult:
    hits: tuple[bool, ...]
    replications: int

    @property
    def coverage(self) -> float:
        return sum(self.hits) / self.replications


def coverage_experiment(
    dist: CoverageDistribution,
    n: int,
    cfg: PlotConfig,
    replications: int,
    rng: RngStream,
    plot: str = QQ,
    level: float | None = None,
    n_paths: int = DEFAULT_PATHS,
    grid_m: int = DEFAULT_GRID,
    threads: int = 1,
) -> CoverageResult:
    """Frequency with which the band contains the true limit line.

    Each replication draws a fresh sample, estimates xi by Hill at the
    plot's k (the width a practitioner would use), builds the band, and
    checks containment of the line whose slope uses the TRUE xi, evaluated
    at the per-index model positions.  For ME plots the band quantiles are
    read from a shape-grid table built once from a dedicated stream.
    """
    if plot not in (QQ, ME):
        raise DomainError(f"coverage plot must be 'qq' or 'me', got {plot!r}")
    if level is not None and abs((1.0 - level) - cfg.alpha) > 1e-12:
        cfg = PlotConfig(cfg.k, cfg.eps, 1.0 - level)
    table = None
    if plot == ME:
        if not (0 < dist.xi < 0.5):
            raise DomainError("ME coverage experiment supports the xi < 1/2 regime")
        span = max(0.12, 12.0 * dist.xi / math.sqrt(cfg.k))
        lo = max(0.02, dist.xi - span)
        hi = min(0.47, dist.xi + span)
        xi_grid = np.linspace(lo, hi, 41)
        table = BandQuantileTable.build(
            xi_grid,
            cfg.eps,
            1.0 - cfg.alpha / 2.0,
            rng.child(replications),  # reps use children 0..replications-1
            n_paths=n_paths,
            grid_m=grid_m,
            threads=threads,
        )
    hits: list[bool] = []
    for rep in range(replications):
        rep_rng = rng.child(rep)
        sample = dist.sample(n, rep_rng)
        xi_hat = hill_estimate(sample, cfg.k)
        if plot == QQ:
            band = qq_band(sample, cfg, xi_hat)
            hits.append(band.contains_line(dist.xi))
        else:
            band = me_band(sample, cfg, xi_hat, bridge_quantiles=table.lookup(xi_hat.xi))
            model_x = (band.base.indices / cfg.k) ** (-dist.xi)
            slope = dist.xi / (1.0 - dist.xi)
            hits.append(band.contains_line(slope, model_x=model_x))
    return CoverageResult(hits=tuple(hits), replications=replications)
