"""Authentication signal processing.

Three stages over a reconstructed pathloss series:

1. Robust peak-valley detection: a moving mean/std over a filtered copy
   of the series flags samples deviating more than ``threshold`` moving
   standard deviations from the moving mean; flagged samples are blended
   into the filtered copy with weight ``influence`` so a sustained
   excursion does not corrupt the running statistics.
2. Valley extent location: an inverted-Gaussian-plus-baseline model is
   least-squares fitted to the series, seeded from the flagged band; the
   start/end points are where the fitted model recovers to within a
   cutoff fraction (default 1%) of its depth.
3. Checks: geometry gates on the fitted valley, and a residual-std
   (channel fading variation) test against a dB threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .errors import ConfigError

# Minimum extent samples for a stable std estimate in the variation check.
MIN_EXTENT_SAMPLES = 30

DEFAULT_CUTOFF_FRACTION = 0.01

# Light prefilter applied to the detector input only (never to the data
# the model is fitted on or the residuals are computed from): at 500
# probes/s a 21-sample centered mean spans 42 ms, suppressing per-probe
# noise enough that a genuine dip outruns the detector's moving window.
DEFAULT_SMOOTH_WINDOW = 21


def smooth_series(y, window: int) -> np.ndarray:
    """Centered moving average with edge renormalization; window 1 = identity."""
    y = np.asarray(y, dtype=float)
    if window < 1:
        raise ConfigError(f"smoothing window must be >= 1, got {window}")
    if window == 1:
        return y.copy()
    kernel = np.ones(int(window))
    num = np.convolve(y, kernel, mode="same")
    den = np.convolve(np.ones_like(y), kernel, mode="same")
    return num / den


@dataclass(frozen=True)
class ValleyDetectionParams:
    lag: int = 100
    threshold: float = 4.0
    influence: float = 0.5

    def __post_init__(self) -> None:
        if self.lag < 2:
            raise ConfigError(f"lag must be >= 2, got {self.lag}")
        if self.threshold <= 0:
            raise ConfigError(f"threshold must be positive, got {self.threshold}")
        if not 0.0 <= self.influence <= 1.0:
            raise ConfigError(f"influence must be in [0, 1], got {self.influence}")


@dataclass(frozen=True)
class DetectorTrace:
    """Full detector state, mainly for inspection and tests."""

    signals: np.ndarray
    filtered: np.ndarray
    moving_avg: np.ndarray
    moving_std: np.ndarray


def detect_signals_trace(y, p: ValleyDetectionParams) -> DetectorTrace:
    """Per-sample signals in {-1, 0, +1}; the first ``lag`` entries are 0.

    A sample emits a signal when its absolute deviation from the previous
    moving mean strictly exceeds ``threshold`` times the previous moving
    std (population std over the ``lag``-sample filtered window); the
    sample then enters the filtered copy blended by ``influence``.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n <= p.lag:
        raise ConfigError(f"series length {n} must exceed lag {p.lag}")
    signals = np.zeros(n, dtype=np.int8)
    filtered = y.copy()
    avg = np.full(n, np.nan)
    std = np.full(n, np.nan)
    avg[p.lag - 1] = np.mean(filtered[:p.lag])
    std[p.lag - 1] = np.std(filtered[:p.lag])
    for i in range(p.lag, n):
        if abs(y[i] - avg[i - 1]) > p.threshold * std[i - 1]:
            signals[i] = 1 if y[i] > avg[i - 1] else -1
            filtered[i] = p.influence * y[i] + (1.0 - p.influence) * filtered[i - 1]
        else:
            signals[i] = 0
            filtered[i] = y[i]
        window = filtered[i - p.lag + 1:i + 1]
        avg[i] = np.mean(window)
        std[i] = np.std(window)
    return DetectorTrace(signals=signals, filtered=filtered,
                         moving_avg=avg, moving_std=std)


def detect_signals(y, p: ValleyDetectionParams) -> np.ndarray:
    return detect_signals_trace(y, p).signals


def _negative_bands(signals: np.ndarray) -> list[tuple[int, int]]:
    """Contiguous runs of -1 as (start, end) inclusive index pairs."""
    bands = []
    start = None
    for i, s in enumerate(signals):
        if s == -1 and start is None:
            start = i
        elif s != -1 and start is not None:
            bands.append((start, i - 1))
            start = None
    if start is not None:
        bands.append((start, len(signals) - 1))
    return bands


def _valley_model(x, baseline, depth, center, width):
    return baseline - depth * np.exp(-((x - center) ** 2) / (2.0 * width ** 2))


@dataclass(frozen=True)
class ValleyFit:
    """Fitted inverted-Gaussian valley in sample-index units."""

    baseline_db: float
    depth_db: float
    center_idx: float
    width_idx: float  # gaussian sigma, samples
    start_idx: int
    end_idx: int
    start_f: float  # interpolated cutoff crossings, before clipping
    end_f: float

    def model(self, idx) -> np.ndarray:
        return _valley_model(np.asarray(idx, dtype=float), self.baseline_db,
                             self.depth_db, self.center_idx, self.width_idx)


def locate_extent(y, signals, cutoff_fraction: float = DEFAULT_CUTOFF_FRACTION,
                  max_iterations: int = 5000) -> ValleyFit | None:
    """Fit the valley model and locate the start/end points.

    Returns None when no negative-signal band exists or the fit fails or
    is degenerate (non-positive depth, center outside the series).
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    bands = _negative_bands(np.asarray(signals))
    if not bands:
        return None
    idx = np.arange(n, dtype=float)
    # the flagged band proves a valley exists; the global minimum and the
    # half-depth sample count give more robust initial center/width
    baseline0 = float(np.percentile(y, 75))
    depth0 = max(baseline0 - float(y.min()), 1e-3)
    center0 = float(np.argmin(y))
    below_half = int(np.sum(y < baseline0 - 0.5 * depth0))
    width0 = float(np.clip(below_half / 2.355, 2.0, n / 2.0))
    lower = (float(y.min()) - 20.0, 1e-3, 0.0, 1.0)
    upper = (float(y.max()) + 20.0, 200.0, float(n - 1), float(n))
    try:
        popt, _ = curve_fit(_valley_model, idx, y,
                            p0=(baseline0, depth0, center0, width0),
                            bounds=(lower, upper), maxfev=max_iterations)
    except (RuntimeError, ValueError):
        return None
    baseline, depth, center, width = popt
    if not np.isfinite(popt).all() or depth <= 0 or width <= 0:
        return None
    # model recovers to within cutoff*depth of baseline at
    # center +/- width * sqrt(2 ln(1/cutoff))
    half_extent = width * math.sqrt(2.0 * math.log(1.0 / cutoff_fraction))
    start_f = center - half_extent
    end_f = center + half_extent
    start_idx = int(max(0, round(start_f)))
    end_idx = int(min(n - 1, round(end_f)))
    if end_idx <= start_idx:
        return None
    return ValleyFit(baseline_db=float(baseline), depth_db=float(depth),
                     center_idx=float(center), width_idx=float(width),
                     start_idx=start_idx, end_idx=end_idx,
                     start_f=float(start_f), end_f=float(end_f))


@dataclass(frozen=True)
class GeometryGates:
    """Acceptance window for the fitted valley shape."""

    min_depth_db: float = 10.0
    max_valley_level_db: float = 45.0
    min_peak_level_db: float = 50.0
    max_peak_level_db: float = 60.0
    min_width_s: float = 0.1
    max_width_s: float = 0.6


@dataclass(frozen=True)
class ValleyReport:
    found: bool
    start_idx: int = 0
    end_idx: int = 0
    valley_idx: int = 0
    depth_db: float = float("nan")
    peak_level_db: float = float("nan")
    valley_level_db: float = float("nan")
    width_s: float = float("nan")


def build_valley_report(fit: ValleyFit | None, times_s) -> ValleyReport:
    if fit is None:
        return ValleyReport(found=False)
    times = np.asarray(times_s, dtype=float)
    dt = float(np.median(np.diff(times))) if len(times) > 1 else 1.0
    return ValleyReport(
        found=True,
        start_idx=fit.start_idx,
        end_idx=fit.end_idx,
        valley_idx=int(round(fit.center_idx)),
        depth_db=fit.depth_db,
        peak_level_db=fit.baseline_db,
        valley_level_db=fit.baseline_db - fit.depth_db,
        width_s=(fit.end_f - fit.start_f) * dt,
    )


def check_valley_geometry(report: ValleyReport, gates: GeometryGates) -> bool:
    if not report.found:
        return False
    return (report.depth_db >= gates.min_depth_db
            and report.valley_level_db <= gates.max_valley_level_db
            and gates.min_peak_level_db <= report.peak_level_db <= gates.max_peak_level_db
            and gates.min_width_s <= report.width_s <= gates.max_width_s)


@dataclass(frozen=True)
class VariationReport:
    residual_std_db: float
    threshold_db: float
    passed: bool
    reason: str | None = None


def variation_check(y_extent, model_extent, threshold_db: float) -> VariationReport:
    """Sample std (n-1 denominator) of detrended pathloss vs. threshold."""
    y_extent = np.asarray(y_extent, dtype=float)
    if len(y_extent) < MIN_EXTENT_SAMPLES:
        return VariationReport(residual_std_db=float("nan"),
                               threshold_db=threshold_db, passed=False,
                               reason=f"extent shorter than {MIN_EXTENT_SAMPLES} samples")
    residuals = y_extent - np.asarray(model_extent, dtype=float)
    std = float(np.std(residuals, ddof=1))
    return VariationReport(residual_std_db=std, threshold_db=threshold_db,
                           passed=std <= threshold_db)


@dataclass(frozen=True)
class SeriesAnalysis:
    """Full single-series pipeline result (used by the trace analyzer)."""

    valley: ValleyReport
    geometry_ok: bool
    variation: VariationReport | None
    accepted: bool
    failed_check: str | None


def analyze_series(times_s, y, params: ValleyDetectionParams,
                   gates: GeometryGates, variation_threshold_db: float,
                   cutoff_fraction: float = DEFAULT_CUTOFF_FRACTION,
                   smooth_window: int = DEFAULT_SMOOTH_WINDOW) -> SeriesAnalysis:
    """Run detection, extent location, and both checks on one series.

    Signals come from the smoothed series; the model is fitted to, and
    residuals are taken from, the raw series.
    """
    y = np.asarray(y, dtype=float)
    signals = detect_signals(smooth_series(y, smooth_window), params)
    fit = locate_extent(y, signals, cutoff_fraction)
    valley = build_valley_report(fit, times_s)
    if fit is None:
        return SeriesAnalysis(valley=valley, geometry_ok=False, variation=None,
                              accepted=False, failed_check="valley-shape")
    geometry_ok = check_valley_geometry(valley, gates)
    if not geometry_ok:
        return SeriesAnalysis(valley=valley, geometry_ok=False, variation=None,
                              accepted=False, failed_check="valley-shape")
    sl = slice(fit.start_idx, fit.end_idx + 1)
    variation = variation_check(y[sl], fit.model(np.arange(len(y))[sl]),
                                variation_threshold_db)
    if not variation.passed:
        return SeriesAnalysis(valley=valley, geometry_ok=True, variation=variation,
                              accepted=False, failed_check="fading-variation")
    return SeriesAnalysis(valley=valley, geometry_ok=True, variation=variation,
                          accepted=True, failed_check=None)
