"""
Cluster-size analysis - K from an MQC spectrum, plateau (localization)
detection, K_loc(p) power-law fit and the growth/shrink regime of prepared
clusters.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.optimize import curve_fit

from src.logic.mqc import CoherenceSpectrum
from src.utils.errors import DegenerateInputError, DomainError, InsufficientDataError

NEGATIVE_CLIP_TOL = 1e-6
PLATEAU_MIN_POINTS = 6
PLATEAU_BAND = 0.1


@dataclass(frozen=True)
class TracePoint:
    n_cycles: int
    time: float
    k: float
    echo: float = float("nan")


@dataclass
class ClusterTrace:
    """
    K(n tau_c) for one (p, N0) run.

    Times must be strictly increasing and K finite and >= 0.
    """
    p: float
    tau0: float
    tau_sigma: float
    n_prep_cycles: int = 0
    points: List[TracePoint] = field(default_factory=list)
    spectra: Optional[List[CoherenceSpectrum]] = None
    label: str = ""
    plateau: Optional["PlateauResult"] = None

    def add_point(self, point: TracePoint, spectrum: Optional[CoherenceSpectrum] = None) -> None:
        if not math.isfinite(point.k) or point.k < 0.0:
            raise DomainError(f"cluster size must be finite and >= 0, got {point.k}")
        if self.points and point.time <= self.points[-1].time:
            raise DomainError(
                f"trace times must increase: {point.time} after {self.points[-1].time}"
            )
        self.points.append(point)
        if self.spectra is not None and spectrum is not None:
            self.spectra.append(spectrum)

    @property
    def times(self) -> np.ndarray:
        return np.array([pt.time for pt in self.points])

    @property
    def sizes(self) -> np.ndarray:
        return np.array([pt.k for pt in self.points])

    @property
    def cycles(self) -> np.ndarray:
        return np.array([pt.n_cycles for pt in self.points], dtype=int)


@dataclass(frozen=True)
class PlateauResult:
    localized: bool
    k_loc: float
    onset_index: int
    slope: float


@dataclass(frozen=True)
class PowerLawFit:
    """K_loc = prefactor * p^exponent, fitted on log-log data."""
    exponent: float
    prefactor: float
    exponent_stderr: float
    points_used: Tuple[Tuple[float, float], ...]
    intercept_stderr: float = 0.0

    def describe(self) -> str:
        return (
            f"K_loc ~ {self.prefactor:.6g} * p^({self.exponent:.4f} +/- {self.exponent_stderr:.4f})"
        )


class SizeEstimator(str, Enum):
    MOMENT = "moment"
    GAUSSIAN = "gaussian"


class Regime(Enum):
    SHRINKING = "shrinking"
    GROWING = "growing"
    STATIONARY = "stationary"


def _clipped_amplitudes(spec: CoherenceSpectrum) -> Tuple[np.ndarray, np.ndarray]:
    """
    Orders and amplitudes with negative entries set to zero.

    Only an identically zero spectrum is an error. Under strong perturbation
    the decoded overlaps (and the echo itself) can be negative.
    """
    orders = spec.orders().astype(float)
    values = spec.as_array()
    if not np.any(values):
        raise DegenerateInputError("spectrum is identically zero")
    clipped = np.clip(values, 0.0, None)
    negative = float(-np.sum(values[values < 0.0]))
    scale = float(np.sum(clipped)) + negative
    if negative > NEGATIVE_CLIP_TOL * scale:
        logging.warning(
            f"[CLUSTER] clipping negative amplitudes carrying {negative / scale:.3e} of |A|"
            f" (echo {spec.normalization:.4g})"
        )
    return orders, clipped


def cluster_size(spec: CoherenceSpectrum) -> float:
    """
    K = 2 <M^2> under the Gaussian model A_M ~ exp(-M^2 / K), floored at 1.

    Negative amplitudes are clipped to zero before the moment is taken; a
    spectrum with no positive weight left gets the floor.
    """
    orders, values = _clipped_amplitudes(spec)
    weight = float(np.sum(values))
    if weight <= 0.0:
        logging.warning("[CLUSTER] no positive coherence weight after clipping, K set to 1")
        return 1.0
    second_moment = float(np.sum(orders ** 2 * values)) / weight
    return max(1.0, 2.0 * second_moment)


def cluster_size_gaussian_fit(spec: CoherenceSpectrum) -> float:
    """
    K from a nonlinear fit of a * exp(-M^2 / K) to the even orders.

    Starts from the moment estimate; the moment estimator remains the
    reference one.
    """
    orders, values = _clipped_amplitudes(spec)
    even = orders % 2 == 0
    x, y = orders[even], values[even]
    k0 = cluster_size(spec)
    if np.count_nonzero(y) < 2:
        return k0

    def model(m, a, k):
        return a * np.exp(-(m ** 2) / k)

    try:
        popt, _ = curve_fit(model, x, y, p0=(float(y.max()), k0),
                            bounds=([0.0, 1e-6], [np.inf, np.inf]), maxfev=20000)
    except (RuntimeError, ValueError) as e:
        logging.warning(f"[CLUSTER] Gaussian fit failed, using moment estimate: {e}")
        return k0
    return max(1.0, float(popt[1]))


def estimate_cluster_size(spec: CoherenceSpectrum,
                          estimator: SizeEstimator = SizeEstimator.MOMENT) -> float:
    if SizeEstimator(estimator) is SizeEstimator.GAUSSIAN:
        return cluster_size_gaussian_fit(spec)
    return cluster_size(spec)


def plateau(trace: ClusterTrace, window_fraction: float = 1.0 / 3.0,
            slope_tol: float = 0.05) -> PlateauResult:
    """
    Detect saturation of K(t).

    The trailing window_fraction of the points (time > 0 only) is fitted by
    least squares in log K versus log t; the trace is localized when
    |slope| < slope_tol. K_loc is the mean K over that window.
    """
    if len(trace.points) < PLATEAU_MIN_POINTS:
        raise InsufficientDataError(
            f"plateau detection needs >= {PLATEAU_MIN_POINTS} points, got {len(trace.points)}"
        )
    if not 0.0 < window_fraction <= 1.0:
        raise DomainError(f"window_fraction must be in (0, 1], got {window_fraction}")

    usable = [pt for pt in trace.points if pt.time > 0.0]
    if len(usable) < 3:
        raise InsufficientDataError("plateau detection needs >= 3 points with time > 0")

    size = min(len(usable), max(3, math.ceil(window_fraction * len(usable))))
    window = usable[-size:]
    log_t = np.log([pt.time for pt in window])
    sizes = np.array([pt.k for pt in window])
    log_k = np.log(np.maximum(sizes, 1e-300))
    slope = float(np.polyfit(log_t, log_k, 1)[0])
    k_loc = float(np.mean(sizes))
    localized = abs(slope) < slope_tol

    onset = -1
    if localized:
        all_sizes = trace.sizes
        inside = np.abs(all_sizes - k_loc) <= PLATEAU_BAND * k_loc
        onset = len(all_sizes) - 1
        while onset > 0 and inside[onset - 1]:
            onset -= 1
    return PlateauResult(localized, k_loc, onset, slope)


def powerlaw_fit(points: Sequence[Tuple[float, float]]) -> PowerLawFit:
    """Ordinary least squares of log K_loc against log p."""
    if len(points) < 3:
        raise InsufficientDataError(f"power-law fit needs >= 3 points, got {len(points)}")
    p = np.array([pt[0] for pt in points], dtype=float)
    k = np.array([pt[1] for pt in points], dtype=float)
    if np.any(p <= 0.0) or np.any(k <= 0.0):
        raise DomainError("power-law fit needs p > 0 and K_loc > 0")
    if np.ptp(p) == 0.0:
        raise DomainError("power-law fit needs at least two distinct p values")
    res = stats.linregress(np.log(p), np.log(k))
    return PowerLawFit(
        exponent=float(res.slope),
        prefactor=float(math.exp(res.intercept)),
        exponent_stderr=float(res.stderr),
        points_used=tuple((float(a), float(b)) for a, b in points),
        intercept_stderr=float(getattr(res, "intercept_stderr", 0.0)),
    )


def classify_regime(trace: ClusterTrace, k_loc: float, tol: float = PLATEAU_BAND) -> Regime:
    """Compare the initial cluster size K0 with the localization size."""
    if not trace.points:
        raise InsufficientDataError("empty trace")
    k0 = trace.points[0].k
    if abs(k0 - k_loc) <= tol * k_loc:
        return Regime.STATIONARY
    return Regime.SHRINKING if k0 > k_loc else Regime.GROWING


def relative_spread(values: Sequence[float]) -> float:
    """(max - min) / mean; zero for fewer than two values."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return 0.0
    return float((arr.max() - arr.min()) / arr.mean())
