"""Excitation counting, lifetimes and spectral gap fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .freefermion import SpectrumResult

__all__ = [
    "ChargeSeries",
    "LifetimeEstimate",
    "GapFit",
    "LinearFit",
    "excitation_counts",
    "lifetime",
    "linear_fit",
    "gap_fit",
    "windowed_slope",
]


@dataclass(frozen=True, eq=False)
class ChargeSeries:
    """Bulk excitation numbers per cycle: total, even-centred and odd-centred."""

    n: np.ndarray
    n_e: np.ndarray
    n_o: np.ndarray

    def rows(self):
        for t, (a, b, c) in enumerate(zip(self.n, self.n_e, self.n_o)):
            yield t, float(a), float(b), float(c)


def excitation_counts(k_series: np.ndarray, first_site: int = 2) -> ChargeSeries:
    """``n = sum_m (1 - <K_m>) / 2`` over bulk centres.

    ``k_series`` has shape ``(cycles + 1, n_bulk)``; column ``j`` is the
    stabilizer centred on site ``first_site + j`` (default: columns are
    ``m = 2..N-1``).
    """
    k = np.atleast_2d(np.asarray(k_series, dtype=float))
    sites = first_site + np.arange(k.shape[1])
    exc = 0.5 * (1.0 - k)
    n_e = exc[:, sites % 2 == 0].sum(axis=1)
    n_o = exc[:, sites % 2 == 1].sum(axis=1)
    return ChargeSeries(n_e + n_o, n_e, n_o)


@dataclass(frozen=True)
class LifetimeEstimate:
    """First time ``|signal|`` drops below ``threshold``; ``censored`` if it never does.

    For censored series ``t_half`` equals the horizon (last cycle).
    """

    name: str
    ratio: float
    t_half: float
    censored: bool
    threshold: float = 0.5


def lifetime(signal, threshold: float = 0.5, name: str = "", ratio: float = float("nan")) -> LifetimeEstimate:
    y = np.abs(np.asarray(signal, dtype=float))
    if y.size == 0 or y[0] < threshold:
        raise ValueError(f"signal must start with |value| >= {threshold}")
    below = np.flatnonzero(y < threshold)
    if below.size == 0:
        return LifetimeEstimate(name, ratio, float(len(y) - 1), True, threshold)
    k = int(below[0])
    a, b = y[k - 1], y[k]
    t = (k - 1) + (a - threshold) / (a - b)
    return LifetimeEstimate(name, ratio, float(t), False, threshold)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r2: float


def linear_fit(x, y) -> LinearFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two points")
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    # constant data is fitted exactly by a flat line
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(float(slope), float(intercept), r2)


def windowed_slope(series, start: int, stop: int) -> float:
    """Least-squares slope of ``series[start:stop + 1]`` against cycle index."""
    y = np.asarray(series, dtype=float)[start : stop + 1]
    return linear_fit(np.arange(start, start + len(y)), y).slope


@dataclass(frozen=True)
class GapFit:
    zeta: LinearFit
    delta_monotone: bool
    delta_max_rise: float
    Delta_L: np.ndarray
    Delta_R: np.ndarray
    tolerance: float


def gap_fit(spectra: SpectrumResult, min_points: int = 5) -> GapFit:
    """``zeta`` against ``|j_e - j_o|``, and whether ``delta`` falls with ``j_o`` to within a bin."""
    ratios = np.asarray(spectra.ratios, dtype=float)
    ok = np.isfinite(spectra.zeta)
    if ok.sum() < min_points:
        raise ValueError(f"need at least {min_points} ratios with a resolved zeta")
    j_e = float(spectra.meta.get("base", {}).get("j_e", 1.0))
    fit = linear_fit(np.abs(1.0 - ratios[ok]) * j_e, spectra.zeta[ok])
    order = np.argsort(ratios)
    d = np.asarray(spectra.delta, dtype=float)[order]
    rises = np.diff(d)
    max_rise = float(rises.max()) if rises.size else 0.0
    bw = spectra.bin_width
    return GapFit(fit, max_rise <= bw, max_rise, spectra.gap_l[order], spectra.gap_r[order], bw)
