"""Cross-checks between simulated ensembles, solver output and closed forms."""

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy import interpolate
from scipy import special as sp

from .grids import Grid1D

DEFAULT_BINS = 512
NORM_LO, NORM_HI = 0.98, 1.02
SLOPE_TOL = 1e-9


class NormalizationError(ValueError):
    pass


class DegenerateRangeError(ValueError):
    pass


@dataclass(frozen=True)
class ComparisonReport:
    ks_distance: float
    l1_distance: float
    n_samples: int
    threshold: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def default_bins(half_width, n_bins=DEFAULT_BINS):
    """Symmetric bin grid of ``n_bins`` cells on [-half_width, half_width]."""
    dx = 2.0 * half_width / n_bins
    return Grid1D(-half_width + 0.5 * dx, dx, n_bins, "FreeSpace")


def _mass(d, dx):
    return float(np.sum(d) * dx)


def compare_density(ensemble_density, reference, bins, threshold, n_samples=0):
    """KS and L1 distances between a binned density and a reference.

    ``reference`` is a callable evaluated at the bin centres or an array on
    the same bins.  Both CDFs start at zero on the left edge of the bins.
    The binned KS is biased by at most O(1/bins) relative to the raw one.
    """
    emp = np.asarray(ensemble_density, dtype=float)
    if emp.shape != (bins.n,):
        raise ValueError(f"density has shape {emp.shape}, bins have {bins.n} cells")
    ref = np.asarray(reference(bins.x) if callable(reference) else reference, dtype=float)
    if ref.shape != emp.shape:
        raise ValueError("reference and ensemble densities differ in shape")
    if np.any(emp < 0) or np.any(ref < 0):
        raise ValueError("densities must be nonnegative")
    for name, d in (("ensemble", emp), ("reference", ref)):
        m = _mass(d, bins.dx)
        if not NORM_LO <= m <= NORM_HI:
            raise NormalizationError(f"{name} density integrates to {m:.4f}, outside [{NORM_LO}, {NORM_HI}]; widen the bins")
    ce = np.cumsum(emp) * bins.dx
    cr = np.cumsum(ref) * bins.dx
    ks = float(np.max(np.abs(ce - cr)))
    l1 = float(np.sum(np.abs(emp - ref)) * bins.dx)
    return ComparisonReport(ks, l1, int(n_samples), float(threshold), bool(ks <= threshold))


def compare_samples(samples, reference, bins, threshold):
    """Histogram ``samples`` on ``bins`` and call :func:`compare_density`."""
    x = np.asarray(samples, dtype=float)
    counts, _ = np.histogram(x, bins=bins.edges)
    dens = counts / (x.size * bins.dx)
    return compare_density(dens, reference, bins, threshold, n_samples=x.size)


def ks_exact(samples, cdf):
    """Classical one-sample KS distance against a continuous CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_interpolated(samples, cdf, n_nodes=2000):
    """KS distance with the CDF evaluated on ``n_nodes`` order statistics and
    interpolated monotonically in between.  For large samples against an
    expensive CDF; nodes follow the data, so the interpolation error scales
    like (n / n_nodes)^2 / n^2 in the bulk."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n <= n_nodes:
        return ks_exact(x, cdf)
    idx = np.unique(np.linspace(0, n - 1, n_nodes).round().astype(int))
    nodes = np.unique(x[idx])
    Fn = np.maximum.accumulate(np.clip(np.asarray(cdf(nodes), dtype=float), 0.0, 1.0))
    F = interpolate.PchipInterpolator(nodes, Fn, extrapolate=False)(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def fit_exponent(series, exclude_first_decade=True):
    """Least-squares power-law fit y = exp(b) t^a on log-log axes.

    ``series`` has columns (t, y).  Points with t <= 0 are dropped.  When the
    data span more than two decades, the first decade is excluded to skip
    start-up transients.  Returns (a, b, r2).
    """
    s = np.asarray(series, dtype=float)
    t, y = s[:, 0], s[:, 1]
    keep = t > 0
    t, y = t[keep], y[keep]
    if t.size < 5:
        raise ValueError("fit_exponent needs at least 5 points with t > 0")
    if np.any(y <= 0):
        raise ValueError("fit_exponent needs y > 0")
    if t.max() / t.min() < 10.0:
        raise DegenerateRangeError(f"t spans only a factor {t.max() / t.min():.3g}; need at least one decade")
    if exclude_first_decade and t.max() / t.min() > 100.0:
        sel = t >= 10.0 * t.min()
        t, y = t[sel], y[sel]
    lt, ly = np.log(t), np.log(y)
    a, b = np.polyfit(lt, ly, 1)
    resid = ly - (a * lt + b)
    ss = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return float(a), float(b), r2


def gser_modulus(msd, kT, a, return_slopes=False):
    """Generalised Stokes-Einstein estimate of |G*(omega)| from an MSD curve.

    |G*(omega)| = kT / (pi a <r^2>(1/omega) Gamma(1 + alpha(omega))) with
    alpha the local log-log slope at t = 1/omega (centred differences),
    clamped to [0, 1].  Returns columns (omega, |G*|) ordered by increasing
    omega; with ``return_slopes`` also (alpha, clamped_mask).
    """
    if not (kT > 0 and a > 0):
        raise ValueError("kT and a must be positive")
    s = np.asarray(msd, dtype=float)
    t, m = s[:, 0], s[:, 1]
    if t.size < 3:
        raise ValueError("gser_modulus needs at least 3 points")
    if np.any(t <= 0) or np.any(m <= 0):
        raise ValueError("gser_modulus needs t > 0 and msd > 0")
    if np.any(np.diff(t) <= 0):
        raise ValueError("t must be increasing")
    lt, lm = np.log(t), np.log(m)
    alpha = np.gradient(lm, lt)
    # rounding in the log-log slope is not a physical violation
    clamped = (alpha < -SLOPE_TOL) | (alpha > 1.0 + SLOPE_TOL)
    if np.any(clamped):
        warnings.warn(
            f"gser_modulus: {int(clamped.sum())} local slopes outside [0, 1] were clamped", RuntimeWarning, stacklevel=2
        )
    alpha = np.clip(alpha, 0.0, 1.0)
    g = kT / (math.pi * a * m * sp.gamma(1.0 + alpha))
    out = np.column_stack([1.0 / t, g])[::-1]
    if return_slopes:
        return out, alpha[::-1], clamped[::-1]
    return out


def write_report_json(reports, path):
    doc = {k: (v.to_dict() if isinstance(v, ComparisonReport) else v) for k, v in reports.items()}
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_csv(rows, path):
    """rows: list of dicts sharing the same keys."""
    if not rows:
        raise ValueError("no report rows")
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in (r[k] for k in keys)])
