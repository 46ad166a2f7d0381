"""Alpha-stable laws: characteristic function, density, distribution function
and sampling.

Parametrisation (the only one exposed)::

    phi(xi) = exp(i*xi*mu - |sigma*xi|**alpha * (1 - i*gamma*sgn(xi)*Phi))
    Phi     = tan(pi*alpha/2)            (alpha != 1)
            = -(2/pi) * log|sigma*xi|    (alpha == 1)

With this form ``X = sigma*Z + mu`` for a standard variate Z at every alpha,
including alpha = 1.  At alpha = 2 the law is normal with variance
``2*sigma**2`` (matching ``exp(-sigma**2 xi**2)``).
"""

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.integrate import IntegrationWarning, quad

from . import kernels
from ._rng import open_uniform_angle, positive_exponential, stream

log = logging.getLogger(__name__)

# |phi| below this is treated as the end of the frequency axis
CF_CUTOFF = 1e-12
# beyond this many scale units the asymptotic series replaces quadrature
TAIL_SWITCH = 50.0
CLAMP_TOL = 1e-10
QUAD_TOL = 1e-8


class StableAccuracyError(ArithmeticError):
    """Fourier inversion could not reach the requested accuracy."""


@dataclass(frozen=True)
class StableParams:
    alpha: float
    gamma: float = 0.0
    sigma: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not (-1.0 <= self.gamma <= 1.0):
            raise ValueError(f"gamma must lie in [-1, 1], got {self.gamma}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")

    @property
    def symmetric(self):
        return self.gamma == 0.0 or self.alpha == 2.0

    def scaled(self, factor):
        """Law of ``factor * X`` for factor > 0 (alpha != 1 or gamma == 0)."""
        return StableParams(self.alpha, self.gamma, self.sigma * factor, self.mu * factor)


def characteristic_function(p, xi):
    xi = np.asarray(xi, dtype=float)
    s = np.abs(p.sigma * xi)
    if p.alpha == 1.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            big_phi = np.where(s > 0, -(2.0 / np.pi) * np.log(np.where(s > 0, s, 1.0)), 0.0)
    else:
        big_phi = math.tan(0.5 * np.pi * p.alpha)
    expo = 1j * xi * p.mu - s**p.alpha * (1.0 - 1j * p.gamma * np.sign(xi) * big_phi)
    out = np.exp(expo)
    return out if out.ndim else complex(out)


def _frequency_cutoff(alpha):
    return (-math.log(CF_CUTOFF)) ** (1.0 / alpha)


def _phase(alpha, gamma):
    """theta(s) with phi_std(s) = exp(-s**alpha) * exp(i*theta(s)) for s > 0."""
    if gamma == 0.0:
        return lambda s: 0.0
    if alpha == 1.0:
        c = -gamma * 2.0 / math.pi
        return lambda s: c * s * math.log(s) if s > 0 else 0.0
    c = gamma * math.tan(0.5 * math.pi * alpha)
    return lambda s: c * s**alpha


def _quad(func, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        return quad(func, a, b, limit=500, epsabs=1e-14, epsrel=1e-12, **kw)


def _pdf_quad(z, alpha, gamma):
    """Standard density by inversion of the characteristic function:
    f(z) = (1/pi) int_0^Xi exp(-s^a) cos(s z - theta(s)) ds."""
    xi_max = _frequency_cutoff(alpha)
    theta = _phase(alpha, gamma)

    def even(s):
        return math.exp(-(s**alpha)) * math.cos(theta(s))

    def odd(s):
        return math.exp(-(s**alpha)) * math.sin(theta(s))

    if z == 0.0:
        val, err = _quad(even, 0.0, xi_max)
    else:
        val, err = _quad(even, 0.0, xi_max, weight="cos", wvar=z)
        if gamma != 0.0:
            v2, e2 = _quad(odd, 0.0, xi_max, weight="sin", wvar=z)
            val += v2
            err += e2
    return val / math.pi, err / math.pi


def _cdf_quad(z, alpha, gamma):
    """Gil-Pelaez: F(z) = 1/2 + (1/pi) int_0^inf exp(-s^a) sin(s z - theta)/s ds.

    The 1/s singularity of the even part is removed by subtracting the
    indicator of [0, 1] and adding back Si(z) analytically.
    """
    xi_max = _frequency_cutoff(alpha)
    theta = _phase(alpha, gamma)

    def even(s):
        if s == 0.0:
            return 0.0
        return (math.exp(-(s**alpha)) * math.cos(theta(s)) - (1.0 if s < 1.0 else 0.0)) / s

    def odd(s):
        if s == 0.0:
            return 0.0
        return math.exp(-(s**alpha)) * math.sin(theta(s)) / s

    total = 0.0
    err = 0.0
    if z != 0.0:
        for a, b in ((0.0, 1.0), (1.0, max(xi_max, 1.0))):
            v, e = _quad(even, a, b, weight="sin", wvar=z)
            total += v
            err += e
        total += special.sici(z)[0]
    if gamma != 0.0:
        for a, b in ((0.0, 1.0), (1.0, max(xi_max, 1.0))):
            if z != 0.0:
                v, e = _quad(odd, a, b, weight="cos", wvar=z)
            else:
                v, e = _quad(odd, a, b)
            total -= v
            err += e
    return 0.5 + total / math.pi, err / math.pi


def _series_terms(z, alpha, gamma, integrated):
    """Asymptotic (alpha > 1) / convergent (alpha < 1) power series in 1/z for z > 0.

    f(z) ~ (1/pi) sum_k (-1)^(k+1) |c|^k Gamma(a k + 1)/k! sin(k(pi a/2 + eta)) z^(-a k - 1)
    with c = 1 - i*gamma*tan(pi a/2), eta = arctan(gamma*tan(pi a/2)).
    ``integrated`` returns the survival function 1 - F(z) instead.
    """
    t = math.tan(0.5 * math.pi * alpha)
    mod_c = math.hypot(1.0, gamma * t)
    eta = math.atan(gamma * t)
    total = 0.0
    prev = math.inf
    for k in range(1, 200):
        if integrated:
            mag = special.gammaln(alpha * k) - special.gammaln(k + 1.0) - alpha * k * math.log(z)
        else:
            mag = special.gammaln(alpha * k + 1.0) - special.gammaln(k + 1.0) - (alpha * k + 1.0) * math.log(z)
        mag += k * math.log(mod_c)
        size = math.exp(mag)
        if alpha > 1.0 and size > prev:
            break
        term = (-1.0) ** (k + 1) * size * math.sin(k * (0.5 * math.pi * alpha + eta))
        total += term
        if size < 1e-17 * max(abs(total), 1e-300):
            break
        prev = size
    return total / math.pi


def _off_support(z, alpha, gamma):
    # totally skewed with alpha < 1: support is a half-line
    return alpha < 1.0 and abs(gamma) == 1.0 and gamma * z <= 0.0


def _std_pdf(z, alpha, gamma):
    if alpha == 2.0:
        return math.exp(-0.25 * z * z) / math.sqrt(4.0 * math.pi)
    if _off_support(z, alpha, gamma):
        return 0.0
    if alpha != 1.0 and abs(z) > TAIL_SWITCH:
        return _series_terms(z, alpha, gamma, False) if z > 0 else _series_terms(-z, alpha, -gamma, False)
    val, err = _pdf_quad(z, alpha, gamma)
    if err > QUAD_TOL:
        if alpha < 1.0 and z != 0.0:
            return _series_terms(z, alpha, gamma, False) if z > 0 else _series_terms(-z, alpha, -gamma, False)
        raise StableAccuracyError(f"density inversion error {err:.2e} at z={z} (alpha={alpha})")
    return val


def _std_cdf(z, alpha, gamma):
    if alpha == 2.0:
        return 0.5 * special.erfc(-z / 2.0)
    if _off_support(z, alpha, gamma):
        return 0.0 if gamma > 0 else 1.0
    if alpha != 1.0 and abs(z) > TAIL_SWITCH:
        if z > 0:
            return 1.0 - _series_terms(z, alpha, gamma, True)
        return _series_terms(-z, alpha, -gamma, True)
    val, err = _cdf_quad(z, alpha, gamma)
    if err > QUAD_TOL:
        raise StableAccuracyError(f"distribution inversion error {err:.2e} at z={z} (alpha={alpha})")
    return val


def _clamp(values, what):
    worst = float(values.min()) if values.size else 0.0
    if worst < 0.0:
        if worst < -CLAMP_TOL:
            warnings.warn(f"{what}: negative inversion artefact {worst:.3e} exceeds {CLAMP_TOL:g}", RuntimeWarning, stacklevel=3)
        log.debug("%s: clamped negative artefacts down to %.3e", what, worst)
    return np.maximum(values, 0.0)


def pdf(p, x):
    """Density of S_alpha(gamma, sigma, mu) at x (scalar or array)."""
    x = np.asarray(x, dtype=float)
    z = (x - p.mu) / p.sigma
    vals = np.array([_std_pdf(float(zi), p.alpha, p.gamma) for zi in z.ravel()]).reshape(z.shape)
    out = _clamp(vals, "pdf") / p.sigma
    return out if out.ndim else float(out)


def cdf(p, x):
    x = np.asarray(x, dtype=float)
    z = (x - p.mu) / p.sigma
    vals = np.array([_std_cdf(float(zi), p.alpha, p.gamma) for zi in z.ravel()]).reshape(z.shape)
    out = np.clip(vals, 0.0, 1.0)
    return out if out.ndim else float(out)


def standard_variates(alpha, gamma, size, rng):
    """Standard S_alpha(gamma, 1, 0) draws via Chambers-Mallows-Stuck."""
    v = open_uniform_angle(rng, size)
    w = positive_exponential(rng, size)
    return kernels.cms_transform(float(alpha), float(gamma), v, w)


def sample_with(p, size, rng):
    return p.sigma * standard_variates(p.alpha, p.gamma, size, rng) + p.mu


def sample(p, n, seed, stream_id=0):
    """n i.i.d. draws from p; identical (seed, stream_id) give identical output."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return sample_with(p, int(n), stream(seed, 0x57AB1E, stream_id))


def tail_constant(p):
    """Limit of |x|**(1+alpha) * pdf(x) as x -> +inf (alpha < 2)."""
    if p.alpha >= 2.0:
        return 0.0
    if p.alpha == 1.0:
        return (1.0 + p.gamma) * p.sigma / math.pi
    t = math.tan(0.5 * math.pi * p.alpha)
    mod_c = math.hypot(1.0, p.gamma * t)
    eta = math.atan(p.gamma * t)
    return mod_c * math.gamma(p.alpha + 1.0) * math.sin(0.5 * math.pi * p.alpha + eta) / math.pi * p.sigma**p.alpha
