"""Mittag-Leffler functions and the Fox-Wright (M-Wright) fundamental solution
of the time-fractional diffusion equation."""

import math
import warnings
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import special
from scipy.integrate import IntegrationWarning, quad

SERIES_RADIUS = 5.0
MAX_TERMS = 2000
# allowed magnitude of the largest series term before switching strategy
CANCEL_LIMIT = 1e4


class MLAccuracyError(ArithmeticError):
    pass


@dataclass(frozen=True)
class MLParams:
    a: float
    b: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"Mittag-Leffler order a must be positive, got {self.a}")


def overflow_threshold(a):
    """Largest z for which E_{a,b}(z) stays in double range (roughly)."""
    return 700.0**a


def _log_term(k, a, b, logz):
    return k * logz - special.gammaln(a * k + b)


def _series_float(a, b, z):
    """Direct Taylor sum; returns None if cancellation would cost digits."""
    if z == 0.0:
        return float(special.rgamma(b))
    logz = math.log(abs(z))
    neg = z < 0
    total = 0.0
    comp = 0.0
    peak = 0.0
    for k in range(MAX_TERMS):
        rg = special.rgamma(a * k + b)
        if rg == 0.0:
            continue
        lt = k * logz - special.gammaln(a * k + b)
        mag = math.exp(lt) if lt < 700 else math.inf
        if neg and mag > CANCEL_LIMIT:
            return None
        term = math.copysign(mag, rg) * (-1.0 if neg and k % 2 else 1.0)
        peak = max(peak, mag)
        # Neumaier summation
        t = total + term
        if abs(total) >= abs(term):
            comp += (total - t) + term
        else:
            comp += (term - t) + total
        total = t
        if k > 2 and mag < 1e-17 * max(abs(total + comp), 1e-300) and a * k + b > 1 and lt < -1.0:
            return total + comp
    return None


def _series_mp(a, b, z):
    """High-precision Taylor sum with working precision sized to the cancellation."""
    lz = math.log(abs(z))
    # locate the largest term to size the precision
    k = np.arange(0, 20000)
    lt = k * lz - special.gammaln(a * k + b)
    peak = float(np.nanmax(lt)) / math.log(10.0)
    dps = int(25 + max(peak, 0.0) * 1.1)
    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        total = mpmath.mpf(0)
        term_z = mpmath.mpf(1)
        kk = 0
        while True:
            term = term_z * mpmath.rgamma(a * kk + b)
            total += term
            if kk > 5 and abs(term) < mpmath.mpf(10) ** (-dps + 2) * max(abs(total), mpmath.mpf(10) ** -300) and a * kk + b > 2:
                break
            kk += 1
            term_z *= zz
            if kk > 200000:
                raise MLAccuracyError("Mittag-Leffler high-precision series did not converge")
        return float(total)


def _kernel_integral(a, b, z):
    """Integral part of E_{a,b}(z) for 0 < a < 1, b < 1 + a.

    E = int_0^inf K(r) dr (+ the exponential pole term when z > 0), with
    K(r) = r^((1-b)/a) exp(-r^(1/a)) [r sin(pi(1-b)) - z sin(pi(1-b+a))]
           / (a pi (r^2 - 2 r z cos(a pi) + z^2)).
    """
    s1 = math.sin(math.pi * (1.0 - b))
    s2 = math.sin(math.pi * (1.0 - b + a))
    ca = math.cos(a * math.pi)
    ex = (1.0 - b) / a

    def k_fn(r):
        if r == 0.0:
            return 0.0 if ex > 0 else (math.inf if ex < 0 else -z * s2 / (a * math.pi * z * z))
        return r**ex * math.exp(-(r ** (1.0 / a))) * (r * s1 - z * s2) / (a * math.pi * (r * r - 2.0 * r * z * ca + z * z))

    r_end = 60.0**a  # exp(-r^(1/a)) < 1e-26 beyond this
    pts = sorted({min(abs(z), r_end * 0.999), 1.0 if r_end > 1.0 else 0.5 * r_end})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(k_fn, 0.0, r_end, points=pts, limit=500, epsabs=1e-15, epsrel=1e-13)
    if err > 1e-9 * max(abs(val), 1e-6):
        raise MLAccuracyError(f"Mittag-Leffler integral error {err:.2e} at z={z}")
    if z > 0:
        val += z**ex * math.exp(z ** (1.0 / a)) / a
    return val


def _ml_integral(a, b, z):
    # lower b into the range where the representation holds
    if b < 1.0 + a:
        return _kernel_integral(a, b, z)
    return (_ml_integral(a, b - a, z) - float(special.rgamma(b - a))) / z


def _ml_scalar(a, b, z):
    if z == 0.0:
        return float(special.rgamma(b))
    if z > overflow_threshold(a):
        raise OverflowError(f"E_{{{a},{b}}}({z}) overflows double precision (z > {overflow_threshold(a):.4g})")
    if abs(z) <= SERIES_RADIUS or (z > 0 and a >= 1.0):
        v = _series_float(a, b, z)
        if v is not None:
            return v
    if a < 1.0:
        if z > 0:
            v = _series_float(a, b, z)
            if v is not None:
                return v
        return _ml_integral(a, b, z)
    return _series_mp(a, b, z)


def mittag_leffler(ml, z):
    """Two-parameter Mittag-Leffler function E_{a,b}(z) for real z."""
    z = np.asarray(z, dtype=float)
    out = np.array([_ml_scalar(ml.a, ml.b, float(v)) for v in z.ravel()]).reshape(z.shape)
    return out if out.ndim else float(out)


def ml1(a, z):
    """One-parameter E_a(z)."""
    return mittag_leffler(MLParams(a, 1.0), z)


# ---------------------------------------------------------------------------
# M-Wright function
# ---------------------------------------------------------------------------


def _mwright_float(nu, z):
    """sum_n (-z)^n / (n! Gamma(1 - nu - nu n)); returns (value, digits lost)."""
    if z == 0.0:
        return float(special.rgamma(1.0 - nu)), 0.0
    lz = math.log(z)
    total = 0.0
    comp = 0.0
    peak = 0.0
    for n in range(MAX_TERMS):
        arg = 1.0 - nu - nu * n
        lt = n * lz - special.gammaln(n + 1.0)
        near_pole = arg <= 0.0 and abs(arg - round(arg)) < 1e-9
        if near_pole:
            # near a pole of Gamma the double-precision argument is too coarse
            with mpmath.workdps(40):
                rg = mpmath.rgamma(1 - mpmath.mpf(nu) * (n + 1))
            if rg == 0:
                continue
            sg = 1.0 if rg > 0 else -1.0
            lt += float(mpmath.log(abs(rg)))
        else:
            sg = special.gammasgn(arg)
            if sg == 0.0 or not math.isfinite(special.gammaln(arg)):
                continue
            lt -= special.gammaln(arg)
        mag = math.exp(lt) if lt < 700 else math.inf
        if not math.isfinite(mag):
            return math.nan, math.inf
        term = mag * sg * (-1.0 if n % 2 else 1.0)
        peak = max(peak, mag)
        t = total + term
        if abs(total) >= abs(term):
            comp += (total - t) + term
        else:
            comp += (term - t) + total
        total = t
        if n > 3 and not near_pole and lt < math.log(1e-18 * max(peak, 1e-300)):
            break
    val = total + comp
    # a garbage sum can itself be large, so measure the loss against the
    # saddle-point magnitude as well
    ref = abs(val)
    if z > 1.0:
        ref = min(ref, _mwright_asymptotic(nu, z))
    lost = math.log10(peak / ref) if ref > 0 else math.inf
    return val, lost


def _mwright_mp(nu, z):
    n = np.arange(0, 20000)
    with np.errstate(all="ignore"):
        lt = n * math.log(z) - special.gammaln(n + 1.0) - special.gammaln(1.0 - nu - nu * n)
    lt = np.where(np.isfinite(lt), lt, -np.inf)
    peak = float(lt.max())
    dps = int(25 + 2 * max(peak, 0.0) / math.log(10.0))
    for _ in range(4):
        # stop once terms fall dps digits below the peak, past the peak
        past = np.flatnonzero((n > int(lt.argmax())) & (lt < peak - (dps + 5) * math.log(10.0)) & np.isfinite(lt))
        n_max = int(past[0]) + 1 if past.size else n.size
        with mpmath.workdps(dps):
            zz = mpmath.mpf(z)
            nu_m = mpmath.mpf(nu)
            terms = []
            power = mpmath.mpf(1)
            for k in range(n_max):
                terms.append(power * mpmath.rgamma(1 - nu_m * (k + 1)))
                power *= -zz / (k + 1)
            total = mpmath.fsum(terms)
            lost = float(mpmath.log10(max(abs(t) for t in terms) / abs(total))) if total != 0 else math.inf
        if lost < dps - 20:
            return float(total)
        dps = int(dps + lost)
    raise MLAccuracyError(f"M-Wright series lost all precision at z={z}")


def _mwright_asymptotic(nu, z):
    """Saddle-point form of M_nu for large z (relative error O(z^(-1/(1-nu))))."""
    x = nu * z
    return (x ** ((nu - 0.5) / (1.0 - nu)) * math.exp(-(1.0 - nu) / nu * x ** (1.0 / (1.0 - nu)))
            / math.sqrt(2.0 * math.pi * (1.0 - nu)))


# float series is trusted while it loses fewer digits than this
DIGITS_LOST_LIMIT = 4.0
# below this the saddle-point value is returned directly
MWRIGHT_FLOOR = 1e-30


def mwright(nu, z):
    """M-Wright function M_nu(z), z >= 0, 0 < nu <= 1/2."""
    if z > 1.0:
        approx = _mwright_asymptotic(nu, z)
        if approx < MWRIGHT_FLOOR:
            return approx
    val, lost = _mwright_float(nu, z)
    if lost > DIGITS_LOST_LIMIT or not math.isfinite(val):
        return _mwright_mp(nu, z)
    return val


def tfd_fundamental(beta, k, x, t):
    """Fundamental solution of the time-fractional diffusion equation
    ``D_t^beta u = k^2 u_xx``: ``u = 1/(2 k t^nu) M_nu(|x| / (k t^nu))``,
    nu = beta/2.  At beta = 1 it is the heat kernel with variance 2 k^2 t."""
    if not (0.0 < beta <= 1.0):
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if not (k > 0 and t > 0):
        raise ValueError("k and t must be positive")
    nu = 0.5 * beta
    scale = k * t**nu
    x = np.asarray(x, dtype=float)
    if beta == 1.0:
        out = np.exp(-0.25 * (x / scale) ** 2) / (2.0 * scale * math.sqrt(math.pi))
    else:
        z = np.abs(x) / scale
        out = np.array([mwright(nu, float(v)) for v in z.ravel()]).reshape(z.shape) / (2.0 * scale)
        out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


def tfd_second_moment(beta, k, t):
    return 2.0 * k * k * t**beta / math.gamma(beta + 1.0)
