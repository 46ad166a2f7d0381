"""Discrete fractional operators on uniform grids.

Sign convention: :func:`riesz_apply` and :func:`spectral_frac_laplacian`
return the action of the positive operator ``(-Laplacian)^(alpha/2)``
(Fourier multiplier ``|xi|**alpha``).  Solvers subtract it.
"""

import functools
import math

import numpy as np
from scipy.linalg import toeplitz

from . import kernels


class OrderRangeError(ValueError):
    pass


class BoundaryPolicyError(RuntimeError):
    pass


class SingularOrderError(ValueError):
    pass


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=256)
def _gl_weights_cached(alpha, m):
    g = np.empty(m + 1)
    g[0] = 1.0
    for j in range(1, m + 1):
        g[j] = g[j - 1] * (j - 1.0 - alpha) / j
    g.flags.writeable = False
    return g


def gl_weights(alpha, m):
    """Grunwald-Letnikov weights g_0..g_m, g_j = (-1)^j binom(alpha, j)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return _gl_weights_cached(float(alpha), int(m))


@functools.lru_cache(maxsize=256)
def _l1_weights_cached(alpha, m):
    j = np.arange(m + 1, dtype=float)
    d = (j + 1.0) ** (1.0 - alpha) - j ** (1.0 - alpha)
    d.flags.writeable = False
    return d


def l1_weights(alpha, m):
    """L1 convolution weights d_j = (j+1)^(1-alpha) - j^(1-alpha), j = 0..m."""
    return _l1_weights_cached(float(alpha), int(m))


# ---------------------------------------------------------------------------
# Grunwald-Letnikov and Riesz
# ---------------------------------------------------------------------------


def gl_matrix(n, h, alpha, side="Left", shift=1, periodic=False):
    """Dense matrix of the shifted GL derivative on n nodes.

    Left:  (M u)_i = h^-alpha sum_j g_j u_{i - j + shift}
    Right: (M u)_i = h^-alpha sum_j g_j u_{i + j - shift}
    Terms falling outside the grid are dropped unless ``periodic``.
    """
    g = gl_weights(alpha, n + shift)
    scale = h ** (-alpha)
    if periodic:
        col = np.zeros(n)
        for j in range(n + shift + 1):
            col[(j - shift) % n] += g[j]
        # col[k] multiplies u_{i-k}
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        left = col[idx]
        m = left if side == "Left" else left.T
        return scale * m
    # first column: entries (i, 0) = g_{i + shift}; first row: (0, k) = g_{shift - k}
    c = g[shift : shift + n]
    r = np.zeros(n)
    r[: shift + 1] = g[shift::-1][: min(n, shift + 1)]
    left = toeplitz(c, r)
    if side == "Left":
        return scale * left
    if side == "Right":
        return scale * left.T
    raise ValueError(f"side must be 'Left' or 'Right', got {side!r}")


def _edge_check(u, g):
    if g.bc != "FreeSpace":
        return
    peak = float(np.max(np.abs(u))) if u.size else 0.0
    if peak == 0.0:
        return
    edge = max(abs(u[0]), abs(u[-1]))
    if edge > 1e-8 * peak:
        raise BoundaryPolicyError(
            f"FreeSpace truncation: |u| at the edge is {edge / peak:.2e} of its maximum (> 1e-8); enlarge the domain"
        )


def gl_derivative(u, g, alpha, side="Left", shift=1):
    """Shifted Grunwald-Letnikov fractional derivative of order alpha."""
    u = np.asarray(u, dtype=float)
    if u.shape != (g.n,):
        raise ValueError(f"u has shape {u.shape}, grid has {g.n} nodes")
    if not 0.0 < alpha <= 2.0:
        raise OrderRangeError(f"GL order must lie in (0, 2], got {alpha}")
    _edge_check(u, g)
    return gl_matrix(g.n, g.dx, alpha, side, shift, periodic=g.bc == "Periodic") @ u


def _gl_symbol(n, h, alpha, shift):
    theta = 2.0 * np.pi * np.fft.fftfreq(n)
    return h ** (-alpha) * np.exp(1j * theta * shift) * (1.0 - np.exp(-1j * theta)) ** alpha


def riesz_apply(u, g, alpha):
    """(left + right)/(2 cos(pi alpha/2)) GL combination, i.e. +(-Laplacian)^(alpha/2)."""
    if abs(alpha - 1.0) < 1e-6:
        raise SingularOrderError("Riesz combination is singular at alpha = 1")
    if not 0.0 < alpha < 2.0:
        raise OrderRangeError(f"Riesz order must lie in (0, 2), got {alpha}")
    u = np.asarray(u, dtype=float)
    c = math.cos(0.5 * math.pi * alpha)
    if g.bc == "Periodic":
        # circulant GL operators are diagonal in Fourier space; the infinite
        # periodic sum of weights is evaluated exactly through the symbol
        sym = _gl_symbol(g.n, g.dx, alpha, 1)
        both = 0.5 * (sym + np.conj(sym)) / c
        return np.real(np.fft.ifft(both * np.fft.fft(u)))
    _edge_check(u, g)
    left = gl_matrix(g.n, g.dx, alpha, "Left")
    return (0.5 * (left @ u) + 0.5 * (left.T @ u)) / c


def wavenumbers(g):
    return 2.0 * np.pi * np.fft.rfftfreq(g.n, d=g.dx)


def spectral_frac_laplacian(u, g, alpha):
    """Fourier multiplier |xi|^alpha on a periodic grid."""
    if g.bc != "Periodic":
        raise ValueError("spectral_frac_laplacian needs a Periodic grid")
    if not 0.0 < alpha <= 2.0:
        raise OrderRangeError(f"order must lie in (0, 2], got {alpha}")
    u = np.asarray(u, dtype=float)
    xi = wavenumbers(g)
    return np.fft.irfft(np.abs(xi) ** alpha * np.fft.rfft(u), n=g.n)


# ---------------------------------------------------------------------------
# Caputo (L1) in time
# ---------------------------------------------------------------------------


def l1_prefactor(alpha, dt):
    return 1.0 / (dt**alpha * math.gamma(2.0 - alpha))


def caputo_l1(u_history, dt, alpha):
    """L1 Caputo derivative at the last node t_{n+1} of ``u_history`` (length n+2)."""
    if not 0.0 < alpha < 1.0:
        raise OrderRangeError(f"Caputo order must lie in (0, 1), got {alpha}")
    u = np.asarray(u_history, dtype=float)
    if u.size < 2:
        raise ValueError("history needs at least two values")
    du = np.diff(u)
    n = du.size - 1
    return l1_prefactor(alpha, dt) * kernels.l1_point(du, l1_weights(alpha, n), n)


def caputo_l1_series(u, dt, alpha):
    """L1 Caputo derivative at every t_1..t_N of the sampled function u."""
    du = np.diff(np.asarray(u, dtype=float))
    return l1_prefactor(alpha, dt) * kernels.l1_series(du, np.array(l1_weights(alpha, du.size)))


class OrderField:
    """Variable fractional order alpha(x, t), range-checked at every use."""

    def __init__(self, func, lo=0.0, hi=1.0, constant=None):
        self.func = func
        self.lo = lo
        self.hi = hi
        self.constant = constant

    @classmethod
    def const(cls, value, lo=0.0, hi=1.0):
        return cls(lambda x, t: np.full(np.shape(x), float(value)), lo, hi, constant=float(value))

    def __call__(self, x, t):
        val = np.asarray(self.func(np.asarray(x, dtype=float), float(t)), dtype=float)
        val = np.broadcast_to(val, np.shape(x)).astype(float)
        bad = ~((val > self.lo) & (val <= self.hi)) if self.hi == 2.0 else ~((val > self.lo) & (val < self.hi))
        if np.any(bad):
            raise OrderRangeError(
                f"order field left ({self.lo}, {self.hi}) at t={t}: range [{val.min():.4g}, {val.max():.4g}]"
            )
        return val


def vo_caputo_l1(u_history, dt, order, x=0.0):
    """Variable-order L1 Caputo derivative at t_{n+1}; the order is frozen at
    its value alpha(x, t_{n+1}) for the whole history sum."""
    n1 = len(u_history) - 1
    alpha = float(order(np.array([x]), n1 * dt)[0])
    return caputo_l1(u_history, dt, alpha)


# ---------------------------------------------------------------------------
# Riesz-Caputo in space
# ---------------------------------------------------------------------------


def riesz_caputo(u, g, alpha, return_flags=False):
    """Symmetrised Caputo space derivative of order alpha in (0, 1).

    (Gamma(2-alpha)/2) (left Caputo - right Caputo) with L1 quadrature; this
    reduces to ``h^-alpha/2 * (sum_{j<i} d_{i-1-j} du_j + sum_{j>=i} d_{j-i} du_j)``.
    The end nodes only see one side of the domain; ``return_flags`` also
    returns the boolean mask of those one-sided nodes.
    """
    if not 0.0 < alpha < 1.0:
        raise OrderRangeError(f"Riesz-Caputo order must lie in (0, 1), got {alpha}")
    u = np.asarray(u, dtype=float)
    n = u.size
    du = np.diff(u)
    d = np.array(l1_weights(alpha, n))
    i = np.arange(n)[:, None]
    j = np.arange(n - 1)[None, :]
    w = np.where(j < i, d[np.clip(i - 1 - j, 0, n)], d[np.clip(j - i, 0, n)])
    out = 0.5 * g.dx ** (-alpha) * (w @ du)
    if return_flags:
        flags = np.zeros(n, dtype=bool)
        flags[[0, -1]] = True
        return out, flags
    return out


# ---------------------------------------------------------------------------
# scalar relaxation FDE on arbitrary (e.g. graded) time meshes
# ---------------------------------------------------------------------------


def graded_mesh(T, n, r=1.0):
    """Nodes t_j = T (j/n)^r; r = 1 is uniform, r = (2-alpha)/alpha suits t^alpha starts."""
    if n < 1 or not T > 0 or not r >= 1.0:
        raise ValueError("graded_mesh needs n >= 1, T > 0, r >= 1")
    return T * (np.arange(n + 1) / n) ** r


def l1_relaxation(alpha, lam, t, u0=1.0):
    """Implicit L1 solution of C_t^alpha u = -lam u, u(0) = u0, on the nodes t.

    Nonuniform L1 stencil: the Caputo derivative at t_{n+1} is
    sum_k (u_{k+1} - u_k)/tau_k [(t_{n+1}-t_k)^(1-a) - (t_{n+1}-t_{k+1})^(1-a)] / Gamma(2-a).
    The exact solution is u0 E_alpha(-lam t^alpha).
    """
    if not 0.0 < alpha < 1.0:
        raise OrderRangeError(f"order must lie in (0, 1), got {alpha}")
    t = np.asarray(t, dtype=float)
    if t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ValueError("t must start at 0 and increase")
    g = math.gamma(2.0 - alpha)
    p = 1.0 - alpha
    tau = np.diff(t)
    u = np.empty(t.size)
    u[0] = u0
    du = np.empty(t.size - 1)
    for n in range(t.size - 1):
        tn = t[n + 1]
        A = tn - t[: n + 1]
        # A^p - (A - tau)^p without cancellation on strongly graded meshes
        diff = np.empty(n + 1)
        diff[:n] = -(A[:n] ** p) * np.expm1(p * np.log1p(-tau[:n] / A[:n]))
        diff[n] = tau[n] ** p
        w = diff / (tau[: n + 1] * g)
        hist = float(np.dot(w[:n], du[:n]))
        u[n + 1] = (w[n] * u[n] - hist) / (w[n] + lam)
        du[n] = u[n + 1] - u[n]
    return u
