"""One-dimensional fractional advection-dispersion solvers.

Model (constant orders shown)::

    C_t^beta c = -V c_x - D * A_alpha c,
    A_alpha    = (p D_left^alpha + (1-p) D_right^alpha) / cos(pi alpha / 2)

``A_alpha`` is a positive operator; for p = 1/2 it is (-Laplacian)^(alpha/2)
and at alpha = 2 it is -d^2/dx^2.  With beta = 1 the free-space fundamental
solution is the stable density f_alpha(x - Vt; 2p-1, (D t)^(1/alpha), 0).

Space is discretised in flux form: with faces f = 0..n at x_f - h/2,

    P_f = (p sum_m g^{alpha-1}_{f-m} c_m - (1-p) sum_m g^{alpha-1}_{m-f+1} c_m) / (h^(alpha-1) cos(pi alpha/2))
    (A c)_i = (P_{i+1} - P_i) / h

which is the shifted Grunwald-Letnikov scheme in the interior and makes the
boundary flux explicit.  Time uses the implicit L1 scheme (implicit Euler at
beta = 1).  Every solver funnels into the same core, so variable-order runs
with constant order fields reproduce constant-order runs bit for bit.
"""

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import kernels
from .grids import Grid1D, TimeGrid
from .operators import OrderField, OrderRangeError, gl_weights, l1_weights
from .special import tfd_fundamental
from .stable import StableParams, pdf

log = logging.getLogger(__name__)

FADE_KINDS = ("SpaceFADE", "FFADE", "TimeFADE", "FMIM", "VOFADE")
EDGE_TOL = 1e-6


class EdgeLeakError(RuntimeError):
    pass


@dataclass(frozen=True)
class FadeProblem:
    grid: Grid1D
    tgrid: TimeGrid
    ic: np.ndarray
    kind: str = "SpaceFADE"
    V: float = 0.0
    D: float = 1.0
    alpha: object = 2.0
    beta: object = 1.0
    p: float = 0.5
    mim_beta_ratio: float = 0.0
    edge_tol: float = EDGE_TOL
    save_every: int = 1

    def __post_init__(self):
        if self.kind not in FADE_KINDS:
            raise ValueError(f"unknown FADE kind {self.kind!r}")
        ic = np.asarray(self.ic, dtype=float)
        if ic.shape != (self.grid.n,):
            raise ValueError(f"ic has shape {ic.shape}, grid has {self.grid.n} nodes")
        if np.any(ic < 0) or not np.all(np.isfinite(ic)):
            raise ValueError("initial concentration must be finite and nonnegative")
        if not self.D > 0:
            raise ValueError("D must be positive")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.mim_beta_ratio < 0:
            raise ValueError("mim_beta_ratio must be nonnegative")
        if self.grid.bc == "Periodic":
            raise ValueError("GL solvers take FreeSpace, Reflecting or Absorbing grids; use solve_spectral_fade for periodic")
        if not isinstance(self.alpha, OrderField) and not 1.0 < self.alpha <= 2.0:
            raise OrderRangeError(f"alpha must lie in (1, 2], got {self.alpha}")
        if not isinstance(self.beta, OrderField) and not 0.0 < self.beta <= 1.0:
            raise OrderRangeError(f"beta must lie in (0, 1], got {self.beta}")

    @property
    def initial_mass(self):
        return float(np.sum(self.ic) * self.grid.dx)


@dataclass
class FieldSeries:
    times: np.ndarray
    snapshots: np.ndarray
    mass_ledger: np.ndarray
    meta: FadeProblem
    grid: Grid1D
    edge_mass: np.ndarray = None
    extras: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.snapshots[-1]

    def at(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"no snapshot at t={t}")
        return self.snapshots[k]


def delta_ic(grid, x0=0.0, mass=1.0):
    """Single-cell spike of the given mass at the node nearest x0."""
    c = np.zeros(grid.n)
    c[int(np.argmin(np.abs(grid.x - x0)))] = mass / grid.dx
    return c


# ---------------------------------------------------------------------------
# spatial operator
# ---------------------------------------------------------------------------


def _flux_rows(g, p, f, n):
    """Rows f of the unscaled flux stencil, f a 1-D array of face indices."""
    k = f[:, None] - np.arange(n)[None, :]
    rows = np.where(k >= 0, p * g[np.clip(k, 0, None)], 0.0)
    rows = rows - np.where(k <= 1, (1.0 - p) * g[np.clip(1 - k, 0, None)], 0.0)
    return rows


def face_flux_matrix(n, h, alpha_faces, p):
    """(n+1) x n matrix mapping nodal c to the fractional flux P at the faces."""
    alpha_faces = np.asarray(alpha_faces, dtype=float)
    P = np.empty((n + 1, n))
    for a in np.unique(alpha_faces):
        f = np.flatnonzero(alpha_faces == a)
        g = np.array(gl_weights(a - 1.0, n + 1))
        scale = h ** (a - 1.0) * math.cos(0.5 * math.pi * a)
        P[f] = _flux_rows(g, p, f, n) / scale
    return P


def advective_flux_matrix(n, V):
    """First-order upwind advective flux V c at the faces."""
    F = np.zeros((n + 1, n))
    if V > 0:
        F[np.arange(1, n + 1), np.arange(n)] = V
    elif V < 0:
        F[np.arange(n), np.arange(n)] = V
    return F


def transport_operator(grid, alpha_faces, p, D, V):
    """Matrix L with dc/dt = -L c (before boundary rows), plus boundary info.

    Fluxes F = D P + V c_upwind; (L c)_i = (F_{i+1} - F_i)/h.
    """
    n, h = grid.n, grid.dx
    F = D * face_flux_matrix(n, h, alpha_faces, p) + advective_flux_matrix(n, V)
    if grid.bc == "Reflecting":
        # no flux through the end faces: columns of L then sum to zero
        F[0] = 0.0
        F[n] = 0.0
    return (F[1:] - F[:-1]) / h


def _faces(grid):
    return grid.x0 - 0.5 * grid.dx + grid.dx * np.arange(grid.n + 1)


def _resolve_alpha_faces(prob, t):
    if isinstance(prob.alpha, OrderField):
        a = prob.alpha(_faces(prob.grid), t)
        if np.any((a <= 1.0) | (a > 2.0)):
            raise OrderRangeError("space order field must lie in (1, 2]")
        return a
    return np.full(prob.grid.n + 1, float(prob.alpha))


def _resolve_beta_nodes(prob, t):
    if isinstance(prob.beta, OrderField):
        b = prob.beta(prob.grid.x, t)
        if np.any((b <= 0.0) | (b > 1.0)):
            raise OrderRangeError("time order field must lie in (0, 1]")
        return b
    return np.full(prob.grid.n, float(prob.beta))


def _beta_is_static(prob):
    return not isinstance(prob.beta, OrderField) or prob.beta.constant is not None


def _alpha_is_static(prob):
    return not isinstance(prob.alpha, OrderField) or prob.alpha.constant is not None


# ---------------------------------------------------------------------------
# shared time-stepping core
# ---------------------------------------------------------------------------


def _l1_node_weights(beta_nodes, n):
    """Per-node L1 weights d_0..d_n, shape (n_x, n+1)."""
    out = np.empty((beta_nodes.size, n + 1))
    cache = {}
    for i, b in enumerate(beta_nodes):
        b = float(b)
        if b not in cache:
            cache[b] = np.array(l1_weights(b, n))
        out[i] = cache[b]
    return out


def _mu(beta_nodes, dt):
    vals, inv = np.unique(beta_nodes, return_inverse=True)
    return np.array([dt**b * math.gamma(2.0 - b) for b in vals])[inv]


def _check_edges(prob, mass, ledger_edge, step):
    """FreeSpace truncation monitor: mass lost through the artificial edges."""
    if prob.grid.bc != "FreeSpace":
        return
    m0 = prob.initial_mass
    leak = m0 - mass
    ledger_edge[step] = leak
    if m0 > 0 and leak > prob.edge_tol * m0:
        raise EdgeLeakError(
            f"FreeSpace truncation lost {leak / m0:.2e} of the mass (> edge_tol {prob.edge_tol:g}) at step {step}; enlarge the domain"
        )


def _run(prob, mim_ratio=0.0):
    """Implicit L1 / GL stepping shared by all kinds.

    Mobile update (r = mim_ratio, mu_i = dt^beta_i Gamma(2 - beta_i)):
      r = 0:  (I + diag(mu) L) c^{n+1} = c^n - H
      r > 0:  ((1/dt + r/mu) I + L) c^{n+1} = (1/dt + r/mu) c^n - (r/mu) H
    with H the L1 history sum.  For beta = 1 the history vanishes.
    """
    grid, tg = prob.grid, prob.tgrid
    n_x, dt = grid.n, tg.dt
    c = np.asarray(prob.ic, dtype=float).copy()
    absorbing = grid.bc in ("Absorbing", "FreeSpace")

    n_save = tg.n_steps // prob.save_every + 1
    snaps = np.empty((n_save, n_x))
    times = np.empty(n_save)
    snaps[0] = c
    times[0] = 0.0
    mass = np.empty(tg.n_steps + 1)
    mass[0] = c.sum() * grid.dx
    edge = np.zeros(tg.n_steps + 1)
    dc = np.empty((tg.n_steps, n_x))
    immobile = np.zeros(n_x) if mim_ratio > 0 else None
    im_hist = [immobile.copy()] if mim_ratio > 0 else None

    factor_key = None
    lu = None
    L = None
    alpha_key = None
    beta_const = _beta_is_static(prob)
    w_static = None

    for step in range(tg.n_steps):
        t_new = (step + 1) * dt
        a_faces = _resolve_alpha_faces(prob, t_new)
        if L is None or not (_alpha_is_static(prob) or np.array_equal(a_faces, alpha_key)):
            L = transport_operator(grid, a_faces, prob.p, prob.D, prob.V)
            alpha_key = a_faces
            factor_key = None
        b_nodes = _resolve_beta_nodes(prob, t_new)
        mu = _mu(b_nodes, dt)
        # history sum with the order frozen at t_{n+1}
        if np.all(b_nodes == 1.0):
            weights = None
        elif beta_const:
            if w_static is None or w_static.shape[1] < tg.n_steps + 1:
                w_static = _l1_node_weights(b_nodes, tg.n_steps)
            weights = w_static
        else:
            weights = _l1_node_weights(b_nodes, step)
        if np.all(b_nodes == 1.0):
            # first-order in time: the L1 history weights vanish identically
            H = np.zeros(n_x)
        else:
            H = kernels.l1_history(dc, weights, step)

        if mim_ratio > 0:
            s = 1.0 / dt + mim_ratio / mu
            key = ("mim", s.tobytes())
            rhs = s * c - (mim_ratio / mu) * H
            diag = s
        else:
            key = ("l1", mu.tobytes())
            rhs = c - H
            diag = None
        if absorbing:
            rhs = rhs.copy()
            rhs[0] = 0.0
            rhs[-1] = 0.0
        if key != factor_key:
            if diag is None:
                M = np.eye(n_x) + mu[:, None] * L
            else:
                M = np.diag(diag) + L
            if absorbing:
                M[0] = 0.0
                M[-1] = 0.0
                M[0, 0] = 1.0
                M[-1, -1] = 1.0
            lu = lu_factor(M, check_finite=False)
            factor_key = key
        c_new = lu_solve(lu, rhs, check_finite=False)
        dc[step] = c_new - c
        if mim_ratio > 0:
            # immobile phase: d c_im / dt = C_t^beta c_m, zero initial immobile mass
            cap = (dc[step] + H) / mu
            immobile = immobile + dt * cap
            im_hist.append(immobile.copy())
        c = c_new
        mass[step + 1] = c.sum() * grid.dx
        tracked = mass[step + 1]
        if mim_ratio > 0:
            tracked += mim_ratio * immobile.sum() * grid.dx
        _check_edges(prob, tracked, edge, step + 1)
        if (step + 1) % prob.save_every == 0:
            k = (step + 1) // prob.save_every
            snaps[k] = c
            times[k] = t_new
    neg = float(c.min())
    if neg < -1e-12 * max(float(c.max()), 1e-300):
        log.warning("solver produced negative concentration %.3e (scheme diagnostic)", neg)
    extras = {}
    if mim_ratio > 0:
        extras["immobile"] = np.array(im_hist)[:: prob.save_every]
        extras["total_mass"] = mass + mim_ratio * np.array([m.sum() * grid.dx for m in im_hist])
    return FieldSeries(times, snaps, mass, prob, grid, edge, extras)


# ---------------------------------------------------------------------------
# public solvers
# ---------------------------------------------------------------------------


def solve_space_fade(prob):
    """Space-fractional ADE with implicit Euler time stepping."""
    if prob.kind not in ("SpaceFADE", "FFADE"):
        raise ValueError("solve_space_fade needs kind SpaceFADE or FFADE")
    if isinstance(prob.alpha, OrderField) or isinstance(prob.beta, OrderField) or prob.beta != 1.0:
        raise ValueError("space FADE takes a constant alpha and beta = 1")
    return _run(prob)


def solve_time_fade(prob):
    """Time-fractional ADE: L1 in time, centred second difference in space."""
    if prob.kind != "TimeFADE":
        raise ValueError("solve_time_fade needs kind TimeFADE")
    if isinstance(prob.beta, OrderField) or not 0.0 < prob.beta <= 1.0:
        raise ValueError("time FADE takes a constant beta in (0, 1]")
    if prob.alpha != 2.0:
        raise ValueError("time FADE takes alpha = 2")
    return _run(prob)


def solve_space_time_fade(prob):
    """Constant-order space-time FADE (L1 in time, GL in space)."""
    if isinstance(prob.alpha, OrderField) or isinstance(prob.beta, OrderField):
        raise ValueError("use solve_vo_fade for order fields")
    return _run(prob)


def solve_fmim(prob):
    """Fractional mobile-immobile model
    c_t + r C_t^beta c = -V c_x - D A c (mobile phase), with the immobile
    phase obeying d c_im/dt = C_t^beta c_m from zero initial immobile mass."""
    if prob.kind != "FMIM":
        raise ValueError("solve_fmim needs kind FMIM")
    if isinstance(prob.beta, OrderField) or not 0.0 < prob.beta <= 1.0:
        raise ValueError("FMIM takes a constant beta in (0, 1]")
    if prob.mim_beta_ratio == 0.0:
        return _run(replace(prob, beta=1.0))
    return _run(prob, mim_ratio=prob.mim_beta_ratio)


def solve_vo_fade(prob):
    """Variable-order time-space FADE; alpha and/or beta may be OrderFields."""
    if prob.kind != "VOFADE":
        raise ValueError("solve_vo_fade needs kind VOFADE")
    return _run(prob)


# ---------------------------------------------------------------------------
# spectral (periodic) solver and fundamental solutions
# ---------------------------------------------------------------------------


def fade_symbol(xi, alpha, p, D, V):
    """psi(xi) with c_hat(xi, t) = exp(-t psi(xi)) c_hat(xi, 0) (c_hat = int e^{-i xi x} c dx)."""
    gamma = 2.0 * p - 1.0
    a = np.abs(xi) ** alpha
    if alpha == 2.0:
        skew = 0.0
    else:
        skew = 1j * gamma * np.sign(xi) * math.tan(0.5 * math.pi * alpha)
    return 1j * V * xi + D * a * (1.0 + skew)


def solve_spectral_fade(grid, ic, times, alpha, p=0.5, D=1.0, V=0.0):
    """Exact-in-time Fourier solution of the space FADE on a periodic grid."""
    if grid.bc != "Periodic":
        raise ValueError("solve_spectral_fade needs a Periodic grid")
    ic = np.asarray(ic, dtype=float)
    xi = 2.0 * np.pi * np.fft.fftfreq(grid.n, d=grid.dx)
    c0 = np.fft.fft(ic)
    psi = fade_symbol(xi, alpha, p, D, V)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    snaps = np.array([np.real(np.fft.ifft(np.exp(-t * psi) * c0)) for t in times])
    mass = snaps.sum(axis=1) * grid.dx
    prob = None
    return FieldSeries(times, snaps, mass, prob, grid, None, {"alpha": alpha, "p": p, "D": D, "V": V})


def spectral_evaluate(grid, ic, t, x, alpha, p=0.5, D=1.0, V=0.0):
    """Trigonometric interpolant of the spectral solution at arbitrary x."""
    ic = np.asarray(ic, dtype=float)
    n = grid.n
    k = np.fft.fftfreq(n, d=1.0 / n)
    xi = 2.0 * np.pi * k / (n * grid.dx)
    ch = np.fft.fft(ic) * np.exp(-t * fade_symbol(xi, alpha, p, D, V))
    # Nyquist mode split symmetrically so the interpolant is real
    if n % 2 == 0:
        ch = ch.copy()
        ch[n // 2] *= 0.5
        xi = np.append(xi, -xi[n // 2])
        ch = np.append(ch, ch[n // 2])
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * np.outer(x - grid.x0, xi))
    return np.real(phase @ ch) / n


def fundamental_space(alpha, p, k, x, t, mu=0.0):
    """f_alpha(x; 2p-1, k t^(1/alpha), mu)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return pdf(StableParams(alpha, 2.0 * p - 1.0, k * t ** (1.0 / alpha), mu), x)


def fundamental_time(beta, k, x, t):
    return tfd_fundamental(beta, k, x, t)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _f(v):
    return format(float(v), ".17g")


def write_snapshots_csv(fs, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "c"])
        x = fs.grid.x
        for t, row in zip(fs.times, fs.snapshots):
            for xv, cv in zip(x, row):
                w.writerow([_f(t), _f(xv), _f(cv)])


def write_btc_csv(fs, x_probe, path):
    i = int(np.argmin(np.abs(fs.grid.x - x_probe)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "c"])
        for t, row in zip(fs.times, fs.snapshots):
            w.writerow([_f(t), _f(row[i])])


def write_mass_csv(fs, path, dt):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mass"])
        for k, m in enumerate(fs.mass_ledger):
            w.writerow([_f(k * dt), _f(m)])
