"""Fractional viscoelastic and visco-elasto-plastic constitutive laws.

Kinds
-----
SB    Scott-Blair element, sigma = E C_t^alpha eps
FKV   two SB elements in parallel
FM    two SB elements in series (alpha1 < alpha2)
QLV   quasi-linear viscoelasticity with g(t) = C + Dq t^-alpha and
      instantaneous elastic law A (exp(B eps) - 1)
VEVP  SB elastic law with a fractional-hardening yield surface
      |sigma| - (sigmaY + K C_t^alphaK q + H q) <= 0

Strain histories live on uniform time grids and start from rest unless an
initial step is declared (SB only).  All Caputo terms use the L1 stencil.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from . import kernels
from .grids import TimeGrid
from .operators import l1_weights
from .special import MLParams, mittag_leffler

RHEO_KINDS = ("SB", "FKV", "FM", "QLV", "VEVP")
NEWTON_MAXIT = 50


class NonuniformGridError(ValueError):
    pass


class CompatibilityError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def _order_ok(a):
    return 0.0 < a < 1.0


@dataclass(frozen=True)
class RheoModel:
    kind: str
    E: float = None
    alpha: float = None
    E1: float = None
    E2: float = None
    alpha1: float = None
    alpha2: float = None
    # QLV
    A: float = None
    B: float = None
    C: float = None
    Dq: float = None
    # VEVP
    sigmaY: float = None
    K: float = None
    H: float = 0.0
    alphaK: float = None

    def __post_init__(self):
        if self.kind not in RHEO_KINDS:
            raise ValueError(f"unknown rheology kind {self.kind!r}; expected one of {RHEO_KINDS}")
        need = {
            "SB": ("E", "alpha"),
            "FKV": ("E1", "E2", "alpha1", "alpha2"),
            "FM": ("E1", "E2", "alpha1", "alpha2"),
            "QLV": ("A", "B", "C", "Dq", "alpha"),
            "VEVP": ("E", "alpha", "sigmaY", "K", "alphaK"),
        }[self.kind]
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"{self.kind} model needs {', '.join(missing)}")
        for k in ("E", "E1", "E2", "A", "sigmaY"):
            v = getattr(self, k)
            if k in need and not v > 0:
                raise ValueError(f"{k} must be positive, got {v}")
        for k in ("alpha", "alpha1", "alpha2", "alphaK"):
            if k in need and not _order_ok(getattr(self, k)):
                raise ValueError(f"{k} must lie in (0, 1), got {getattr(self, k)}")
        if self.kind in ("FKV", "FM") and not self.alpha1 < self.alpha2:
            raise ValueError("two-element models need alpha1 < alpha2")
        if self.kind == "QLV":
            if self.C < 0 or self.Dq < 0 or self.C + self.Dq == 0:
                raise ValueError("QLV needs C, Dq >= 0, not both zero")
        if self.kind == "VEVP" and (self.K < 0 or self.H < 0):
            raise ValueError("VEVP needs K, H >= 0")


@dataclass(frozen=True)
class StrainHistory:
    """Strain samples on a uniform grid; ``step`` declares a jump 0 -> strain[0] at t = 0."""

    tgrid: TimeGrid
    strain: np.ndarray
    step: bool = False

    def __post_init__(self):
        s = np.asarray(self.strain, dtype=float)
        if s.shape != (self.tgrid.n_steps + 1,):
            raise ValueError(f"strain has {s.size} samples, grid has {self.tgrid.n_steps + 1}")
        if not np.all(np.isfinite(s)):
            raise ValueError("strain must be finite")

    @classmethod
    def from_samples(cls, t, strain, step=False, rtol=1e-9):
        t = np.asarray(t, dtype=float)
        if t.size < 2 or t[0] != 0.0:
            raise NonuniformGridError("time samples must start at 0 and hold at least two points")
        dt = np.diff(t)
        if np.any(np.abs(dt - dt[0]) > rtol * dt[0]):
            raise NonuniformGridError("strain history needs a uniform time grid")
        return cls(TimeGrid(float(dt[0]), t.size - 1), np.asarray(strain, dtype=float), step)

    @classmethod
    def from_function(cls, f, dt, horizon, step=False):
        tg = TimeGrid.until(horizon, dt)
        return cls(tg, np.asarray(f(tg.t), dtype=float), step)

    @property
    def t(self):
        return self.tgrid.t

    @property
    def dt(self):
        return self.tgrid.dt


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def _sb_relax(E, a, t):
    return E * t ** (-a) * sp.rgamma(1.0 - a)


def relaxation_modulus(m, t):
    """G(t) for t > 0 (QLV: small-strain modulus A B g(t))."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("relaxation modulus needs t > 0")
    if m.kind in ("SB", "VEVP"):
        out = _sb_relax(m.E, m.alpha, t)
    elif m.kind == "FKV":
        out = _sb_relax(m.E1, m.alpha1, t) + _sb_relax(m.E2, m.alpha2, t)
    elif m.kind == "FM":
        d = m.alpha2 - m.alpha1
        ml = mittag_leffler(MLParams(d, 1.0 - m.alpha1), -(m.E1 / m.E2) * t**d)
        out = m.E1 * t ** (-m.alpha1) * ml
    else:
        out = m.A * m.B * (m.C + m.Dq * t ** (-m.alpha))
    return out if np.ndim(out) else float(out)


def complex_modulus(m, omega):
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    iw = 1j * omega
    if m.kind in ("SB", "VEVP"):
        return m.E * iw**m.alpha
    if m.kind == "FKV":
        return m.E1 * iw**m.alpha1 + m.E2 * iw**m.alpha2
    if m.kind == "FM":
        return m.E2 * iw**m.alpha2 / (1.0 + (m.E2 / m.E1) * iw ** (m.alpha2 - m.alpha1))
    # QLV linearised about eps = 0
    return m.A * m.B * (m.C + m.Dq * math.gamma(1.0 - m.alpha) * iw**m.alpha)


def dynamic_moduli(m, omega):
    """(storage, loss) moduli G'(omega), G''(omega)."""
    if m.kind in ("SB", "VEVP"):
        # closed form keeps cos/sin exact instead of going through complex powers
        omega = np.asarray(omega, dtype=float)
        if np.any(omega <= 0):
            raise ValueError("omega must be positive")
        mag = m.E * omega**m.alpha
        g1 = mag * math.cos(0.5 * math.pi * m.alpha)
        g2 = mag * math.sin(0.5 * math.pi * m.alpha)
    else:
        g = complex_modulus(m, omega)
        g1, g2 = g.real, g.imag
    if np.ndim(g1) == 0:
        return float(g1), float(g2)
    return g1, g2


# ---------------------------------------------------------------------------
# history-driven stress
# ---------------------------------------------------------------------------


def _mu(a, dt):
    return dt**a * math.gamma(2.0 - a)


def _l1_caputo_all(u, dt, a):
    """Caputo^a of u at t_1..t_N by L1, evaluated point by point (t_0 gives 0)."""
    du = np.diff(u)
    n = du.size
    w = np.array(l1_weights(a, max(n, 1)))
    out = np.zeros(n + 1)
    inv = 1.0 / _mu(a, dt)
    for k in range(n):
        out[k + 1] = inv * kernels.l1_point(du, w, k)
    return out


def _check_start(h, allow_step):
    if h.strain[0] != 0.0 and not (h.step and allow_step):
        if h.step:
            raise CompatibilityError("a declared initial step is only supported for SB")
        raise CompatibilityError(
            f"strain[0] = {h.strain[0]:g} is not compatible with rest initial data; declare step=True (SB) or start from 0"
        )


def _sb_stress(E, a, h):
    s = E * _l1_caputo_all(np.asarray(h.strain, dtype=float), h.dt, a)
    if h.step and h.strain[0] != 0.0:
        t = h.t
        s[1:] += h.strain[0] * _sb_relax(E, a, t[1:])
        # the step response is singular at t = 0
        s[0] = math.inf
    return s


def _fm_stress(m, h):
    """Implicit L1 update of sigma + k C^b sigma = E2 C^a2 eps, b = a2 - a1, k = E2/E1."""
    eps = np.asarray(h.strain, dtype=float)
    dt = h.dt
    n = eps.size - 1
    b = m.alpha2 - m.alpha1
    k = m.E2 / m.E1
    rhs = m.E2 * _l1_caputo_all(eps, dt, m.alpha2)
    wb = np.array(l1_weights(b, max(n, 1)))
    cb = k / _mu(b, dt)
    sig = np.zeros(n + 1)
    dsig = np.zeros(n)
    for j in range(n):
        # history part of the L1 sum (weights d_1..d_j)
        # dsig[j] is still zero here, so this is the history part d_1..d_j
        hist = kernels.l1_point(dsig, wb, j)
        sig[j + 1] = (rhs[j + 1] + cb * (sig[j] - hist)) / (1.0 + cb)
        dsig[j] = sig[j + 1] - sig[j]
    return sig


def stress_response(m, h):
    """Stress on the history grid for SB, FKV, FM (and the elastic law of VEVP)."""
    if m.kind in ("SB", "VEVP"):
        _check_start(h, allow_step=True)
        return _sb_stress(m.E, m.alpha, h)
    _check_start(h, allow_step=False)
    if m.kind == "FKV":
        return _sb_stress(m.E1, m.alpha1, h) + _sb_stress(m.E2, m.alpha2, h)
    if m.kind == "FM":
        return _fm_stress(m, h)
    return qlv_stress(m, h)


def qlv_stress(m, h):
    """sigma(t) = int_0^t g(t - s) d/ds sigma_e(eps(s)) ds with sigma_e
    piecewise linear in time and g integrated exactly over each cell (the
    weak singularity of Dq t^-alpha sits in the analytic first cell)."""
    if m.kind != "QLV":
        raise ValueError("qlv_stress needs a QLV model")
    _check_start(h, allow_step=False)
    eps = np.asarray(h.strain, dtype=float)
    se = m.A * np.expm1(m.B * eps)
    dse = np.diff(se)
    n = dse.size
    dt = h.dt
    out = m.C * (se - se[0])
    if m.Dq > 0:
        w = np.array(l1_weights(m.alpha, max(n, 1)))
        scale = m.Dq * dt ** (-m.alpha) / (1.0 - m.alpha)
        for k in range(n):
            out[k + 1] += scale * kernels.l1_point(dse, w, k)
    return out


# ---------------------------------------------------------------------------
# free energy
# ---------------------------------------------------------------------------


def sb_free_energy(E, alpha, h):
    """Helmholtz free energy of an SB element at the final time of ``h``:

        psi = E / (2 Gamma(1-alpha)) int int (2t - s1 - s2)^-alpha eps'(s1) eps'(s2) ds1 ds2

    with eps' constant per cell and the kernel integrated exactly per cell
    pair; the cell integral only depends on i + j so the double sum is a
    self-convolution of the strain rates.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    if h.strain[0] != 0.0:
        raise CompatibilityError("free energy needs a history starting from zero strain")
    eps = np.asarray(h.strain, dtype=float)
    dt = h.dt
    n = eps.size - 1
    if n == 0:
        return 0.0
    rate = np.diff(eps) / dt
    a = alpha
    s = np.arange(2 * n - 1)
    mm = (2 * n - s).astype(float)
    F = lambda u: u ** (2.0 - a) / ((1.0 - a) * (2.0 - a))
    cell = dt ** (2.0 - a) * (F(mm) - 2.0 * F(mm - 1.0) + F(mm - 2.0))
    conv = np.convolve(rate, rate)
    psi = 0.5 * E * sp.rgamma(1.0 - a) * float(np.dot(cell, conv))
    # the kernel is positive definite; a negative value is rounding only
    return max(psi, 0.0)


# ---------------------------------------------------------------------------
# visco-elasto-plastic driver
# ---------------------------------------------------------------------------


def vevp_simulate(m, h, tol=1e-10):
    """Return (stress, plastic_strain, q) for the 1D fractional VEVP model.

    Elastic predictor: SB law on eps - eps_p via L1.  Plastic corrector when
    the trial yield function is positive: Newton on dgamma >= 0 with
    eps_p += dgamma sign(sigma), q += dgamma and the hardening term
    K C^alphaK q discretised by L1 on the q history.
    """
    if m.kind != "VEVP":
        raise ValueError("vevp_simulate needs a VEVP model")
    _check_start(h, allow_step=False)
    eps = np.asarray(h.strain, dtype=float)
    dt = h.dt
    n = eps.size - 1
    w = np.array(l1_weights(m.alpha, max(n, 1)))
    wk = np.array(l1_weights(m.alphaK, max(n, 1)))
    inv = 1.0 / _mu(m.alpha, dt)
    invk = 1.0 / _mu(m.alphaK, dt)
    sig = np.zeros(n + 1)
    ep = np.zeros(n + 1)
    q = np.zeros(n + 1)
    dee = np.zeros(n)  # elastic strain increments
    dq = np.zeros(n)
    atol = tol * m.sigmaY
    for j in range(n):
        dee[j] = (eps[j + 1] - ep[j]) - (eps[j] - ep[j])
        # same operation order as stress_response so the elastic path is bit-identical
        trial = m.E * (inv * kernels.l1_point(dee, w, j))
        # dq[j] is still zero: L1 history of q
        hq_hist = kernels.l1_point(dq, wk, j)

        def yield_fn(dg):
            s = abs(trial) - m.E * inv * dg
            return s - (m.sigmaY + m.K * invk * (dg + hq_hist) + m.H * (q[j] + dg))

        f0 = yield_fn(0.0)
        if f0 <= atol:
            sig[j + 1] = trial
            ep[j + 1] = ep[j]
            q[j + 1] = q[j]
            continue
        slope = m.E * inv + m.K * invk + m.H
        dg = 0.0
        for _ in range(NEWTON_MAXIT):
            fv = yield_fn(dg)
            if abs(fv) <= atol:
                break
            dg = max(dg + fv / slope, 0.0)
        else:
            raise ConvergenceError(f"VEVP return mapping did not converge at step {j + 1}")
        sgn = math.copysign(1.0, trial)
        ep[j + 1] = ep[j] + sgn * dg
        q[j + 1] = q[j] + dg
        dq[j] = dg
        dee[j] = (eps[j + 1] - ep[j + 1]) - (eps[j] - ep[j])
        sig[j + 1] = m.E * (inv * kernels.l1_point(dee, w, j))
    return sig, ep, q


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _f(v):
    return format(float(v), ".17g")


def write_relaxation_csv(t, G, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "G"])
        for a, b in zip(t, G):
            w.writerow([_f(a), _f(b)])


def write_moduli_csv(omega, g1, g2, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega", "G1", "G2"])
        for a, b, c in zip(omega, g1, g2):
            w.writerow([_f(a), _f(b), _f(c)])


def write_driver_csv(h, stress, plastic, q, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "strain", "stress", "plastic", "q"])
        for row in zip(h.t, h.strain, stress, plastic, q):
            w.writerow([_f(v) for v in row])
