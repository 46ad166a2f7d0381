"""Monte-Carlo path simulators: Levy flights (Brownian motion at alpha = 2),
subordinated Brownian motion, uncoupled CTRWs and Levy walks.

Randomness is drawn per block of ``BLOCK`` paths from a counter-based stream
keyed by (seed, block index, ...), so an ensemble is bit-identical whatever the
thread count and whichever kernel path (numba or numpy) runs.
"""

import csv
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from ._rng import stream
from .grids import TimeGrid
from .stable import StableParams, standard_variates

log = logging.getLogger(__name__)

BLOCK = 4096
WALK_KINDS = ("Flight", "SubordinatedBM", "CTRW", "LevyWalk")
# distinct stream tags per random quantity
_TAG_FLIGHT, _TAG_SUB_D, _TAG_SUB_B, _TAG_WAIT, _TAG_JUMP, _TAG_LW = 11, 21, 22, 31, 32, 41


class HorizonError(RuntimeError):
    pass


@dataclass(frozen=True)
class WaitLaw:
    """Waiting-time law of a CTRW.

    ``exponential``: mean ``scale``.  ``stable``: one-sided beta-stable with
    Laplace transform ``exp(-scale * s**beta)``.
    """

    kind: str = "exponential"
    scale: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exponential", "stable"):
            raise ValueError(f"unknown wait law {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("wait scale must be positive")
        if self.kind == "stable" and not 0.0 < self.beta < 1.0:
            raise ValueError("stable waits need 0 < beta < 1")

    def draw(self, rng, shape):
        if self.kind == "exponential":
            return self.scale * rng.standard_exponential(shape)
        return subordinator_increments(self.beta, self.scale, shape, rng)

    def survival(self, t):
        """P(W > t)."""
        if self.kind == "exponential":
            return math.exp(-t / self.scale)
        p = subordinator_step_law(self.beta, self.scale)
        from .stable import cdf

        return 1.0 - float(cdf(p, t))


def subordinator_step_law(beta, dtau):
    """Law of a beta-stable subordinator increment over operational time dtau
    (Laplace transform exp(-dtau * s**beta))."""
    return StableParams(beta, 1.0, (math.cos(0.5 * math.pi * beta) * dtau) ** (1.0 / beta), 0.0)


def subordinator_increments(beta, dtau, shape, rng):
    p = subordinator_step_law(beta, dtau)
    return np.maximum(p.sigma * standard_variates(beta, 1.0, shape, rng), 0.0)


@dataclass(frozen=True)
class WalkSpec:
    kind: str
    dt: float
    horizon: float
    n_paths: int
    seed: int
    stable_jump: StableParams = field(default_factory=lambda: StableParams(2.0))
    beta: float = 0.5
    dtau: float = None
    wait: WaitLaw = field(default_factory=WaitLaw)
    speed: float = 1.0
    tau0: float = 1.0
    gamma_lw: float = 1.5
    max_operational_steps: int = 1 << 22

    def __post_init__(self):
        if self.kind not in WALK_KINDS:
            raise ValueError(f"unknown walk kind {self.kind!r}; expected one of {WALK_KINDS}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.horizon >= self.dt:
            raise ValueError("horizon must be >= dt")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.kind == "SubordinatedBM" and not 0.0 < self.beta < 1.0:
            raise ValueError("SubordinatedBM needs 0 < beta < 1")
        if self.kind == "LevyWalk":
            if self.speed < 0 or not self.tau0 > 0 or not self.gamma_lw > 0:
                raise ValueError("LevyWalk needs speed >= 0, tau0 > 0, gamma_lw > 0")
        if self.dtau is not None and not self.dtau > 0:
            raise ValueError("dtau must be positive")

    @property
    def tgrid(self):
        return TimeGrid.until(self.horizon, self.dt)


@dataclass
class PathEnsemble:
    times: TimeGrid
    positions: np.ndarray
    meta: WalkSpec
    extras: dict = field(default_factory=dict)

    @property
    def t(self):
        return self.times.t

    @property
    def n_paths(self):
        return self.positions.shape[0]

    def at(self, t):
        return self.positions[:, self.times.index(t)]


def _blocks(n):
    for b, start in enumerate(range(0, n, BLOCK)):
        yield b, start, min(start + BLOCK, n)


# ---------------------------------------------------------------------------
# Levy flight / Brownian motion
# ---------------------------------------------------------------------------


def simulate_flight(spec):
    """Increments i.i.d. S_alpha(gamma, k dt^(1/alpha), 0) where k = stable_jump.sigma."""
    if spec.kind != "Flight":
        raise ValueError("simulate_flight needs kind='Flight'")
    tg = spec.tgrid
    p = spec.stable_jump
    step = p.sigma * spec.dt ** (1.0 / p.alpha)
    drift = p.mu * spec.dt
    pos = np.zeros((spec.n_paths, tg.n_steps + 1))
    for b, lo, hi in _blocks(spec.n_paths):
        rng = stream(spec.seed, _TAG_FLIGHT, b)
        inc = step * standard_variates(p.alpha, p.gamma, (hi - lo, tg.n_steps), rng) + drift
        np.cumsum(inc, axis=1, out=pos[lo:hi, 1:])
    return PathEnsemble(tg, pos, spec)


# ---------------------------------------------------------------------------
# Subordinated Brownian motion
# ---------------------------------------------------------------------------


def _inverse_subordinator(spec, b, n, m0, tg):
    """First-crossing indices j*(t) of the operational-time grid for one block.

    Rows whose subordinator has not passed the horizon after m0 steps are
    extended in chunks of m0 steps, each chunk drawn from its own stream.
    """
    dtau = spec.dtau or spec.dt
    d_path = np.cumsum(subordinator_increments(spec.beta, dtau, (n, m0), stream(spec.seed, _TAG_SUB_D, b, 0)), axis=1)
    idx = kernels.first_crossing(d_path, tg.t)
    rows = np.flatnonzero(d_path[:, -1] <= tg.horizon)
    tail = d_path[rows]
    ext = 0
    while rows.size:
        ext += 1
        if tail.shape[1] + m0 > spec.max_operational_steps:
            raise HorizonError(
                f"subordinator did not pass T={tg.horizon} within {spec.max_operational_steps} operational steps"
            )
        more = subordinator_increments(spec.beta, dtau, (rows.size, m0), stream(spec.seed, _TAG_SUB_D, b, ext))
        tail = np.concatenate([tail, tail[:, -1:] + np.cumsum(more, axis=1)], axis=1)
        idx[rows] = kernels.first_crossing(tail, tg.t)
        keep = tail[:, -1] <= tg.horizon
        rows = rows[keep]
        tail = tail[keep]
    return idx


def simulate_subordinated(spec, keep_operational_time=False):
    """Brownian motion evaluated at the inverse of a beta-stable subordinator.

    tau(t) is the right-continuous inverse on the operational grid,
    tau(t) = j* dtau with j* the first index where D exceeds t.
    """
    if spec.kind != "SubordinatedBM":
        raise ValueError("simulate_subordinated needs kind='SubordinatedBM'")
    tg = spec.tgrid
    dtau = spec.dtau or spec.dt
    p = spec.stable_jump
    # E[tau(T)] = T^beta / Gamma(1+beta)
    m0 = int(math.ceil(2.0 * tg.horizon**spec.beta / math.gamma(1.0 + spec.beta) / dtau)) + 16
    pos = np.empty((spec.n_paths, tg.n_steps + 1))
    optime = np.empty_like(pos) if keep_operational_time else None
    for b, lo, hi in _blocks(spec.n_paths):
        # column c of the subordinator path holds D((c+1) dtau); tau(0) = 0
        idx = _inverse_subordinator(spec, b, hi - lo, m0, tg) + 1
        idx[:, tg.t == 0.0] = 0
        # the parent Brownian path is only needed at the visited operational
        # indices; its increments between them are Gaussian with variance
        # 2 sigma^2 dtau (j_{k+1} - j_k)
        gaps = np.diff(idx, axis=1, prepend=0)
        z = standard_variates(2.0, 0.0, idx.shape, stream(spec.seed, _TAG_SUB_B, b))
        np.cumsum(p.sigma * np.sqrt(dtau * gaps) * z, axis=1, out=pos[lo:hi])
        if keep_operational_time:
            optime[lo:hi] = idx * dtau
    extras = {"operational_time": optime} if keep_operational_time else {}
    return PathEnsemble(tg, pos, spec, extras)


# ---------------------------------------------------------------------------
# CTRW
# ---------------------------------------------------------------------------


def simulate_ctrw(spec, chunk=64):
    """Uncoupled CTRW: waits from ``spec.wait``, jumps from ``spec.stable_jump``.

    The walker sits at the origin until its first event; positions on the
    output grid hold the value after the last event at or before t.
    """
    if spec.kind != "CTRW":
        raise ValueError("simulate_ctrw needs kind='CTRW'")
    tg = spec.tgrid
    p = spec.stable_jump
    n_out = tg.n_steps + 1
    pos = np.zeros((spec.n_paths, n_out))
    n_events = np.zeros(spec.n_paths, dtype=np.int64)
    first_event = np.full(spec.n_paths, np.inf)
    for b, lo, hi in _blocks(spec.n_paths):
        n = hi - lo
        delta = np.zeros((n, n_out))
        t_last = np.zeros(n)
        k_next = np.zeros(n, dtype=np.int64)
        ev = np.zeros(n, dtype=np.int64)
        first = np.full(n, np.inf)
        c = 0
        remaining = n
        while remaining:
            waits = spec.wait.draw(stream(spec.seed, _TAG_WAIT, b, c), (n, chunk))
            jumps = p.sigma * standard_variates(p.alpha, p.gamma, (n, chunk), stream(spec.seed, _TAG_JUMP, b, c)) + p.mu
            remaining = kernels.ctrw_chunk(waits, jumps, t_last, k_next, delta, tg.dt, tg.horizon, ev, first)
            c += 1
        np.cumsum(delta, axis=1, out=pos[lo:hi])
        n_events[lo:hi] = ev
        first_event[lo:hi] = first
    return PathEnsemble(tg, pos, spec, {"n_events": n_events, "first_event": first_event})


# ---------------------------------------------------------------------------
# Levy walk
# ---------------------------------------------------------------------------


def levy_walk_durations(tau0, gamma_lw, shape, rng):
    """Flight durations with density (gamma/tau0) (1 + tau/tau0)^-(1+gamma)."""
    u = rng.random(shape)
    u = np.where(u > 0.0, u, np.finfo(float).tiny)
    return tau0 * (u ** (-1.0 / gamma_lw) - 1.0)


def simulate_levy_walk(spec, chunk=32):
    """Ballistic flights at speed v with directions uniform on {-1, +1}."""
    if spec.kind != "LevyWalk":
        raise ValueError("simulate_levy_walk needs kind='LevyWalk'")
    tg = spec.tgrid
    n_out = tg.n_steps + 1
    pos = np.zeros((spec.n_paths, n_out))
    for b, lo, hi in _blocks(spec.n_paths):
        n = hi - lo
        t_start = np.zeros(n)
        x_start = np.zeros(n)
        k_next = np.zeros(n, dtype=np.int64)
        block = np.zeros((n, n_out))
        c = 0
        remaining = n
        while remaining:
            rng = stream(spec.seed, _TAG_LW, b, c)
            dur = levy_walk_durations(spec.tau0, spec.gamma_lw, (n, chunk), rng)
            dirs = np.where(rng.random((n, chunk)) < 0.5, -1.0, 1.0)
            remaining = kernels.levy_walk_chunk(dur, dirs, float(spec.speed), t_start, x_start, k_next, block, tg.dt)
            c += 1
        pos[lo:hi] = block
    # positions are exact up to rounding of t_k - t0; clip the last ulp so the
    # cone |x| <= v t holds exactly
    cone = spec.speed * tg.t
    np.clip(pos, -cone, cone, out=pos)
    return PathEnsemble(tg, pos, spec)


SIMULATORS = {
    "Flight": simulate_flight,
    "SubordinatedBM": simulate_subordinated,
    "CTRW": simulate_ctrw,
    "LevyWalk": simulate_levy_walk,
}


def simulate(spec):
    return SIMULATORS[spec.kind](spec)


# ---------------------------------------------------------------------------
# ensemble statistics
# ---------------------------------------------------------------------------


def msd_estimate(e):
    """Columns (t, msd, stderr) of the per-time sample mean of x^2."""
    if e.n_paths < 2:
        raise ValueError("msd_estimate needs at least two paths")
    sq = e.positions**2
    msd = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / math.sqrt(e.n_paths)
    return np.column_stack([e.t, msd, se])


def empirical_density(e, t, bins, values=None):
    """Histogram density at time t on cells centred at ``bins.x``.

    Integrates to the captured mass fraction; warns if more than 1% of the
    samples fall outside the bins.  Returns (density, outside_fraction).
    """
    x = e.at(t) if values is None else np.asarray(values)
    counts, _ = np.histogram(x, bins=bins.edges)
    dens = counts / (x.size * bins.dx)
    outside = 1.0 - counts.sum() / x.size
    if outside > 0.01:
        warnings.warn(f"empirical_density: {outside:.2%} of the samples fall outside the bins", RuntimeWarning, stacklevel=2)
    return dens, outside


def write_paths_csv(e, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "t", "x"])
        t = e.t
        for i in range(e.n_paths):
            for k in range(t.size):
                w.writerow([i, format(t[k], ".17g"), format(e.positions[i, k], ".17g")])


def write_density_csv(bins, dens, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "density"])
        for xv, dv in zip(bins.x, dens):
            w.writerow([format(xv, ".17g"), format(dv, ".17g")])


def spec_dict(spec):
    return asdict(spec)
