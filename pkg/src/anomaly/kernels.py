"""Hot inner loops, each with a numba twin and a vectorised numpy twin.

Every public kernel is a :func:`anomaly._accel.dispatch` pair.  Random
numbers are always drawn outside the kernels so that both paths consume the
same variates in the same order.
"""

import math

import numpy as np

from ._accel import dispatch, njit, prange

HALF_PI = 0.5 * math.pi


# ---------------------------------------------------------------------------
# Chambers-Mallows-Stuck transform
# ---------------------------------------------------------------------------


def _cms_np(alpha, beta, v, w):
    """Map uniform angles ``v`` in (-pi/2, pi/2) and unit exponentials ``w``
    to standard S_alpha(beta, 1, 0) variates."""
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if alpha == 2.0:
        return 2.0 * np.sqrt(w) * np.sin(v)
    if alpha == 1.0:
        bv = HALF_PI + beta * v
        return (bv * np.tan(v) - beta * np.log(HALF_PI * w * np.cos(v) / bv)) / HALF_PI
    zeta = beta * math.tan(HALF_PI * alpha)
    shift = math.atan(zeta) / alpha
    scale = (1.0 + zeta * zeta) ** (0.5 / alpha)
    a = alpha * (v + shift)
    return (
        scale
        * np.sin(a)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos(v - a) / w) ** ((1.0 - alpha) / alpha)
    )


@njit(cache=True, parallel=True)
def _cms_nb(alpha, beta, v, w):
    n = v.size
    out = np.empty(n)
    if alpha == 2.0:
        for i in prange(n):
            out[i] = 2.0 * math.sqrt(w[i]) * math.sin(v[i])
        return out
    if alpha == 1.0:
        for i in prange(n):
            bv = HALF_PI + beta * v[i]
            out[i] = (bv * math.tan(v[i]) - beta * math.log(HALF_PI * w[i] * math.cos(v[i]) / bv)) / HALF_PI
        return out
    zeta = beta * math.tan(HALF_PI * alpha)
    shift = math.atan(zeta) / alpha
    scale = (1.0 + zeta * zeta) ** (0.5 / alpha)
    for i in prange(n):
        a = alpha * (v[i] + shift)
        out[i] = (
            scale
            * math.sin(a)
            / math.cos(v[i]) ** (1.0 / alpha)
            * (math.cos(v[i] - a) / w[i]) ** ((1.0 - alpha) / alpha)
        )
    return out


def _cms_nb_entry(alpha, beta, v, w):
    v = np.ascontiguousarray(v, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    shape = v.shape
    return _cms_nb(float(alpha), float(beta), v.ravel(), w.ravel()).reshape(shape)


cms_transform = dispatch(_cms_nb_entry, _cms_np)


# ---------------------------------------------------------------------------
# CTRW: waits and jumps placed on a uniform output grid (zero-order hold)
# ---------------------------------------------------------------------------


def _ctrw_chunk_np(waits, jumps, t_last, k_next, delta, dt, horizon, n_events, first_event):
    """Consume one chunk of (wait, jump) columns in place.

    ``delta[w, k]`` accumulates jumps whose event time lies in (t_{k-1}, t_k];
    a cumulative sum over k afterwards yields the held positions.  Returns the
    number of walkers still active.
    """
    n_out = delta.shape[1]
    active = np.flatnonzero(t_last <= horizon)
    for c in range(waits.shape[1]):
        if active.size == 0:
            break
        t_new = t_last[active] + waits[active, c]
        t_last[active] = t_new
        hit = t_new <= horizon
        rows = active[hit]
        if rows.size:
            k = np.ceil(t_new[hit] / dt).astype(np.int64)
            k = np.minimum(k, n_out - 1)
            delta[rows, k] += jumps[rows, c]
            first = n_events[rows] == 0
            first_event[rows[first]] = t_new[hit][first]
            n_events[rows] += 1
            k_next[rows] = k
        active = rows
    return int(np.count_nonzero(t_last <= horizon))


@njit(cache=True, parallel=True)
def _ctrw_chunk_nb(waits, jumps, t_last, k_next, delta, dt, horizon, n_events, first_event):
    n_out = delta.shape[1]
    n_walkers, n_cols = waits.shape
    for w in prange(n_walkers):
        for c in range(n_cols):
            if t_last[w] > horizon:
                break
            t_new = t_last[w] + waits[w, c]
            t_last[w] = t_new
            if t_new <= horizon:
                k = np.int64(math.ceil(t_new / dt))
                if k > n_out - 1:
                    k = n_out - 1
                delta[w, k] += jumps[w, c]
                if n_events[w] == 0:
                    first_event[w] = t_new
                n_events[w] += 1
                k_next[w] = k
    remaining = 0
    for w in range(n_walkers):
        if t_last[w] <= horizon:
            remaining += 1
    return remaining


ctrw_chunk = dispatch(_ctrw_chunk_nb, _ctrw_chunk_np)


# ---------------------------------------------------------------------------
# Levy walk: ballistic flights sampled on the output grid
# ---------------------------------------------------------------------------


def _levy_walk_chunk_np(durations, directions, speed, t_start, x_start, k_next, positions, dt):
    n_out = positions.shape[1]
    horizon = dt * (n_out - 1)
    active = np.flatnonzero(k_next < n_out)
    for c in range(durations.shape[1]):
        if active.size == 0:
            break
        t0 = t_start[active]
        x0 = x_start[active]
        d = directions[active, c]
        t1 = t0 + durations[active, c]
        # grid nodes t_k with t0 <= t_k < t1 belong to this flight
        k_end = np.minimum(np.ceil(t1 / dt).astype(np.int64), n_out)
        k_end = np.where(t1 > horizon, n_out, k_end)
        k0 = k_next[active]
        counts = np.maximum(k_end - k0, 0)
        if counts.sum():
            rows = np.repeat(np.arange(active.size), counts)
            offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
            ks = k0[rows] + offsets
            positions[active[rows], ks] = x0[rows] + d[rows] * speed * (ks * dt - t0[rows])
        x_start[active] = x0 + d * speed * (t1 - t0)
        t_start[active] = t1
        k_next[active] = np.maximum(k_end, k0)
        active = active[k_next[active] < n_out]
    return int(np.count_nonzero(k_next < n_out))


@njit(cache=True, parallel=True)
def _levy_walk_chunk_nb(durations, directions, speed, t_start, x_start, k_next, positions, dt):
    n_out = positions.shape[1]
    horizon = dt * (n_out - 1)
    n_walkers, n_cols = durations.shape
    for w in prange(n_walkers):
        for c in range(n_cols):
            if k_next[w] >= n_out:
                break
            t0 = t_start[w]
            x0 = x_start[w]
            d = directions[w, c]
            t1 = t0 + durations[w, c]
            k_end = np.int64(math.ceil(t1 / dt))
            if k_end > n_out:
                k_end = n_out
            if t1 > horizon:
                k_end = n_out
            for k in range(k_next[w], k_end):
                positions[w, k] = x0 + d * speed * (k * dt - t0)
            x_start[w] = x0 + d * speed * (t1 - t0)
            t_start[w] = t1
            if k_end > k_next[w]:
                k_next[w] = k_end
    remaining = 0
    for w in range(n_walkers):
        if k_next[w] < n_out:
            remaining += 1
    return remaining


levy_walk_chunk = dispatch(_levy_walk_chunk_nb, _levy_walk_chunk_np)


# ---------------------------------------------------------------------------
# First crossing of a nondecreasing path (inverse subordinator)
# ---------------------------------------------------------------------------


def _first_crossing_np(paths, levels):
    """For each row of ``paths`` (nondecreasing) and each level t, the first
    column index j with ``paths[row, j] > t``; ``paths.shape[1]`` if none."""
    out = np.empty((paths.shape[0], levels.size), dtype=np.int64)
    for r in range(paths.shape[0]):
        out[r] = np.searchsorted(paths[r], levels, side="right")
    return out


@njit(cache=True, parallel=True)
def _first_crossing_nb(paths, levels):
    n_rows, n_cols = paths.shape
    out = np.empty((n_rows, levels.size), dtype=np.int64)
    for r in prange(n_rows):
        for i in range(levels.size):
            lo = 0
            hi = n_cols
            t = levels[i]
            while lo < hi:
                mid = (lo + hi) // 2
                if paths[r, mid] > t:
                    hi = mid
                else:
                    lo = mid + 1
            out[r, i] = lo
    return out


first_crossing = dispatch(_first_crossing_nb, _first_crossing_np)


# ---------------------------------------------------------------------------
# L1 history sums
# ---------------------------------------------------------------------------


def _l1_series_np(du, weights):
    """``out[n] = sum_{j=0}^{n} weights[j] * du[n-j]`` for every n.

    ``du[m] = u[m+1] - u[m]``; ``out[n]`` is the bracket of the L1 formula at
    t_{n+1}.  The dot products run in a fixed order shared with the per-step
    callers so step-by-step and whole-series evaluations agree bit for bit.
    """
    n = du.size
    out = np.empty(n)
    for m in range(n):
        out[m] = l1_point_np(du, weights, m)
    return out


def l1_point_np(du, weights, m):
    if m < 0:
        return 0.0
    return float(np.dot(weights[m::-1], du[: m + 1]))


@njit(cache=True)
def l1_point_nb(du, weights, m):
    acc = 0.0
    for i in range(m + 1):
        acc += weights[m - i] * du[i]
    return acc


@njit(cache=True)
def _l1_series_nb(du, weights):
    n = du.size
    out = np.empty(n)
    for m in range(n):
        out[m] = l1_point_nb(du, weights, m)
    return out


l1_series = dispatch(_l1_series_nb, _l1_series_np)
l1_point = dispatch(l1_point_nb, l1_point_np)


def _l1_history_np(dc, weights, n):
    """History term at step n for a field.

    ``dc[m, i] = c^{m+1}_i - c^m_i`` for m < n.  ``weights`` is either 1-D
    (shared, length > n) or 2-D ``(n_x, > n)`` with per-node weights.
    Returns ``H_i = sum_{j=1}^{n} w_j dc[n-j, i]``.
    """
    if n == 0:
        return np.zeros(dc.shape[1])
    if weights.ndim == 1:
        return weights[n:0:-1] @ dc[:n]
    return np.einsum("ij,ji->i", weights[:, n:0:-1], dc[:n])


@njit(cache=True, parallel=True)
def _l1_history_shared_nb(dc, weights, n):
    n_x = dc.shape[1]
    out = np.zeros(n_x)
    for i in prange(n_x):
        acc = 0.0
        for m in range(n):
            acc += weights[n - m] * dc[m, i]
        out[i] = acc
    return out


@njit(cache=True, parallel=True)
def _l1_history_node_nb(dc, weights, n):
    n_x = dc.shape[1]
    out = np.zeros(n_x)
    for i in prange(n_x):
        acc = 0.0
        for m in range(n):
            acc += weights[i, n - m] * dc[m, i]
        out[i] = acc
    return out


def _l1_history_nb(dc, weights, n):
    if n == 0:
        return np.zeros(dc.shape[1])
    if weights.ndim == 1:
        return _l1_history_shared_nb(dc, weights, n)
    return _l1_history_node_nb(dc, weights, n)


l1_history = dispatch(_l1_history_nb, _l1_history_np)
