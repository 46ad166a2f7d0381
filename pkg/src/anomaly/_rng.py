import numpy as np


def stream(seed, *key):
    """Counter-based generator keyed by ``(seed, *key)``.

    The Philox key is derived from a SeedSequence over the full tuple, so
    streams for different keys are independent and any one of them can be
    regenerated without touching the others.
    """
    if int(seed) < 0:
        raise ValueError("seed must be a non-negative integer")
    entropy = [int(seed)] + [int(k) for k in key]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=state))


def open_uniform_angle(rng, shape):
    """Uniform draws on the open interval (-pi/2, pi/2)."""
    u = rng.random(shape)
    v = np.pi * (u - 0.5)
    return np.where(v <= -0.5 * np.pi, np.nextafter(-0.5 * np.pi, 0.0), v)


def positive_exponential(rng, shape):
    w = rng.standard_exponential(shape)
    return np.where(w > 0.0, w, np.finfo(float).tiny)
