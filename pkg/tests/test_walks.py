import math
import warnings

import numpy as np
import pytest

from anomaly.grids import Grid1D
from anomaly.stable import StableParams, cdf
from anomaly.verification import compare_density, default_bins
from anomaly.walks import (
    HorizonError,
    WaitLaw,
    WalkSpec,
    empirical_density,
    msd_estimate,
    simulate,
    simulate_subordinated,
    write_density_csv,
    write_paths_csv,
)


def test_spec_validation():
    with pytest.raises(ValueError):
        WalkSpec("Drunk", 0.1, 1.0, 10, 0)
    with pytest.raises(ValueError):
        WalkSpec("Flight", 0.1, 1.0, 10, -1)
    with pytest.raises(ValueError):
        WalkSpec("SubordinatedBM", 0.1, 1.0, 10, 0, beta=1.0)
    with pytest.raises(ValueError):
        WaitLaw("stable", 1.0, 1.0)


@pytest.mark.parametrize(
    "spec",
    [
        WalkSpec("Flight", 0.1, 2.0, 300, 5, stable_jump=StableParams(1.5)),
        WalkSpec("SubordinatedBM", 0.1, 2.0, 300, 5, beta=0.6),
        WalkSpec("CTRW", 0.1, 2.0, 300, 5, wait=WaitLaw("stable", 0.05, 0.8)),
        WalkSpec("LevyWalk", 0.1, 2.0, 300, 5),
    ],
    ids=lambda s: s.kind,
)
def test_determinism_and_seed_dependence(spec):
    a = simulate(spec).positions
    b = simulate(spec).positions
    assert np.array_equal(a, b)
    c = simulate(WalkSpec(**{**spec.__dict__, "seed": spec.seed + 1})).positions
    assert not np.array_equal(a, c)
    assert np.all(a[:, 0] == 0.0)


def test_brownian_variance():
    e = simulate(WalkSpec("Flight", 0.5, 5.0, 20000, 1, stable_jump=StableParams(2.0, 0.0, 0.7)))
    msd = msd_estimate(e)
    # variance of S_2(0, sigma) is 2 sigma^2 per unit time
    np.testing.assert_allclose(msd[1:, 1], 2 * 0.49 * msd[1:, 0], rtol=0.04)


def test_flight_density_matches_fundamental_solution():
    T = 2.0
    e = simulate(WalkSpec("Flight", 0.25, T, 20000, 2, stable_jump=StableParams(1.5, 0.3)))
    ref = StableParams(1.5, 0.3, T ** (1 / 1.5))
    bins = default_bins(60.0)
    dens, outside = empirical_density(e, T, bins)
    rep = compare_density(dens, np.diff(cdf(ref, bins.edges)) / bins.dx, bins, 0.02, e.n_paths)
    assert rep.passed, rep


def test_subordinated_msd_law():
    beta = 0.6
    e = simulate(WalkSpec("SubordinatedBM", 0.5, 20.0, 4000, 3, beta=beta, dtau=0.05))
    msd = msd_estimate(e)
    t = msd[-1, 0]
    assert msd[-1, 1] == pytest.approx(2 * t**beta / math.gamma(1 + beta), rel=0.08)


def test_subordinated_horizon_guard():
    spec = WalkSpec("SubordinatedBM", 1.0, 50.0, 10, 0, beta=0.5, dtau=0.01, max_operational_steps=100)
    with pytest.raises(HorizonError):
        simulate_subordinated(spec)


def test_subordinated_operational_time_is_monotone():
    e = simulate_subordinated(WalkSpec("SubordinatedBM", 0.1, 3.0, 200, 4, beta=0.5), keep_operational_time=True)
    op = e.extras["operational_time"]
    assert np.all(np.diff(op, axis=1) >= 0)
    assert np.all(op[:, 0] == 0)


def test_ctrw_exponential_waits_give_normal_diffusion():
    tau = 0.1
    e = simulate(WalkSpec("CTRW", 0.5, 5.0, 20000, 6, wait=WaitLaw("exponential", tau)))
    msd = msd_estimate(e)
    # E N(t) = t / tau and each jump has variance 2
    np.testing.assert_allclose(msd[1:, 1], 2 * msd[1:, 0] / tau, rtol=0.04)
    assert np.all(e.extras["n_events"] >= 0)


def test_levy_walk_cone_and_ballistic_speed():
    spec = WalkSpec("LevyWalk", 0.1, 20.0, 3000, 7, speed=2.0, gamma_lw=0.8)
    e = simulate(spec)
    assert np.all(np.abs(e.positions) <= spec.speed * e.t)
    # gamma < 1: ballistic regime, MSD / (v t)^2 decreases towards 1 - gamma
    msd = msd_estimate(e)
    ratio = msd[-1, 1] / (spec.speed * e.t[-1]) ** 2
    assert 1.0 - spec.gamma_lw - 0.05 < ratio < 1.0


def test_empirical_density_warns_on_lost_mass():
    e = simulate(WalkSpec("Flight", 0.1, 1.0, 1000, 0, stable_jump=StableParams(1.1)))
    bins = Grid1D.centered(0.5, 0.1)
    with pytest.warns(RuntimeWarning):
        _, outside = empirical_density(e, 1.0, bins)
    assert outside > 0.01


def test_csv_writers(tmp_path):
    e = simulate(WalkSpec("Flight", 0.5, 1.0, 3, 0))
    write_paths_csv(e, tmp_path / "p.csv")
    text = (tmp_path / "p.csv").read_bytes()
    assert text.startswith(b"path,t,x\n") and b"\r" not in text
    assert len(text.splitlines()) == 1 + 3 * 3
    bins = Grid1D.centered(1.0, 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d, _ = empirical_density(e, 1.0, bins)
    write_density_csv(bins, d, tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "x,density"
