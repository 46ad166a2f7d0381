import math

import numpy as np
import pytest
from scipy import integrate

from anomaly.grids import TimeGrid
from anomaly.rheology import (
    CompatibilityError,
    NonuniformGridError,
    RheoModel,
    StrainHistory,
    complex_modulus,
    dynamic_moduli,
    qlv_stress,
    relaxation_modulus,
    sb_free_energy,
    stress_response,
    vevp_simulate,
    write_driver_csv,
    write_moduli_csv,
    write_relaxation_csv,
)

SB = RheoModel("SB", E=2.0, alpha=0.4)
FM = RheoModel("FM", E1=1.0, E2=1.0, alpha1=0.2, alpha2=0.8)


def test_model_validation():
    with pytest.raises(ValueError):
        RheoModel("SB", E=1.0)
    with pytest.raises(ValueError):
        RheoModel("SB", E=1.0, alpha=1.0)
    with pytest.raises(ValueError):
        RheoModel("FM", E1=1.0, E2=1.0, alpha1=0.7, alpha2=0.3)
    with pytest.raises(ValueError):
        RheoModel("Spring", E=1.0)


def test_sb_dynamic_moduli_and_loss_tangent():
    w = np.logspace(-3, 3, 13)
    g1, g2 = dynamic_moduli(SB, w)
    np.testing.assert_allclose(g1, 2.0 * w**0.4 * math.cos(0.2 * math.pi), rtol=1e-14)
    np.testing.assert_allclose(g2 / g1, math.tan(0.2 * math.pi), rtol=1e-14)


def test_fkv_and_fm_asymptotic_slopes():
    fkv = RheoModel("FKV", E1=1.0, E2=1.0, alpha1=0.3, alpha2=0.6)
    lo, hi = dynamic_moduli(fkv, np.array([1e-8, 1.1e-8])), dynamic_moduli(fkv, np.array([1e8, 1.1e8]))
    sl = lambda g: math.log(g[1] / g[0]) / math.log(1.1)
    assert sl(lo[0]) == pytest.approx(0.3, abs=2e-3)
    assert sl(hi[0]) == pytest.approx(0.6, abs=2e-3)
    for t, s in ((1e-6, -0.2), (1e6, -0.8)):
        G = relaxation_modulus(FM, np.array([t, 1.1 * t]))
        assert sl(G) == pytest.approx(s, abs=2e-3)


def test_fm_relaxation_modulus_transforms_to_complex_modulus():
    # G*(w) = i w int_0^inf G(t) e^{-i w t} dt, done with Fourier-weighted quadrature
    w = 1.3
    G = lambda t: relaxation_modulus(FM, t)
    head = lambda f: integrate.quad(lambda t: G(t) * f(w * t), 0, 1.0, limit=400)[0]
    tail = lambda wt: integrate.quad(G, 1.0, np.inf, weight=wt, wvar=w, limlst=200)[0]
    c = head(np.cos) + tail("cos")
    s = head(np.sin) + tail("sin")
    num = 1j * w * (c - 1j * s)
    ref = complex_modulus(FM, w)
    assert abs(num - ref) / abs(ref) < 0.01


def test_fm_limits_recover_maxwell():
    m = RheoModel("FM", E1=2.0, E2=0.5, alpha1=1e-4, alpha2=0.9999)
    t = np.array([0.05, 0.2, 0.5])
    # spring E1 in series with dashpot eta = E2: G = E1 exp(-E1 t / E2)
    np.testing.assert_allclose(relaxation_modulus(m, t), 2.0 * np.exp(-4.0 * t), rtol=3e-3)


def test_fm_stress_under_constant_rate_matches_integrated_modulus():
    h = StrainHistory.from_function(lambda t: t, 0.002, 2.0)
    s = stress_response(FM, h)
    ref = integrate.quad(lambda u: relaxation_modulus(FM, u), 0, 2.0, limit=200)[0]
    assert s[-1] == pytest.approx(ref, rel=0.01)


def test_linearity_and_zero_strain():
    h1 = StrainHistory.from_function(lambda t: np.sin(t), 0.01, 3.0)
    h2 = StrainHistory.from_function(lambda t: t**2, 0.01, 3.0)
    h3 = StrainHistory(h1.tgrid, 2.0 * h1.strain - 0.5 * h2.strain)
    for m in (SB, FM, RheoModel("FKV", E1=1.0, E2=0.3, alpha1=0.2, alpha2=0.7)):
        a, b, c = (stress_response(m, h) for h in (h1, h2, h3))
        np.testing.assert_allclose(c, 2.0 * a - 0.5 * b, atol=1e-12)
        z = stress_response(m, StrainHistory(h1.tgrid, np.zeros(h1.tgrid.n_steps + 1)))
        assert np.all(z == 0.0)


def test_sb_declared_step_gives_relaxation_modulus():
    tg = TimeGrid(0.01, 100)
    s = stress_response(SB, StrainHistory(tg, np.full(101, 0.5), step=True))
    assert math.isinf(s[0])
    np.testing.assert_allclose(s[1:], 0.5 * relaxation_modulus(SB, tg.t[1:]), rtol=1e-14)


def test_compatibility_and_grid_errors():
    tg = TimeGrid(0.1, 10)
    with pytest.raises(CompatibilityError):
        stress_response(SB, StrainHistory(tg, np.ones(11)))
    with pytest.raises(CompatibilityError):
        stress_response(FM, StrainHistory(tg, np.ones(11), step=True))
    with pytest.raises(NonuniformGridError):
        StrainHistory.from_samples([0.0, 0.1, 0.3], [0.0, 0.1, 0.2])
    h = StrainHistory.from_samples(np.linspace(0, 1, 11), np.linspace(0, 1, 11))
    assert h.dt == pytest.approx(0.1)


def test_qlv_limits():
    h = StrainHistory.from_function(lambda t: 0.1 * np.sin(2 * t), 0.01, 2.0)
    # no memory: elastic law scaled by C
    m = RheoModel("QLV", A=2.0, B=3.0, C=0.7, Dq=0.0, alpha=0.5)
    np.testing.assert_allclose(qlv_stress(m, h), 0.7 * 2.0 * np.expm1(3.0 * h.strain), rtol=1e-14)
    # small B, C = 0: SB with E = A B Dq Gamma(1 - alpha)
    a, B = 0.4, 1e-8
    m = RheoModel("QLV", A=2.0, B=B, C=0.0, Dq=1.5, alpha=a)
    sb = RheoModel("SB", E=2.0 * B * 1.5 * math.gamma(1 - a), alpha=a)
    np.testing.assert_allclose(qlv_stress(m, h), stress_response(sb, h), rtol=1e-6, atol=1e-18)


def test_free_energy_limits_and_sign():
    h = StrainHistory.from_function(lambda t: np.minimum(t, 1.0) * 0.2, 0.01, 1.0)
    assert sb_free_energy(3.0, 0.0, h) == pytest.approx(0.5 * 3.0 * 0.04, rel=1e-12)
    assert sb_free_energy(3.0, 0.001, h) == pytest.approx(0.06, rel=5e-3)
    assert sb_free_energy(3.0, 0.99, h) < 0.05 * 0.06
    rng = np.random.default_rng(0)
    for _ in range(5):
        e = np.concatenate([[0.0], np.cumsum(rng.standard_normal(60))])
        assert sb_free_energy(1.0, rng.uniform(0.05, 0.95), StrainHistory(TimeGrid(0.05, 60), e)) >= 0.0


def test_sb_dissipation_over_cycles_is_positive():
    h = StrainHistory.from_function(lambda t: np.sin(math.pi * t), 0.005, 4.0)
    s = stress_response(SB, h)
    work = np.sum(0.5 * (s[1:] + s[:-1]) * np.diff(h.strain))
    assert work > 0.0


VE = RheoModel("VEVP", E=1.0, alpha=0.5, sigmaY=0.3, K=0.5, alphaK=0.5, H=0.1)


def test_vevp_below_yield_is_sb():
    h = StrainHistory.from_function(lambda t: 0.05 * np.sin(t), 0.01, 5.0)
    s, ep, q = vevp_simulate(VE, h)
    assert np.array_equal(s, stress_response(RheoModel("SB", E=1.0, alpha=0.5), h))
    assert np.all(ep == 0.0) and np.all(q == 0.0)


def test_vevp_yields_and_hardening_is_monotone():
    h = StrainHistory.from_function(lambda t: 2.0 * np.sin(t), 0.01, 10.0)
    s, ep, q = vevp_simulate(VE, h)
    assert q[-1] > 0.0
    assert np.all(np.diff(q) >= 0.0)
    assert np.all(np.isfinite(s))


def test_vevp_rate_independent_hardening_consistency():
    m = RheoModel("VEVP", E=1.0, alpha=0.5, sigmaY=0.3, K=0.0, alphaK=0.5, H=0.2)
    h = StrainHistory.from_function(lambda t: t, 0.01, 3.0)
    s, ep, q = vevp_simulate(m, h)
    yielded = q > 0
    assert yielded.any()
    # on the yield surface |sigma| = sigmaY + H q
    np.testing.assert_allclose(np.abs(s[yielded]), 0.3 + 0.2 * q[yielded], atol=1e-9)


def test_csv_writers(tmp_path):
    t = np.array([0.1, 1.0])
    write_relaxation_csv(t, relaxation_modulus(SB, t), tmp_path / "g.csv")
    write_moduli_csv(t, *dynamic_moduli(SB, t), tmp_path / "m.csv")
    h = StrainHistory.from_function(lambda t: t, 0.5, 1.0)
    s, ep, q = vevp_simulate(VE, h)
    write_driver_csv(h, s, ep, q, tmp_path / "d.csv")
    assert (tmp_path / "g.csv").read_text().splitlines()[0] == "t,G"
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "omega,G1,G2"
    assert len((tmp_path / "d.csv").read_text().splitlines()) == 4
