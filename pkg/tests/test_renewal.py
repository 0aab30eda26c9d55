import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from resfluor.linalg import excited_state, ground_state
from resfluor.model import build_model, no_side_count_generator
from resfluor.renewal import (
    MIN_KS_SAMPLES,
    factorized_probability,
    first_click_hazard,
    renewal_test,
    theoretical_cdf,
    waiting_densities,
)
from resfluor.trajectories import sample_batch, survival

SQ2 = 2.0 ** -0.5


def test_density_endpoints(sym_model):
    g = ground_state()
    grid = np.array([0.0, 1e-5, 0.5, 2.0])
    dens = waiting_densities(sym_model, g, grid)
    assert dens.z[0] == 0.0
    assert dens.z_first[0] == 0.0  # ground start carries no excited weight
    assert np.all(dens.z >= 0)
    assert np.all((0.0 <= dens.z_last) & (dens.z_last <= 1.0))
    # zero slope at zero: antibunching to second order
    h = 1e-5
    d2 = waiting_densities(sym_model, g, np.array([h, 2 * h]))
    slope = d2.z[0] / h
    assert abs(slope) < 1e-4  # z ~ x^2/4, so z(h)/h ~ h/4
    sym_diff = (d2.z[1] - 2 * d2.z[0]) / h  # z(2h) - 2 z(h) = O(h^2) exactly for quadratics
    assert abs(sym_diff) < 1e-6


def test_densities_undriven_excited():
    m0 = build_model(SQ2, SQ2, 0.0)
    grid = np.linspace(0.0, 3.0, 7)
    dens = waiting_densities(m0, excited_state(), grid)
    assert np.allclose(dens.z_first, np.exp(-grid), atol=1e-12)
    # actual first-click density carries the side weight
    assert np.allclose(
        first_click_hazard(m0, excited_state(), grid),
        abs(m0.kappa_s) ** 2 * np.exp(-grid),
        atol=1e-12,
    )


def test_hazard_ratio_is_side_weight(sym_model):
    g = ground_state()
    grid = np.linspace(0.1, 4.0, 9)
    dens = waiting_densities(sym_model, g, grid)
    hz = first_click_hazard(sym_model, g, grid)
    assert np.allclose(hz, abs(sym_model.kappa_s) ** 2 * dens.z_first, atol=1e-12)


def test_factorized_probability_corners(sym_model):
    g = ground_state()
    # no clicks: plain survival
    val = factorized_probability(sym_model, g, [1.2])
    assert val == pytest.approx(survival(sym_model, g, 1.2), abs=1e-12)
    # one click then an immediate horizon end
    dens = waiting_densities(sym_model, g, np.array([0.7]))
    expected = dens.z_first[0] * abs(sym_model.kappa_s) ** 2
    assert factorized_probability(sym_model, g, [0.7, 0.0]) == pytest.approx(
        expected, abs=1e-12
    )
    # two clicks back to back: antibunching kills the density
    assert factorized_probability(sym_model, g, [0.7, 0.0, 0.5]) == 0.0
    with pytest.raises(ValueError):
        factorized_probability(sym_model, g, [0.3, -0.1])
    with pytest.raises(ValueError):
        factorized_probability(sym_model, g, [])


@pytest.mark.parametrize("k", [1, 2, 3])
def test_factorized_probability_random_arguments(sym_model, k):
    rng = np.random.default_rng(600 + k)
    xs = rng.uniform(0.05, 1.5, size=k + 1)
    # the function asserts factorized and word forms agree internally
    val = factorized_probability(sym_model, ground_state(), xs)
    assert val >= 0.0


def test_theoretical_cdf_properties(sym_model):
    g = ground_state()
    assert theoretical_cdf(sym_model, g, "later", 0.0) == 0.0
    grid = np.linspace(0.0, 40.0, 30)
    F = theoretical_cdf(sym_model, g, "later", grid)
    assert np.all(np.diff(F) >= -1e-12)
    assert F[-1] == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        theoretical_cdf(sym_model, g, "nope", 1.0)


def test_theoretical_cdf_against_adaptive_quadrature(sym_model):
    g = ground_state()

    def z_density(x):
        return float(waiting_densities(sym_model, g, np.array([x])).z[0])

    for x in (0.4, 1.3, 3.7):
        ref = quad(z_density, 0.0, x, epsabs=1e-12, epsrel=1e-12)[0]
        assert theoretical_cdf(sym_model, g, "later", x) == pytest.approx(ref, abs=1e-9)


def test_theoretical_cdf_median_self_consistency(sym_model):
    g = ground_state()
    lo, hi = 0.0, 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if theoretical_cdf(sym_model, g, "later", mid) < 0.5:
            lo = mid
        else:
            hi = mid
    assert theoretical_cdf(sym_model, g, "later", 0.5 * (lo + hi)) == pytest.approx(
        0.5, abs=1e-9
    )


def test_theoretical_cdf_undriven_first():
    m0 = build_model(SQ2, SQ2, 0.0)
    x = 1.1
    assert theoretical_cdf(m0, excited_state(), "first", x) == pytest.approx(
        abs(m0.kappa_s) ** 2 * (1 - np.exp(-x)), abs=1e-12
    )


def test_tail_decays_at_spectral_gap(sym_model):
    g = ground_state()
    gap = -float(np.max(np.linalg.eigvals(no_side_count_generator(sym_model)).real))
    xs = np.arange(6.0, 30.0, 4.0)
    tails = 1.0 - theoretical_cdf(sym_model, g, "later", xs)
    C = tails[0] / np.exp(-gap * xs[0])
    assert np.all(tails <= 1.5 * C * np.exp(-gap * xs))


def _synthetic_clicks(m, rho, n_traj, horizon, seed):
    """Inverse-transform draws straight from the theoretical CDFs."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, horizon, 4001)
    F = theoretical_cdf(m, rho, "later", grid)
    Ff = theoretical_cdf(m, rho, "first", grid)
    out = []
    for _ in range(n_traj):
        t_click, clicks = 0.0, []
        first = True
        while True:
            u = rng.random()
            Fx = Ff if first else F
            if u >= Fx[-1]:
                break
            x = float(np.interp(u, Fx, grid))
            t_click += x
            if t_click >= horizon:
                break
            clicks.append(t_click)
            first = False
        out.append(np.array(clicks))
    return out


def test_renewal_battery_null_calibration(sym_model):
    g = ground_state()
    clicks = _synthetic_clicks(sym_model, g, 4000, 60.0, seed=2024)
    rep = renewal_test(clicks, sym_model, g, tail_times=(10.0, 30.0, 60.0))
    assert not rep.underpowered
    assert rep.passed["ks_first"] and rep.passed["ks_later"] and rep.passed["ks_third"]
    assert rep.passed["independence"]
    # N_t tails decrease toward zero
    for n in (0, 1, 2):
        vals = list(rep.counts_tail[n].values())
        assert vals[0] >= vals[-1]


def test_renewal_battery_on_sampler_output(sym_model):
    g = ground_state()
    trajs = sample_batch(sym_model, g, 60.0, 555, 4000)
    rep = renewal_test(trajs, sym_model, g)
    assert not rep.underpowered
    assert all(rep.passed.values())


def test_renewal_battery_negative_control(sym_model):
    g = ground_state()
    clicks = _synthetic_clicks(sym_model, g, 4000, 60.0, seed=7)
    corrupted = []
    for c in clicks:
        if len(c) >= 3:
            x2 = c[1] - c[0]
            c = c.copy()
            c[2] = c[1] + x2  # force X3 := X2
        corrupted.append(c)
    rep = renewal_test(corrupted, sym_model, g)
    assert not rep.passed["independence"]


def test_renewal_battery_underpowered(sym_model):
    g = ground_state()
    trajs = sample_batch(sym_model, g, 60.0, 3, 50)
    rep = renewal_test(trajs, sym_model, g)
    assert rep.underpowered
    assert rep.passed == {}
    assert rep.n_later < MIN_KS_SAMPLES
