"""Waiting-time densities and renewal-property tests for the side channel.

After every side click the atom sits in its ground state exactly, so the
side-channel record is a (modified) renewal process: the inter-arrival times
X_2, X_3, ... are i.i.d., and X_1 differs only through the initial state.
In terms of the between-clicks semigroup Z_x the theoretical densities are

    z(x)       = |kappa_s|^2 * (Z_x(P))_22      inter-click density, i >= 2
    z_last(x)  = |kappa_s|^2 * (Z_x(I))_22      density weight of the final,
                                                click-free stretch
    z_first(x) = Tr(rho Z_x(P))                 first-interval weight; the
                                                sampling density of X_1 is
                                                |kappa_s|^2 * z_first(x)

z(0) = 0 with zero slope: side photons arrive antibunched.

``renewal_test`` runs the statistical battery on sampled trajectories:
Kolmogorov-Smirnov for X_1 (first-interval law) and X_2, X_3 (stationary
law), a chi-square independence check of (X_2, X_3) on a quantile-binned
grid, and the decay of P[N_t <= n].  Kolmogorov-Smirnov thresholds come from
the asymptotic distribution and require n >= 1000; smaller samples mark the
report underpowered instead of passing or failing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .linalg import I2, require_density_matrix, vec
from .model import Model, no_side_count_generator, side_jump
from .semigroup import SemigroupCache
from .trajectories import Trajectory

__all__ = [
    "WaitingDensities",
    "waiting_densities",
    "first_click_hazard",
    "factorized_probability",
    "theoretical_cdf",
    "RenewalReport",
    "renewal_test",
    "MIN_KS_SAMPLES",
]

MIN_KS_SAMPLES = 1000
_E22 = 3  # index of the (2,2) entry under column stacking


@dataclass(frozen=True)
class WaitingDensities:
    """Theoretical waiting densities tabulated on a grid."""

    grid: np.ndarray
    z: np.ndarray
    z_first: np.ndarray
    z_last: np.ndarray


class _ZTools:
    """Eigen-form evaluation of Z_x and exact antiderivatives of its entries."""

    def __init__(self, m: Model):
        self.m = m
        self.ks2 = abs(m.kappa_s) ** 2
        self.sg = SemigroupCache(no_side_count_generator(m))

    def component(self, x, target_vec, weight_vec) -> np.ndarray:
        """weight^dag Z_x target for an array of x."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        mats = self.sg.at(xs)
        return np.real(np.conj(weight_vec) @ (mats @ target_vec).T)

    def component_integral(self, x, target_vec, weight_vec) -> np.ndarray:
        """Exact integral from 0 to x of the same component.

        Uses the eigenexpansion antiderivative (e^(lambda x) - 1)/lambda; a
        near-defective generator falls back to adaptive quadrature.
        """
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        if self.sg._diagonalizable:
            lam = self.sg.lam
            c = (np.conj(weight_vec) @ self.sg.U) * (self.sg.Uinv @ target_vec)
            with np.errstate(divide="ignore", invalid="ignore"):
                prim = np.where(
                    np.abs(lam)[None, :] > 1e-14,
                    (np.exp(np.outer(xs, lam)) - 1.0) / lam[None, :],
                    xs[:, None],
                )
            return np.real(prim @ c)
        from scipy.integrate import quad

        out = np.empty(xs.shape)
        for k, xv in enumerate(xs):
            out[k] = quad(
                lambda s: float(self.component(s, target_vec, weight_vec)[0]),
                0.0,
                xv,
                epsabs=1e-12,
                epsrel=1e-12,
            )[0]
        return out


def waiting_densities(m: Model, rho, grid) -> WaitingDensities:
    """Tabulate z, z_first, z_last on the grid.

    Grid points at x = 0 are filled from Z_0 = Id directly, so the
    antibunching endpoint z(0) = 0 is exact; elsewhere, negative roundoff
    within 1e-12 of zero is clamped to keep the tabulated densities
    nonnegative.
    """
    rho = require_density_matrix(rho)
    tools = _ZTools(m)
    grid = np.asarray(grid, dtype=float)
    e22 = np.zeros(4)
    e22[_E22] = 1.0
    z_vals = tools.ks2 * tools.component(grid, vec(m.P), e22)
    z_last = tools.ks2 * tools.component(grid, vec(I2), e22)
    z_first = tools.component(grid, vec(m.P), vec(rho))
    at0 = grid == 0.0
    z_vals[at0] = 0.0
    z_last[at0] = tools.ks2
    z_first[at0] = float(np.real(np.trace(rho @ m.P)))
    for arr in (z_vals, z_first):
        arr[(arr < 0.0) & (arr > -1e-12)] = 0.0
    return WaitingDensities(grid=grid, z=z_vals, z_first=z_first, z_last=z_last)


def first_click_hazard(m: Model, rho, x) -> np.ndarray:
    """-d/dx of the no-side-click survival, i.e. the actual X_1 density.

    Computed from the generator acting on the identity; equals
    |kappa_s|^2 * z_first(x) identically, which the tests assert.
    """
    rho = require_density_matrix(rho)
    tools = _ZTools(m)
    gen_on_id = no_side_count_generator(m) @ vec(I2)
    return -tools.component(x, gen_on_id, vec(rho))


def factorized_probability(m: Model, rho, inter_arrivals) -> float:
    """Density of a click record with the given inter-arrival times.

    For times (x_1, ..., x_{k+1}) -- k clicks, then a click-free stretch --
    returns z_first(x_1) * prod_{l=2..k} z(x_l) * z_last(x_{k+1}), checking
    it against the direct word trace Tr(rho Z_{x1} J_s ... J_s Z_{x_{k+1}} I)
    to 1e-10 before returning.
    """
    xs = [float(x) for x in inter_arrivals]
    if len(xs) < 1:
        raise ValueError("need at least the final stretch duration")
    if any(x < 0 for x in xs):
        raise ValueError("inter-arrival times must be >= 0")
    rho = require_density_matrix(rho)
    tools = _ZTools(m)
    e22 = np.zeros(4)
    e22[_E22] = 1.0

    if len(xs) == 1:
        product = float(tools.component(xs[0], vec(I2), vec(rho))[0])
    else:
        product = float(tools.component(xs[0], vec(m.P), vec(rho))[0])
        for x in xs[1:-1]:
            product *= tools.ks2 * float(tools.component(x, vec(m.P), e22)[0])
        product *= tools.ks2 * float(tools.component(xs[-1], vec(I2), e22)[0])

    Js = side_jump(m)
    word = tools.sg.at(xs[-1]) @ vec(I2)
    for x in reversed(xs[:-1]):
        word = tools.sg.at(x) @ (Js @ word)
    trace_form = float(np.real(vec(rho).conj() @ word))
    if abs(product - trace_form) > 1e-10 * max(1.0, abs(trace_form)):
        raise ArithmeticError(
            f"factorized and word forms disagree: {product} vs {trace_form}"
        )
    return product


def theoretical_cdf(m: Model, rho, which: str, x) -> np.ndarray:
    """CDF of an inter-arrival time: 'first' for X_1, 'later' for X_i, i >= 2.

    The 'later' CDF integrates z; the 'first' CDF integrates the actual X_1
    density |kappa_s|^2 * z_first.  Monotone, 0 at 0, and tending to 1 for a
    driven atom.
    """
    rho = require_density_matrix(rho)
    tools = _ZTools(m)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0):
        raise ValueError("cdf argument must be >= 0")
    e22 = np.zeros(4)
    e22[_E22] = 1.0
    if which == "later":
        vals = tools.ks2 * tools.component_integral(xs, vec(m.P), e22)
    elif which == "first":
        vals = tools.ks2 * tools.component_integral(xs, vec(m.P), vec(rho))
    else:
        raise ValueError("which must be 'first' or 'later'")
    return vals if np.ndim(x) else float(vals[0])


@dataclass(frozen=True)
class RenewalReport:
    """Outcome of the renewal battery on a trajectory batch."""

    n_traj: int
    n_first: int
    n_later: int
    ks_stat_first: float
    ks_stat_later: float
    ks_stat_third: float
    ks_threshold_99: float
    independence_stat: float
    independence_pvalue: float
    counts_tail: dict
    underpowered: bool
    passed: dict = field(default_factory=dict)


def _side_inter_arrivals(trajs) -> list[np.ndarray]:
    out = []
    for t in trajs:
        ts = t.times("side") if isinstance(t, Trajectory) else np.asarray(t, dtype=float)
        out.append(np.diff(np.concatenate([[0.0], ts])) if len(ts) else np.array([]))
    return out


def renewal_test(
    trajs,
    m: Model,
    rho,
    alpha: float = 0.01,
    tail_times: tuple[float, ...] = (),
) -> RenewalReport:
    """Run the renewal battery on sampled trajectories.

    ``trajs`` is a list of :class:`Trajectory` (or per-trajectory arrays of
    side-click times).  Infinite or missing intervals are excluded from the
    CDF comparisons and show up only through the sample sizes.
    """
    rho = require_density_matrix(rho)
    inter = _side_inter_arrivals(trajs)
    x1 = np.array([xs[0] for xs in inter if len(xs) >= 1])
    x2 = np.array([xs[1] for xs in inter if len(xs) >= 2])
    x3 = np.array([xs[2] for xs in inter if len(xs) >= 3])
    pairs = np.array([[xs[1], xs[2]] for xs in inter if len(xs) >= 3])

    cdf_later = lambda v: theoretical_cdf(m, rho, "later", v)
    cdf_first = lambda v: theoretical_cdf(m, rho, "first", v)

    underpowered = min(len(x1), len(x2), len(x3)) < MIN_KS_SAMPLES
    ks_first = stats.kstest(x1, cdf_first).statistic if len(x1) else np.nan
    ks_later = stats.kstest(x2, cdf_later).statistic if len(x2) else np.nan
    ks_third = stats.kstest(x3, cdf_later).statistic if len(x3) else np.nan
    thr = float(stats.kstwobign.isf(alpha))

    # independence on a 10x10 grid with deciles of the theoretical CDF, so
    # expected counts are uniform under the null
    if len(pairs) >= MIN_KS_SAMPLES:
        u = cdf_later(pairs[:, 0])
        v = cdf_later(pairs[:, 1])
        bins = np.linspace(0.0, 1.0, 11)
        hist, _, _ = np.histogram2d(u, v, bins=[bins, bins])
        expected = len(pairs) / 100.0
        chi2 = float(((hist - expected) ** 2 / expected).sum())
        pval = float(stats.chi2.sf(chi2, df=99))
    else:
        chi2, pval = np.nan, np.nan

    counts_tail = {}
    if tail_times:
        click_counts = {
            t: np.array(
                [np.sum(np.asarray([x for x in (tr.times("side") if isinstance(tr, Trajectory) else tr)]) <= t) for tr in trajs]
            )
            for t in tail_times
        }
        for n in (0, 1, 2):
            counts_tail[n] = {
                float(t): float(np.mean(click_counts[t] <= n)) for t in tail_times
            }

    passed = {}
    if not underpowered:
        lim = lambda n: thr / np.sqrt(n)
        passed = {
            "ks_first": bool(ks_first <= lim(len(x1))),
            "ks_later": bool(ks_later <= lim(len(x2))),
            "ks_third": bool(ks_third <= lim(len(x3))),
            "independence": bool(pval > alpha),
        }
    return RenewalReport(
        n_traj=len(inter),
        n_first=len(x1),
        n_later=len(x2),
        ks_stat_first=float(ks_first),
        ks_stat_later=float(ks_later),
        ks_stat_third=float(ks_third),
        ks_threshold_99=thr,
        independence_stat=chi2,
        independence_pvalue=pval,
        counts_tail=counts_tail,
        underpowered=underpowered,
        passed=passed,
    )
