import numpy as np
import pytest

from resfluor.davies import event_probability
from resfluor.events import Event, exact_count, free_channel
from resfluor.linalg import (
    excited_state,
    frobenius_dist,
    ground_state,
    maximally_mixed,
)
from resfluor.model import build_model
from resfluor.trajectories import (
    SeedSpec,
    apply_side_jump,
    evolve_no_jump,
    sample_batch,
    sample_trajectory,
    sample_waiting_time,
    survival,
    trajectory_density_audit,
    waiting_time_cap,
)
from resfluor.trajectories import _ModeOps

SQ2 = 2.0 ** -0.5


def test_survival_corners(sym_model, undriven_model):
    assert survival(sym_model, excited_state(), 0.0) == pytest.approx(1.0)
    assert survival(undriven_model, ground_state(), 5.0) == pytest.approx(1.0)
    x = 2.0
    ks2 = abs(undriven_model.kappa_s) ** 2
    assert survival(undriven_model, excited_state(), x) == pytest.approx(
        (1 - ks2) + ks2 * np.exp(-x), abs=1e-12
    )


def test_survival_monotone(sym_model):
    xs = np.linspace(0, 6, 40)
    vals = [survival(sym_model, maximally_mixed(), float(x)) for x in xs]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
    for x in xs:
        assert -1e-12 <= vals[0] <= 1.0 + 1e-12


def test_waiting_time_corners(sym_model, undriven_model):
    # u -> 1 gives x -> 0
    assert sample_waiting_time(sym_model, excited_state(), 1 - 1e-12) < 1e-9
    # pure exponential corner
    m = build_model(0.0, 1.0, 0.0)
    u = 0.37
    assert sample_waiting_time(m, excited_state(), u) == pytest.approx(
        -np.log(u), abs=1e-9
    )
    # undriven ground state never clicks
    assert sample_waiting_time(undriven_model, ground_state(), 0.5) == np.inf
    with pytest.raises(ValueError):
        sample_waiting_time(sym_model, excited_state(), 0.0)
    with pytest.raises(ValueError):
        sample_waiting_time(sym_model, excited_state(), 1.0)


def test_waiting_time_inverts_survival(sym_model):
    for u in (0.9, 0.5, 0.12):
        x = sample_waiting_time(sym_model, maximally_mixed(), u)
        assert survival(sym_model, maximally_mixed(), x) == pytest.approx(u, abs=1e-9)


def test_waiting_time_cap_value(sym_model):
    assert waiting_time_cap(sym_model) == pytest.approx(50.0 * (1 + 2.0))


def test_apply_side_jump(sym_model):
    g = ground_state()
    assert frobenius_dist(apply_side_jump(sym_model, excited_state()), g) == 0.0
    assert frobenius_dist(apply_side_jump(sym_model, maximally_mixed()), g) == 0.0
    with pytest.raises(ValueError):
        apply_side_jump(sym_model, g)


def test_evolve_no_jump(sym_model, undriven_model):
    rho = maximally_mixed()
    assert frobenius_dist(evolve_no_jump(sym_model, rho, 0.0), rho) < 1e-15
    assert frobenius_dist(
        evolve_no_jump(undriven_model, ground_state(), 3.0), ground_state()
    ) < 1e-14
    m = build_model(0.0, 1.0, 0.0)
    out = evolve_no_jump(m, excited_state(), np.log(2))
    assert frobenius_dist(out, excited_state()) < 1e-13


def test_unnormalized_trace_equals_survival(sym_model):
    ops = _ModeOps(sym_model, "side-only")
    rho = maximally_mixed()
    for x in (0.2, 1.1, 3.0):
        un = ops.dual_evolve(rho[None], np.array([x]))[0]
        assert np.trace(un).real == pytest.approx(
            survival(sym_model, rho, x), abs=1e-10
        )


def test_trajectory_corners(undriven_model):
    g = ground_state()
    tr = sample_trajectory(undriven_model, g, 20.0, SeedSpec(5, 0))
    assert tr.records == ()
    assert frobenius_dist(tr.terminal_state, g) < 1e-12
    m = build_model(0.0, 1.0, 0.0)
    tr2 = sample_trajectory(m, excited_state(), 2000.0, SeedSpec(5, 1))
    assert len(tr2.records) == 1


def test_determinism_across_batching(sym_model):
    g = ground_state()
    whole = sample_batch(sym_model, g, 30.0, 999, 64)
    parts = sample_batch(sym_model, g, 30.0, 999, 32) + sample_batch(
        sym_model, g, 30.0, 999, 32, first_index=32
    )
    assert all(a.records == b.records for a, b in zip(whole, parts))
    again = sample_batch(sym_model, g, 30.0, 999, 64)
    assert all(a.records == b.records for a, b in zip(whole, again))
    single = sample_trajectory(sym_model, g, 30.0, SeedSpec(999, 17))
    assert single.records == whole[17].records


def test_two_channel_between_jump_rates(sym_model):
    trajs = sample_batch(sym_model, ground_state(), 15.0, 31, 400, mode="two-channel")
    nf = sum(sum(1 for _, c in t.records if c == "forward") for t in trajs)
    ns = sum(sum(1 for _, c in t.records if c == "side") for t in trajs)
    # forward counter sees laser photons plus scattered light; side only decay
    assert nf > 3 * ns
    for t in trajs[:5]:
        times = [x for x, _ in t.records]
        assert all(a < b for a, b in zip(times, times[1:]))


def test_density_audit_pins_duality(sym_model):
    g = ground_state()
    trajs = sample_batch(sym_model, g, 12.0, 777, 6)
    checked = 0
    for tr in trajs:
        if not (1 <= len(tr.records) <= 5):
            continue
        audit = trajectory_density_audit(sym_model, g, tr)
        assert audit["stepwise"] == pytest.approx(
            audit["trace_form"], rel=1e-9, abs=1e-12
        )
        checked += 1
    assert checked > 0


def test_click_statistics_match_counting_maps(sym_model):
    # empirical P[N_t = k] against the analytic counting probabilities
    g = ground_state()
    t, n = 1.5, 20000
    trajs = sample_batch(sym_model, g, t, 4242, n)
    counts = np.array([len(tr.records) for tr in trajs])
    for k in range(4):
        ev = Event(forward=free_channel(), side=exact_count(0.0, t, k), horizon=t)
        p = event_probability(sym_model, g, ev)
        phat = float(np.mean(counts == k))
        se = max(np.sqrt(p * (1 - p) / n), 1e-4)
        assert abs(phat - p) < 3 * se


def test_conditioning_consistency_split_resume(sym_model):
    # sampling [0, s) and resuming from the conditional state reproduces the
    # law of the full horizon within Monte Carlo resolution
    g = ground_state()
    s, t, n = 2.0, 2.0, 8000
    first = sample_batch(sym_model, g, s, 100, n)
    resumed = sample_batch(
        sym_model,
        np.array([tr.terminal_state for tr in first]),
        t,
        101,
        n,
    )
    tot = np.array([len(a.records) + len(b.records) for a, b in zip(first, resumed)])
    direct = sample_batch(sym_model, g, s + t, 102, n)
    dd = np.array([len(tr.records) for tr in direct])
    for k in range(4):
        p1 = float(np.mean(tot == k))
        p2 = float(np.mean(dd == k))
        se = np.sqrt((p1 * (1 - p1) + p2 * (1 - p2)) / n) + 1e-6
        assert abs(p1 - p2) < 3 * se


def test_initial_state_stack_validation(sym_model):
    with pytest.raises(ValueError):
        sample_batch(sym_model, np.zeros((3, 2, 2)), 1.0, 1, 4)
