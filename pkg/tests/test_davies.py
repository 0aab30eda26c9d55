import numpy as np
import pytest

from conftest import random_model
from resfluor.davies import davies_map, dyson_truncation_tail, event_probability
from resfluor.events import (
    ChannelEvent,
    Event,
    Window,
    concat_events,
    exact_count,
    free_channel,
    zero_photons,
)
from resfluor.linalg import (
    EXCITED_PROJ,
    I2,
    LOWER,
    ad_map,
    apply_superop,
    choi_matrix,
    excited_state,
    frobenius_dist,
    ground_state,
    vec,
)
from resfluor.model import (
    build_model,
    forward_jump,
    lindblad_generator,
    master_generator,
    master_map,
    no_count_map,
    no_jump_operator,
    no_side_count_map,
    side_jump,
)

SQ2 = 2.0 ** -0.5


def _full_event(t):
    return Event(forward=free_channel(), side=free_channel(), horizon=t)


def _zero_event(t):
    return Event(forward=zero_photons(), side=zero_photons(), horizon=t)


@pytest.mark.parametrize("seed", range(10))
def test_zero_count_event_is_contraction_sandwich(seed):
    rng = np.random.default_rng(500 + seed)
    m = random_model(rng)
    t = rng.uniform(1e-3, 2.0)
    res = davies_map(m, _zero_event(t))
    assert frobenius_dist(res.matrix, ad_map(no_jump_operator(m, t))) < 1e-10
    assert res.quad_error == 0.0


def test_full_event_is_master_map(sym_model):
    for t in (0.2, 0.9):
        res = davies_map(sym_model, _full_event(t))
        assert frobenius_dist(res.matrix, master_map(sym_model, t)) < 1e-12
        assert frobenius_dist(apply_superop(res.matrix, I2), I2) < 1e-13


def test_probability_corners():
    m0 = build_model(SQ2, SQ2, 0.0)
    assert event_probability(m0, ground_state(), _zero_event(2.0)) == pytest.approx(1.0)
    t = 1.4
    assert event_probability(m0, excited_state(), _zero_event(t)) == pytest.approx(
        np.exp(-t), abs=1e-12
    )
    # branching ratio: exactly one side photon ever, no forward photon
    T = 40.0
    ev = Event(forward=zero_photons(), side=exact_count(0.0, T, 1), horizon=T)
    assert event_probability(m0, excited_state(), ev) == pytest.approx(
        abs(m0.kappa_s) ** 2, abs=1e-9
    )


def test_sigma_additivity_on_side_counts(sym_model):
    t = 1.0
    total = np.zeros(4, dtype=complex)
    for n in range(7):
        ev = Event(forward=free_channel(), side=exact_count(0.0, t, n), horizon=t)
        total = total + davies_map(sym_model, ev).matrix @ vec(I2)
    assert np.linalg.norm(total - vec(I2)) < 1e-8


def test_composition_law_one_photon_windows(sym_model):
    early = Event(forward=zero_photons(), side=exact_count(0.1, 0.3, 1), horizon=0.4)
    late = Event(forward=exact_count(0.05, 0.25, 1), side=zero_photons(), horizon=0.35)
    # the earlier window's map sits on the left of the matrix product
    lhs = davies_map(sym_model, early).matrix @ davies_map(sym_model, late).matrix
    combined = concat_events(early, late)
    rhs = davies_map(sym_model, combined).matrix
    assert frobenius_dist(lhs, rhs) < 1e-8


def test_complete_positivity_of_counting_maps(sym_model):
    t = 0.8
    ev1 = Event(forward=free_channel(), side=exact_count(0.1, 0.6, 1), horizon=t)
    candidates = [
        no_count_map(sym_model, t),
        forward_jump(sym_model),
        side_jump(sym_model),
        no_side_count_map(sym_model, t),
        master_map(sym_model, t),
        davies_map(sym_model, ev1).matrix,
    ]
    for S in candidates:
        C = choi_matrix(S)
        assert np.linalg.eigvalsh((C + C.conj().T) / 2).min() >= -1e-10


def test_continuity_at_zero(sym_model):
    L = master_generator(sym_model)
    for A in (I2, EXCITED_PROJ, LOWER, LOWER + LOWER.conj().T):
        rate = np.linalg.norm(apply_superop(L, A))
        for t in (1e-3, 4e-3, 1.6e-2, 6.4e-2):
            dist = frobenius_dist(
                apply_superop(davies_map(sym_model, _full_event(t)).matrix, A), A
            )
            assert dist <= 1.05 * t * rate + 1e-12


def test_dyson_route_matches_exponential(sym_model):
    t, cap = 0.15, 6
    res = davies_map(sym_model, _full_event(t), n_max=cap, expansion="dyson")
    tail = dyson_truncation_tail(sym_model, t, cap)
    dist = frobenius_dist(res.matrix, master_map(sym_model, t))
    assert dist <= tail + res.quad_error + 1e-9
    assert res.quad_error < 1e-6


def test_dyson_and_resum_agree_on_pinned_events(sym_model):
    ev = Event(forward=free_channel(), side=exact_count(0.0, 0.2, 1), horizon=0.2)
    a = davies_map(sym_model, ev, expansion="resum").matrix
    b = davies_map(sym_model, ev, n_max=6, expansion="dyson").matrix
    assert frobenius_dist(a, b) < dyson_truncation_tail(sym_model, 0.2, 5) + 1e-9


def test_capacity_and_validation_errors(sym_model):
    with pytest.raises(ValueError):
        davies_map(sym_model, Event(
            forward=exact_count(0.0, 1.0, 4),
            side=exact_count(0.0, 1.0, 3),
            horizon=1.0,
        ), n_max=6)
    with pytest.raises(ValueError):
        davies_map(sym_model, _full_event(0.5), expansion="nope")
    with pytest.raises(ValueError):
        ChannelEvent(windows=(Window(0.0, 0.6, 1), Window(0.5, 1.0, 1)))


def test_probability_is_additive_over_disjoint_counts(sym_model):
    t = 0.7
    rho = ground_state()
    ps = [
        event_probability(
            sym_model,
            rho,
            Event(forward=free_channel(), side=exact_count(0.0, t, n), horizon=t),
        )
        for n in range(5)
    ]
    assert all(p >= -1e-10 for p in ps)
    assert sum(ps) == pytest.approx(1.0, abs=1e-8)


def test_multi_window_event_splits_counts(sym_model):
    # one photon somewhere in [0, 1) equals split over [0, 0.4) and [0.4, 1)
    t = 1.0
    whole = davies_map(
        sym_model,
        Event(forward=free_channel(), side=exact_count(0.0, t, 1), horizon=t),
    ).matrix
    a = davies_map(
        sym_model,
        Event(
            forward=free_channel(),
            side=ChannelEvent(windows=(Window(0.0, 0.4, 1), Window(0.4, 1.0, 0))),
            horizon=t,
        ),
    ).matrix
    b = davies_map(
        sym_model,
        Event(
            forward=free_channel(),
            side=ChannelEvent(windows=(Window(0.0, 0.4, 0), Window(0.4, 1.0, 1))),
            horizon=t,
        ),
    ).matrix
    assert frobenius_dist(whole, a + b) < 1e-10


def test_zero_horizon_is_identity(sym_model):
    res = davies_map(sym_model, _zero_event(0.0))
    assert frobenius_dist(res.matrix, np.eye(4)) == 0.0
