import numpy as np
import pytest

from rscycle.model import FeedbackSpec, Population, RegionParams, ValidationError
from rscycle.simulate import (
    EventKind,
    NoiseSpec,
    SimulationError,
    cell_speeds,
    next_event,
    simulate_exact,
    simulate_sde,
)

RP = RegionParams(s=0.2, r=0.6)
POS = FeedbackSpec.linear(0.6)
ZERO = FeedbackSpec.none()


def test_cell_speeds_frozen():
    # one cell of two in S -> I = 0.5, f = 0.3; only the R cell is boosted
    pop = Population(np.array([0.1, 0.7]))
    np.testing.assert_allclose(cell_speeds(pop, RP, POS), [1.0, 1.3])


def test_cell_speeds_without_signal():
    pop = Population(np.array([0.3, 0.7]))  # nobody in S
    np.testing.assert_allclose(cell_speeds(pop, RP, POS), [1.0, 1.0])


def test_next_event_frozen():
    # cell 0 at 0.1 reaches s=0.2 after 0.1; cell 1 at 0.55 reaches r=0.6
    # after 0.05 (both at unit speed).  The R-entry wins.
    pop = Population(np.array([0.1, 0.55]))
    dt, hits = next_event(pop, RP, POS)
    assert dt == pytest.approx(0.05)
    assert hits == [(1, EventKind.HIT_R_START)]


def test_next_event_batches_ties():
    # cell 0 at 0.7 reaches 1 after 0.3; cell 1 at 0.3 reaches r after 0.3
    pop = Population(np.array([0.7, 0.3]))
    dt, hits = next_event(pop, RP, POS)
    assert dt == pytest.approx(0.3)
    kinds = {(c, k) for c, k in hits}
    assert kinds == {(0, EventKind.HIT_CYCLE_END), (1, EventKind.HIT_R_START)}


def test_single_cell_period_is_one_regardless_of_feedback():
    # a lone cell never sees a signal while in R, so its period is exactly 1
    for fs in (ZERO, POS, FeedbackSpec.linear(-0.6)):
        traj = simulate_exact(Population(np.array([0.0])), RP, fs, 1.0)
        assert traj.states[-1][0] == 0.0
        kinds = [e.kind for e in traj.events]
        assert kinds == [
            EventKind.HIT_S_END,
            EventKind.HIT_R_START,
            EventKind.HIT_CYCLE_END,
        ]
        times = [e.time for e in traj.events]
        np.testing.assert_allclose(times, [0.2, 0.6, 1.0])


def test_wrap_lands_exactly_on_zero():
    traj = simulate_exact(Population(np.array([0.9])), RP, ZERO, 0.1)
    assert traj.states[-1][0] == 0.0


def test_boosted_cell_slows_when_signal_stops():
    # cell 1 runs at 1.3 only while cell 0 is still in S (until t = 0.2,
    # position 0.6 + 0.26 = 0.86), then finishes the last 0.14 at unit
    # speed: cycle end at t = 0.34, not 0.4 / 1.3
    pop = Population(np.array([0.0, 0.6]))
    traj = simulate_exact(pop, RP, POS, 0.35)
    cycle_hits = [e for e in traj.events if e.kind == EventKind.HIT_CYCLE_END]
    assert len(cycle_hits) == 1
    assert cycle_hits[0].cell == 1
    assert cycle_hits[0].time == pytest.approx(0.34, abs=1e-12)


def test_piecewise_linear_between_events():
    pop = Population(np.array([0.0, 0.6]))
    ts = np.linspace(0.0, 0.1, 11)
    traj = simulate_exact(pop, RP, POS, 0.1, sample=ts)
    # no boundary is reached before t = 0.1, so motion is affine
    np.testing.assert_allclose(traj.states[:, 0], ts, atol=1e-14)
    np.testing.assert_allclose(traj.states[:, 1], 0.6 + 1.3 * ts, atol=1e-14)


def test_winding_number_preserved():
    # adjacent-gap sums around the circle stay at exactly one turn, so no
    # cell ever overtakes another
    rng = np.random.default_rng(7)
    for trial in range(25):
        n = rng.integers(3, 12)
        s = rng.uniform(0.05, 0.4)
        r = rng.uniform(s + 0.1, 0.95)
        gamma = rng.uniform(-0.8, 0.8)
        rp = RegionParams(s=s, r=r)
        fs = FeedbackSpec.linear(gamma)
        phases = np.sort(rng.random(n))
        traj = simulate_exact(Population(phases), rp, fs, rng.uniform(0.5, 3.0))
        final = traj.states[-1]
        gaps = (np.roll(final, -1) - final) % 1.0
        assert abs(gaps.sum() - 1.0) < 1e-9


def test_event_budget_guard():
    pop = Population(np.sort(np.random.default_rng(0).random(20)))
    with pytest.raises(SimulationError):
        simulate_exact(pop, RP, POS, 50.0, max_events=10)


def test_zero_duration_rejected():
    with pytest.raises(ValidationError):
        simulate_exact(Population(np.array([0.1])), RP, ZERO, 0.0)


def test_sample_times_validation():
    pop = Population(np.array([0.1]))
    with pytest.raises(ValidationError):
        simulate_exact(pop, RP, ZERO, 1.0, sample=[0.5, 0.2])
    with pytest.raises(ValidationError):
        simulate_exact(pop, RP, ZERO, 1.0, sample=[0.5, 1.5])


def test_noise_spec_validation():
    with pytest.raises(ValidationError):
        NoiseSpec(sigma=-1.0, dt=0.01)
    with pytest.raises(ValidationError):
        NoiseSpec(sigma=0.1, dt=0.0)
    with pytest.raises(ValidationError):
        NoiseSpec(sigma=0.1, dt=0.2)


def test_sde_deterministic_under_seed():
    pop = Population(np.random.default_rng(1).random(30))
    spec = NoiseSpec(sigma=1e-3, dt=0.01)
    a = simulate_sde(pop, RP, POS, spec, 2.0, seed=42)
    b = simulate_sde(pop, RP, POS, spec, 2.0, seed=42)
    c = simulate_sde(pop, RP, POS, spec, 2.0, seed=43)
    np.testing.assert_array_equal(a.states, b.states)
    assert not np.array_equal(a.states, c.states)


def test_sde_noiseless_converges_first_order():
    # with sigma = 0 the stepper is plain Euler on a piecewise-constant
    # field; halving dt should roughly halve the endpoint error
    rng = np.random.default_rng(5)
    phases = np.sort(rng.random(40))
    pop = Population(phases)
    fs = FeedbackSpec.linear(0.5)
    duration = 2.0
    exact = simulate_exact(pop, RP, fs, duration).states[-1]

    def endpoint_error(dt):
        traj = simulate_sde(pop, RP, fs, NoiseSpec(sigma=0.0, dt=dt), duration, seed=0)
        diff = np.abs(traj.states[-1] - exact)
        return np.minimum(diff, 1.0 - diff).max()  # circle distance

    e1 = endpoint_error(0.02)
    e2 = endpoint_error(0.01)
    e3 = endpoint_error(0.005)
    assert e2 < e1
    assert e3 < e2
    # order ~1: ratio of successive errors in a loose band around 2
    assert 1.2 < e1 / e3


def test_sde_respects_sample_every():
    pop = Population(np.array([0.1, 0.4, 0.8]))
    spec = NoiseSpec(sigma=0.0, dt=0.01)
    traj = simulate_sde(pop, RP, ZERO, spec, 1.0, seed=0, sample_every=25)
    # samples at step 0, 25, 50, 75, 100
    np.testing.assert_allclose(traj.times, [0.0, 0.25, 0.5, 0.75, 1.0])


def test_sde_final_population_round_trip():
    pop = Population(np.array([0.2, 0.9]), weights=np.array([2.0, 1.0]))
    spec = NoiseSpec(sigma=1e-4, dt=0.01)
    traj = simulate_sde(pop, RP, POS, spec, 0.5, seed=3)
    out = traj.final_population()
    assert np.all((out.phases >= 0.0) & (out.phases < 1.0))
    np.testing.assert_array_equal(out.weights, pop.weights)
