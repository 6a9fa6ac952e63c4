'''
Scheduler, execution loop and time measurement.
'''
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from popsim.engine import (
    Configuration, Params, RngStream, RunMetrics, Simulation, decode_pair, default_horizon,
    detect_correct, detect_silent, interact, measure_convergence, pick_pair, run, step,
)
from popsim.exceptions import InternalConsistencyError, InvalidPopulationError, UnsupportedProtocolError
from popsim.protocols.cai import CaiState
from popsim.protocols.linear_state import NextRank, Settled, Unsettled
from popsim.protocols.linear_time import Collecting
from popsim.protocols.log_time import LogTimeState
from popsim.protocols.phase_clock import PhaseClockFields


def cai_config(*ranks):
    return Configuration.of(CaiState(rank) for rank in ranks)


def test_params_derived_constants():
    params = Params.for_population(10, protocol='linear_state')
    assert params.log_n == 3
    assert params.r_max == 180
    assert params.d_max == 1224
    assert params.c_max == 72
    assert params.error_init == 40
    assert params.name_space == 1000
    assert not params.scaled
    assert params.max_interactions > 0


def test_params_overrides_are_marked_scaled():
    params = Params.for_population(3, protocol='linear_time', name_space=4, r_max=2, d_max=2)
    assert params.scaled
    assert params.to_json()['scaled'] is True


def test_params_rejects_small_population():
    with pytest.raises(InvalidPopulationError):
        Params.for_population(1)
    with pytest.raises(InvalidPopulationError):
        Params.for_population(4, name_space=3)


def test_decode_pair_covers_every_ordered_pair():
    for n in range(2, 7):
        pairs = [decode_pair(code, n) for code in range(n * (n - 1))]
        assert len(set(pairs)) == n * (n - 1)
        assert all(i != j and 0 <= i < n and 0 <= j < n for i, j in pairs)


def test_pick_pair_two_agents():
    rng = RngStream(7)
    seen = Counter(pick_pair(rng, 2) for _ in range(2000))
    assert set(seen) == {(0, 1), (1, 0)}
    assert 800 < seen[(0, 1)] < 1200


def test_pick_pair_is_uniform():
    rng = RngStream(11)
    seen = Counter(pick_pair(rng, 3) for _ in range(60_000))
    assert len(seen) == 6
    _, p_value = stats.chisquare([seen[pair] for pair in sorted(seen)])
    assert p_value > 0.001


def test_pair_codes_are_uniform():
    rng = RngStream(12)
    codes = rng.pair_codes(4, 120_000)
    counts = Counter(codes.tolist())
    _, p_value = stats.chisquare([counts[code] for code in range(12)])
    assert p_value > 0.001
    assert rng.position == 120_000


def test_pick_pair_rejects_single_agent():
    with pytest.raises(InvalidPopulationError):
        pick_pair(RngStream(0), 1)


def test_streams_are_reproducible():
    first = RngStream.substream(42, 16, 3)
    second = RngStream.substream(42, 16, 3)
    assert [first.uniform(1000) for _ in range(20)] == [second.uniform(1000) for _ in range(20)]
    draws = [RngStream.substream(42, 16, trial).uniform(10 ** 9) for trial in range(5)]
    assert len(set(draws)) == 5


def test_certain_bernoulli_consumes_nothing():
    rng = RngStream(3)
    assert rng.bernoulli(1.0)
    assert not rng.bernoulli(0.0)
    assert rng.position == 0


def test_interact_applies_cai_rule_to_responder():
    params = Params.for_population(5, protocol='cai')
    config = cai_config(3, 3, 1, 0, 2)
    result = interact('cai', config, params, 0, 1, RngStream(0))
    assert [state.rank for state in result] == [3, 4, 1, 0, 2]


def test_interact_rejects_self_interaction():
    params = Params.for_population(3, protocol='cai')
    with pytest.raises(InvalidPopulationError):
        interact('cai', cai_config(0, 1, 2), params, 1, 1, RngStream(0))


def test_interact_traps_invalid_states():
    params = Params.for_population(3, protocol='cai')
    with pytest.raises(InternalConsistencyError):
        interact('cai', cai_config(0, 1, 7), params, 0, 2, RngStream(0))


def test_step_on_silent_cai_changes_nothing():
    params = Params.for_population(3, protocol='cai')
    config = cai_config(0, 1, 2)
    rng = RngStream(5)
    for index in range(1, 20):
        successor, event = step('cai', config, params, rng, index)
        assert successor == config
        assert event.index == index
        assert event.initiator != event.responder


@settings(max_examples=200, deadline=None)
@given(
    ranks=st.lists(st.integers(min_value=0, max_value=5), min_size=6, max_size=6),
    seed=st.integers(min_value=0, max_value=2 ** 32),
)
def test_step_only_touches_the_chosen_pair(ranks, seed):
    params = Params.for_population(6, protocol='cai')
    config = cai_config(*ranks)
    successor, event = step('cai', config, params, RngStream(seed))
    for agent in range(6):
        if agent not in (event.initiator, event.responder):
            assert successor[agent] == config[agent]
    assert successor[event.initiator] == config[event.initiator]


def test_run_two_agents_resolves_in_one_interaction():
    params = Params.for_population(2, protocol='cai')
    result = run('cai', cai_config(0, 0), params, RngStream(9))
    assert result.metrics.silence_interaction == 1
    assert result.metrics.interactions == 1
    assert sorted(state.rank for state in result.config) == [0, 1]
    assert not result.metrics.timed_out


def test_run_cai_worst_case_mean():
    params = Params.for_population(3, protocol='cai')
    total = 0
    trials = 10_000
    for seed in range(trials):
        result = run('cai', cai_config(0, 0, 1), params, RngStream(seed))
        total += result.metrics.silence_interaction
    assert abs(total / trials - 6.0) < 0.2


def test_run_with_empty_horizon_times_out():
    for protocol, config in (
        ('cai', cai_config(0, 1, 2)),
        ('linear_state', Configuration.of(Settled(rank, NextRank.FULL) for rank in (1, 2, 3))),
    ):
        params = Params.for_population(3, protocol=protocol, max_interactions=0)
        result = run(protocol, config, params, RngStream(0))
        assert result.metrics.timed_out
        assert result.metrics.interactions == 0


def test_run_is_deterministic_for_a_seed():
    params = Params.for_population(8, protocol='cai')
    config = cai_config(0, 0, 0, 0, 1, 1, 2, 2)
    first = run('cai', config, params, RngStream(21))
    second = run('cai', config, params, RngStream(21))
    assert first.metrics == second.metrics
    assert first.config == second.config


def test_parallel_time_is_exact():
    metrics = RunMetrics(n=7, interactions=100)
    assert metrics.parallel_time == Fraction(100, 7)
    assert metrics.parallel_time * 7 == metrics.interactions
    assert metrics.to_json()['parallel_time'] == 14.285714


def test_run_records_a_trace():
    params = Params.for_population(4, protocol='cai')
    result = run('cai', cai_config(0, 0, 1, 2), params, RngStream(2), record_trace=True)
    timeline = result.timeline
    assert timeline is not None
    assert len(timeline) == result.metrics.interactions + 1
    assert not timeline[0] and timeline[-1]
    last_false = max(index for index, correct in enumerate(timeline) if not correct)
    assert result.metrics.convergence_interaction == last_false + 1


def test_default_horizon_follows_protocol():
    params = Params.for_population(5, protocol='cai')
    assert params.max_interactions == default_horizon('cai', params)
    assert default_horizon('cai', params) == 10 * 5 ** 3 + params.tail_margin
    assert default_horizon(None, params) == 20 * 5 ** 3 * params.log_n


def test_simulation_tags_its_logger():
    params = Params.for_population(4, protocol='cai')
    simulation = Simulation('cai', params, RngStream(5))
    assert simulation.protocol.name == 'cai'
    assert simulation._logger.extra['protocol'] == 'cai'
    assert simulation._logger.extra['n'] == 4
    assert simulation._logger.extra['trial'] is None
    assert Simulation('cai', params, RngStream(5), trial=3)._logger.extra['trial'] == 3
    result = simulation.run(cai_config(0, 0, 1, 1))
    assert detect_silent('cai', result.config)
    assert result.metrics == run('cai', cai_config(0, 0, 1, 1), params, RngStream(5)).metrics


def test_run_calls_observer_for_every_interaction():
    params = Params.for_population(4, protocol='cai')
    events = []
    result = run('cai', cai_config(0, 0, 0, 0), params, RngStream(4),
        observer=lambda event, before, after: events.append(event.index))
    assert events == list(range(1, result.metrics.interactions + 1))


def test_detect_correct_examples():
    assert detect_correct('cai', cai_config(2, 0, 1))
    assert not detect_correct('linear_state', Configuration.of(
        [Settled(1, NextRank.FULL), Settled(2, NextRank.FULL), Unsettled(12)]))
    clock = PhaseClockFields(0, 10)
    assert not detect_correct('log_time', Configuration.of(
        LogTimeState(rank, 5 + index, frozenset(), clock) for index, rank in enumerate((1, 1, 3))))


def test_detect_silent_examples():
    assert detect_silent('cai', cai_config(0, 1, 2))
    assert not detect_silent('linear_state', Configuration.of(
        [Settled(1, NextRank.FULL), Settled(2, NextRank.EMPTY), Settled(3, NextRank.FULL)]))
    names = frozenset((4, 9, 20))
    assert detect_silent('linear_time', Configuration.of(
        [Collecting(1, 4, names), Collecting(2, 9, names), Collecting(3, 20, names)]))


def test_detect_silent_rejects_non_silent_protocol():
    clock = PhaseClockFields(0, 10)
    config = Configuration.of(LogTimeState(rank, rank, frozenset(), clock) for rank in (1, 2, 3))
    with pytest.raises(UnsupportedProtocolError):
        detect_silent('log_time', config)


def test_measure_convergence_examples():
    params = Params.for_population(6, protocol='cai', tail_margin=3)
    fields = measure_convergence([False, False, True, True, True, True], params)
    assert fields.convergence_interaction == 2
    assert fields.stable_tail

    params = Params.for_population(6, protocol='cai', tail_margin=2)
    assert measure_convergence([False, True, False, True, True], params).convergence_interaction == 3
    assert measure_convergence([True] * 5, params).convergence_interaction == 0

    fields = measure_convergence([False] * 5, params)
    assert fields.convergence_interaction is None
    assert not fields.stable_tail
