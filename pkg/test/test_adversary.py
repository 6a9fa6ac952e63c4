'''
Initial configuration generators.
'''
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from popsim.adversary import COMPATIBLE, InitKind, _uniform_below, collecting_count, generate_initial
from popsim.engine import Params, RngStream, detect_correct, detect_silent
from popsim.exceptions import ConfigurationDomainError
from popsim.protocols import get_protocol
from popsim.protocols.linear_state import NextRank, Settled, SyntheticUnsettled, Unsettled
from popsim.protocols.linear_time import Collecting
from popsim.protocols.log_time import LogTimeState
from popsim.protocols.reset import Resetting


def params_for(protocol, n):
    return Params.for_population(n, protocol=protocol)


def test_init_kind_tags():
    assert InitKind.from_json('cai_worst') is InitKind.CAI_WORST
    assert InitKind.GHOST_ROSTER.to_json() == 'ghost_roster'
    with pytest.raises(ConfigurationDomainError):
        InitKind.from_json('worst_ever')


def test_cai_worst():
    config = generate_initial('cai_worst', 'cai', params_for('cai', 3), RngStream(0))
    assert sorted(state.rank for state in config) == [0, 0, 1]
    for n in (4, 7, 10):
        counts = Counter(state.rank for state in generate_initial(
            InitKind.CAI_WORST, 'cai', params_for('cai', n), RngStream(0)))
        assert counts[0] == 2
        assert counts[n - 1] == 0
        assert all(counts[rank] == 1 for rank in range(1, n - 1))


def test_rank_pairs_linear_state():
    config = generate_initial('rank_pairs', 'linear_state', params_for('linear_state', 4), RngStream(0))
    assert sorted(state.rank for state in config) == [1, 1, 2, 2]
    assert all(state.nextrank is NextRank.EMPTY for state in config)


def test_rank_pairs_odd_population():
    config = generate_initial('rank_pairs', 'linear_state', params_for('linear_state', 5), RngStream(0))
    assert sorted(state.rank for state in config) == [1, 1, 2, 2, 4]
    config = generate_initial('rank_pairs', 'linear_state', params_for('linear_state', 3), RngStream(0))
    assert sorted(state.rank for state in config) == [1, 1, 3]
    assert Settled(3, NextRank.FULL) in config.states


def test_false_full():
    params = params_for('linear_state', 3)
    config = generate_initial('false_full', 'linear_state', params, RngStream(0))
    assert list(config) == [Settled(1, NextRank.FULL), Settled(2, NextRank.FULL), Unsettled(12)]
    config = generate_initial('false_full', 'linear_state_synthetic', params_for('linear_state_synthetic', 3),
        RngStream(0))
    assert isinstance(config[2], SyntheticUnsettled)


def test_ghost_roster_linear_time():
    config = generate_initial('ghost_roster', 'linear_time', params_for('linear_time', 3), RngStream(5))
    names = {state.name for state in config}
    assert len(names) == 3
    ghosts = set()
    for state in config:
        assert isinstance(state, Collecting)
        assert len(state.roster) == 2
        ghosts |= state.roster - {state.name}
    assert len(ghosts) == 1
    assert not ghosts & names


def test_ghost_roster_log_time():
    config = generate_initial('ghost_roster', 'log_time', params_for('log_time', 4), RngStream(5))
    assert all(isinstance(state, LogTimeState) and len(state.roster) == 2 for state in config)


def test_mid_reset_mixes_reset_phases():
    params = params_for('linear_state', 8)
    config = generate_initial('mid_reset', 'linear_state', params, RngStream(3))
    triggered = [state for state in config if isinstance(state, Resetting) and state.resetcount == params.r_max]
    dormant = [state for state in config if isinstance(state, Resetting) and state.resetcount == 0]
    computing = [state for state in config if not isinstance(state, Resetting)]
    assert len(triggered) >= 2
    assert len(dormant) == 2
    assert len(computing) == 2


def test_stale_phase_spans_two_phases():
    config = generate_initial('stale_phase', 'log_time', params_for('log_time', 32), RngStream(8))
    phases = {state.clock.phase for state in config}
    assert len(phases) <= 2 and max(phases) - min(phases) <= 1
    assert all((state.rank, state.name) in state.roster for state in config)


@pytest.mark.parametrize('protocol, n', [
    ('cai', 6), ('linear_time', 6), ('linear_state', 6), ('linear_state_synthetic', 6), ('log_time', 6), ('obs', 3),
])
def test_correct_ranked(protocol, n):
    config = generate_initial('correct_ranked', protocol, params_for(protocol, n), RngStream(1))
    assert detect_correct(protocol, config)
    if get_protocol(protocol).silent:
        assert detect_silent(protocol, config)


def test_uniform_random_roles_follow_state_counts():
    params = params_for('linear_state', 64)
    rng = RngStream(8)
    roles = Counter(type(state) for _ in range(50) for state in generate_initial('uniform_random', 'linear_state', params, rng))
    total = len(get_protocol('linear_state').enumerate_states(params))
    expected = {
        Settled: 2 * 64 - 1,
        Unsettled: params.error_init + 1,
        Resetting: params.r_max + params.d_max + 1,
    }
    assert sum(expected.values()) == total
    for role, count in expected.items():
        assert abs(roles[role] / (50 * 64) - count / total) < 0.03


def test_uniform_random_linear_time_favours_full_rosters():
    params = params_for('linear_time', 64)
    config = generate_initial('uniform_random', 'linear_time', params, RngStream(9))
    assert all(isinstance(state, Collecting) for state in config)
    assert sum(len(state.roster) for state in config) / 64 > 63.9


@pytest.mark.parametrize('protocol, overrides, count', [
    ('linear_time', dict(name_space=3, r_max=2, d_max=2), 2 * 3 * 3 + 5),
    ('linear_state', dict(r_max=2, d_max=2), 3 + 9 + 5),
])
def test_uniform_random_covers_states_evenly(protocol, overrides, count):
    params = Params.for_population(2, protocol=protocol, **overrides)
    states = get_protocol(protocol).enumerate_states(params)
    assert len(states) == count
    rng = RngStream(10)
    seen = Counter(state for _ in range(100 * count) for state in generate_initial('uniform_random', protocol, params, rng))
    assert set(seen) == set(states)
    assert stats.chisquare([seen[state] for state in states]).pvalue > 1e-3


def test_collecting_count():
    assert collecting_count(Params.for_population(2, protocol='linear_time', name_space=3)) == 18
    assert collecting_count(Params.for_population(3, protocol='linear_time', name_space=4)) == 3 * 4 * (1 + 3 + 3)


def test_uniform_below_reaches_past_64_bits():
    rng = RngStream(11)
    draws = [_uniform_below(2 ** 70, rng) for _ in range(200)]
    assert all(0 <= draw < 2 ** 70 for draw in draws)
    assert max(draws) >= 2 ** 64
    assert all(_uniform_below(3, rng) < 3 for _ in range(50))


@pytest.mark.parametrize('protocol, kind', [
    ('cai', 'ghost_roster'), ('linear_time', 'cai_worst'), ('obs', 'rank_pairs'), ('log_time', 'false_full'),
    ('linear_state', 'stale_phase'),
])
def test_incompatible_kind(protocol, kind):
    n = 3
    with pytest.raises(ConfigurationDomainError):
        generate_initial(kind, protocol, params_for(protocol, n), RngStream(0))


def test_obs_needs_three_agents():
    with pytest.raises(ConfigurationDomainError):
        generate_initial('all_same', 'obs', params_for('obs', 4), RngStream(0))


@settings(max_examples=60, deadline=None)
@given(
    protocol=st.sampled_from(sorted(COMPATIBLE)),
    n=st.integers(min_value=2, max_value=9),
    seed=st.integers(min_value=0, max_value=2 ** 32),
    data=st.data(),
)
def test_generated_states_are_valid_and_reproducible(protocol, n, seed, data):
    if protocol == 'obs':
        n = 3
    kind = data.draw(st.sampled_from(COMPATIBLE[protocol]))
    params = params_for(protocol, n)
    first = generate_initial(kind, protocol, params, RngStream(seed))
    second = generate_initial(kind, protocol, params, RngStream(seed))
    assert first == second
    assert len(first) == n
    proto = get_protocol(protocol)
    for state in first:
        proto.validate(state, params)
