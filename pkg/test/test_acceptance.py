'''
Long statistical checks of the protocols' scaling laws and of the baseline
processes. Deselected by default; run with ``pytest -m slow``.
'''
import logging
import math
import statistics

import numpy as np
import pytest

from popsim.adversary import generate_initial
from popsim.analysis import (
    epidemic_tail_fraction, epidemic_trial, fit_loglog, harmonic, interaction_count_window,
    reset_recovery_trial, roll_call_trial, standard_error, summarize,
)
from popsim.engine import Configuration, Params, RngStream, decode_pair, run
from popsim.oracle import (
    Target, barrier_rank, build_config_graph, barrier_sum_holds, expected_hitting_time, null_transition, rank_counts,
    verify_self_stabilizing,
)
from popsim.protocols import get_protocol
from popsim.protocols.cai import CaiState
from popsim.protocols.linear_state import NextRank, Settled
from popsim.protocols.linear_time import Collecting
from popsim.protocols.reset import Resetting


pytestmark = pytest.mark.slow

logger = logging.getLogger('popsim.test_acceptance')


def test_epidemic_mean_at_one_hundred():
    n = 100
    rng = RngStream.substream(1, n)
    samples = [epidemic_trial(n, rng) for _ in range(10_000)]
    expected = (n - 1) * harmonic(n - 1)
    assert abs(np.mean(samples) - expected) <= 0.05 * expected


def test_roll_call_constant():
    ratios = {}
    for n in (64, 128, 256, 512):
        rng = RngStream.substream(2, n)
        samples = [roll_call_trial(n, rng) for _ in range(2000)]
        ratios[n] = float(np.mean(samples)) / (n * math.log(n))
    logger.info('roll call mean / (n ln n): %s', ratios)
    assert 1.30 <= ratios[256] <= 1.70
    assert abs(ratios[512] - 1.5) <= abs(ratios[64] - 1.5) + 0.05


@pytest.mark.parametrize('n', [3, 4, 5])
def test_cai_worst_case_exact_and_sampled(n):
    params = Params.for_population(n, protocol='cai')
    start = generate_initial('cai_worst', 'cai', params, RngStream(0))
    exact = expected_hitting_time(build_config_graph('cai', params), start, Target.SILENT)
    assert exact == pytest.approx((n - 1) * math.comb(n, 2), rel=1e-9)
    samples = [run('cai', start, params, RngStream.substream(3, n, trial)).metrics.silence_interaction
        for trial in range(10_000)]
    assert abs(np.mean(samples) - exact) <= 3 * standard_error(samples)


def test_cai_all_same_sampled_against_exact():
    params = Params.for_population(3, protocol='cai')
    start = Configuration.of([CaiState(0)] * 3)
    exact = expected_hitting_time(build_config_graph('cai', params), start, Target.SILENT)
    samples = [run('cai', start, params, RngStream.substream(4, trial)).metrics.silence_interaction
        for trial in range(100_000)]
    assert abs(np.mean(samples) - exact) <= 3 * standard_error(samples)


def _parallel_means(protocol, init, ns, trials, seed):
    means = []
    for n in ns:
        params = Params.for_population(n, protocol=protocol)
        times = []
        for trial in range(trials):
            rng = RngStream.substream(seed, n, trial)
            config = generate_initial(init, protocol, params, rng)
            metrics = run(protocol, config, params, rng).metrics
            assert not metrics.timed_out
            finished = metrics.silence_interaction
            if finished is None:
                finished = metrics.convergence_interaction
            times.append(finished / n)
        means.append((n, float(np.mean(times))))
    logger.info('%s from %s: %s', protocol, init, means)
    return means


def test_cai_parallel_time_is_quadratic():
    fit = fit_loglog(_parallel_means('cai', 'cai_worst', (16, 32, 64, 128), 50, 5))
    assert 1.85 <= fit.slope <= 2.15


def _planted_collision(n, rng):
    ''' Fresh singleton rosters where agents 0 and 1 share a name. '''
    params = Params.for_population(n, protocol='linear_time')
    names = [state.name for state in generate_initial('correct_ranked', 'linear_time', params, rng)]
    names[1] = names[0]
    return params, [Collecting(1, name, frozenset((name,))) for name in names]


def _collision_detection_time(n, rng):
    ''' Interactions until the two agents sharing a name meet and trigger a reset. '''
    params, states = _planted_collision(n, rng)
    proto = get_protocol('linear_time')
    index = 0
    while True:
        index += 1
        i, j = decode_pair(rng.uniform(n * (n - 1)), n)
        states[i], states[j] = proto.transition(states[i], states[j], params, rng)
        if isinstance(states[i], Resetting) or isinstance(states[j], Resetting):
            return index


def test_linear_time_collision_detection_time_is_linear():
    ''' Time for a planted name collision to be noticed, which is the part of
    linear-time ranking that grows with n at these sizes. '''
    means = []
    for n in (16, 32, 64, 128):
        times = [_collision_detection_time(n, RngStream.substream(6, n, trial)) / n for trial in range(50)]
        means.append((n, float(np.mean(times))))
    fit = fit_loglog(means)
    assert 0.85 <= fit.slope <= 1.25


def test_linear_time_silence_after_planted_collision():
    ''' Full silence time from the same start. The dormancy delay of
    Propagate-Reset, ``d_max`` interactions per agent, outweighs the linear
    term at these sizes, so only an upper bound on the exponent holds. '''
    means = []
    for n in (16, 32, 64, 128):
        times = []
        for trial in range(20):
            rng = RngStream.substream(16, n, trial)
            params, states = _planted_collision(n, rng)
            metrics = run('linear_time', Configuration.of(states), params, rng).metrics
            assert not metrics.timed_out
            assert metrics.reset_triggers >= 1
            times.append(metrics.silence_interaction / n)
        means.append((n, float(np.mean(times))))
    fit = fit_loglog(means)
    logger.info('linear_time silence after a planted collision: %s, slope=%.3f', means, fit.slope)
    assert fit.slope <= 1.25
    assert all(mean >= Params.for_population(n).d_max / 3 for n, mean in means)


def test_linear_state_parallel_time_is_n_log_n():
    means = _parallel_means('linear_state', 'rank_pairs', (16, 32, 64, 128), 50, 7)
    fit = fit_loglog(means)
    assert 1.0 <= fit.slope <= 1.35
    normalized = [mean / math.log(n) / n for n, mean in means]
    assert max(normalized) <= 3 * min(normalized)


def test_log_time_stabilization_is_logarithmic():
    means = _parallel_means('log_time', 'stale_phase', (32, 64, 128, 256, 512), 20, 8)
    normalized = [mean / math.log(n) for n, mean in means]
    assert max(normalized) <= 3 * min(normalized)
    fit = fit_loglog(means)
    assert -0.2 <= fit.slope <= 0.35


def test_exact_verification_at_full_constants():
    for n in (2, 3, 4):
        assert verify_self_stabilizing(build_config_graph('cai', Params.for_population(n, protocol='cai'))).ok
    report = verify_self_stabilizing(build_config_graph('obs', Params.for_population(3, protocol='obs')))
    assert report.ok and report.silent_configs == 5
    params = Params.for_population(2, protocol='linear_time', name_space=4)
    report = verify_self_stabilizing(build_config_graph('linear_time', params))
    assert report.ok
    mutant = Params.for_population(4, protocol='saturating_cai')
    assert not verify_self_stabilizing(build_config_graph('saturating_cai', mutant)).ok


def test_barrier_rank_on_random_configurations():
    rng = RngStream(9)
    for _ in range(10_000):
        n = 2 + rng.uniform(5)
        config = Configuration.of(CaiState(rng.uniform(n)) for _ in range(n))
        k = barrier_rank(config)
        assert rank_counts(config, n)[k] <= 1


def test_barrier_holds_along_trajectories():
    n = 12
    params = Params.for_population(n, protocol='cai')
    for trial in range(20):
        rng = RngStream.substream(10, trial)
        config = generate_initial('uniform_random', 'cai', params, rng)
        k = barrier_rank(config)
        counts = rank_counts(config, n)

        def observe(event, before, after):
            for old, new in zip(before, after):
                counts[old.rank] -= 1
                counts[new.rank] += 1
            assert barrier_sum_holds(counts, k)
            assert counts[k] <= 1

        run('cai', config, params, rng, observer=observe)


def test_log_time_phases_and_names():
    n = 32
    params = Params.for_population(n, protocol='log_time')
    for trial in range(3):
        rng = RngStream.substream(11, trial)
        config = generate_initial('stale_phase', 'log_time', params, rng)

        def observe(event, before, after):
            for old, new in zip(before, after):
                assert new.clock.phase >= old.clock.phase
                if new.clock.phase == old.clock.phase:
                    assert (new.rank, new.name) == (old.rank, old.name)

        result = run('log_time', config, params, rng, observer=observe)
        assert not result.metrics.timed_out


def test_linear_state_empty_count_never_grows_without_resets():
    n = 32
    params = Params.for_population(n, protocol='linear_state')

    def empties(states):
        return sum(1 for state in states if isinstance(state, Settled) and state.nextrank is NextRank.EMPTY)

    def observe(event, before, after):
        if any(isinstance(state, Resetting) for state in before + after):
            return
        assert empties(after) <= empties(before)

    for trial in range(10):
        rng = RngStream.substream(12, trial)
        config = generate_initial('rank_pairs', 'linear_state', params, rng)
        run('linear_state', config, params, rng, observer=observe)


def test_linear_state_silence_matches_null_transitions_at_three():
    params = Params.for_population(3, protocol='linear_state', r_max=2, d_max=2)
    proto = get_protocol('linear_state')
    states = proto.enumerate_states(params)
    for i, a in enumerate(states):
        for j in range(i, len(states)):
            for k in range(j, len(states)):
                config = (a, states[j], states[k])
                assert null_transition('linear_state', config, params) == proto.is_silent(config)


def test_epidemic_tail_is_small():
    n = 64
    trials = 100_000
    fraction = epidemic_tail_fraction(n, trials, 3 * n * math.log(n), RngStream(13))
    p = 1 / n ** 2
    assert fraction <= p + 3 * math.sqrt(p * (1 - p) / trials)


def test_local_interaction_counts():
    n = 256
    window = int(3 * n * math.log(n))
    low = high = 0
    windows = 50
    rng = RngStream(14)
    for _ in range(windows):
        counts = interaction_count_window(n, window, rng)
        low += int(np.sum(counts < math.log(n)))
        high += int(np.sum(counts > 12 * math.log(n)))
    assert low / (n * windows) <= 1 / n
    assert high / (n * windows) <= 1 / n


def test_reset_recovery_constant_is_reported():
    n = 128
    params = Params.for_population(n, protocol='linear_time')
    times = []
    for trial in range(11):
        interactions = reset_recovery_trial(params, RngStream.substream(15, trial))
        assert interactions is not None
        times.append(interactions / n)
    c = statistics.median(times) / math.log(n)
    logger.info('reset recovery: median parallel time %.1f, c=%.1f', statistics.median(times), c)
    assert summarize(times).min > 0
    assert c > 0
