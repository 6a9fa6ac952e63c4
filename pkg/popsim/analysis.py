'''
Baseline stochastic processes, sample statistics and scaling fits.

The epidemic and roll-call processes run on the same ordered-pair scheduler as
the protocols, so their interaction counts are directly comparable with
protocol silence times.
'''
from __future__ import annotations
import logging
import math
import typing as t
from dataclasses import dataclass

import numpy as np
from scipy import stats # type: ignore

from popsim.adversary import InitKind, generate_initial
from popsim.engine import Params, RngStream, decode_pair
from popsim.exceptions import AnalysisDomainError, InvalidPopulationError
from popsim.protocols import get_protocol
from popsim.protocols.reset import Resetting


logger = logging.getLogger('popsim.analysis')

T_JSON_DICT = t.Dict[str, t.Any]


@dataclass(frozen=True)
class SampleSummary:
    count: int
    mean: float
    variance: float
    min: float
    max: float
    p50: float
    p90: float
    p99: float

    def to_json(self) -> T_JSON_DICT:
        return {
            'count': self.count,
            'mean': self.mean,
            'variance': self.variance,
            'min': self.min,
            'max': self.max,
            'p50': self.p50,
            'p90': self.p90,
            'p99': self.p99,
        }


@dataclass(frozen=True)
class ScalingFit:
    ''' Least squares line through ``(ln n, ln t)``. '''
    slope: float
    intercept: float
    r_squared: float

    def to_json(self) -> T_JSON_DICT:
        return {'slope': self.slope, 'intercept': self.intercept, 'r_squared': self.r_squared}


@dataclass(frozen=True)
class RollCallProfile:
    #: interactions until every agent knows every ID
    interactions: int

    #: per ID, interactions until every agent knows that ID
    id_completion: t.Tuple[int, ...]


def _check_population(n: int) -> None:
    if n < 2:
        raise InvalidPopulationError('a process needs at least 2 agents', n)


def _pairs(rng: RngStream, n: int) -> t.Iterator[t.Tuple[int, int]]:
    ''' Endless ordered pairs, drawn in vectorized batches. '''
    batch = max(64, 4 * n)
    while True:
        for code in rng.pair_codes(n, batch).tolist():
            yield decode_pair(code, n)


def epidemic_trial(n: int, rng: RngStream) -> int:
    '''
    Two-way epidemic from a single infected agent.

    :returns: interactions until every agent is infected
    '''
    _check_population(n)
    infected = bytearray(n)
    infected[0] = 1
    count = 1
    for index, (i, j) in enumerate(_pairs(rng, n), 1):
        if infected[i] != infected[j]:
            infected[i] = infected[j] = 1
            count += 1
            if count == n:
                return index
    raise AssertionError('unreachable')


def roll_call_trial(n: int, rng: RngStream) -> int:
    '''
    ``n`` simultaneous epidemics: every agent starts knowing only its own ID
    and both agents of an interaction end up knowing the union.

    :returns: interactions until every agent knows all ``n`` IDs
    '''
    _check_population(n)
    known = [1 << agent for agent in range(n)]
    everything = (1 << n) - 1
    complete = 0
    for index, (i, j) in enumerate(_pairs(rng, n), 1):
        union = known[i] | known[j]
        for agent in (i, j):
            if known[agent] != union:
                known[agent] = union
                if union == everything:
                    complete += 1
        if complete == n:
            return index
    raise AssertionError('unreachable')


def roll_call_profile(n: int, rng: RngStream) -> RollCallProfile:
    '''
    Instrumented :func:`roll_call_trial`: also records when each individual
    ID had reached every agent. Draws the same pairs as the plain trial for
    the same stream.
    '''
    _check_population(n)
    known = [1 << agent for agent in range(n)]
    holders = [1] * n
    completion = [0] * n
    pending = n
    for index, (i, j) in enumerate(_pairs(rng, n), 1):
        union = known[i] | known[j]
        for agent in (i, j):
            fresh = union & ~known[agent]
            if not fresh:
                continue
            known[agent] = union
            while fresh:
                bit = fresh & -fresh
                fresh ^= bit
                ident = bit.bit_length() - 1
                holders[ident] += 1
                if holders[ident] == n:
                    completion[ident] = index
                    pending -= 1
        if pending == 0:
            return RollCallProfile(index, tuple(completion))
    raise AssertionError('unreachable')


def epidemic_tail_fraction(n: int, trials: int, threshold: float, rng: RngStream) -> float:
    ''' Fraction of epidemic trials that take more than ``threshold`` interactions. '''
    if trials < 1:
        raise AnalysisDomainError('need at least one trial')
    over = sum(1 for _ in range(trials) if epidemic_trial(n, rng) > threshold)
    return over / trials


def interaction_count_window(n: int, window: int, rng: RngStream) -> np.ndarray:
    ''' How many interactions each agent takes part in during ``window``
    consecutive interactions. '''
    _check_population(n)
    codes = rng.pair_codes(n, window)
    initiators, rest = np.divmod(codes, n - 1)
    responders = rest + (rest >= initiators)
    return np.bincount(initiators, minlength=n) + np.bincount(responders, minlength=n)


def reset_recovery_trial(params: Params, rng: RngStream) -> t.Optional[int]:
    '''
    Linear-time ranking started from a correct configuration with one agent
    freshly triggered.

    :returns: interactions until no agent is Resetting any more, or ``None``
        if that did not happen within ``params.max_interactions``
    '''
    protocol = get_protocol('linear_time')
    states = list(generate_initial(InitKind.CORRECT_RANKED, 'linear_time', params, rng).states)
    states[0] = Resetting(params.r_max)
    resetting = 1
    n = params.n
    for index in range(1, params.max_interactions + 1):
        i, j = decode_pair(rng.uniform(n * (n - 1)), n)
        a, b = states[i], states[j]
        new_a, new_b = protocol.transition(a, b, params, rng)
        for old, new in ((a, new_a), (b, new_b)):
            resetting += isinstance(new, Resetting) - isinstance(old, Resetting)
        states[i], states[j] = new_a, new_b
        if resetting == 0:
            return index
    logger.warning('reset did not finish within %d interactions', params.max_interactions)
    return None


def harmonic(k: int) -> float:
    ''' ``H_k = 1 + 1/2 + ... + 1/k``. '''
    if k < 1:
        raise AnalysisDomainError(f'harmonic number of {k} is not defined')
    return math.fsum(1.0 / i for i in range(1, k + 1))


def fit_loglog(points: t.Sequence[t.Tuple[float, float]]) -> ScalingFit:
    '''
    Fit ``ln t = slope * ln n + intercept`` by ordinary least squares.

    :raises AnalysisDomainError: for nonpositive values or fewer than 3
        distinct ``n``
    '''
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != 2:
        raise AnalysisDomainError('expected a list of (n, t) points')
    if np.any(data <= 0):
        raise AnalysisDomainError('log-log fit needs positive n and t')
    if len(np.unique(data[:, 0])) < 3:
        raise AnalysisDomainError('log-log fit needs at least 3 distinct n')
    result = stats.linregress(np.log(data[:, 0]), np.log(data[:, 1]))
    r_squared = min(1.0, max(0.0, float(result.rvalue) ** 2))
    return ScalingFit(float(result.slope), float(result.intercept), r_squared)


def _nearest_rank(ordered: np.ndarray, percent: int) -> float:
    # ceil(percent * len / 100) in integers
    index = max(0, -(-percent * len(ordered) // 100) - 1)
    return float(ordered[index])


def summarize(samples: t.Iterable[float]) -> SampleSummary:
    '''
    Count, mean, sample variance, extremes and nearest-rank quantiles.

    :raises AnalysisDomainError: on an empty sample
    '''
    data = np.sort(np.asarray(list(samples), dtype=float))
    if data.size == 0:
        raise AnalysisDomainError('cannot summarize an empty sample')
    variance = float(np.var(data, ddof=1)) if data.size > 1 else 0.0
    return SampleSummary(
        count=int(data.size),
        mean=float(np.mean(data)),
        variance=variance,
        min=float(data[0]),
        max=float(data[-1]),
        p50=_nearest_rank(data, 50),
        p90=_nearest_rank(data, 90),
        p99=_nearest_rank(data, 99),
    )


def standard_error(samples: t.Sequence[float]) -> float:
    ''' Standard error of the sample mean. '''
    summary = summarize(samples)
    return math.sqrt(summary.variance / summary.count)
