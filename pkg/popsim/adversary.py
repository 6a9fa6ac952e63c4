'''
Initial configurations: the worst cases and adversarial memory contents the
protocols are measured against, plus uniform random and correct ones.

The model's adversary only chooses where a run starts; after that the uniform
random scheduler takes over.
'''
from __future__ import annotations
import bisect
import enum
import functools
import itertools
import logging
import math
import typing as t

from popsim.base import IChoiceSource
from popsim.engine import Configuration, Params
from popsim.exceptions import ConfigurationDomainError
from popsim.protocols import get_protocol
from popsim.protocols.cai import CaiState
from popsim.protocols.linear_state import NextRank, Settled, SyntheticUnsettled, Unsettled
from popsim.protocols.linear_time import Collecting
from popsim.protocols.log_time import LogTimeState
from popsim.protocols.obs import Follower, Leader
from popsim.protocols.phase_clock import PhaseClockFields
from popsim.protocols.reset import Resetting, resetting_states
from popsim.protocols.synthetic_timer import FRESH_TIMER


logger = logging.getLogger('popsim.adversary')

#: Phase the log-time scenarios start from.
BASE_PHASE = 5


class InitKind(enum.Enum):
    '''
    Initial configuration kinds, addressable by their tag.
    '''
    ALL_SAME = "all_same"
    CAI_WORST = "cai_worst"
    RANK_PAIRS = "rank_pairs"
    GHOST_ROSTER = "ghost_roster"
    FALSE_FULL = "false_full"
    MID_RESET = "mid_reset"
    STALE_PHASE = "stale_phase"
    UNIFORM_RANDOM = "uniform_random"
    CORRECT_RANKED = "correct_ranked"

    def to_json(self) -> str:
        return self.value

    @classmethod
    def from_json(cls, json: str) -> InitKind:
        try:
            return cls(json)
        except ValueError:
            raise ConfigurationDomainError(f'unknown initial configuration kind {json!r}') from None


_LINEAR_STATE = ('linear_state', 'linear_state_synthetic')
_GENERAL = (InitKind.ALL_SAME, InitKind.UNIFORM_RANDOM, InitKind.CORRECT_RANKED)
COMPATIBLE: t.Dict[str, t.Tuple[InitKind, ...]] = {
    'cai': _GENERAL + (InitKind.CAI_WORST, InitKind.RANK_PAIRS),
    'linear_time': _GENERAL + (InitKind.GHOST_ROSTER, InitKind.MID_RESET),
    'linear_state': _GENERAL + (InitKind.RANK_PAIRS, InitKind.FALSE_FULL, InitKind.MID_RESET),
    'linear_state_synthetic': _GENERAL + (InitKind.RANK_PAIRS, InitKind.FALSE_FULL, InitKind.MID_RESET),
    'log_time': _GENERAL + (InitKind.GHOST_ROSTER, InitKind.STALE_PHASE),
    'obs': _GENERAL,
}


def _unsettled(protocol: str, params: Params):
    if protocol == 'linear_state_synthetic':
        return SyntheticUnsettled(FRESH_TIMER)
    return Unsettled(params.error_init)


def _distinct_names(count: int, params: Params, rng: IChoiceSource) -> t.List[int]:
    if count > params.name_space:
        raise ConfigurationDomainError(f'cannot draw {count} distinct names from {params.name_space}')
    names: t.List[int] = []
    seen: t.Set[int] = set()
    while len(names) < count:
        name = rng.uniform(params.name_space) + 1
        if name not in seen:
            seen.add(name)
            names.append(name)
    return names


def _fresh_clock(params: Params, phase: int = BASE_PHASE) -> PhaseClockFields:
    return PhaseClockFields(phase, params.c_max)


def _all_same(protocol: str, params: Params, rng: IChoiceSource) -> t.List[t.Any]:
    state: t.Any
    if protocol == 'cai':
        state = CaiState(0)
    elif protocol in _LINEAR_STATE:
        state = Settled(1, NextRank.EMPTY)
    elif protocol == 'linear_time':
        state = Collecting(1, 1, frozenset((1,)))
    elif protocol == 'log_time':
        state = LogTimeState(1, 1, frozenset(((1, 1),)), _fresh_clock(params))
    else:
        state = Leader()
    return [state] * params.n


def _cai_worst(protocol: str, params: Params, rng: IChoiceSource) -> t.List[t.Any]:
    # two agents at the lowest rank, the top rank empty
    return [CaiState(0)] + [CaiState(rank) for rank in range(params.n - 1)]


def _rank_pairs(protocol: str, params: Params, rng: IChoiceSource) -> t.List[t.Any]:
    n = params.n
    first = get_protocol(protocol).first_rank
    ranks = [first + i // 2 for i in range(n - n % 2)]
    if n % 2:
        ranks.append(first - 1 + math.ceil(n / 2 + 1))
    if protocol == 'cai':
        return [CaiState(rank) for rank in ranks]
    return [Settled(rank, NextRank.FULL if rank == n else NextRank.EMPTY) for rank in ranks]


def _ghost_roster(protocol: str, params: Params, rng: IChoiceSource) -> t.List[t.Any]:
    *names, ghost = _distinct_names(params.n + 1, params, rng)
    if protocol == 'linear_time':
        return [Collecting(1, name, frozenset((name, ghost))) for name in names]
    ghost_entry = (1 + rng.uniform(params.n), ghost)
    return [
        LogTimeState(1, name, frozenset(((1, name), ghost_entry)), _fresh_clock(params))
        for name in names
    ]


def _false_full(protocol: str, params: Params, rng: IChoiceSource) -> t.List[t.Any]:
    settled = [Settled(rank, NextRank.FULL) for rank in range(1, params.n)]
    return settled + [_unsettled(protocol, params)]


_DRAW_BITS = 32


def _uniform_below(bound: int, rng: IChoiceSource) -> int:
    ''' Uniform integer in ``[0, bound)``, exact for bounds of any size. '''
    bits = bound.bit_length()
    if bits <= _DRAW_BITS:
        return rng.uniform(bound)
    chunks = -(-bits // _DRAW_BITS)
    while True:
        value = 0
        for _ in range(chunks):
            value = (value << _DRAW_BITS) | rng.uniform(1 << _DRAW_BITS)
        value >>= chunks * _DRAW_BITS - bits
        if value < bound:
            return value


def _weighted_index(cumulative: t.Sequence[int], rng: IChoiceSource) -> int:
    return bisect.bisect_right(cumulative, _uniform_below(cumulative[-1], rng))


@functools.lru_cache(maxsize=64)
def _subset_sizes(universe: int, largest: int) -> t.Tuple[int, ...]:
    '''
    Cumulative counts of the subsets of ``universe`` items that hold one fixed
    item, by size ``1 .. largest``.
    '''
    return tuple(itertools.accumulate(math.comb(universe - 1, size - 1) for size in range(1, largest + 1)))


def _random_subset(fixed: t.Any, size: int, draw: t.Callable[[], t.Any]) -> t.FrozenSet[t.Any]:
    items = {fixed}
    while len(items) < size:
        items.add(draw())
    return frozenset(items)


def collecting_count(params: Params) -> int:
    ''' Number of valid Collecting states: every roster holds its owner's name. '''
    return params.n * params.name_space * _subset_sizes(params.name_space, params.n)[-1]


def _uniform_resetting(params: Params, rng: IChoiceSource) -> Resetting:
    states = resetting_states(params)
    return states[rng.uniform(len(states))]


def _random_collecting(params: Params, rng: IChoiceSource) -> Collecting:
    rank = 1 + rng.uniform(params.n)
    name = rng.uniform(params.name_space) + 1
    size = 1 + _weighted_index(_subset_sizes(params.name_space, params.n), rng)
    roster = _random_subset(name, size, lambda: rng.uniform(params.name_space) + 1)
    return Collecting(rank, name, roster)


def _random_settled(params: Params, rng: IChoiceSource) -> Settled:
    # 2n - 1 states: two per rank below n, one at rank n
    index = rng.uniform(2 * params.n - 1)
    rank = index // 2 + 1
    if index % 2 or rank == params.n:
        return Settled(rank, NextRank.FULL)
    return Settled(rank, NextRank.EMPTY)


def _random_entries(count: int, params: Params, rng: IChoiceSource) -> t.Set[t.Tuple[int, int]]:
    return {(1 + rng.uniform(params.n), rng.uniform(params.name_space) + 1) for _ in range(count)}


def _random_log_time(params: Params, rng: IChoiceSource) -> LogTimeState:
    '''
    Rank, name and countdown uniformly, the phase within four phases of
    :data:`BASE_PHASE` and the roster uniformly among the sets of up to
    ``n + 1`` entries that hold the agent's own entry.
    '''
    n = params.n
    rank = 1 + rng.uniform(n)
    name = rng.uniform(params.name_space) + 1
    entries = n * params.name_space
    size = 1 + _weighted_index(_subset_sizes(entries, min(n + 1, entries)), rng)
    roster = _random_subset((rank, name), size, lambda: (1 + rng.uniform(n), rng.uniform(params.name_space) + 1))
    clock = PhaseClockFields(BASE_PHASE + rng.uniform(4), rng.uniform(params.c_max + 1))
    return LogTimeState(rank, name, roster, clock)


def _uniform_random(protocol: str, params: Params, rng: IChoiceSource) -> t.List[t.Any]:
    ''' Every agent draws independently and uniformly from the valid states. '''
    if protocol == 'linear_time':
        roles = tuple(itertools.accumulate((collecting_count(params), params.r_max + params.d_max + 1)))
        return [
            _random_collecting(params, rng) if _weighted_index(roles, rng) == 0 else _uniform_resetting(params, rng)
            for _ in range(params.n)
        ]
    if protocol == 'log_time':
        return [_random_log_time(params, rng) for _ in range(params.n)]
    states = get_protocol(protocol).enumerate_states(params)
    return [states[_uniform_below(len(states), rng)] for _ in range(params.n)]


def _computing_state(protocol: str, params: Params, rng: IChoiceSource) -> t.Any:
    if protocol == 'linear_time':
        return _random_collecting(params, rng)
    return _random_settled(params, rng)


def _mid_reset(protocol: str, params: Params, rng: IChoiceSource) -> t.List[t.Any]:
    # agents cycle through triggered, propagating, dormant and computing
    states: t.List[t.Any] = []
    for agent in range(params.n):
        kind = agent % 4
        if kind == 0:
            states.append(Resetting(params.r_max))
        elif kind == 1:
            states.append(Resetting(1 + rng.uniform(params.r_max)))
        elif kind == 2:
            states.append(Resetting(0, rng.uniform(params.d_max + 1)))
        else:
            states.append(_computing_state(protocol, params, rng))
    return states


def _stale_phase(protocol: str, params: Params, rng: IChoiceSource) -> t.List[t.Any]:
    states = []
    for _ in range(params.n):
        rank = 1 + rng.uniform(params.n)
        name = rng.uniform(params.name_space) + 1
        fabricated = _random_entries(1 + rng.uniform(params.n), params, rng)
        clock = PhaseClockFields(BASE_PHASE + rng.uniform(2), 1 + rng.uniform(params.c_max))
        states.append(LogTimeState(rank, name, frozenset({(rank, name)} | fabricated), clock))
    return states


def _correct_ranked(protocol: str, params: Params, rng: IChoiceSource) -> t.List[t.Any]:
    n = params.n
    if protocol == 'cai':
        return [CaiState(rank) for rank in range(n)]
    if protocol in _LINEAR_STATE:
        return [Settled(rank, NextRank.FULL) for rank in range(1, n + 1)]
    if protocol == 'obs':
        return [Leader(), Follower(0), Follower(1)][:n]
    names = sorted(_distinct_names(n, params, rng))
    if protocol == 'linear_time':
        roster = frozenset(names)
        return [Collecting(rank, name, roster) for rank, name in enumerate(names, 1)]
    entries = frozenset(enumerate(names, 1))
    return [LogTimeState(rank, name, entries, _fresh_clock(params)) for rank, name in enumerate(names, 1)]


_GENERATORS: t.Dict[InitKind, t.Callable[[str, Params, IChoiceSource], t.List[t.Any]]] = {
    InitKind.ALL_SAME: _all_same,
    InitKind.CAI_WORST: _cai_worst,
    InitKind.RANK_PAIRS: _rank_pairs,
    InitKind.GHOST_ROSTER: _ghost_roster,
    InitKind.FALSE_FULL: _false_full,
    InitKind.MID_RESET: _mid_reset,
    InitKind.STALE_PHASE: _stale_phase,
    InitKind.UNIFORM_RANDOM: _uniform_random,
    InitKind.CORRECT_RANKED: _correct_ranked,
}


def generate_initial(
    kind: t.Union[InitKind, str],
    protocol: str,
    params: Params,
    rng: IChoiceSource,
) -> Configuration:
    '''
    Build the initial configuration of the given kind.

    :param kind: the scenario, as an :class:`InitKind` or its tag
    :param protocol: protocol id the configuration is meant for
    :raises ConfigurationDomainError: if the kind does not apply to the
        protocol or the population
    '''
    if not isinstance(kind, InitKind):
        kind = InitKind.from_json(kind)
    proto = get_protocol(protocol)
    if kind not in COMPATIBLE.get(protocol, ()):
        raise ConfigurationDomainError(f'{kind.value} does not apply to {protocol}')
    if protocol == 'obs' and params.n != 3:
        raise ConfigurationDomainError('leader election without ranking needs exactly 3 agents')
    states = _GENERATORS[kind](protocol, params, rng)
    for state in states:
        proto.validate(state, params)
    logger.debug('generated %s for %s, n=%d', kind.value, protocol, params.n)
    return Configuration.of(states)
