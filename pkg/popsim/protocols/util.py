from __future__ import annotations
import bisect
import typing
from collections import Counter

import inflection # type: ignore

from popsim.exceptions import InternalConsistencyError, UnsupportedProtocolError

if typing.TYPE_CHECKING:
    from popsim.base import IChoiceSource
    from popsim.engine import Params


T_JSON_DICT = typing.Dict[str, typing.Any]
_protocols: typing.Dict[str, 'PopulationProtocol'] = dict()


def protocol_class(cls):
    ''' A decorator that registers a class as a population protocol. The
    protocol id is the snake-cased class name, e.g. ``LinearTime`` becomes
    ``linear_time``. '''
    cls.name = inflection.underscore(cls.__name__)
    _protocols[cls.name] = cls()
    return cls


def get_protocol(name: str) -> 'PopulationProtocol':
    ''' Return the registered protocol with the given id. '''
    try:
        return _protocols[name]
    except KeyError:
        raise UnsupportedProtocolError(name, 'simulation') from None


def protocol_names() -> typing.List[str]:
    return sorted(_protocols)


def role_tag(state) -> str:
    ''' Snake-cased role name of a state, e.g. ``Resetting`` -> ``resetting``. '''
    return inflection.underscore(type(state).__name__)


def roster_position(roster: typing.Iterable, member, n: int) -> int:
    ''' 1-based position of ``member`` in the sorted roster, clamped to ``1 .. n``. '''
    position = bisect.bisect_left(sorted(roster), member) + 1
    return min(max(position, 1), n)


def check(condition: bool, message: str, state) -> None:
    if not condition:
        raise InternalConsistencyError(message, state)


class RankOccupancy:
    '''
    Running count of how many agents hold each rank.

    The configuration is correct iff every agent is ranked and ``n`` distinct
    ranks are held by exactly one agent each; state validation keeps ranks in
    range, so this is the same as the ranks forming a permutation.
    '''

    def __init__(self, protocol: 'PopulationProtocol', states: typing.Iterable[typing.Any]):
        self._rank_of = protocol.rank_of
        self._counts: typing.Counter[int] = Counter()
        self._unranked = 0
        self._singles = 0
        self._n = 0
        for state in states:
            self._n += 1
            self._add(state)

    @property
    def correct(self) -> bool:
        return self._unranked == 0 and self._singles == self._n

    def update(self, old, new) -> None:
        self._remove(old)
        self._add(new)

    def _add(self, state) -> None:
        rank = self._rank_of(state)
        if rank is None:
            self._unranked += 1
            return
        count = self._counts[rank]
        if count == 0:
            self._singles += 1
        elif count == 1:
            self._singles -= 1
        self._counts[rank] = count + 1

    def _remove(self, state) -> None:
        rank = self._rank_of(state)
        if rank is None:
            self._unranked -= 1
            return
        count = self._counts[rank]
        if count == 1:
            self._singles -= 1
        elif count == 2:
            self._singles += 1
        self._counts[rank] = count - 1


class PopulationProtocol:
    '''
    Base class of every registered protocol.

    Subclasses provide the transition function and the state bookkeeping used by
    the engine (validation, correctness, silence) and by the oracle (finite
    state enumeration, canonical ordering).
    '''
    name: str = ''
    silent: bool = True
    #: smallest rank value; ranks span ``first_rank .. first_rank + n - 1``
    first_rank: int = 1

    def transition(self, a, b, params: 'Params', rng: 'IChoiceSource') -> typing.Tuple[typing.Any, typing.Any]:
        raise NotImplementedError

    def validate(self, state, params: 'Params', deep: bool = True) -> None:
        raise NotImplementedError

    def rank_of(self, state) -> typing.Optional[int]:
        ''' Rank of an agent in a ranked role, ``None`` otherwise. '''
        raise NotImplementedError

    def is_correct(self, states: typing.Sequence[typing.Any]) -> bool:
        ranks = [self.rank_of(state) for state in states]
        if any(rank is None for rank in ranks):
            return False
        return sorted(ranks) == list(range(self.first_rank, self.first_rank + len(states)))

    def is_silent(self, states: typing.Sequence[typing.Any]) -> bool:
        raise UnsupportedProtocolError(self.name, 'silence detection')

    def is_triggered(self, state, params: 'Params') -> bool:
        return False

    def tracker(self, states: typing.Sequence[typing.Any], params: 'Params'):
        return RankOccupancy(self, states)

    def enumerate_states(self, params: 'Params') -> typing.List[typing.Any]:
        raise UnsupportedProtocolError(self.name, 'state enumeration')

    def count_states(self, params: 'Params') -> int:
        raise UnsupportedProtocolError(self.name, 'state counting')

    def default_horizon(self, params: 'Params') -> int:
        return 20 * params.n ** 3 * params.log_n

    def sort_key(self, state) -> tuple:
        return state.sort_key()

    def __repr__(self):
        return f'{type(self).__name__}()'


def count_states(protocol: str, params: 'Params') -> int:
    '''
    Number of agent states the protocol uses at this population size.

    :raises UnsupportedProtocolError: for protocols with an unbounded state set
    '''
    return get_protocol(protocol).count_states(params)
