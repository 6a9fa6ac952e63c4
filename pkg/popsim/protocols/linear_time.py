'''
Linear-time silent ranking with polynomially many names.

Agents pick random names, gossip the set of names they have heard of and rank
themselves by their name's position once the set holds exactly ``n`` names. A
shared name or a set with more than ``n`` names means the configuration is
broken, which triggers Propagate-Reset.
'''
from __future__ import annotations
import bisect
import functools
import itertools
import math
import typing
from dataclasses import dataclass

from .reset import Resetting, is_triggered, reset_either, resetting_states, validate_resetting
from .util import T_JSON_DICT, PopulationProtocol, check, get_protocol, protocol_class, role_tag

if typing.TYPE_CHECKING:
    from popsim.base import IChoiceSource
    from popsim.engine import Params


@dataclass(frozen=True)
class Collecting:
    '''
    Computing role of the linear-time protocol.
    '''
    #: ``1 .. n``
    rank: int

    #: ``1 .. name_space``
    name: int

    #: names heard of, always including the agent's own
    roster: typing.FrozenSet[int]

    def sort_key(self) -> tuple:
        return (0, self.rank, self.name, tuple(sorted(self.roster)))

    def to_json(self) -> T_JSON_DICT:
        json: T_JSON_DICT = dict()
        json['role'] = role_tag(self)
        json['rank'] = self.rank
        json['name'] = self.name
        json['roster'] = sorted(self.roster)
        return json

    @classmethod
    def from_json(cls, json: T_JSON_DICT) -> Collecting:
        return cls(
            rank=int(json['rank']),
            name=int(json['name']),
            roster=frozenset(int(name) for name in json['roster']),
        )


LinearTimeState = typing.Union[Collecting, Resetting]


def reset_linear_time(params: 'Params', rng: 'IChoiceSource') -> Collecting:
    ''' Wake up with a fresh random name and a roster holding only that name. '''
    name = rng.uniform(params.name_space) + 1
    return Collecting(rank=1, name=name, roster=frozenset((name,)))


def linear_time_step(a: LinearTimeState, b: LinearTimeState, params: 'Params', rng: 'IChoiceSource'):
    n = params.n
    if isinstance(a, Collecting) and isinstance(b, Collecting):
        if a.name == b.name:
            return Resetting(params.r_max), Resetting(params.r_max)
        if a.roster == b.roster:
            union = a.roster
        else:
            union = a.roster | b.roster
            if len(union) > n:
                return Resetting(params.r_max), Resetting(params.r_max)
        if len(union) == n:
            ordered = sorted(union)
            ranks = [min(bisect.bisect_left(ordered, agent.name) + 1, n) for agent in (a, b)]
        else:
            ranks = [a.rank, b.rank]
        return (
            _collecting(a, ranks[0], union),
            _collecting(b, ranks[1], union),
        )
    return reset_either(a, b, params, functools.partial(reset_linear_time, params), rng)


def _collecting(agent: Collecting, rank: int, roster: typing.FrozenSet[int]) -> Collecting:
    if rank == agent.rank and roster is agent.roster:
        return agent
    return Collecting(rank, agent.name, roster)


@protocol_class
class LinearTime(PopulationProtocol):

    def transition(self, a, b, params: 'Params', rng: 'IChoiceSource'):
        return linear_time_step(a, b, params, rng)

    def validate(self, state, params: 'Params', deep: bool = True) -> None:
        if isinstance(state, Resetting):
            validate_resetting(state, params)
            return
        check(isinstance(state, Collecting), 'not a linear-time state', state)
        check(1 <= state.rank <= params.n, 'rank out of range', state)
        check(1 <= state.name <= params.name_space, 'name out of range', state)
        check(state.name in state.roster, 'own name missing from roster', state)
        check(len(state.roster) <= params.n, 'roster larger than the population', state)
        if deep:
            check(all(1 <= name <= params.name_space for name in state.roster),
                'roster name out of range', state)

    def rank_of(self, state) -> typing.Optional[int]:
        return state.rank if isinstance(state, Collecting) else None

    def is_triggered(self, state, params: 'Params') -> bool:
        return is_triggered(state, params)

    def is_silent(self, states: typing.Sequence[LinearTimeState]) -> bool:
        if not all(isinstance(state, Collecting) for state in states):
            return False
        names = frozenset(state.name for state in states) # type: ignore
        n = len(states)
        if len(names) != n:
            return False
        ordered = sorted(names)
        return all(
            state.roster == names and state.rank == bisect.bisect_left(ordered, state.name) + 1 # type: ignore
            for state in states
        )

    def enumerate_states(self, params: 'Params') -> typing.List[LinearTimeState]:
        names = range(1, params.name_space + 1)
        states: typing.List[LinearTimeState] = []
        for rank in range(1, params.n + 1):
            for name in names:
                others = [other for other in names if other != name]
                for size in range(params.n):
                    for rest in itertools.combinations(others, size):
                        states.append(Collecting(rank, name, frozenset((name,) + rest)))
        states.extend(resetting_states(params))
        return states

    def count_states(self, params: 'Params') -> int:
        n, names = params.n, params.name_space
        rosters = sum(math.comb(names, size) for size in range(1, n + 1))
        return n + n * names * rosters + params.r_max + params.d_max + 1

    def default_horizon(self, params: 'Params') -> int:
        n = params.n
        return n * (50 * n + 4 * (params.r_max + params.d_max)) + params.tail_margin


def log_count_states(params: 'Params') -> float:
    ''' Natural logarithm of :func:`count_states` for ``linear_time``, which
    overflows a float long before it overflows memory. '''
    return math.log(get_protocol('linear_time').count_states(params))
