'''
Logarithmic-time ranking on top of a phase clock.

Each phase every agent draws a fresh name and collects the ``(rank, name)``
pairs of the agents in its phase. When a phase ends with exactly ``n`` pairs
collected, the agent ranks itself by the position of its own pair. The state
set is unbounded and the protocol never goes silent; it stabilizes instead.
'''
from __future__ import annotations
import typing
from dataclasses import dataclass

from .phase_clock import PhaseClockFields, phase_clock_step
from .util import T_JSON_DICT, PopulationProtocol, check, protocol_class, roster_position

if typing.TYPE_CHECKING:
    from popsim.base import IChoiceSource
    from popsim.engine import Params


T_ENTRY = typing.Tuple[int, int]


@dataclass(frozen=True)
class LogTimeState:
    #: ``1 .. n``
    rank: int

    #: ``1 .. name_space``
    name: int

    #: ``(rank, name)`` pairs heard of in the current phase
    roster: typing.FrozenSet[T_ENTRY]

    clock: PhaseClockFields

    @property
    def entry(self) -> T_ENTRY:
        return (self.rank, self.name)

    def sort_key(self) -> tuple:
        return (0, self.rank, self.name, tuple(sorted(self.roster)), self.clock.phase, self.clock.countdown)

    def to_json(self) -> T_JSON_DICT:
        json: T_JSON_DICT = dict()
        json['rank'] = self.rank
        json['name'] = self.name
        json['roster'] = [list(entry) for entry in sorted(self.roster)]
        json['clock'] = self.clock.to_json()
        return json

    @classmethod
    def from_json(cls, json: T_JSON_DICT) -> LogTimeState:
        return cls(
            rank=int(json['rank']),
            name=int(json['name']),
            roster=frozenset((int(rank), int(name)) for rank, name in json['roster']),
            clock=PhaseClockFields.from_json(json['clock']),
        )


def _advance(state: LogTimeState, clock: PhaseClockFields, params: 'Params', rng: 'IChoiceSource') -> LogTimeState:
    rank = state.rank
    if len(state.roster) == params.n:
        rank = roster_position(state.roster, state.entry, params.n)
    name = rng.uniform(params.name_space) + 1
    return LogTimeState(rank, name, frozenset(((rank, name),)), clock)


def log_time_step(a: LogTimeState, b: LogTimeState, params: 'Params', rng: 'IChoiceSource'):
    '''
    One interaction: tick the clock, let agents that changed phase rank
    themselves and rename, then merge rosters within a phase.
    '''
    clock_a, clock_b, advanced_a, advanced_b = phase_clock_step(a.clock, b.clock, params)
    result = []
    for state, clock, advanced in ((a, clock_a, advanced_a), (b, clock_b, advanced_b)):
        if advanced:
            state = _advance(state, clock, params, rng)
        elif clock != state.clock:
            state = LogTimeState(state.rank, state.name, state.roster, clock)
        result.append(state)
    a, b = result
    if a.clock.phase == b.clock.phase and a.roster != b.roster:
        union = a.roster | b.roster
        a = LogTimeState(a.rank, a.name, union, a.clock)
        b = LogTimeState(b.rank, b.name, union, b.clock)
    return a, b


@protocol_class
class LogTime(PopulationProtocol):
    silent = False

    def transition(self, a, b, params: 'Params', rng: 'IChoiceSource'):
        return log_time_step(a, b, params, rng)

    def validate(self, state, params: 'Params', deep: bool = True) -> None:
        check(isinstance(state, LogTimeState), 'not a log-time state', state)
        check(1 <= state.rank <= params.n, 'rank out of range', state)
        check(1 <= state.name <= params.name_space, 'name out of range', state)
        check(state.clock.phase >= 0, 'negative phase', state)
        check(0 <= state.clock.countdown <= params.c_max, 'countdown out of range', state)
        if deep:
            check(all(1 <= rank <= params.n and 1 <= name <= params.name_space for rank, name in state.roster),
                'roster entry out of range', state)

    def rank_of(self, state: LogTimeState) -> typing.Optional[int]:
        return state.rank

    def default_horizon(self, params: 'Params') -> int:
        return 12 * params.c_max * params.n + params.tail_margin
