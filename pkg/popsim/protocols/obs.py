'''
Silent self-stabilizing leader election for three agents that never ranks them.

Six states: a leader and five followers arranged on a cycle. Followers that
are neighbours on the cycle ignore each other, as does a leader meeting a
follower; every other pair is replaced by a uniformly random pair of states.
'''
from __future__ import annotations
import typing
from dataclasses import dataclass

from .util import T_JSON_DICT, PopulationProtocol, check, protocol_class, role_tag
from popsim.exceptions import UnsupportedProtocolError

if typing.TYPE_CHECKING:
    from popsim.base import IChoiceSource
    from popsim.engine import Params


FOLLOWER_CYCLE = 5


@dataclass(frozen=True)
class Leader:

    def sort_key(self) -> tuple:
        return (0,)

    def to_json(self) -> T_JSON_DICT:
        return {'role': role_tag(self)}

    @classmethod
    def from_json(cls, json: T_JSON_DICT) -> Leader:
        return cls()


@dataclass(frozen=True)
class Follower:
    #: ``0 .. 4``
    index: int

    def sort_key(self) -> tuple:
        return (1, self.index)

    def to_json(self) -> T_JSON_DICT:
        return {'role': role_tag(self), 'index': self.index}

    @classmethod
    def from_json(cls, json: T_JSON_DICT) -> Follower:
        return cls(index=int(json['index']))


ObsState = typing.Union[Leader, Follower]
OBS_STATES: typing.Tuple[ObsState, ...] = (Leader(),) + tuple(Follower(i) for i in range(FOLLOWER_CYCLE))


def randomizes(a: ObsState, b: ObsState) -> bool:
    ''' Whether the pair is replaced by a random pair. '''
    if a == b:
        return True
    if isinstance(a, Follower) and isinstance(b, Follower):
        return abs(a.index - b.index) % FOLLOWER_CYCLE not in (1, FOLLOWER_CYCLE - 1)
    return False


def obs_ssle_step(a: ObsState, b: ObsState, rng: 'IChoiceSource') -> typing.Tuple[ObsState, ObsState]:
    if not randomizes(a, b):
        return a, b
    code = rng.uniform(len(OBS_STATES) ** 2)
    return OBS_STATES[code // len(OBS_STATES)], OBS_STATES[code % len(OBS_STATES)]


class LeaderCount:
    ''' Tracks the number of leaders; correct iff there is exactly one. '''

    def __init__(self, states: typing.Iterable[ObsState]):
        self._leaders = sum(1 for state in states if isinstance(state, Leader))

    @property
    def correct(self) -> bool:
        return self._leaders == 1

    def update(self, old, new) -> None:
        self._leaders += isinstance(new, Leader) - isinstance(old, Leader)


@protocol_class
class Obs(PopulationProtocol):

    def _require_three(self, params: 'Params') -> None:
        if params.n != 3:
            raise UnsupportedProtocolError(self.name, f'populations of {params.n} agents')

    def transition(self, a, b, params: 'Params', rng: 'IChoiceSource'):
        self._require_three(params)
        return obs_ssle_step(a, b, rng)

    def validate(self, state, params: 'Params', deep: bool = True) -> None:
        self._require_three(params)
        check(state in OBS_STATES, 'not a leader-election state', state)

    def rank_of(self, state) -> typing.Optional[int]:
        return None

    def is_correct(self, states: typing.Sequence[ObsState]) -> bool:
        return sum(1 for state in states if isinstance(state, Leader)) == 1

    def is_silent(self, states: typing.Sequence[ObsState]) -> bool:
        return not any(
            randomizes(states[i], states[j])
            for i in range(len(states))
            for j in range(i + 1, len(states))
        )

    def tracker(self, states: typing.Sequence[ObsState], params: 'Params'):
        self._require_three(params)
        return LeaderCount(states)

    def enumerate_states(self, params: 'Params') -> typing.List[ObsState]:
        self._require_three(params)
        return list(OBS_STATES)

    def count_states(self, params: 'Params') -> int:
        return len(OBS_STATES)

    def default_horizon(self, params: 'Params') -> int:
        return 10_000 + params.tail_margin
