'''
The n-state silent ranking protocol: colliding ranks push the responder up by
one, modulo n.
'''
from __future__ import annotations
import typing
from dataclasses import dataclass

from .util import T_JSON_DICT, PopulationProtocol, check, protocol_class

if typing.TYPE_CHECKING:
    from popsim.base import IChoiceSource
    from popsim.engine import Params


@dataclass(frozen=True)
class CaiState:
    #: ``0 .. n-1``
    rank: int

    def sort_key(self) -> tuple:
        return (0, self.rank)

    def to_json(self) -> T_JSON_DICT:
        return {'rank': self.rank}

    @classmethod
    def from_json(cls, json: T_JSON_DICT) -> CaiState:
        return cls(rank=int(json['rank']))


def cai_step(a: CaiState, b: CaiState, n: int) -> typing.Tuple[CaiState, CaiState]:
    ''' Equal ranks move the responder to ``(rank + 1) mod n``. '''
    if a.rank == b.rank:
        return a, CaiState((b.rank + 1) % n)
    return a, b


@protocol_class
class Cai(PopulationProtocol):
    first_rank = 0

    def transition(self, a, b, params: 'Params', rng: 'IChoiceSource'):
        return cai_step(a, b, params.n)

    def validate(self, state, params: 'Params', deep: bool = True) -> None:
        check(isinstance(state, CaiState), 'not a cai state', state)
        check(0 <= state.rank < params.n, 'rank out of range', state)

    def rank_of(self, state: CaiState) -> typing.Optional[int]:
        return state.rank

    def is_silent(self, states: typing.Sequence[CaiState]) -> bool:
        # the only non-null rule needs two equal ranks
        return len({state.rank for state in states}) == len(states)

    def enumerate_states(self, params: 'Params') -> typing.List[CaiState]:
        return [CaiState(rank) for rank in range(params.n)]

    def count_states(self, params: 'Params') -> int:
        return params.n

    def default_horizon(self, params: 'Params') -> int:
        return 10 * params.n ** 3 + params.tail_margin
