'''
Linear-state silent ranking.

Settled agents hold a rank and remember whether the next rank is taken.
Unsettled agents walk up the ranks by meeting Settled agents whose next rank is
free. An Unsettled agent that finds no free rank for too long fires its error
timer, which starts Propagate-Reset. Two timers are provided: a random one
driven by a biased coin and a deterministic one driven by the scheduler's
initiator/responder pattern.
'''
from __future__ import annotations
import enum
import functools
import typing
from dataclasses import dataclass

from .reset import Resetting, is_triggered, reset_either, resetting_states, validate_resetting
from .synthetic_timer import (
    FRESH_TIMER,
    Decrement,
    SyntheticTimerFields,
    synthetic_error_timer_step,
    synthetic_timer_shape,
    synthetic_timer_states,
)
from .util import T_JSON_DICT, PopulationProtocol, check, protocol_class, role_tag

if typing.TYPE_CHECKING:
    from popsim.base import IChoiceSource
    from popsim.engine import Params


class NextRank(enum.Enum):
    EMPTY = "empty"
    FULL = "full"

    def to_json(self) -> str:
        return self.value

    @classmethod
    def from_json(cls, json: str) -> NextRank:
        return cls(json)


@dataclass(frozen=True)
class Settled:
    #: ``1 .. n``
    rank: int

    #: whether rank ``rank + 1`` is known to be taken; always full at rank ``n``
    nextrank: NextRank = NextRank.EMPTY

    def full(self) -> Settled:
        if self.nextrank is NextRank.FULL:
            return self
        return Settled(self.rank, NextRank.FULL)

    def sort_key(self) -> tuple:
        return (0, self.rank, self.nextrank.value)

    def to_json(self) -> T_JSON_DICT:
        json: T_JSON_DICT = dict()
        json['role'] = role_tag(self)
        json['rank'] = self.rank
        json['nextrank'] = self.nextrank.to_json()
        return json

    @classmethod
    def from_json(cls, json: T_JSON_DICT) -> Settled:
        return cls(rank=int(json['rank']), nextrank=NextRank.from_json(json['nextrank']))


@dataclass(frozen=True)
class Unsettled:
    #: ``0 .. 4n``
    errorcount: int

    def sort_key(self) -> tuple:
        return (1, self.errorcount)

    def to_json(self) -> T_JSON_DICT:
        return {'role': role_tag(self), 'errorcount': self.errorcount}

    @classmethod
    def from_json(cls, json: T_JSON_DICT) -> Unsettled:
        return cls(errorcount=int(json['errorcount']))


@dataclass(frozen=True)
class SyntheticUnsettled:
    ''' Unsettled role with the deterministic error timer. '''
    timer: SyntheticTimerFields = FRESH_TIMER

    def sort_key(self) -> tuple:
        return (1, self.timer.errorcount, self.timer.clock, self.timer.decrement.value)

    def to_json(self) -> T_JSON_DICT:
        json = self.timer.to_json()
        json['role'] = role_tag(self)
        return json

    @classmethod
    def from_json(cls, json: T_JSON_DICT) -> SyntheticUnsettled:
        return cls(timer=SyntheticTimerFields.from_json(json))


LinearStateState = typing.Union[Settled, Unsettled, Resetting]


def reset_linear_state(rng: 'IChoiceSource') -> Settled:
    ''' Everyone wakes up at rank 1; collisions then spread them upwards. '''
    return Settled(1, NextRank.EMPTY)


def _settle(a, b, n: int, unsettled_type: type):
    if isinstance(a, Settled) and isinstance(b, Settled):
        if a.rank < b.rank:
            a = a.full()
        elif b.rank < a.rank:
            b = b.full()
        else:
            return a, None
        return a, b
    for mover, host in ((a, b), (b, a)):
        if isinstance(mover, unsettled_type) and isinstance(host, Settled) and host.nextrank is NextRank.EMPTY:
            rank = host.rank + 1
            settled = Settled(rank, NextRank.FULL if rank == n else NextRank.EMPTY)
            if mover is a:
                return settled, host.full()
            return host.full(), settled
    return a, b


def error_timer_step(state: Unsettled, params: 'Params', rng: 'IChoiceSource'):
    ''' Count down with probability ``coin_bias``; fire at 0. '''
    errorcount = state.errorcount
    if rng.bernoulli(params.coin_bias):
        errorcount = max(0, errorcount - 1)
    if errorcount == 0:
        return Resetting(params.r_max)
    if errorcount == state.errorcount:
        return state
    return Unsettled(errorcount)


def linear_state_step(a: LinearStateState, b: LinearStateState, params: 'Params', rng: 'IChoiceSource'):
    '''
    One interaction of the linear-state protocol, initiator first.

    Equal Settled ranks unsettle the responder, so the initiator keeps its
    rank. The error timer runs for each Unsettled agent in initiator, responder
    order, then Propagate-Reset handles any Resetting agent.
    '''
    a, settled_b = _settle(a, b, params.n, Unsettled)
    b = Unsettled(params.error_init) if settled_b is None else settled_b
    if isinstance(a, Unsettled):
        a = error_timer_step(a, params, rng)
    if isinstance(b, Unsettled):
        b = error_timer_step(b, params, rng)
    if isinstance(a, Resetting) or isinstance(b, Resetting):
        return reset_either(a, b, params, reset_linear_state, rng)
    return a, b


def linear_state_synthetic_step(a, b, params: 'Params', rng: 'IChoiceSource'):
    ''' :func:`linear_state_step` with the deterministic error timer. '''
    a, settled_b = _settle(a, b, params.n, SyntheticUnsettled)
    b = SyntheticUnsettled() if settled_b is None else settled_b
    result = [a, b]
    for index, state in enumerate(result):
        if isinstance(state, SyntheticUnsettled):
            timer, triggered = synthetic_error_timer_step(state.timer, index == 1, params)
            result[index] = Resetting(params.r_max) if triggered else SyntheticUnsettled(timer)
    a, b = result
    if isinstance(a, Resetting) or isinstance(b, Resetting):
        return reset_either(a, b, params, reset_linear_state, rng)
    return a, b


def _validate_settled(state: Settled, params: 'Params') -> None:
    check(1 <= state.rank <= params.n, 'rank out of range', state)
    check(isinstance(state.nextrank, NextRank), 'nextrank is not a NextRank', state)
    check(state.rank < params.n or state.nextrank is NextRank.FULL, 'top rank with an empty next rank', state)


def _settled_states(params: 'Params') -> typing.List[Settled]:
    states = [Settled(rank, nextrank) for rank in range(1, params.n) for nextrank in NextRank]
    states.append(Settled(params.n, NextRank.FULL))
    return states


def _is_silent(states: typing.Sequence[typing.Any]) -> bool:
    # unique silent configuration: ranks 1..n, every nextrank full
    if not all(isinstance(state, Settled) and state.nextrank is NextRank.FULL for state in states):
        return False
    return sorted(state.rank for state in states) == list(range(1, len(states) + 1))


@protocol_class
class LinearState(PopulationProtocol):

    def transition(self, a, b, params: 'Params', rng: 'IChoiceSource'):
        return linear_state_step(a, b, params, rng)

    def validate(self, state, params: 'Params', deep: bool = True) -> None:
        if isinstance(state, Settled):
            _validate_settled(state, params)
        elif isinstance(state, Unsettled):
            check(0 <= state.errorcount <= params.error_init, 'errorcount out of range', state)
        elif isinstance(state, Resetting):
            validate_resetting(state, params)
        else:
            check(False, 'not a linear-state state', state)

    def rank_of(self, state) -> typing.Optional[int]:
        return state.rank if isinstance(state, Settled) else None

    def is_triggered(self, state, params: 'Params') -> bool:
        return is_triggered(state, params)

    def is_silent(self, states: typing.Sequence[LinearStateState]) -> bool:
        return _is_silent(states)

    def enumerate_states(self, params: 'Params') -> typing.List[LinearStateState]:
        states: typing.List[LinearStateState] = list(_settled_states(params))
        states.extend(Unsettled(count) for count in range(params.error_init + 1))
        states.extend(resetting_states(params))
        return states

    def count_states(self, params: 'Params') -> int:
        return (2 * params.n - 1) + (params.error_init + 1) + (params.r_max + params.d_max + 1)

    def default_horizon(self, params: 'Params') -> int:
        n = params.n
        return 100 * n * n * params.log_n + params.tail_margin


@protocol_class
class LinearStateSynthetic(PopulationProtocol):
    ''' Linear-state ranking with the deterministic error timer; no transition
    consumes randomness. '''

    def transition(self, a, b, params: 'Params', rng: 'IChoiceSource'):
        return linear_state_synthetic_step(a, b, params, rng)

    def validate(self, state, params: 'Params', deep: bool = True) -> None:
        if isinstance(state, Settled):
            _validate_settled(state, params)
        elif isinstance(state, SyntheticUnsettled):
            m, k = synthetic_timer_shape(params.n)
            timer = state.timer
            check(0 <= timer.errorcount < m, 'errorcount out of range', state)
            check(0 <= timer.clock < k, 'clock out of range', state)
            check(isinstance(timer.decrement, Decrement), 'decrement is not a Decrement', state)
        elif isinstance(state, Resetting):
            validate_resetting(state, params)
        else:
            check(False, 'not a linear-state state', state)

    def rank_of(self, state) -> typing.Optional[int]:
        return state.rank if isinstance(state, Settled) else None

    def is_triggered(self, state, params: 'Params') -> bool:
        return is_triggered(state, params)

    def is_silent(self, states: typing.Sequence[typing.Any]) -> bool:
        return _is_silent(states)

    def enumerate_states(self, params: 'Params') -> typing.List[typing.Any]:
        states: typing.List[typing.Any] = list(_settled_states(params))
        states.extend(SyntheticUnsettled(timer) for timer in synthetic_timer_states(params))
        states.extend(resetting_states(params))
        return states

    def count_states(self, params: 'Params') -> int:
        m, k = synthetic_timer_shape(params.n)
        return (2 * params.n - 1) + 2 * m * k + (params.r_max + params.d_max + 1)

    def default_horizon(self, params: 'Params') -> int:
        n = params.n
        return 100 * n * n * params.log_n + params.tail_margin
