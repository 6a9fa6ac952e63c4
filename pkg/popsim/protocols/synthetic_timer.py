'''
Derandomized error timer.

An agent cannot flip a biased coin without randomness, so it watches its own
initiator/responder pattern instead: a block of ``k`` interactions in which the
agent was never the responder happens with probability ``2^-k`` and advances
``errorcount``. After ``m`` such blocks the timer fires, which takes about
``m * k * 2^k`` interactions with ``2 * m * k`` states.
'''
from __future__ import annotations
import enum
import math
import typing
from dataclasses import dataclass

from .util import T_JSON_DICT

if typing.TYPE_CHECKING:
    from popsim.engine import Params


class Decrement(enum.Enum):
    YES = "yes"
    NO = "no"

    def to_json(self) -> str:
        return self.value

    @classmethod
    def from_json(cls, json: str) -> Decrement:
        return cls(json)


@dataclass(frozen=True)
class SyntheticTimerFields:
    #: ``0 .. m-1``
    errorcount: int

    #: ``0 .. k-1``
    clock: int

    decrement: Decrement

    def to_json(self) -> T_JSON_DICT:
        json: T_JSON_DICT = dict()
        json['errorcount'] = self.errorcount
        json['clock'] = self.clock
        json['decrement'] = self.decrement.to_json()
        return json

    @classmethod
    def from_json(cls, json: T_JSON_DICT) -> SyntheticTimerFields:
        return cls(
            errorcount=int(json['errorcount']),
            clock=int(json['clock']),
            decrement=Decrement.from_json(json['decrement']),
        )


FRESH_TIMER = SyntheticTimerFields(errorcount=0, clock=0, decrement=Decrement.YES)


def synthetic_timer_shape(n: int) -> typing.Tuple[int, int]:
    '''
    Block count and block length of the timer for a population of ``n``.

    The block length is ``log2(ln n)`` rounded down and the block count is
    ``4n`` divided by ``log2(ln n)``, so that ``m * k * 2^k`` is about
    ``4 n ln n``; both are at least 1. For ``n = 2``, where ``log2(ln n)`` is
    negative, the timer is ``4n`` blocks of one interaction.

    :returns: ``(m, k)``
    '''
    ln_n = math.log(n)
    if ln_n <= 1.0:
        return 4 * n, 1
    scale = math.log2(ln_n)
    return max(1, math.floor(4 * n / scale)), max(1, math.floor(scale))


def synthetic_error_timer_step(
    timer: SyntheticTimerFields,
    is_responder: bool,
    params: 'Params',
) -> typing.Tuple[SyntheticTimerFields, bool]:
    '''
    Advance the timer by one interaction of its agent.

    Being the responder clears ``decrement`` for the current block. When the
    block clock wraps, a block that kept ``decrement`` advances ``errorcount``
    modulo ``m``; wrapping ``errorcount`` back to 0 fires the timer.

    :returns: the new fields and whether the timer fired
    '''
    m, k = synthetic_timer_shape(params.n)
    decrement = Decrement.NO if is_responder else timer.decrement
    clock = (timer.clock + 1) % k
    errorcount = timer.errorcount
    triggered = False
    if clock == 0:
        if decrement is Decrement.YES:
            errorcount = (errorcount + 1) % m
            triggered = errorcount == 0
        decrement = Decrement.YES
    return SyntheticTimerFields(errorcount, clock, decrement), triggered


def synthetic_timer_states(params: 'Params') -> typing.List[SyntheticTimerFields]:
    m, k = synthetic_timer_shape(params.n)
    return [
        SyntheticTimerFields(errorcount, clock, decrement)
        for errorcount in range(m)
        for clock in range(k)
        for decrement in Decrement
    ]
