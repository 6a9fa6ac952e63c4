'''
Propagate-Reset: the shared subroutine that wipes a population and restarts
computation after an error is detected.

An agent is *triggered* at ``resetcount == r_max``, *propagating* while
``resetcount > 0`` and *dormant* at ``resetcount == 0``, where it waits out
``delaytimer`` before waking up through the host protocol's reset function.
'''
from __future__ import annotations
import typing
from dataclasses import dataclass

from .util import T_JSON_DICT, check, role_tag
from popsim.exceptions import InternalConsistencyError

if typing.TYPE_CHECKING:
    from popsim.base import IChoiceSource
    from popsim.engine import Params


#: Host reset function: draws whatever randomness it needs and returns a
#: computing (non-Resetting) state.
T_RESET_FN = typing.Callable[['IChoiceSource'], typing.Any]


@dataclass(frozen=True)
class Resetting:
    '''
    Role of an agent taking part in a reset.
    '''
    #: ``0 .. r_max``
    resetcount: int

    #: ``0 .. d_max``, present iff ``resetcount == 0``
    delaytimer: typing.Optional[int] = None

    @property
    def dormant(self) -> bool:
        return self.resetcount == 0

    def sort_key(self) -> tuple:
        return (9, self.resetcount, -1 if self.delaytimer is None else self.delaytimer)

    def to_json(self) -> T_JSON_DICT:
        json: T_JSON_DICT = dict()
        json['role'] = role_tag(self)
        json['resetcount'] = self.resetcount
        if self.delaytimer is not None:
            json['delaytimer'] = self.delaytimer
        return json

    @classmethod
    def from_json(cls, json: T_JSON_DICT) -> Resetting:
        return cls(
            resetcount=int(json['resetcount']),
            delaytimer=int(json['delaytimer']) if json.get('delaytimer') is not None else None,
        )


def validate_resetting(state: Resetting, params: 'Params') -> None:
    check(0 <= state.resetcount <= params.r_max, 'resetcount out of range', state)
    if state.resetcount == 0:
        check(state.delaytimer is not None, 'dormant agent without a delay timer', state)
        check(0 <= state.delaytimer <= params.d_max, 'delaytimer out of range', state) # type: ignore
    else:
        check(state.delaytimer is None, 'propagating agent with a delay timer', state)


def resetting_states(params: 'Params') -> typing.List[Resetting]:
    ''' All ``r_max + d_max + 1`` Resetting states. '''
    states = [Resetting(count) for count in range(1, params.r_max + 1)]
    states.extend(Resetting(0, timer) for timer in range(params.d_max + 1))
    return states


def is_triggered(state, params: 'Params') -> bool:
    return isinstance(state, Resetting) and state.resetcount == params.r_max


def propagate_reset_step(
    a: Resetting,
    b,
    params: 'Params',
    reset_fn: T_RESET_FN,
    rng: 'IChoiceSource',
) -> typing.Tuple[typing.Any, typing.Any]:
    '''
    One Propagate-Reset interaction with a Resetting agent ``a``.

    A propagating agent pulls a computing partner into the reset; two Resetting
    agents both settle on ``max(a - 1, b - 1, 0)``. A dormant agent restarts its
    delay when its count has just reached 0, counts the delay down otherwise,
    and wakes up through ``reset_fn`` once the delay is over or when it meets
    a computing agent.

    :returns: the successor pair, in the order ``(a, b)``
    '''
    if not isinstance(a, Resetting):
        raise InternalConsistencyError('propagate-reset called without a resetting agent', a)
    partner_resetting = isinstance(b, Resetting)
    entry = [a.resetcount, b.resetcount if partner_resetting else None]
    counts = list(entry)
    timers = [a.delaytimer, b.delaytimer if partner_resetting else None]

    if counts[0] > 0 and not partner_resetting:
        partner_resetting = True
        counts[1] = 0
        timers[1] = params.d_max
    if partner_resetting:
        shared = max(counts[0] - 1, counts[1] - 1, 0) # type: ignore
        counts = [shared, shared]

    # the partner roles seen by the dormant agents are fixed at this point
    sees_resetting = (partner_resetting, True)
    result = [a, b]
    for index in (0, 1):
        if index == 1 and not partner_resetting:
            continue
        count = counts[index]
        if count > 0:
            result[index] = Resetting(count)
            continue
        if entry[index] != 0:
            timer = params.d_max
        else:
            timer = max(0, (timers[index] or 0) - 1)
        if timer == 0 or not sees_resetting[index]:
            woken = reset_fn(rng)
            if isinstance(woken, Resetting):
                raise InternalConsistencyError('reset function returned a resetting state', woken)
            result[index] = woken
        else:
            result[index] = Resetting(0, timer)
    return result[0], result[1]


def reset_either(a, b, params: 'Params', reset_fn: T_RESET_FN, rng: 'IChoiceSource'):
    ''' Run Propagate-Reset on a pair where at least one agent is Resetting,
    with the initiator first when both are. '''
    if isinstance(a, Resetting):
        return propagate_reset_step(a, b, params, reset_fn, rng)
    new_b, new_a = propagate_reset_step(b, a, params, reset_fn, rng)
    return new_a, new_b
