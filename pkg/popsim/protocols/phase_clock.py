from __future__ import annotations
import typing
from dataclasses import dataclass

from .util import T_JSON_DICT

if typing.TYPE_CHECKING:
    from popsim.engine import Params


@dataclass(frozen=True)
class PhaseClockFields:
    #: unbounded, nonnegative
    phase: int

    #: ``0 .. c_max``
    countdown: int

    def to_json(self) -> T_JSON_DICT:
        return {'phase': self.phase, 'countdown': self.countdown}

    @classmethod
    def from_json(cls, json: T_JSON_DICT) -> PhaseClockFields:
        return cls(phase=int(json['phase']), countdown=int(json['countdown']))


def phase_clock_step(
    a: PhaseClockFields,
    b: PhaseClockFields,
    params: 'Params',
) -> typing.Tuple[PhaseClockFields, PhaseClockFields, bool, bool]:
    '''
    Leaderless phase clock.

    Agents in the same phase count down together and both move to the next
    phase as soon as either count reaches 0; an agent behind jumps to its
    partner's phase. An agent that enters a new phase restarts its countdown at
    ``c_max`` and reports it through its advanced flag.

    :returns: ``(a, b, advanced_a, advanced_b)``
    '''
    if a.phase == b.phase:
        count_a = max(0, a.countdown - 1)
        count_b = max(0, b.countdown - 1)
        if count_a == 0 or count_b == 0:
            fresh = PhaseClockFields(a.phase + 1, params.c_max)
            return fresh, fresh, True, True
        return PhaseClockFields(a.phase, count_a), PhaseClockFields(b.phase, count_b), False, False
    if a.phase < b.phase:
        return PhaseClockFields(b.phase, params.c_max), b, True, False
    return a, PhaseClockFields(a.phase, params.c_max), False, True
