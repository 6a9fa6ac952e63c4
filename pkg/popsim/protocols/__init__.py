'''
Transition functions and state types of every supported protocol.

Importing this package registers each protocol under its id, e.g.
``get_protocol('linear_state')``.
'''
from .util import PopulationProtocol, count_states, get_protocol, protocol_names

from . import (
    cai,
    linear_state,
    linear_time,
    log_time,
    obs,
    phase_clock,
    reset,
    synthetic_timer,
)

__all__ = [
    'PopulationProtocol',
    'count_states',
    'get_protocol',
    'protocol_names',
]
