'''
Simulation and exact verification of self-stabilizing ranking population
protocols.
'''
from popsim.engine import Configuration, Params, RngStream, run
from popsim.exceptions import PopSimError
from popsim.protocols import count_states, get_protocol

__all__ = [
    'Configuration',
    'Params',
    'PopSimError',
    'RngStream',
    'count_states',
    'get_protocol',
    'run',
]
