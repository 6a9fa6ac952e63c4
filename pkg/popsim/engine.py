'''
Uniform random pairwise scheduler, execution loop and time measurement.

A run picks one ordered pair of distinct agents per interaction, applies the
protocol's transition to the pair and keeps track of correctness and silence.
Time is counted in interactions; parallel time is interactions divided by n.
'''
from __future__ import annotations
import math
import typing as t
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from popsim.base import IPopulationProtocol
from popsim.exceptions import InvalidPopulationError, UnsupportedProtocolError
from popsim.protocols import get_protocol
from popsim.utils import ContextLoggerMixin


T_PROTOCOL = t.Union[str, IPopulationProtocol]
#: Observer hook called after every interaction with the event, the pair of
#: states before the interaction and the pair after it.
T_OBSERVER = t.Callable[['Interaction', t.Tuple[t.Any, t.Any], t.Tuple[t.Any, t.Any]], None]

_SEED_LIMIT = 2 ** 64


@dataclass(frozen=True)
class Params:
    '''
    Population size and every constant derived from it.

    Use :meth:`for_population` instead of the constructor: it computes the
    derived constants and validates them. Oracle runs may scale the timer
    ceilings and the name space down, which marks the params as ``scaled``.
    '''
    n: int
    log_n: int
    name_space: int
    r_max: int
    d_max: int
    c_max: int
    error_init: int
    coin_bias: float
    max_interactions: int
    tail_margin: int
    scaled: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise InvalidPopulationError('population needs at least 2 agents', self.n)
        if self.name_space < self.n:
            raise InvalidPopulationError(f'name space {self.name_space} is smaller than the population', self.n)
        for ceiling in ('log_n', 'r_max', 'd_max', 'c_max', 'error_init'):
            if getattr(self, ceiling) < 1:
                raise InvalidPopulationError(f'{ceiling} must be positive', self.n)
        if not 0.0 < self.coin_bias <= 1.0:
            raise InvalidPopulationError(f'coin bias {self.coin_bias} is not a probability', self.n)
        if self.max_interactions < 0 or self.tail_margin < 0:
            raise InvalidPopulationError('horizon and tail margin must be nonnegative', self.n)

    @staticmethod
    def effective_log(n: int) -> int:
        return max(1, math.ceil(math.log(n)))

    @classmethod
    def for_population(
        cls,
        n: int,
        *,
        protocol: t.Optional[T_PROTOCOL] = None,
        max_interactions: t.Optional[int] = None,
        tail_margin: t.Optional[int] = None,
        name_space: t.Optional[int] = None,
        r_max: t.Optional[int] = None,
        d_max: t.Optional[int] = None,
        c_max: t.Optional[int] = None,
    ) -> Params:
        if n < 2:
            raise InvalidPopulationError('population needs at least 2 agents', n)
        log_n = cls.effective_log(n)
        overrides = (name_space, r_max, d_max, c_max)
        params = cls(
            n=n,
            log_n=log_n,
            name_space=n ** 3 if name_space is None else name_space,
            r_max=60 * log_n if r_max is None else r_max,
            d_max=408 * log_n if d_max is None else d_max,
            c_max=24 * log_n if c_max is None else c_max,
            error_init=4 * n,
            coin_bias=min(1.0, 1.0 / math.log(n)),
            max_interactions=0,
            tail_margin=10 * n * log_n if tail_margin is None else tail_margin,
            scaled=any(value is not None for value in overrides),
        )
        if max_interactions is None:
            max_interactions = default_horizon(protocol, params)
        return replace(params, max_interactions=max_interactions)

    def to_json(self) -> t.Dict[str, t.Any]:
        return {
            'n': self.n,
            'log_n': self.log_n,
            'name_space': self.name_space,
            'r_max': self.r_max,
            'd_max': self.d_max,
            'c_max': self.c_max,
            'error_init': self.error_init,
            'coin_bias': self.coin_bias,
            'max_interactions': self.max_interactions,
            'tail_margin': self.tail_margin,
            'scaled': self.scaled,
        }


class RngStream:
    '''
    Seeded random stream shared by the scheduler and the transitions of one run.

    Streams built from the same ``(seed, key)`` produce the same draws. Distinct
    keys give independent streams through numpy's ``SeedSequence`` spawn keys.
    '''

    def __init__(self, seed: int, key: t.Sequence[int] = ()):
        if not 0 <= seed < _SEED_LIMIT:
            raise ValueError(f'seed {seed} is not a 64-bit unsigned integer')
        self._seed = seed
        self._key = tuple(int(k) for k in key)
        self._generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(seed, spawn_key=self._key))
        )
        self._position = 0

    @classmethod
    def substream(cls, master_seed: int, *key: int) -> RngStream:
        return cls(master_seed, key)

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def key(self) -> t.Tuple[int, ...]:
        return self._key

    @property
    def position(self) -> int:
        ''' Number of draws consumed so far. '''
        return self._position

    def uniform(self, k: int) -> int:
        ''' Uniform integer in ``[0, k)``. '''
        if k < 1:
            raise ValueError('cannot draw from an empty range')
        self._position += 1
        return int(self._generator.integers(k))

    def bernoulli(self, p: float) -> bool:
        # certain outcomes consume nothing, which keeps the enumerator and the
        # stream in agreement about branching points
        if p >= 1.0:
            return True
        if p <= 0.0:
            return False
        self._position += 1
        return bool(self._generator.random() < p)

    def pair_codes(self, n: int, count: int) -> np.ndarray:
        ''' ``count`` ordered-pair codes in one vectorized draw. '''
        _check_population(n)
        self._position += count
        return self._generator.integers(n * (n - 1), size=count)

    def __repr__(self):
        return f'RngStream(seed={self._seed}, key={self._key}, position={self._position})'


@dataclass(frozen=True)
class Configuration:
    ''' Agent-indexed tuple of protocol states. '''
    states: t.Tuple[t.Any, ...]

    @classmethod
    def of(cls, states: t.Iterable[t.Any]) -> Configuration:
        return cls(tuple(states))

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, index: int):
        return self.states[index]

    def with_states(self, updates: t.Mapping[int, t.Any]) -> Configuration:
        states = list(self.states)
        for index, state in updates.items():
            states[index] = state
        return Configuration(tuple(states))


@dataclass(frozen=True)
class Interaction:
    ''' One scheduler step: its 1-based index and the ordered pair it picked. '''
    index: int
    initiator: int
    responder: int


@dataclass
class RunMetrics:
    n: int
    interactions: int = 0
    silence_interaction: t.Optional[int] = None
    convergence_interaction: t.Optional[int] = None
    stable_tail: bool = False
    timed_out: bool = False
    reset_triggers: int = 0

    @property
    def parallel_time(self) -> Fraction:
        return Fraction(self.interactions, self.n)

    @property
    def silence_parallel_time(self) -> t.Optional[Fraction]:
        if self.silence_interaction is None:
            return None
        return Fraction(self.silence_interaction, self.n)

    @property
    def convergence_parallel_time(self) -> t.Optional[Fraction]:
        if self.convergence_interaction is None:
            return None
        return Fraction(self.convergence_interaction, self.n)

    def to_json(self) -> t.Dict[str, t.Any]:
        return {
            'interactions': self.interactions,
            'parallel_time': round(float(self.parallel_time), 6),
            'silence_interaction': self.silence_interaction,
            'convergence_interaction': self.convergence_interaction,
            'stable_tail': self.stable_tail,
            'timed_out': self.timed_out,
            'reset_triggers': self.reset_triggers,
        }


class ConvergenceFields(t.NamedTuple):
    convergence_interaction: t.Optional[int]
    stable_tail: bool


class RunResult(t.NamedTuple):
    config: Configuration
    metrics: RunMetrics
    timeline: t.Optional[t.List[bool]]


def _check_population(n: int) -> None:
    if n < 2:
        raise InvalidPopulationError('cannot pick a pair from fewer than 2 agents', n)


def _resolve(protocol: T_PROTOCOL) -> IPopulationProtocol:
    if isinstance(protocol, str):
        return get_protocol(protocol)
    return protocol


def _check_config(config: Configuration, params: Params) -> None:
    if len(config) != params.n:
        raise InvalidPopulationError(
            f'configuration holds {len(config)} agents', params.n)


def decode_pair(code: int, n: int) -> t.Tuple[int, int]:
    ''' Map a code in ``[0, n(n-1))`` to an ordered pair of distinct agents. '''
    initiator, rest = divmod(int(code), n - 1)
    responder = rest + 1 if rest >= initiator else rest
    return initiator, responder


def pick_pair(rng: RngStream, n: int) -> t.Tuple[int, int]:
    '''
    Pick an ordered pair of distinct agents uniformly at random.

    :param rng: the stream to draw from; exactly one draw is consumed
    :param n: population size, at least 2
    :returns: ``(initiator, responder)``
    '''
    _check_population(n)
    return decode_pair(rng.uniform(n * (n - 1)), n)


def default_horizon(protocol: t.Optional[T_PROTOCOL], params: Params) -> int:
    ''' A run horizon comfortably past the expected silence or stabilization
    time of the protocol at this population size. '''
    if protocol is None:
        return 20 * params.n ** 3 * params.log_n
    return _resolve(protocol).default_horizon(params)


def interact(
    protocol: T_PROTOCOL,
    config: Configuration,
    params: Params,
    initiator: int,
    responder: int,
    rng: RngStream,
) -> Configuration:
    ''' Apply one interaction to a given ordered pair. '''
    proto = _resolve(protocol)
    _check_config(config, params)
    if initiator == responder:
        raise InvalidPopulationError('an agent cannot interact with itself', params.n)
    a, b = proto.transition(config[initiator], config[responder], params, rng)
    for state in (a, b):
        proto.validate(state, params)
    return config.with_states({initiator: a, responder: b})


def step(
    protocol: T_PROTOCOL,
    config: Configuration,
    params: Params,
    rng: RngStream,
    index: int = 1,
) -> t.Tuple[Configuration, Interaction]:
    '''
    Apply one interaction of the uniform random scheduler.

    :returns: the successor configuration and the event record
    '''
    initiator, responder = pick_pair(rng, params.n)
    successor = interact(protocol, config, params, initiator, responder, rng)
    return successor, Interaction(index, initiator, responder)


def detect_correct(protocol: T_PROTOCOL, config: Configuration) -> bool:
    ''' True iff every rank is held by exactly one agent and no agent is in a
    non-ranked role. '''
    return _resolve(protocol).is_correct(config.states)


def detect_silent(protocol: T_PROTOCOL, config: Configuration) -> bool:
    ''' Closed-form silence predicate of a silent protocol. '''
    proto = _resolve(protocol)
    if not proto.silent:
        raise UnsupportedProtocolError(proto.name, 'silence detection')
    return proto.is_silent(config.states)


def measure_convergence(timeline: t.Sequence[bool], params: Params) -> ConvergenceFields:
    '''
    Hindsight convergence over a finite correctness timeline.

    Entry ``t`` of the timeline is the correctness of the configuration after
    ``t`` interactions. Convergence is reported only when at least
    ``params.tail_margin`` trailing entries are correct.
    '''
    last_false = -1
    for index in range(len(timeline) - 1, -1, -1):
        if not timeline[index]:
            last_false = index
            break
    trailing = len(timeline) - (last_false + 1)
    stable = trailing > 0 and trailing >= params.tail_margin
    if not stable:
        return ConvergenceFields(None, False)
    return ConvergenceFields(last_false + 1, True)


class Simulation(ContextLoggerMixin):
    '''
    One run of a protocol under the uniform random scheduler.

    The loop keeps a running correctness tracker so that each step costs O(1)
    besides the transition itself; the closed-form silence predicate is only
    evaluated after a state change into a correct configuration.
    '''

    def __init__(
        self,
        protocol: T_PROTOCOL,
        params: Params,
        rng: RngStream,
        *,
        record_trace: bool = False,
        observer: t.Optional[T_OBSERVER] = None,
        trial: t.Optional[int] = None,
    ):
        super().__init__()
        self._protocol = _resolve(protocol)
        self._params = params
        self._rng = rng
        self._record_trace = record_trace
        self._observer = observer
        self.set_logger_context(protocol=self._protocol.name, n=params.n, trial=trial)

    @property
    def protocol(self) -> IPopulationProtocol:
        return self._protocol

    def run(self, config: Configuration) -> RunResult:
        proto, params, rng = self._protocol, self._params, self._rng
        _check_config(config, params)
        n = params.n
        codes = n * (n - 1)
        horizon = params.max_interactions
        states = list(config.states)
        tracker = proto.tracker(states, params)
        metrics = RunMetrics(n=n)
        correct = tracker.correct
        timeline: t.Optional[t.List[bool]] = [correct] if self._record_trace else None
        last_false = -1 if correct else 0
        silence: t.Optional[int] = None
        if horizon > 0 and proto.silent and correct and proto.is_silent(states):
            silence = 0
        self._logger.debug('run starts, horizon=%d', horizon)
        executed = 0
        while silence is None and executed < horizon:
            executed += 1
            initiator, responder = decode_pair(rng.uniform(codes), n)
            a, b = states[initiator], states[responder]
            new_a, new_b = proto.transition(a, b, params, rng)
            changed = new_a != a or new_b != b
            if changed:
                for old, new in ((a, new_a), (b, new_b)):
                    if new != old:
                        proto.validate(new, params, deep=False)
                        tracker.update(old, new)
                        if proto.is_triggered(new, params) and not proto.is_triggered(old, params):
                            metrics.reset_triggers += 1
                states[initiator], states[responder] = new_a, new_b
                correct = tracker.correct
            if not correct:
                last_false = executed
            if timeline is not None:
                timeline.append(correct)
            if self._observer is not None:
                self._observer(Interaction(executed, initiator, responder), (a, b), (new_a, new_b))
            if changed and correct and proto.silent and proto.is_silent(states):
                silence = executed
        metrics.interactions = executed
        metrics.silence_interaction = silence
        if silence is not None:
            # a silent correct configuration stays correct forever
            metrics.stable_tail = True
            metrics.convergence_interaction = last_false + 1
        elif timeline is not None:
            fields = measure_convergence(timeline, params)
            metrics.convergence_interaction = fields.convergence_interaction
            metrics.stable_tail = fields.stable_tail
        else:
            trailing = executed - last_false
            if trailing > 0 and trailing >= params.tail_margin:
                metrics.stable_tail = True
                metrics.convergence_interaction = last_false + 1
        if proto.silent:
            metrics.timed_out = silence is None
        else:
            metrics.timed_out = executed == 0 or not metrics.stable_tail
        if metrics.timed_out:
            self._logger.warning('run ended without %s after %d interactions',
                'silence' if proto.silent else 'a correct tail', executed)
        else:
            self._logger.debug('run finished after %d interactions', executed)
        return RunResult(Configuration(tuple(states)), metrics, timeline)


def run(
    protocol: T_PROTOCOL,
    config: Configuration,
    params: Params,
    rng: RngStream,
    record_trace: bool = False,
    observer: t.Optional[T_OBSERVER] = None,
    trial: t.Optional[int] = None,
) -> RunResult:
    '''
    Execute interactions until silence (silent protocols) or the horizon.

    :param trial: trial index, only used to tag log records
    :returns: final configuration, metrics and, with ``record_trace``, the
        per-interaction correctness timeline (entry 0 is the initial
        configuration)
    '''
    simulation = Simulation(protocol, params, rng, record_trace=record_trace, observer=observer, trial=trial)
    return simulation.run(config)
