'''
Exact verification on tiny populations.

The oracle builds the complete configuration graph of a finite protocol,
starting from every configuration, and reads self-stabilization off its
terminal strongly connected components. Expected hitting times come from the
absorbing-chain linear system. For the n-state protocol it also checks the
barrier-rank invariant that bounds its silence time.
'''
from __future__ import annotations
import enum
import itertools
import logging
import math
import typing as t
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import networkx as nx # type: ignore
import numpy as np
from scipy import linalg, sparse # type: ignore
from scipy.sparse import linalg as sparse_linalg # type: ignore

from popsim.engine import Configuration, Params
from popsim.exceptions import CapacityError, DivergenceError, InternalConsistencyError
from popsim.protocols import get_protocol
from popsim.protocols.cai import Cai, CaiState
from popsim.protocols.util import protocol_class
from popsim.utils import LoggerMixin


logger = logging.getLogger('popsim.oracle')

T_JSON_DICT = t.Dict[str, t.Any]
T_OUTCOMES = t.Dict[t.Tuple[t.Any, t.Any], float]

DEFAULT_BUDGET = 5_000_000
#: below this many transient states the hitting-time system is solved densely
DENSE_LIMIT = 10_000
RESIDUAL_TOLERANCE = 1e-10
SUM_TOLERANCE = 1e-12


class Target(enum.Enum):
    SILENT = "silent"
    CORRECT = "correct"

    def to_json(self) -> str:
        return self.value

    @classmethod
    def from_json(cls, json: str) -> Target:
        return cls(json)


class _Branch(Exception):
    ''' Raised by :class:`ChoiceEnumerator` at a choice point not covered by
    the replayed prefix. '''
    def __init__(self, arity: int):
        super().__init__(arity)
        self.arity = arity


class ChoiceEnumerator:
    '''
    Randomness source that replays a fixed prefix of choices.

    Running a transition against every prefix the enumerator asks for visits
    each random outcome exactly once, together with its probability.
    '''

    def __init__(self, prefix: t.Tuple[int, ...] = ()):
        self._prefix = prefix
        self._position = 0
        self.probability = 1.0

    def _next(self, arity: int) -> int:
        if self._position == len(self._prefix):
            raise _Branch(arity)
        choice = self._prefix[self._position]
        self._position += 1
        return choice

    def uniform(self, k: int) -> int:
        choice = self._next(k)
        self.probability /= k
        return choice

    def bernoulli(self, p: float) -> bool:
        if p >= 1.0:
            return True
        if p <= 0.0:
            return False
        outcome = self._next(2) == 1
        self.probability *= p if outcome else 1.0 - p
        return outcome


def enumerate_outcomes(
    transition: t.Callable[[t.Any, t.Any, t.Any], t.Tuple[t.Any, t.Any]],
    a,
    b,
) -> T_OUTCOMES:
    '''
    Every successor pair of a randomized transition with its probability.

    :param transition: called as ``transition(a, b, choice_source)``
    '''
    outcomes: T_OUTCOMES = defaultdict(float)
    stack: t.List[t.Tuple[int, ...]] = [()]
    while stack:
        prefix = stack.pop()
        source = ChoiceEnumerator(prefix)
        try:
            pair = transition(a, b, source)
        except _Branch as branch:
            stack.extend(prefix + (choice,) for choice in range(branch.arity))
            continue
        outcomes[pair] += source.probability
    return dict(outcomes)


@protocol_class
class SaturatingCai(Cai):
    ''' Broken variant of the n-state protocol whose ranks stop at ``n - 1``
    instead of wrapping around; kept for mutation tests. '''

    def transition(self, a, b, params: Params, rng):
        if a.rank == b.rank:
            return a, CaiState(min(b.rank + 1, params.n - 1))
        return a, b


@dataclass(frozen=True)
class Counterexample:
    #: a configuration that can reach the bad terminal component
    start: Configuration

    #: an incorrect member of that component
    member: Configuration

    def to_json(self) -> T_JSON_DICT:
        return {
            'start': [state.to_json() for state in self.start],
            'member': [state.to_json() for state in self.member],
        }


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    counterexample: t.Optional[Counterexample]
    node_count: int
    scc_count: int
    terminal_scc_count: int
    #: silent configurations, counted up to agent permutation
    silent_configs: int
    scaled: bool
    params: Params

    def to_json(self) -> T_JSON_DICT:
        json: T_JSON_DICT = dict()
        json['ok'] = self.ok
        json['silent_configs'] = self.silent_configs
        json['node_count'] = self.node_count
        json['scc_count'] = self.scc_count
        json['terminal_scc_count'] = self.terminal_scc_count
        json['scaled'] = self.scaled
        json['params'] = self.params.to_json()
        json['counterexample'] = None if self.counterexample is None else self.counterexample.to_json()
        return json


@dataclass
class ConfigGraph:
    '''
    Configuration graph of a protocol at a fixed population size.

    Nodes are numbered ``0 .. node_count - 1``. A node is a tuple of indices
    into ``states``, sorted when the graph is canonical (configurations up to
    agent permutation) and agent-indexed otherwise. ``transitions`` is the
    row-stochastic matrix of the induced Markov chain.
    '''
    protocol: str
    params: Params
    canonical: bool
    states: t.List[t.Any]
    nodes: t.List[t.Tuple[int, ...]]
    transitions: sparse.csr_matrix
    correct: np.ndarray
    silent: np.ndarray
    _ids: t.Dict[t.Tuple[int, ...], int] = field(default_factory=dict, repr=False)
    _state_ids: t.Dict[t.Any, int] = field(default_factory=dict, repr=False)
    _digraph: t.Optional[nx.DiGraph] = field(default=None, repr=False)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def configuration(self, node: int) -> Configuration:
        return Configuration.of(self.states[index] for index in self.nodes[node])

    def node_of(self, config: Configuration) -> int:
        try:
            key = tuple(self._state_ids[state] for state in config)
        except KeyError as error:
            raise InternalConsistencyError('state outside the enumerated state set', error.args[0]) from None
        if self.canonical:
            key = tuple(sorted(key))
        return self._ids[key]

    def digraph(self) -> nx.DiGraph:
        if self._digraph is None:
            coo = self.transitions.tocoo()
            graph = nx.DiGraph()
            graph.add_nodes_from(range(self.node_count))
            graph.add_weighted_edges_from(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))
            self._digraph = graph
        return self._digraph


class _GraphBuilder(LoggerMixin):

    def __init__(self, protocol: str, params: Params, canonical: bool, budget: int):
        super().__init__()
        self._name = protocol
        self._proto = get_protocol(protocol)
        self._params = params
        self._canonical = canonical
        self._budget = budget
        self._outcomes: t.Dict[t.Tuple[int, int], t.List[t.Tuple[int, int, float]]] = dict()
        self._states: t.List[t.Any] = []
        self._state_ids: t.Dict[t.Any, int] = dict()

    def _pair_outcomes(self, first: int, second: int) -> t.List[t.Tuple[int, int, float]]:
        key = (first, second)
        cached = self._outcomes.get(key)
        if cached is None:
            proto, params = self._proto, self._params
            outcomes = enumerate_outcomes(
                lambda a, b, rng: proto.transition(a, b, params, rng),
                self._states[first],
                self._states[second],
            )
            cached = []
            for (a, b), probability in outcomes.items():
                if a not in self._state_ids or b not in self._state_ids:
                    raise InternalConsistencyError('transition left the enumerated state set', (a, b))
                cached.append((self._state_ids[a], self._state_ids[b], probability))
            self._outcomes[key] = cached
        return cached

    def build(self) -> ConfigGraph:
        proto, params, n = self._proto, self._params, self._params.n
        self._states = sorted(proto.enumerate_states(params), key=proto.sort_key)
        self._state_ids = {state: index for index, state in enumerate(self._states)}
        size = len(self._states)
        count = math.comb(size + n - 1, n) if self._canonical else size ** n
        if count > self._budget:
            raise CapacityError(count, self._budget)
        self._logger.info('building %s graph: %d states, %d configurations', self._name, size, count)
        if self._canonical:
            nodes = list(itertools.combinations_with_replacement(range(size), n))
        else:
            nodes = list(itertools.product(range(size), repeat=n))
        ids = {node: index for index, node in enumerate(nodes)}
        pairs = n * (n - 1)
        rows: t.List[int] = []
        cols: t.List[int] = []
        data: t.List[float] = []
        correct = np.zeros(len(nodes), dtype=bool)
        silent = np.zeros(len(nodes), dtype=bool)
        for source, node in enumerate(nodes):
            states = [self._states[index] for index in node]
            correct[source] = proto.is_correct(states)
            silent[source] = proto.silent and proto.is_silent(states)
            successors: t.Dict[int, float] = defaultdict(float)
            for (i, j), weight in self._ordered_pairs(node):
                for new_a, new_b, probability in self._pair_outcomes(node[i], node[j]):
                    successor = list(node)
                    successor[i], successor[j] = new_a, new_b
                    key = tuple(sorted(successor)) if self._canonical else tuple(successor)
                    successors[ids[key]] += weight * probability / pairs
            total = math.fsum(successors.values())
            if abs(total - 1.0) > SUM_TOLERANCE:
                raise InternalConsistencyError(f'outgoing probabilities sum to {total}', node)
            for target, probability in successors.items():
                rows.append(source)
                cols.append(target)
                data.append(probability)
        matrix = sparse.csr_matrix((data, (rows, cols)), shape=(len(nodes), len(nodes)))
        return ConfigGraph(
            protocol=self._name,
            params=params,
            canonical=self._canonical,
            states=self._states,
            nodes=nodes,
            transitions=matrix,
            correct=correct,
            silent=silent,
            _ids=ids,
            _state_ids=self._state_ids,
        )

    def _ordered_pairs(self, node: t.Tuple[int, ...]) -> t.Iterator[t.Tuple[t.Tuple[int, int], int]]:
        ''' Agent position pairs with the number of ordered agent pairs they
        stand for. Canonical nodes group agents holding the same state. '''
        if not self._canonical:
            for i, j in itertools.permutations(range(len(node)), 2):
                yield (i, j), 1
            return
        first_position = {}
        for position, index in enumerate(node):
            first_position.setdefault(index, position)
        multiplicity = Counter(node)
        for s, i in first_position.items():
            for s2, j in first_position.items():
                if s != s2:
                    yield (i, j), multiplicity[s] * multiplicity[s2]
                elif multiplicity[s] > 1:
                    # two distinct agents holding the same state
                    yield (i, i + 1), multiplicity[s] * (multiplicity[s] - 1)


def build_config_graph(
    protocol: str,
    params: Params,
    *,
    canonical: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> ConfigGraph:
    '''
    Build the configuration graph from every configuration of the protocol.

    Edge probabilities combine the uniform choice of an ordered pair with the
    probabilities of the transition's random outcomes.

    :param canonical: identify configurations up to agent permutation
    :raises CapacityError: if the number of configurations exceeds ``budget``
    :raises UnsupportedProtocolError: for protocols with unbounded state sets
    '''
    if params.scaled:
        logger.warning('building %s graph with scaled constants', protocol)
    return _GraphBuilder(protocol, params, canonical, budget).build()


def verify_self_stabilizing(graph: ConfigGraph) -> VerificationReport:
    '''
    The protocol stabilizes with probability 1 from every configuration iff
    every terminal strongly connected component holds only correct
    configurations.
    '''
    digraph = graph.digraph()
    scc_count = nx.number_strongly_connected_components(digraph)
    terminals = [sorted(component) for component in nx.attracting_components(digraph)]
    counterexample = None
    for component in sorted(terminals):
        bad = [node for node in component if not graph.correct[node]]
        if bad:
            member = bad[0]
            start = min(nx.ancestors(digraph, member) | {member})
            counterexample = Counterexample(graph.configuration(start), graph.configuration(member))
            break
    silent_configs = len({tuple(sorted(graph.nodes[node])) for node in np.flatnonzero(graph.silent)})
    report = VerificationReport(
        ok=counterexample is None,
        counterexample=counterexample,
        node_count=graph.node_count,
        scc_count=scc_count,
        terminal_scc_count=len(terminals),
        silent_configs=silent_configs,
        scaled=graph.params.scaled,
        params=graph.params,
    )
    logger.info('%s n=%d: ok=%s nodes=%d sccs=%d terminal=%d', graph.protocol, graph.params.n,
        report.ok, report.node_count, report.scc_count, report.terminal_scc_count)
    return report


def _target_mask(graph: ConfigGraph, target: t.Union[Target, str]) -> np.ndarray:
    if not isinstance(target, Target):
        target = Target.from_json(target)
    return graph.silent if target is Target.SILENT else graph.correct


def expected_hitting_time(graph: ConfigGraph, start: Configuration, target: t.Union[Target, str]) -> float:
    '''
    Expected number of interactions from ``start`` until the first visit of
    the target set.

    :raises DivergenceError: if the target is not reached with probability 1
    '''
    mask = _target_mask(graph, target)
    origin = graph.node_of(start)
    if mask[origin]:
        return 0.0
    digraph = graph.digraph()
    # states reachable before the first visit to the target
    transient = {origin}
    frontier = [origin]
    while frontier:
        node = frontier.pop()
        for successor in digraph.successors(node):
            if not mask[successor] and successor not in transient:
                transient.add(successor)
                frontier.append(successor)
    reaches_target: t.Set[int] = set()
    for node in np.flatnonzero(mask).tolist():
        if node not in reaches_target:
            reaches_target.add(node)
            reaches_target |= nx.ancestors(digraph, node)
    stuck = transient - reaches_target
    if stuck:
        raise DivergenceError(
            f'{len(stuck)} configurations reachable from the start never reach the {Target(target).value} set')
    order = sorted(transient)
    q = graph.transitions[order, :][:, order]
    system = sparse.identity(len(order), format='csc') - q.tocsc()
    ones = np.ones(len(order))
    if len(order) < DENSE_LIMIT:
        solution = linalg.solve(system.toarray(), ones)
    else:
        solution = sparse_linalg.spsolve(system, ones)
    residual = float(np.max(np.abs(system @ solution - ones)))
    if residual > RESIDUAL_TOLERANCE * max(1.0, float(np.max(np.abs(solution)))):
        raise DivergenceError(f'hitting-time system left a residual of {residual}')
    return float(solution[order.index(origin)])


def rank_counts(config: Configuration, n: int) -> t.List[int]:
    ''' Number of agents at each rank ``0 .. n-1``. '''
    counts = [0] * n
    for state in config:
        counts[state.rank] += 1
    return counts


def barrier_sum_holds(counts: t.Sequence[int], k: int) -> bool:
    ''' Whether, walking down cyclically from rank ``k``, every window of
    ``r + 1`` ranks holds at most ``r + 1`` agents. '''
    n = len(counts)
    total = 0
    for r in range(n):
        total += counts[(k - r) % n]
        if total > r + 1:
            return False
    return True


def barrier_rank(config: Configuration) -> int:
    '''
    A rank ``k`` such that :func:`barrier_sum_holds` for the configuration.

    Takes the first minimum of the prefix sums of ``m_i - 1``; the windows
    below a minimum can never be overfull.
    '''
    n = len(config)
    counts = rank_counts(config, n)
    prefix = list(itertools.accumulate(count - 1 for count in counts))
    k = prefix.index(min(prefix))
    if not barrier_sum_holds(counts, k):
        raise InternalConsistencyError(f'rank {k} is not a barrier', config)
    return k


def check_barrier_preserved(config: Configuration, k: int, protocol: str = 'cai') -> bool:
    ''' Whether rank ``k`` is still a barrier after any single interaction. '''
    n = len(config)
    proto = get_protocol(protocol)
    params = Params.for_population(n, protocol=protocol)
    for i, j in itertools.permutations(range(n), 2):
        outcomes = enumerate_outcomes(
            lambda a, b, rng: proto.transition(a, b, params, rng), config[i], config[j])
        for new_a, new_b in outcomes:
            successor = config.with_states({i: new_a, j: new_b})
            if not barrier_sum_holds(rank_counts(successor, n), k):
                return False
    return True


def null_transition(protocol: str, states: t.Sequence[t.Any], params: Params) -> bool:
    ''' Whether no ordered pair of agents can change the configuration under
    any random outcome. '''
    proto = get_protocol(protocol)
    for i, j in itertools.permutations(range(len(states)), 2):
        a, b = states[i], states[j]
        outcomes = enumerate_outcomes(lambda x, y, rng: proto.transition(x, y, params, rng), a, b)
        if set(outcomes) != {(a, b)}:
            return False
    return True
