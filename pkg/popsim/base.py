import typing as t


class IChoiceSource(t.Protocol):
    """Randomness seen by transition functions.

    Both the seeded RNG stream and the oracle's outcome enumerator implement it,
    so a transition function is written once and used for simulation and for
    exact graph construction."""

    def uniform(self, k: int) -> int:
        raise NotImplementedError

    def bernoulli(self, p: float) -> bool:
        raise NotImplementedError


class ITracker(t.Protocol):
    """Incremental correctness bookkeeping for one run."""

    @property
    def correct(self) -> bool:
        raise NotImplementedError

    def update(self, old: t.Any, new: t.Any) -> None:
        raise NotImplementedError


class IPopulationProtocol(t.Protocol):
    """What the engine and the oracle need to know about a protocol."""

    name: str
    silent: bool
    first_rank: int

    def transition(self, a: t.Any, b: t.Any, params: t.Any, rng: IChoiceSource) -> t.Tuple[t.Any, t.Any]:
        raise NotImplementedError

    def validate(self, state: t.Any, params: t.Any, deep: bool = True) -> None:
        raise NotImplementedError

    def rank_of(self, state: t.Any) -> t.Optional[int]:
        raise NotImplementedError

    def is_correct(self, states: t.Sequence[t.Any]) -> bool:
        raise NotImplementedError

    def is_silent(self, states: t.Sequence[t.Any]) -> bool:
        raise NotImplementedError

    def is_triggered(self, state: t.Any, params: t.Any) -> bool:
        raise NotImplementedError

    def tracker(self, states: t.Sequence[t.Any], params: t.Any) -> ITracker:
        raise NotImplementedError

    def enumerate_states(self, params: t.Any) -> t.List[t.Any]:
        raise NotImplementedError

    def count_states(self, params: t.Any) -> int:
        raise NotImplementedError

    def default_horizon(self, params: t.Any) -> int:
        raise NotImplementedError

    def sort_key(self, state: t.Any) -> tuple:
        raise NotImplementedError
