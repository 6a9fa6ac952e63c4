import asyncio
import logging
import typing as t
from concurrent.futures import ThreadPoolExecutor


_T = t.TypeVar('_T')
_R = t.TypeVar('_R')


class LoggerMixin:

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._logger = logging.getLogger(f'popsim.{type(self).__name__}')


class ContextLoggerMixin(LoggerMixin):
    logging.getLogger('popsim.ContextLoggerMixin') # just create the logger

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._logger = logging.LoggerAdapter(
            logging.getLogger(f'popsim.ContextLoggerMixin.{type(self).__name__}'),
            {}
        )
        self.set_logger_context(realname=f'popsim.{type(self).__name__}')

    def set_logger_context(self, **context):
        self._logger.extra.update(context)


class TrialPool(LoggerMixin):
    """Runs independent trials on worker threads.

    Results come back in submission order whatever the completion order, so the
    caller stays the single writer of the output."""

    def __init__(self, jobs: int = 1):
        super().__init__()
        if jobs < 1:
            raise ValueError('jobs must be at least 1')
        self._jobs = jobs

    @property
    def jobs(self) -> int:
        return self._jobs

    def map(self, func: t.Callable[[_T], _R], items: t.Iterable[_T]) -> t.List[_R]:
        items = list(items)
        if self._jobs == 1 or len(items) < 2:
            return [func(item) for item in items]
        self._logger.debug('dispatching %d trials on %d workers', len(items), self._jobs)
        return asyncio.run(self._map(func, items))

    async def _map(self, func: t.Callable[[_T], _R], items: t.List[_T]) -> t.List[_R]:
        loop = asyncio.get_running_loop()
        with ThreadPoolExecutor(max_workers=self._jobs) as executor:
            futures = [loop.run_in_executor(executor, func, item) for item in items]
            return list(await asyncio.gather(*futures))
