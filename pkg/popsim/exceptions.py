class PopSimError(Exception):
    pass


class InvalidPopulationError(PopSimError):
    ''' Raised when a population size or a derived constant is out of range. '''
    def __init__(self, message: str, n: int = None):
        super().__init__(message)
        self.n = n

    def __str__(self):
        if self.n is None:
            return self.args[0]
        return 'InvalidPopulation<n={}> {}'.format(self.n, self.args[0])


class InternalConsistencyError(PopSimError):
    ''' This exception is only raised when there is faulty logic in a transition
    function, e.g. a state left outside its declared bounds. '''
    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state

    def __str__(self):
        if self.state is None:
            return self.args[0]
        return '{} (state={!r})'.format(self.args[0], self.state)


class UnsupportedProtocolError(PopSimError):
    ''' Raised when an operation is requested for a protocol that does not
    support it, e.g. silence detection for a non-silent protocol. '''
    def __init__(self, protocol: str, operation: str):
        super().__init__(protocol, operation)
        self.protocol = protocol
        self.operation = operation

    def __str__(self):
        return 'protocol {!r} does not support {}'.format(self.protocol, self.operation)


class ConfigurationDomainError(PopSimError):
    ''' Raised when an initial configuration kind cannot be built for a
    protocol or population. '''


class CapacityError(PopSimError):
    ''' Raised when an exact configuration graph would exceed its budget. '''
    def __init__(self, count: int, budget: int):
        super().__init__(count, budget)
        self.count = count
        self.budget = budget

    def __str__(self):
        return 'configuration count {} exceeds the budget of {}'.format(self.count, self.budget)


class DivergenceError(PopSimError):
    ''' Raised when a target set is not reached with probability 1. '''


class AnalysisDomainError(PopSimError):
    pass


class SchemaError(PopSimError):
    pass


class OutputError(PopSimError):
    ''' Raised when a result file cannot be written. '''
    def __init__(self, path, reason):
        super().__init__(path, reason)
        self.path = path
        self.reason = reason

    def __str__(self):
        return 'cannot write {}: {}'.format(self.path, self.reason)


class UsageError(PopSimError):
    ''' Raised for an invalid command line or experiment description. '''
