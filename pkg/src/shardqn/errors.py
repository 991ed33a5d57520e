class ShardqnError(Exception):
    pass


class UnstableInput(ShardqnError, ValueError):
    """Requested load is at or beyond the stability limit."""


class NonConvergence(ShardqnError, RuntimeError):
    pass


class SingularChain(ShardqnError, ValueError):
    """Chain does not have exactly one closed communicating class."""


class TruncationTooSmall(ShardqnError, ValueError):
    pass


class EnumerationTooLarge(ShardqnError, ValueError):
    pass


class ConfigError(ShardqnError, ValueError):
    pass
