"""Exception hierarchy shared across the harness.

The CLI maps these onto exit codes: ConfigError -> 1, AgentError and
PolicyDivergenceError -> 2, DataError -> 3.
"""


class HarnessError(Exception):
    """Base class for all harness failures."""


class ConfigError(HarnessError):
    """Invalid run configuration or command-line arguments."""


class AgentError(HarnessError):
    """A translation agent failed or violated its contract."""


class ProtocolError(AgentError):
    """Wire-protocol violation while talking to an external agent."""


class PolicyDivergenceError(HarnessError):
    """A session wrote more tokens than the configured guard allows."""


class DataError(HarnessError):
    """Corpus or data file is missing, malformed, or inconsistent."""
