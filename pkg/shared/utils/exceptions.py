"""
Exception hierarchy for fidelity_agents

Every error carries the process exit code the orchestrator should return
when it reaches the command line.
"""


class FidelityError(Exception):
    """Base class for all errors raised by fidelity_agents"""
    exit_code = 1


class UsageError(FidelityError):
    """Bad flags, missing required options or invalid configuration values"""
    exit_code = 1


class DataError(FidelityError, ValueError):
    """Invalid input data or parameters to a data operation"""
    exit_code = 2


class ModelError(DataError):
    """Width mismatch, empty training data or model/dataset task mismatch"""


class ExplainerError(DataError):
    """An explanation cannot be produced or used for the requested operation"""


class SearchError(DataError):
    """A parameter search had no usable instance"""


class MissingArtifactError(FidelityError, FileNotFoundError):
    """A prerequisite artifact is missing; the message names the step to run"""
    exit_code = 3
