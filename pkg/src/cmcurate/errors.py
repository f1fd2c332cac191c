"""Exception hierarchy shared across the toolkit."""


class CmCurateError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CmCurateError):
    """Invalid or missing configuration (CLI exit code 2)."""


class DataError(CmCurateError):
    """Bad input data: unreadable files, too many malformed records (exit code 1)."""


class EnsembleUnavailable(CmCurateError):
    """Every classifier backend failed for a record."""


class ScorerUnavailable(CmCurateError):
    """A scoring backend could not produce a score."""


class BackendError(CmCurateError):
    """A single backend call failed (timeout, transport, malformed response)."""


class PipelinePaused(CmCurateError):
    """The augmentation run stopped at a checkpoint and can be resumed."""

    def __init__(self, message, checkpoint_dir=None):
        super().__init__(message)
        self.checkpoint_dir = checkpoint_dir
