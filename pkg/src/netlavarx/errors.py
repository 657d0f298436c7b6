"""Exception types shared across the toolkit."""


class NetLavarxError(Exception):
    """Base class for all toolkit errors."""


class InvalidInput(NetLavarxError):
    """Input violates a kernel or operation precondition (non-finite, wrong shape, ...)."""


class ConstantColumn(NetLavarxError):
    """A column is (near-)constant and cannot be standardized."""


class InsufficientData(NetLavarxError):
    """Too few samples for the requested lag depth or split."""


class DependencyNotReady(NetLavarxError):
    """A required intermediate product (e.g. latent score blocks) is missing."""


class ShapeMismatch(NetLavarxError):
    """Blocks that must conform do not."""


class GenerationFailed(NetLavarxError):
    """Random system generation could not satisfy its constraints."""


class UnstableSystem(NetLavarxError):
    """The latent dynamics have spectral radius >= 1."""


class DegenerateGeometry(NetLavarxError):
    """Loadings geometry is singular; no valid oblique projector exists."""


class InsufficientRank(NetLavarxError):
    """Data rank is below the requested number of latent variables."""


class GridExhausted(NetLavarxError):
    """Every grid-search cell failed to fit."""

    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = failures or []


class InvalidFormat(NetLavarxError):
    """Unknown export or file format."""


class DataError(NetLavarxError):
    """Malformed CSV or configuration file."""
