"""Exception types shared across the package."""


class GroundedQAError(Exception):
    """Base class for all package errors."""


class ConfigurationError(GroundedQAError):
    """Invalid configuration value (unknown tokenizer, bad provider setup, ...)."""


class IngestError(GroundedQAError):
    """Document or corpus could not be ingested."""


class IndexBuildError(GroundedQAError):
    """Index construction failed (empty store, dimension mismatch, ...)."""


class ProviderError(GroundedQAError):
    """A model/search provider call failed."""


class ScriptExhaustedError(ProviderError):
    """A scripted mock provider ran out of scripted responses."""


class OrchestratorError(GroundedQAError):
    """Pipeline-level failure while answering a query."""


class EvalError(GroundedQAError):
    """Evaluation inputs are inconsistent or malformed."""
