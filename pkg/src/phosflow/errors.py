"""Errors and warning categories used across the package."""


class PhosflowError(Exception):
    """Base class for all errors raised by phosflow."""


# --- ingest ---------------------------------------------------------------

class MissingFileError(PhosflowError):
    """An input file does not exist."""


class MalformedRowError(PhosflowError):
    """A data row violates the schema (bad type, negative value, duplicate)."""


class UnknownCountryError(PhosflowError):
    """A country code cannot be resolved against the registry."""


class UnknownCategoryError(PhosflowError):
    """An HS6 code is not part of the goods-category table."""


class SelfLoopRowError(PhosflowError):
    """A trade row reports a country exporting to itself."""


# --- flow construction and fit --------------------------------------------

class AllZeroError(PhosflowError):
    """A vector or matrix that must carry mass is entirely zero."""


class LocalUseExceedsTotalError(PhosflowError):
    """Implied local-use shares sum to more than the global total."""


class ZeroVarianceError(PhosflowError):
    """Observed vector has no variance, so R-squared is undefined."""


class InvalidFlowMatrixError(PhosflowError):
    """A flow matrix violates its invariants (negativity, total, dummy row)."""


# --- corrections ----------------------------------------------------------

class ZeroOffDiagonalError(PhosflowError):
    """All trade flow was eliminated although local use does not cover the total."""


# --- dynamics -------------------------------------------------------------

class BothZeroError(PhosflowError):
    """Jaccard similarity of two all-zero matrices is undefined."""


class FewerThanTwoYearsError(PhosflowError):
    """A similarity series needs at least two years."""


class LagExceedsSpanError(PhosflowError):
    """Requested lag is larger than the span of available years."""


# --- synthetic worlds and references ---------------------------------------

class InfeasibleConfigError(PhosflowError):
    """Synthetic-world parameters are mutually inconsistent."""


class UnknownFormulaError(PhosflowError):
    """No brute-force reference is registered under the given name."""


# --- pipeline --------------------------------------------------------------

class NegativeTotalError(PhosflowError):
    """A tonnage total used for scaling is negative."""


class OverlappingGroupsError(PhosflowError):
    """Two diagram groups claim the same country."""


class PipelineError(PhosflowError):
    """A pipeline run could not produce any usable result."""


# --- warnings ---------------------------------------------------------------

class PhosflowWarning(UserWarning):
    """Base category for non-fatal data issues."""


class NoMinerImportsWarning(PhosflowWarning):
    """A non-mining exporter has no imports from mining countries."""


class NonPositiveExpectedOutflowWarning(PhosflowWarning):
    """Expected outflow of a qualifying country is not positive."""


class NoImprovementWarning(PhosflowWarning):
    """Weight optimization failed to improve on equal weights."""


class DroppedFlowWarning(PhosflowWarning):
    """Flow mass had to be discarded because no origin could be attributed."""
