"""Exception types shared across the package.

Every error raised by panelfx derives from :class:`PanelError`, so callers
(and the command-line runner) can isolate estimator failures with a single
except clause.  Soft conditions (non-convergence, repaired empty clusters,
pseudo-inverse fallbacks) are reported through result flags instead of
exceptions.
"""


class PanelError(Exception):
    """Base class for all panelfx errors."""


# ---- panel construction and ingestion ----

class UnbalancedPanel(PanelError):
    """At least one (unit, time) cell is missing from the input data."""


class DuplicateCell(PanelError):
    """A (unit, time) cell appears more than once."""


class ParseError(PanelError):
    """Input file is malformed or a cell does not parse as a finite number."""


class LagTooLarge(PanelError):
    """Requested cross-section-average lag order is not smaller than T."""


# ---- linear algebra kernels ----

class DimensionMismatch(PanelError):
    """Array shapes are inconsistent with the operation's contract."""


class NotSymmetric(PanelError):
    """Matrix handed to the symmetric eigensolver is not symmetric."""


class InvalidM(PanelError):
    """Requested factor count is outside 1..min(N, T)."""


# ---- factor-count selection ----

class InvalidMMax(PanelError):
    """Upper bound on the factor count is infeasible for the data shape."""


class RequiresNGreaterT(PanelError):
    """The eigenvalue-difference criterion needs more units than periods."""


# ---- estimators ----

class RankDeficientDesign(PanelError):
    """Transformed regressor matrix has deficient column rank."""


class RequiresConvergedILS(PanelError):
    """Bias correction needs a converged interactive-effects fit."""


class TooManyCsaColumns(PanelError):
    """Cross-section-average block has at least as many columns as periods."""


class WeakInstrument(PanelError):
    """Defactored-regressor moment matrix is numerically singular."""


class InvalidGrid(PanelError):
    """Regularization grid is not strictly decreasing and positive."""


class InvalidG(PanelError):
    """Requested group count is infeasible for the panel dimensions."""


class InvalidGamma(PanelError):
    """Discretization tuning constant is outside (0, 1]."""


# ---- diagnostics ----

class DegenerateRows(PanelError):
    """Too few rows with positive variance to form pairwise correlations."""


class DegenerateTheta(PanelError):
    """Loading-based correction factor is numerically 1."""


class DegenerateCSA(PanelError):
    """Cross-section average has zero variance over time."""


class NegativeQuadForm(PanelError):
    """Screened correlation quadratic form is not positive."""


class InvalidThreshold(PanelError):
    """Correlation screening threshold is not below 1; T is too small."""


# ---- simulation harness ----

class InvalidSpec(PanelError):
    """Data-generating-process specification fails validation."""


class ConfigError(PanelError):
    """Run configuration file is missing, malformed, or inconsistent."""
