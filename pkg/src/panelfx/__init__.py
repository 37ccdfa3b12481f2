"""Estimation and diagnosis of panels with unobserved heterogeneity.

The package covers three families of slope estimators for balanced
panels whose unobserved heterogeneity is richer than additive unit and
time effects (interactive factor structures, grouped time paths,
nonseparable unit-time functions), the cross-section dependence tests
and exponent estimators used to detect when the classical within
estimators break, data-driven factor-count selection, and a seeded
simulation harness for comparing everything on common ground.
"""

from .dgp import DGPSpec, GroundTruth, simulate
from .diagnostics import (
    ExponentEstimate,
    TestResult,
    alpha_observed,
    alpha_residual,
    cd_star,
    cd_test,
    cdw_plus,
    cdw_test,
    hausman_ife,
)
from .errors import ConfigError, PanelError
from .factors import FactorCountReport, bai_ng, er_gr, gos, onatski_ed, scaled_eigenvalues
from .gfe import (
    GfOptions,
    Grouping,
    KMeansOptions,
    discretize_blm,
    gf_estimate,
    gf_select_G,
    kmeans,
    tsgfm_estimate,
)
from .ife import (
    EstimateResult,
    IlsOptions,
    ccep_estimate,
    fe_estimate,
    ils_bias_correct,
    ils_estimate,
    pnnr_estimate,
    tsiv_estimate,
)
from .linalg import FactorModel, principal_components
from .mc import ESTIMATORS, McResult, McSummary, mc_run
from .panel import DemeanMode, PanelData, cross_section_averages, demean, load_panel

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "PanelData", "DemeanMode", "load_panel", "demean", "cross_section_averages",
    "FactorModel", "principal_components",
    "EstimateResult", "IlsOptions", "fe_estimate", "ils_estimate",
    "ils_bias_correct", "ccep_estimate", "tsiv_estimate", "pnnr_estimate",
    "Grouping", "KMeansOptions", "GfOptions", "kmeans", "gf_estimate",
    "gf_select_G", "discretize_blm", "tsgfm_estimate",
    "TestResult", "ExponentEstimate", "cd_test", "cdw_test", "cdw_plus",
    "cd_star", "alpha_observed", "alpha_residual", "hausman_ife",
    "FactorCountReport", "scaled_eigenvalues", "bai_ng", "er_gr",
    "onatski_ed", "gos",
    "DGPSpec", "GroundTruth", "simulate",
    "ESTIMATORS", "McSummary", "McResult", "mc_run",
    "PanelError", "ConfigError",
]
