"""Estimators for panels whose unobserved heterogeneity is richer than
additive effects.

All entry points share one contract: take a
:class:`~panelfx.panel.PanelData`, return an :class:`EstimateResult`
holding coefficients, a cluster-robust variance, the residual matrix and
fit bookkeeping. ``ils_estimate`` and ``pnnr_estimate`` additionally
return the fitted factor structure.

* ``fe_estimate``: pooled, one-way or two-way within OLS.
* ``ils_estimate``: iterated least squares alternating between the slope
  given factors and principal components given the slope.
* ``ils_bias_correct``: plug-in corrections for the three incidental
  parameter bias terms of the iterated estimator.
* ``ccep_estimate``: pooled regression with cross-section averages
  (optionally lagged) absorbing the common factors.
* ``tsiv_estimate``: two-stage estimator that defactors the regressors
  first and instruments the outcome equation with the result.
* ``pnnr_estimate``: nuclear-norm regularized preliminary fit followed by
  least-squares polishing sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidGrid,
    InvalidM,
    LagTooLarge,
    RankDeficientDesign,
    RequiresConvergedILS,
    TooManyCsaColumns,
    WeakInstrument,
)
from .factors import bai_ng, er_gr
from .linalg import FactorModel, principal_components
from .panel import DemeanMode, PanelData, cross_section_averages, demean

__all__ = [
    "EstimateResult",
    "IlsOptions",
    "fe_estimate",
    "ils_estimate",
    "ils_bias_correct",
    "ccep_estimate",
    "tsiv_estimate",
    "pnnr_estimate",
]

_RANK_TOL = 1e-12
_WEAK_TOL = 1e-10
_ABSORB_TOL = 1e-8


@dataclass
class EstimateResult:
    """Slope estimate with variance, residuals and fit bookkeeping.

    ``residuals`` is always N x T. For the within, interactive-effects,
    common-correlated-effects and nuclear-norm estimators it holds fit
    residuals, with the estimated heterogeneity removed; the two-stage
    instrumental-variables estimator reports y - X beta instead, since
    it never fits the factor component of the outcome. ``m_used`` is
    None for estimators that do not pick a factor count. ``flags``
    carries soft conditions (non-convergence, variance fallbacks,
    absorbed regressors) that are not worth an exception.
    """

    beta: np.ndarray
    stderr: np.ndarray
    vcov: np.ndarray
    residuals: np.ndarray
    method: str
    m_used: int | None = None
    iterations: int = 0
    converged: bool = True
    ssr: float = 0.0
    ssr_path: tuple = ()
    flags: tuple = ()
    details: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        self.stderr = np.atleast_1d(np.asarray(self.stderr, dtype=float))
        vcov = np.asarray(self.vcov, dtype=float)
        k = self.beta.shape[0]
        if self.stderr.shape != (k,) or vcov.shape != (k, k):
            raise DimensionMismatch(
                f"stderr {self.stderr.shape} / vcov {vcov.shape} do not match beta ({k},)")
        scale = max(1.0, np.abs(vcov).max()) if vcov.size else 1.0
        if vcov.size and np.abs(vcov - vcov.T).max() > 1e-8 * scale:
            raise DimensionMismatch("vcov is not symmetric within 1e-8")
        self.vcov = (vcov + vcov.T) / 2.0
        self.residuals = np.asarray(self.residuals, dtype=float)
        if self.residuals.ndim != 2:
            raise DimensionMismatch("residuals must be an N x T matrix")
        self.ssr = float(self.ssr)
        self.ssr_path = tuple(float(v) for v in self.ssr_path)
        self.flags = tuple(str(f) for f in self.flags)
        for arr in (self.beta, self.stderr, self.vcov, self.residuals):
            arr.setflags(write=False)


@dataclass
class IlsOptions:
    """Tuning for the iterated least-squares factor loop."""

    m: int
    init: str = "two_way_within"
    init_beta: np.ndarray | None = None
    max_iter: int = 1000
    tol: float = 1e-8
    bias_correct: bool = False

    def __post_init__(self) -> None:
        if not (isinstance(self.m, (int, np.integer)) and self.m >= 0):
            raise InvalidM(f"factor count m={self.m} must be a non-negative integer")
        if self.init not in ("pooled_ols", "two_way_within", "user"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "user":
            if self.init_beta is None:
                raise ValueError("init='user' needs init_beta")
            self.init_beta = np.atleast_1d(np.asarray(self.init_beta, dtype=float))
            if not np.isfinite(self.init_beta).all():
                raise ValueError("init_beta contains non-finite values")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


# ---- shared kernels ----

def _strip_factors(a: np.ndarray, f: np.ndarray) -> np.ndarray:
    # annihilate span(f) along the time axis; a is N x T or N x T x K
    if f.shape[1] == 0:
        return np.array(a, dtype=float)
    t = f.shape[0]
    if a.ndim == 2:
        return a - (a @ f) @ f.T / t
    at = a.transpose(0, 2, 1)
    at = at - (at @ f) @ f.T / t
    return at.transpose(0, 2, 1)


def _empty_factors(n: int, t: int) -> FactorModel:
    return FactorModel(F=np.zeros((t, 0)), Z=np.zeros((n, 0)), m=0)


def _gram(x3: np.ndarray, w3: np.ndarray | None = None) -> np.ndarray:
    return np.einsum("ntk,ntl->kl", x3, x3 if w3 is None else w3)


def _xty(x3: np.ndarray, y2: np.ndarray) -> np.ndarray:
    return np.einsum("ntk,nt->k", x3, y2)


def _solve_sym(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    w = np.linalg.eigvalsh((a + a.T) / 2.0)
    if w[-1] <= 0 or w[0] <= _RANK_TOL * w[-1]:
        raise RankDeficientDesign(f"{what}: transformed design has deficient rank")
    return np.linalg.solve(a, b)


def _cluster_vcov(a: np.ndarray, design: np.ndarray, resid: np.ndarray,
                  use_pinv: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Unit-clustered sandwich A^-1 (sum_i s_i s_i') A^-1' with s_i = Z_i'u_i."""
    scores = np.einsum("ntk,nt->nk", design, resid)
    meat = scores.T @ scores
    n = resid.shape[0]
    if use_pinv:
        ainv = np.linalg.pinv(a)
        v = ainv @ meat @ ainv.T
    else:
        v = np.linalg.solve(a, np.linalg.solve(a, meat.T).T)
    v *= n / (n - 1)
    v = (v + v.T) / 2.0
    return v, np.sqrt(np.clip(np.diag(v), 0.0, None))


def _pooled(panel: PanelData) -> tuple[np.ndarray, np.ndarray]:
    beta = _solve_sym(_gram(panel.X), _xty(panel.X, panel.y), "pooled")
    resid = panel.y - panel.X @ beta
    return beta, resid


# ---- within estimators ----

_FE_NAMES = {
    DemeanMode.NONE: "pooled_ols",
    DemeanMode.UNIT: "fe",
    DemeanMode.TIME: "fe_time",
    DemeanMode.TWO_WAY: "twfe",
}


def fe_estimate(panel: PanelData, mode: DemeanMode | str = DemeanMode.TWO_WAY) -> EstimateResult:
    """Pooled or within OLS after sweeping out additive effects.

    ``mode`` selects which means to remove (none, unit, time, two_way).
    Standard errors are clustered by unit. Raises
    :class:`RankDeficientDesign` when the demeaned regressors are
    collinear, as happens with unit-invariant or time-invariant columns.
    """
    mode = DemeanMode(mode)
    swept = demean(panel, mode)
    a = _gram(swept.X)
    beta = _solve_sym(a, _xty(swept.X, swept.y), _FE_NAMES[mode])
    resid = swept.y - swept.X @ beta
    vcov, stderr = _cluster_vcov(a, swept.X, resid)
    ssr = float(np.sum(resid * resid))
    return EstimateResult(
        beta=beta, stderr=stderr, vcov=vcov, residuals=resid,
        method=_FE_NAMES[mode], m_used=None, iterations=0, converged=True,
        ssr=ssr, ssr_path=(ssr,))


# ---- iterated least squares ----

def _ils_design(x: np.ndarray, f: np.ndarray, lam: np.ndarray) -> np.ndarray:
    # defactored regressors, loading-projected across units:
    # Z_i = M_F X_i - sum_k [P_Lam]_ik M_F X_k
    mx = _strip_factors(x, f)
    if lam.shape[1] == 0:
        return mx
    proj = lam @ np.linalg.pinv(lam.T @ lam) @ lam.T
    return mx - np.tensordot(proj, mx, axes=(1, 0))


def ils_estimate(panel: PanelData, opts: IlsOptions) -> tuple[EstimateResult, FactorModel]:
    """Interactive-effects slope by alternating least squares.

    Repeats two exact minimizations until the slope settles: principal
    components of y - X beta give the factors, then OLS on the
    factor-annihilated data gives the slope. The recorded ssr_path is
    the objective after each full sweep and never increases. Reaching
    max_iter without a small slope step is reported through
    ``converged=False`` and a ``not_converged`` flag, not an exception.

    With m=0 the model has no factor component and the estimator reduces
    to pooled OLS in a single step.
    """
    n, t, k = panel.X.shape
    y, x = panel.y, panel.X
    if opts.m > min(n, t) - 1:
        raise InvalidM(f"m={opts.m} needs min(N, T) > m, got min({n}, {t})")

    if opts.m == 0:
        beta, resid = _pooled(panel)
        vcov, stderr = _cluster_vcov(_gram(x), x, resid)
        ssr = float(np.sum(resid * resid))
        result = EstimateResult(
            beta=beta, stderr=stderr, vcov=vcov, residuals=resid, method="ils",
            m_used=0, iterations=0, converged=True, ssr=ssr, ssr_path=(ssr,),
            details={"init": opts.init})
        return result, _empty_factors(n, t)

    if opts.init == "pooled_ols":
        beta = _pooled(panel)[0]
    elif opts.init == "two_way_within":
        beta = fe_estimate(panel, DemeanMode.TWO_WAY).beta
    else:
        if opts.init_beta.shape != (k,):
            raise DimensionMismatch(
                f"init_beta shape {opts.init_beta.shape} does not match K={k}")
        beta = opts.init_beta.copy()

    ssr_path = []
    converged = False
    iterations = 0
    fm = None
    resid = y - x @ beta
    for _ in range(opts.max_iter):
        iterations += 1
        fm = principal_components(y - x @ beta, opts.m)
        mx = _strip_factors(x, fm.F)
        my = _strip_factors(y, fm.F)
        beta_new = _solve_sym(_gram(mx), _xty(mx, my), "ils")
        resid = _strip_factors(y - x @ beta_new, fm.F)
        ssr_path.append(float(np.sum(resid * resid)))
        step = np.abs(beta_new - beta).max()
        beta = beta_new
        if step < opts.tol:
            converged = True
            break

    loadings = (y - x @ beta) @ fm.F / t
    fm = FactorModel(F=fm.F, Z=loadings, m=opts.m)
    design = _ils_design(x, fm.F, fm.Z)
    vcov, stderr = _cluster_vcov(_gram(design), design, resid)
    flags = () if converged else ("not_converged",)
    result = EstimateResult(
        beta=beta, stderr=stderr, vcov=vcov, residuals=resid, method="ils",
        m_used=opts.m, iterations=iterations, converged=converged,
        ssr=ssr_path[-1], ssr_path=tuple(ssr_path), flags=flags,
        details={"init": opts.init, "tol": opts.tol})

    if opts.bias_correct:
        if converged:
            result = ils_bias_correct(result, panel)
        else:
            result = replace(result, flags=result.flags + ("bias_correction_skipped",))
    return result, fm


def ils_bias_correct(result: EstimateResult, panel: PanelData,
                     correction_set: frozenset | set | tuple = ("B1", "B2", "B3"),
                     ) -> EstimateResult:
    """Remove the plug-in incidental-parameter biases from an ILS fit.

    Three additive terms, selectable through ``correction_set``:

    * ``B1``: serial correlation between errors and future regressors
      (the dynamic-panel term), banded at floor(T^(1/3)) leads.
    * ``B2``: cross-section heteroskedasticity interacting with the
      loadings; identically zero under homoskedastic errors.
    * ``B3``: time-profile heteroskedasticity interacting with the
      factors; identically zero under iid errors.

    The factor structure is recomputed from the panel at
    ``result.beta``, so the input must be a converged fit. An empty
    ``correction_set`` returns an unchanged copy. The variance is kept
    from the input: the corrections shift the center of the estimate,
    not its asymptotic dispersion.
    """
    chosen = frozenset(correction_set)
    if not chosen <= {"B1", "B2", "B3"}:
        raise ValueError(f"unknown correction terms {sorted(chosen - {'B1', 'B2', 'B3'})}")
    if result.m_used is None:
        raise RequiresConvergedILS("input does not carry a factor count")
    if not result.converged:
        raise RequiresConvergedILS("bias correction needs a converged fit")
    if not chosen:
        return replace(result)

    n, t, k = panel.X.shape
    y, x = panel.y, panel.X
    m = result.m_used
    if m == 0:
        # no factor structure, every term is identically zero
        return replace(result, method=result.method + "_bc",
                       details={**result.details, "bias_correction": np.zeros(k),
                                "correction_set": tuple(sorted(chosen))})

    u = y - x @ result.beta
    fm = principal_components(u, m)
    f, lam = fm.F, fm.Z
    eps = u - lam @ f.T
    ginv = np.linalg.pinv(lam.T @ lam / n)

    mx = _strip_factors(x, f)
    design = _ils_design(x, f, lam)
    d_hat = _gram(design) / (n * t)

    b1 = np.zeros(k)
    if "B1" in chosen:
        lead = int(np.floor(np.cbrt(t) + 1e-9))
        if lead >= 1:
            idx = np.arange(t)
            band = (idx[None, :] - idx[:, None] >= 1) & (idx[None, :] - idx[:, None] <= lead)
            c = np.einsum("it,isk->tsk", eps, x) * band[:, :, None]
            b1 = np.einsum("ts,stk->k", f @ f.T / t, c) / n

    b2 = np.zeros(k)
    if "B2" in chosen:
        proj = lam @ np.linalg.pinv(lam.T @ lam) @ lam.T
        x_mlam = x - np.tensordot(proj, x, axes=(1, 0))
        s = np.einsum("itk,tm->ikm", x_mlam, f) / t
        w = lam @ ginv
        sig = (eps * eps).mean(axis=1)
        b2 = np.einsum("ikm,im,i->k", s, w, sig) / n

    b3 = np.zeros(k)
    if "B3" in chosen:
        omega = (eps * eps).mean(axis=0)
        wt = (omega[:, None] * f) @ ginv
        b3 = np.einsum("itk,tm,im->k", mx, wt, lam) / (n * t)

    target = b1 / t + b2 / n + b3 / t
    shift = _solve_sym(d_hat, target, "bias correction")
    beta_bc = result.beta + shift

    u2 = y - x @ beta_bc
    fm2 = principal_components(u2, m)
    resid = u2 - fm2.Z @ fm2.F.T
    ssr = float(np.sum(resid * resid))
    return EstimateResult(
        beta=beta_bc, stderr=result.stderr, vcov=result.vcov, residuals=resid,
        method=result.method + "_bc", m_used=m, iterations=result.iterations,
        converged=True, ssr=ssr, ssr_path=(ssr,), flags=result.flags,
        details={**result.details, "bias_correction": shift,
                 "correction_set": tuple(sorted(chosen))})


# ---- common correlated effects ----

def ccep_estimate(panel: PanelData, extra_csa: np.ndarray | None = None,
                  observed_factors: np.ndarray | None = None,
                  dynamic: bool = False) -> EstimateResult:
    """Pooled slope after projecting out cross-section averages.

    The projection block stacks, in order: ``observed_factors`` (T x p,
    caller-supplied common variables, an intercept column included if
    wanted), the per-period averages of y and every regressor, their
    floor(T^(1/3)) backfilled lags when ``dynamic`` is set, and
    ``extra_csa`` columns (T x r, averages of outside variables).

    A block with q >= T columns leaves no time variation and raises
    :class:`TooManyCsaColumns`; a rank-deficient block is reduced to an
    orthonormal basis and flagged ``csa_rank_deficient``. Regressors
    absorbed by the projection (defactored norm below 1e-8 of the
    original) get coefficient 0, zeroed variance rows and a
    ``csa_absorbed:<name>`` flag each.

    The variance is the nonparametric mean-group sandwich built from
    unit-level slopes; with fewer than 10 units, or when a unit-level
    regression is not estimable, it falls back to the unit-clustered
    pooled sandwich (flag ``vcov_fallback``).
    """
    n, t, k = panel.X.shape
    names = []
    blocks = []
    if observed_factors is not None:
        obs = np.asarray(observed_factors, dtype=float)
        if obs.ndim == 1:
            obs = obs[:, None]
        if obs.shape[0] != t:
            raise DimensionMismatch(f"observed_factors has {obs.shape[0]} rows, expected T={t}")
        blocks.append(obs)
        names += [f"d{j + 1}" for j in range(obs.shape[1])]

    lags = 0
    if dynamic:
        if t < 8:
            raise LagTooLarge(f"dynamic cross-section averages need T >= 8, got T={t}")
        lags = int(np.floor(np.cbrt(t) + 1e-9))
    blocks.append(cross_section_averages(panel, include_y=True, lags=lags))
    base = ["ybar"] + [f"{v}_bar" for v in panel.var_names]
    names += base
    for j in range(1, lags + 1):
        names += [f"{b}_lag{j}" for b in base]

    if extra_csa is not None:
        extra = np.asarray(extra_csa, dtype=float)
        if extra.ndim == 1:
            extra = extra[:, None]
        if extra.shape[0] != t:
            raise DimensionMismatch(f"extra_csa has {extra.shape[0]} rows, expected T={t}")
        blocks.append(extra)
        names += [f"csa{j + 1}" for j in range(extra.shape[1])]

    wbar = np.hstack(blocks)
    q = wbar.shape[1]
    if q >= t:
        raise TooManyCsaColumns(f"{q} projection columns with only T={t} periods")

    flags = []
    u_, s_, _ = np.linalg.svd(wbar, full_matrices=False)
    keep = s_ > max(wbar.shape) * np.finfo(float).eps * s_[0]
    qmat = u_[:, keep]
    rank = qmat.shape[1]
    if rank < q:
        flags.append("csa_rank_deficient")

    ytil = panel.y - (panel.y @ qmat) @ qmat.T
    xt = panel.X.transpose(0, 2, 1)
    xtil = (xt - (xt @ qmat) @ qmat.T).transpose(0, 2, 1)

    dropped = []
    for j in range(k):
        full = np.linalg.norm(panel.X[:, :, j])
        left = np.linalg.norm(xtil[:, :, j])
        if left <= _ABSORB_TOL * max(full, np.finfo(float).tiny):
            dropped.append(j)
            xtil[:, :, j] = 0.0
            flags.append(f"csa_absorbed:{panel.var_names[j]}")

    a = _gram(xtil)
    b = _xty(xtil, ytil)
    if dropped or np.linalg.matrix_rank(a) < k:
        beta = np.linalg.lstsq(
            xtil.reshape(n * t, k), ytil.reshape(n * t), rcond=None)[0]
        if np.linalg.matrix_rank(a) < k - len(dropped):
            flags.append("rank_deficient_design")
    else:
        beta = _solve_sym(a, b, "ccep")
    resid = ytil - xtil @ beta
    ssr = float(np.sum(resid * resid))

    keep_dims = np.setdiff1d(np.arange(k), dropped)
    fallback = n < 10 or t - rank <= len(keep_dims)
    vcov = None
    if not fallback:
        beta_units = np.zeros((n, k))
        for i in range(n):
            coef, _, urank, _ = np.linalg.lstsq(xtil[i], ytil[i], rcond=None)
            if urank < len(keep_dims):
                fallback = True
                break
            beta_units[i] = coef
        if not fallback:
            grams = np.einsum("itk,itl->ikl", xtil, xtil) / t
            psi = grams.mean(axis=0)
            dev = beta_units - beta_units.mean(axis=0)
            qd = np.einsum("ikl,il->ik", grams, dev)
            r = (qd.T @ qd) / (n - 1)
            psinv = np.linalg.pinv(psi)
            vcov = psinv @ r @ psinv / n
    if vcov is None:
        flags.append("vcov_fallback")
        vcov, _ = _cluster_vcov(a, xtil, resid, use_pinv=True)
    if dropped:
        vcov[dropped, :] = 0.0
        vcov[:, dropped] = 0.0
    vcov = (vcov + vcov.T) / 2.0
    stderr = np.sqrt(np.clip(np.diag(vcov), 0.0, None))

    return EstimateResult(
        beta=beta, stderr=stderr, vcov=vcov, residuals=resid,
        method="ccep_dynamic" if dynamic else "ccep", m_used=None,
        iterations=0, converged=True, ssr=ssr, ssr_path=(ssr,),
        flags=tuple(flags),
        details={"csa_columns": tuple(names), "csa_rank": rank,
                 "absorbed": tuple(panel.var_names[j] for j in dropped)})


# ---- two-stage instrumental variables ----

def _weak_check(a: np.ndarray, reference: np.ndarray, stage: str) -> None:
    # scale against the raw-regressor Gram: defactoring that leaves
    # nothing behind must fail even when the survivor ratio looks fine
    sv = np.linalg.svd(a, compute_uv=False)
    ref = max(np.linalg.svd(reference, compute_uv=False)[0], sv[0])
    if ref <= 0 or sv[-1] <= _WEAK_TOL * ref:
        raise WeakInstrument(f"{stage}: defactored moment matrix is numerically singular")


def tsiv_estimate(panel: PanelData, m_x: int | None = None, m: int | None = None,
                  m_max: int = 8) -> EstimateResult:
    """Two-stage slope estimate with defactored regressors as instruments.

    Stage one extracts ``m_x`` principal components from the regressors
    (all K columns stacked into an (N K) x T panel), strips them from X
    and runs the preliminary regression on the stripped design. Stage
    two extracts ``m`` components from the stage-one residuals, strips
    them as well, and solves the instrumental-variables moment

        sum_i Xtt_i' (y_i - X_i beta) = 0,

    where Xtt is X after both strips. Factor counts left as None are
    chosen by the eigenvalue-ratio rule with bound ``m_max``. Residuals
    are y - X beta: the common component of the outcome is instrumented
    away, never estimated. A numerically singular moment matrix raises
    :class:`WeakInstrument`.
    """
    n, t, k = panel.X.shape
    y, x = panel.y, panel.X
    stacked = np.moveaxis(x, 2, 1).reshape(n * k, t)

    if m_x is None:
        cap = min(m_max, min(stacked.shape) - 1)
        m_x = er_gr(stacked, cap)[0].m_hat if cap >= 1 else 0
    elif not 0 <= m_x <= min(stacked.shape) - 1:
        raise InvalidM(f"m_x={m_x} outside 0..{min(stacked.shape) - 1}")

    fx = principal_components(stacked, m_x).F if m_x > 0 else np.zeros((t, 0))
    xtil = _strip_factors(x, fx)
    raw_gram = _gram(x)
    a1 = _gram(xtil)
    _weak_check(a1, raw_gram, "first stage")
    beta_first = np.linalg.solve(a1, _xty(xtil, y))

    u1 = y - x @ beta_first
    if m is None:
        cap = min(m_max, min(n, t) - 1)
        m = er_gr(u1, cap)[0].m_hat if cap >= 1 else 0
    elif not 0 <= m <= min(n, t) - 1:
        raise InvalidM(f"m={m} outside 0..{min(n, t) - 1}")

    f2 = principal_components(u1, m).F if m > 0 else np.zeros((t, 0))
    xtt = _strip_factors(xtil, f2)
    a2 = np.einsum("ntk,ntl->kl", xtt, x)
    _weak_check(a2, raw_gram, "second stage")
    beta = np.linalg.solve(a2, _xty(xtt, y))

    resid = y - x @ beta
    moment_resid = _strip_factors(_strip_factors(resid, fx), f2)
    scores = np.einsum("ntk,nt->nk", xtt, moment_resid)
    meat = scores.T @ scores
    a2inv = np.linalg.inv(a2)
    vcov = a2inv @ meat @ a2inv.T * n / (n - 1)
    vcov = (vcov + vcov.T) / 2.0
    stderr = np.sqrt(np.clip(np.diag(vcov), 0.0, None))
    ssr = float(np.sum(resid * resid))
    return EstimateResult(
        beta=beta, stderr=stderr, vcov=vcov, residuals=resid, method="tsiv",
        m_used=int(m), iterations=0, converged=True, ssr=ssr, ssr_path=(ssr,),
        details={"m_x": int(m_x), "beta_first_stage": beta_first})


# ---- nuclear-norm regularized estimation ----

def _svt(w: np.ndarray, threshold: float) -> tuple[np.ndarray, float]:
    u, s, vt = np.linalg.svd(w, full_matrices=False)
    shrunk = np.clip(s - threshold, 0.0, None)
    return (u * shrunk) @ vt, float(shrunk.sum())


def pnnr_estimate(panel: PanelData, psi_grid: np.ndarray | None = None,
                  m_max: int = 8, post_iterations: int = 10,
                  ) -> tuple[EstimateResult, FactorModel]:
    """Nuclear-norm regularized slope with least-squares polishing.

    For each penalty on a decreasing grid, alternates singular-value
    thresholding of y - X beta with pooled OLS of y minus the low-rank
    component on X, warm-starting from the previous grid point. The
    default grid has 10 points falling geometrically from the largest
    singular value of the pooled residual (scaled by 1/sqrt(NT), so the
    first point shrinks the low-rank component to exactly zero) to 1e-4
    of it.

    The regularized slope then seeds a factor-count pick (information
    criterion IC2 over 0..m_max) and ``post_iterations`` alternations of
    principal components and factor-annihilated OLS. Per-penalty
    objective paths are recorded in ``details`` and never increase.

    Raises :class:`InvalidGrid` for a grid that is empty, non-positive
    or not strictly decreasing, and for ``post_iterations`` < 2, which
    is too few sweeps for the polish to settle near a fixed point.
    """
    n, t, k = panel.X.shape
    y, x = panel.y, panel.X
    if post_iterations < 2:
        raise InvalidGrid(f"post_iterations={post_iterations} must be at least 2")
    if not 0 <= m_max < min(n, t):
        raise InvalidM(f"m_max={m_max} outside 0..{min(n, t) - 1}")

    beta, resid0 = _pooled(panel)
    if psi_grid is None:
        top = np.linalg.svd(resid0, compute_uv=False)[0] / np.sqrt(n * t)
        top = max(top, np.finfo(float).tiny)
        psi_grid = np.geomspace(top, 1e-4 * top, 10)
    else:
        psi_grid = np.atleast_1d(np.asarray(psi_grid, dtype=float))
        if psi_grid.size == 0:
            raise InvalidGrid("penalty grid is empty")
        if not np.isfinite(psi_grid).all() or (psi_grid <= 0).any():
            raise InvalidGrid("penalty grid must be positive and finite")
        if psi_grid.size > 1 and (np.diff(psi_grid) >= 0).any():
            raise InvalidGrid("penalty grid must be strictly decreasing")

    scale = np.sqrt(n * t)
    xflat = x.reshape(n * t, k)
    gram_x = xflat.T @ xflat
    inner_tol = 1e-8
    max_inner = 500
    all_converged = True
    total_inner = 0
    paths = []
    gamma = np.zeros((n, t))
    for psi in psi_grid:
        path = []
        settled = False
        for _ in range(max_inner):
            total_inner += 1
            gamma, nuclear = _svt(y - x @ beta, psi * scale)
            target = y - gamma
            beta_new = np.linalg.solve(gram_x, xflat.T @ target.reshape(n * t))
            fit = target - x @ beta_new
            path.append(float(np.sum(fit * fit) / (2 * n * t) + psi * nuclear / scale))
            step = np.abs(beta_new - beta).max()
            beta = beta_new
            if step < inner_tol:
                settled = True
                break
        paths.append(tuple(path))
        all_converged = all_converged and settled

    beta_prelim = beta.copy()
    u0 = y - x @ beta
    m_hat = bai_ng(u0, m_max, variant="IC", penalty=2).m_hat if m_max >= 1 else 0

    ssr_path = []
    if m_hat == 0:
        beta, resid = _pooled(panel)
        fm = _empty_factors(n, t)
        design = x
        ssr_path.append(float(np.sum(resid * resid)))
    else:
        fm = None
        for _ in range(post_iterations):
            fm = principal_components(y - x @ beta, m_hat)
            mx = _strip_factors(x, fm.F)
            my = _strip_factors(y, fm.F)
            beta = _solve_sym(_gram(mx), _xty(mx, my), "nuclear-norm polish")
            resid = _strip_factors(y - x @ beta, fm.F)
            ssr_path.append(float(np.sum(resid * resid)))
        fm = FactorModel(F=fm.F, Z=(y - x @ beta) @ fm.F / t, m=m_hat)
        design = _strip_factors(x, fm.F)

    vcov, stderr = _cluster_vcov(_gram(design), design, resid)
    flags = () if all_converged else ("not_converged",)
    result = EstimateResult(
        beta=beta, stderr=stderr, vcov=vcov, residuals=resid, method="pnnr",
        m_used=int(m_hat), iterations=total_inner + (0 if m_hat == 0 else post_iterations),
        converged=all_converged, ssr=ssr_path[-1], ssr_path=tuple(ssr_path),
        flags=flags,
        details={"psi_grid": tuple(float(p) for p in psi_grid),
                 "objective_paths": tuple(paths),
                 "beta_preliminary": beta_prelim})
    return result, fm
