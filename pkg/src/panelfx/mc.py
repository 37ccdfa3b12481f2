"""Monte-Carlo harness and the canonical estimator inventory.

``ESTIMATORS`` maps short names to one-argument callables (panel in,
:class:`~panelfx.ife.EstimateResult` out) with the defaults the
command-line runner uses. ``mc_run`` replays a
:class:`~panelfx.dgp.DGPSpec` across seeded replications, applies any
subset of the inventory, and reduces to per-coefficient bias, root mean
squared error, nominal-95 coverage and mean runtime.

Replication r always receives the r-th child seed of the master seed,
and results are merged by replication index, so the output is identical
whatever the thread count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .dgp import DGPSpec, simulate
from .errors import ConfigError, PanelError
from .gfe import GfOptions, KMeansOptions, discretize_blm, gf_estimate, gf_select_G, tsgfm_estimate
from .ife import (
    EstimateResult,
    IlsOptions,
    ccep_estimate,
    fe_estimate,
    ils_estimate,
    pnnr_estimate,
    tsiv_estimate,
)
from .panel import DemeanMode, PanelData

__all__ = ["ESTIMATORS", "McSummary", "McResult", "mc_run"]


def _fe(panel: PanelData) -> EstimateResult:
    return fe_estimate(panel, DemeanMode.UNIT)


def _twfe(panel: PanelData) -> EstimateResult:
    return fe_estimate(panel, DemeanMode.TWO_WAY)


def _ils(m: int, bias_correct: bool = False):
    def run(panel: PanelData) -> EstimateResult:
        return ils_estimate(panel, IlsOptions(m=m, bias_correct=bias_correct))[0]
    return run


def _ccep(panel: PanelData) -> EstimateResult:
    return ccep_estimate(panel)


def _ccep_dynamic(panel: PanelData) -> EstimateResult:
    return ccep_estimate(panel, dynamic=True)


def _tsiv(panel: PanelData) -> EstimateResult:
    return tsiv_estimate(panel)


def _pnnr(panel: PanelData) -> EstimateResult:
    return pnnr_estimate(panel)[0]


def _gf(panel: PanelData) -> EstimateResult:
    opts = GfOptions(starts=10)
    g_hat, _ = gf_select_G(panel, G_max=min(4, panel.n_units), opts=opts)
    return gf_estimate(panel, g_hat, opts=opts)[0]


def _tsgfm(panel: PanelData) -> EstimateResult:
    grouping = discretize_blm(
        panel, gamma=0.2,
        G_max=min(10, panel.n_units), C_max=min(10, panel.n_periods),
        opts=KMeansOptions(starts=20))
    return tsgfm_estimate(panel, grouping)


ESTIMATORS = {
    "fe": _fe,
    "twfe": _twfe,
    "ils1": _ils(1),
    "ils2": _ils(2),
    "ils3": _ils(3),
    "ils_bc": _ils(2, bias_correct=True),
    "ccep": _ccep,
    "ccep_dynamic": _ccep_dynamic,
    "tsiv": _tsiv,
    "pnnr": _pnnr,
    "gf": _gf,
    "tsgfm": _tsgfm,
}


@dataclass
class McSummary:
    """Per-estimator reduction over the successful replications."""

    estimator: str
    bias: np.ndarray
    rmse: np.ndarray
    coverage: np.ndarray
    mean_runtime: float
    reps_ok: int
    failures: int


@dataclass
class McResult:
    """Bundle of per-estimator summaries for one specification."""

    spec: DGPSpec
    reps: int
    truth: np.ndarray
    summaries: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for name, s in self.summaries.items():
            for j in range(s.bias.shape[0]):
                rows.append({
                    "estimator": name, "coef": j + 1, "truth": self.truth[j],
                    "bias": s.bias[j], "rmse": s.rmse[j], "coverage": s.coverage[j],
                    "mean_runtime": s.mean_runtime, "reps_ok": s.reps_ok,
                    "failures": s.failures,
                })
        return pd.DataFrame(rows)


def _resolve(estimators) -> list:
    if isinstance(estimators, dict):
        return list(estimators.items())
    named = []
    for name in estimators:
        if callable(name):
            named.append((getattr(name, "__name__", "custom"), name))
            continue
        if name not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {name!r}; known: {sorted(ESTIMATORS)}")
        named.append((name, ESTIMATORS[name]))
    if not named:
        raise ConfigError("no estimators requested")
    return named


def mc_run(spec: DGPSpec, estimators, reps: int, seed: int, threads: int = 1,
           replication_log=None) -> McResult:
    """Replay a specification and reduce estimator performance.

    ``estimators`` is a list of inventory names (or callables, or a
    name-to-callable dict). Failures inside one estimator on one
    replication are caught, counted and excluded from that estimator's
    statistics; they never stop the run. ``replication_log`` (a path)
    writes one CSV row per replication, estimator and coefficient, which
    is the raw material for any reduction this function does not do.

    Coverage counts |estimate - truth| <= 1.96 stderr per coefficient.
    """
    if reps < 1:
        raise ConfigError("reps must be at least 1")
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    named = _resolve(estimators)
    seeds = np.random.SeedSequence(seed).generate_state(reps, dtype=np.uint64)
    truth = simulate(replace(spec, seed=int(seeds[0])))[1].beta

    def worker(r: int) -> list:
        spec_r = replace(spec, seed=int(seeds[r]))
        panel, truth = simulate(spec_r)
        rows = []
        for name, fn in named:
            start = time.perf_counter()
            try:
                res = fn(panel)
                rows.append((name, res.beta.copy(), res.stderr.copy(),
                             bool(res.converged), time.perf_counter() - start, None))
            except PanelError as exc:
                rows.append((name, None, None, False,
                             time.perf_counter() - start, f"{type(exc).__name__}: {exc}"))
        return rows

    if threads == 1:
        per_rep = [worker(r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {r: pool.submit(worker, r) for r in range(reps)}
            per_rep = [futures[r].result() for r in range(reps)]

    result = McResult(spec=spec, reps=reps, truth=truth)
    log_rows = []
    for name, _ in named:
        betas, ses, times = [], [], []
        failures = 0
        for r in range(reps):
            row = next(row for row in per_rep[r] if row[0] == name)
            _, beta, se, converged, runtime, error = row
            times.append(runtime)
            if error is not None:
                failures += 1
            else:
                betas.append(beta)
                ses.append(se)
            if replication_log is not None:
                if beta is None:
                    log_rows.append({"rep": r, "estimator": name, "coef": None,
                                     "estimate": None, "stderr": None,
                                     "converged": converged, "runtime": runtime,
                                     "error": error})
                else:
                    for j in range(beta.shape[0]):
                        log_rows.append({"rep": r, "estimator": name, "coef": j + 1,
                                         "estimate": beta[j], "stderr": se[j],
                                         "converged": converged, "runtime": runtime,
                                         "error": None})
        if betas:
            b = np.vstack(betas)
            s = np.vstack(ses)
            dev = b - truth
            cover = (np.abs(dev) <= 1.96 * s).mean(axis=0)
            summary = McSummary(
                estimator=name, bias=b.mean(axis=0) - truth,
                rmse=np.sqrt((dev * dev).mean(axis=0)), coverage=cover,
                mean_runtime=float(np.mean(times)), reps_ok=len(betas),
                failures=failures)
        else:
            nan = np.full(truth.shape, np.nan)
            summary = McSummary(estimator=name, bias=nan, rmse=nan.copy(),
                                coverage=nan.copy(), mean_runtime=float(np.mean(times)),
                                reps_ok=0, failures=failures)
        result.summaries[name] = summary

    if replication_log is not None:
        pd.DataFrame(log_rows).to_csv(replication_log, index=False)
    return result
