"""Config-driven entry points behind the command-line interface.

Each public ``run_*`` function backs one CLI verb and returns a process
exit code: 0 for success, 1 when at least one estimator failed while the
run itself completed, 2 is reserved for configuration and IO errors
(raised as :class:`~panelfx.errors.ConfigError` and mapped by the CLI).

Configs are TOML. ``estimate`` consumes a [data] table (csv path and
column names) plus an optional [run] table (estimator subset, output
paths, diagnostic seed); ``simulate`` and ``mc`` consume a [dgp] table
whose keys mirror :class:`~panelfx.dgp.DGPSpec` fields; ``mc`` adds a
[mc] table (reps, seed, threads, estimator subset, outputs).
"""

from __future__ import annotations

import json

try:
    import tomllib
except ModuleNotFoundError:  # stdlib from 3.11 only
    import tomli as tomllib

import numpy as np
import pandas as pd

from .dgp import DGPSpec, simulate
from .diagnostics import cd_star, cd_test, cdw_test
from .errors import ConfigError, InvalidSpec, PanelError
from .factors import er_gr, gos
from .mc import ESTIMATORS, _resolve, mc_run
from .panel import PanelData, load_panel

__all__ = ["run_estimate", "run_simulate", "run_mc", "run_diagnose", "results_table"]

EXIT_OK = 0
EXIT_ESTIMATOR_FAILURE = 1
EXIT_CONFIG = 2


def _load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc


def _spec_from_toml(path) -> DGPSpec:
    cfg = _load_toml(path)
    table = cfg.get("dgp", cfg)
    if not isinstance(table, dict) or not table:
        raise ConfigError(f"{path} has no [dgp] table and no top-level spec keys")
    try:
        return DGPSpec(**table)
    except TypeError as exc:
        raise ConfigError(f"bad spec key in {path}: {exc}") from exc
    except InvalidSpec as exc:
        raise ConfigError(f"bad spec value in {path}: {exc}") from exc


def _load_config_panel(cfg: dict, origin) -> PanelData:
    data = cfg.get("data")
    if not isinstance(data, dict) or "path" not in data:
        raise ConfigError(f"{origin} needs a [data] table with a 'path' key")
    x = data.get("x")
    if x is not None and not isinstance(x, list):
        raise ConfigError("data.x must be a list of column names")
    return load_panel(data["path"], unit=data.get("unit", "unit"),
                      time=data.get("time", "time"), y=data.get("y", "y"), x=x)


def _maybe(fn, *args, **kwargs):
    """Run one diagnostic; degrade to NaN instead of failing the row."""
    try:
        return fn(*args, **kwargs)
    except PanelError:
        return None


def _residual_diagnostics(u: np.ndarray, seed: int) -> dict:
    out = {}
    cd = _maybe(cd_test, u)
    out["cd"], out["cd_p"] = (cd.statistic, cd.p_value) if cd else (np.nan, np.nan)
    cdw = _maybe(cdw_test, u, seed=seed)
    out["cdw"], out["cdw_p"] = (cdw.statistic, cdw.p_value) if cdw else (np.nan, np.nan)
    cds = _maybe(cd_star, u)
    out["cd_star"], out["cd_star_p"] = (cds.statistic, cds.p_value) if cds else (np.nan, np.nan)
    m_max = min(8, min(u.shape) - 1)
    reports = _maybe(er_gr, u, m_max) if m_max >= 1 else None
    out["m_er"] = reports[0].m_hat if reports else np.nan
    g = _maybe(gos, u, m_max) if m_max >= 1 else None
    out["m_gos"] = g.m_hat if g else np.nan
    return out


def _group_label(details: dict) -> str:
    parts = []
    if "G" in details:
        parts.append(f"G={details['G']}")
    if "C" in details:
        parts.append(f"C={details['C']}")
    return ",".join(parts)


def results_table(rows: list, var_names) -> pd.DataFrame:
    """Arrange per-estimator rows into the fixed results layout."""
    columns = ["estimator", "status"]
    for name in var_names:
        columns += [f"b_{name}", f"se_{name}"]
    columns += ["n", "t", "cd", "cd_p", "cdw", "cdw_p", "cd_star", "cd_star_p",
                "m_er", "m_gos", "iterations", "converged", "groups"]
    return pd.DataFrame(rows, columns=columns)


def _format_table(df: pd.DataFrame) -> str:
    shown = df.copy()
    for col in shown.columns:
        if shown[col].dtype.kind == "f":
            shown[col] = shown[col].map(lambda v: "" if pd.isna(v) else f"{v:.6g}")
    return shown.to_string(index=False, na_rep="")


def run_estimate(config_path) -> int:
    """Fit the configured estimators on a CSV panel and tabulate."""
    cfg = _load_toml(config_path)
    panel = _load_config_panel(cfg, config_path)
    run = cfg.get("run", {})
    named = _resolve(run.get("estimators", list(ESTIMATORS)))
    seed = int(run.get("seed", 0))

    rows, failures = [], 0
    for name, fn in named:
        row = {"estimator": name, "n": panel.n_units, "t": panel.n_periods}
        try:
            res = fn(panel)
        except PanelError as exc:
            failures += 1
            row["status"] = f"failed: {type(exc).__name__}: {exc}"
            row["converged"] = False
            rows.append(row)
            continue
        row["status"] = "ok" if not res.flags else "ok[" + ",".join(res.flags) + "]"
        for j, var in enumerate(panel.var_names):
            row[f"b_{var}"] = res.beta[j]
            row[f"se_{var}"] = res.stderr[j]
        row.update(_residual_diagnostics(res.residuals, seed))
        row["iterations"] = res.iterations
        row["converged"] = res.converged
        row["groups"] = _group_label(res.details)
        rows.append(row)

    df = results_table(rows, panel.var_names)
    text = _format_table(df)
    if run.get("output"):
        df.to_csv(run["output"], index=False)
    if run.get("text_output"):
        with open(run["text_output"], "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_ESTIMATOR_FAILURE if failures else EXIT_OK


def run_simulate(spec_path, output, truth_path=None) -> int:
    """Draw one synthetic panel to CSV, optionally with a truth sidecar."""
    spec = _spec_from_toml(spec_path)
    panel, truth = simulate(spec)
    panel.to_frame().to_csv(output, index=False)
    if truth_path:
        payload = {
            "beta": [float(b) for b in truth.beta],
            "heterogeneity": spec.heterogeneity,
            "dynamic": spec.lag_y_coef is not None,
            "unit_groups": None if truth.unit_groups is None
            else [int(g) for g in truth.unit_groups],
        }
        with open(truth_path, "w") as fh:
            json.dump(payload, fh, indent=2)
    print(f"wrote {panel.n_units} x {panel.n_periods} panel "
          f"({panel.n_vars} regressors) to {output}")
    return EXIT_OK


def run_mc(spec_path, config_path) -> int:
    """Replay a spec under the Monte-Carlo harness and tabulate."""
    spec = _spec_from_toml(spec_path)
    cfg = _load_toml(config_path)
    table = cfg.get("mc", cfg)
    if "reps" not in table:
        raise ConfigError(f"{config_path} needs an [mc] table with a 'reps' key")
    result = mc_run(
        spec, table.get("estimators", list(ESTIMATORS)),
        reps=int(table["reps"]), seed=int(table.get("seed", 0)),
        threads=int(table.get("threads", 1)),
        replication_log=table.get("replication_log"))
    df = result.to_frame()
    if table.get("output"):
        df.to_csv(table["output"], index=False)
    print(_format_table(df))
    failed = sum(s.failures for s in result.summaries.values())
    return EXIT_ESTIMATOR_FAILURE if failed else EXIT_OK


def run_diagnose(csv_path, unit="unit", time="time", y="y", x=None,
                 output=None) -> int:
    """Per-variable dependence diagnostics for a CSV panel."""
    panel = load_panel(csv_path, unit=unit, time=time, y=y, x=x)
    blocks = [(y, panel.y)]
    blocks += [(name, panel.X[:, :, j]) for j, name in enumerate(panel.var_names)]
    blocks.append(("all", np.vstack([b for _, b in blocks])))

    rows = []
    for name, u in blocks:
        cd = _maybe(cd_test, u)
        m_max = min(8, min(u.shape) - 1)
        reports = _maybe(er_gr, u, m_max) if m_max >= 1 else None
        rows.append({
            "variable": name,
            "cd": cd.statistic if cd else np.nan,
            "cd_p": cd.p_value if cd else np.nan,
            "m_er": reports[0].m_hat if reports else np.nan,
            "m_gr": reports[1].m_hat if reports else np.nan,
        })
    df = pd.DataFrame(rows, columns=["variable", "cd", "cd_p", "m_er", "m_gr"])
    print(f"panel: {panel.n_units} units x {panel.n_periods} periods")
    print(_format_table(df))
    if output:
        df.to_csv(output, index=False)
    return EXIT_OK
