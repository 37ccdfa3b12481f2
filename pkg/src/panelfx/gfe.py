"""Group-structured heterogeneity: clustering, grouped fixed effects and
the two-sided grouped model.

The shared currency is a :class:`Grouping`, unit labels (and optionally
time labels) that partition the panel. ``kmeans`` is the multi-start
workhorse behind the moment discretization; ``gf_estimate`` fits slope
plus group-time effects by alternating classification and least squares;
``discretize_blm`` picks both group counts from first-moment variation;
``tsgfm_estimate`` fits the model whose effects vary over unit x
time-class and time x unit-class cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DimensionMismatch, InvalidG, InvalidGamma
from .ife import EstimateResult, _cluster_vcov, _gram, fe_estimate
from .panel import DemeanMode, PanelData
from .rng import spawn

__all__ = [
    "Grouping",
    "KMeansOptions",
    "GfOptions",
    "kmeans",
    "gf_estimate",
    "gf_select_G",
    "discretize_blm",
    "tsgfm_estimate",
]


@dataclass
class Grouping:
    """Partition of panel units, and optionally of periods.

    Labels are 1-based and every label up to the group count must be
    used. ``time_groups`` is None for unit-side-only partitions, in
    which case C is 0. ``objective`` records the criterion value of
    whatever procedure produced the partition.
    """

    unit_groups: np.ndarray
    time_groups: np.ndarray | None
    G: int
    C: int
    objective: float
    flags: tuple = ()
    unit_ids: tuple | None = None
    time_ids: tuple | None = None

    def __post_init__(self) -> None:
        self.unit_groups = np.asarray(self.unit_groups, dtype=int)
        if self.unit_groups.ndim != 1:
            raise DimensionMismatch("unit_groups must be a 1-d label array")
        _check_labels(self.unit_groups, self.G, "unit")
        if self.time_groups is None:
            if self.C != 0:
                raise InvalidG("C must be 0 when there is no time partition")
        else:
            self.time_groups = np.asarray(self.time_groups, dtype=int)
            if self.time_groups.ndim != 1:
                raise DimensionMismatch("time_groups must be a 1-d label array")
            _check_labels(self.time_groups, self.C, "time")
        self.objective = float(self.objective)
        self.flags = tuple(str(f) for f in self.flags)

    def unit_table(self) -> pd.DataFrame:
        ids = self.unit_ids if self.unit_ids is not None else tuple(
            range(1, len(self.unit_groups) + 1))
        return pd.DataFrame({"unit": list(ids), "group": self.unit_groups})

    def time_table(self) -> pd.DataFrame:
        if self.time_groups is None:
            raise InvalidG("this grouping has no time partition")
        ids = self.time_ids if self.time_ids is not None else tuple(
            range(1, len(self.time_groups) + 1))
        return pd.DataFrame({"time": list(ids), "group": self.time_groups})


def _check_labels(labels: np.ndarray, count: int, side: str) -> None:
    if count < 1:
        raise InvalidG(f"{side} group count must be at least 1, got {count}")
    if labels.min(initial=1) < 1 or labels.max(initial=count) > count:
        raise InvalidG(f"{side} labels must lie in 1..{count}")
    if len(np.unique(labels)) != count:
        raise InvalidG(f"{side} partition does not use every label in 1..{count}")


@dataclass
class KMeansOptions:
    """Multi-start Lloyd iteration controls."""

    starts: int = 1000
    max_iter: int = 100
    seed: int = 0
    tol: float = 1e-10

    def __post_init__(self) -> None:
        if self.starts < 1:
            raise InvalidG("kmeans needs at least one start")
        if self.max_iter < 1:
            raise InvalidG("kmeans needs at least one iteration")


@dataclass
class GfOptions:
    """Multi-start controls for the grouped-effects alternation."""

    starts: int = 25
    max_iter: int = 100
    seed: int = 0
    tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.starts < 1:
            raise InvalidG("grouped-effects search needs at least one start")


def _relabel_first_seen(labels: np.ndarray) -> tuple[np.ndarray, dict]:
    """Renumber labels by order of first appearance, starting at 0."""
    mapping = {}
    out = np.empty_like(labels)
    for i, lab in enumerate(labels):
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out, mapping


def kmeans(points: np.ndarray, G: int, opts: KMeansOptions | None = None) -> Grouping:
    """Best-of-``opts.starts`` Lloyd clustering of row vectors.

    Each start draws G distinct rows as initial centers from its own
    spawned generator, so results are reproducible from ``opts.seed``
    alone. Assignment, repair of emptied clusters (the worst-fitting
    point is moved in) and the best-run rule (objective, then start
    index) all break ties toward the lowest index, making the outcome
    deterministic. Labels in the returned grouping are renumbered in
    order of first appearance.
    """
    opts = opts or KMeansOptions()
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise DimensionMismatch(f"points must be 2-d, got shape {pts.shape}")
    n = pts.shape[0]
    if not 1 <= G <= n:
        raise InvalidG(f"cluster count G={G} outside 1..{n}")
    if not np.isfinite(pts).all():
        raise DimensionMismatch("points contain non-finite values")

    best = None
    for s, gen in enumerate(spawn(opts.seed, opts.starts)):
        centers = pts[gen.choice(n, size=G, replace=False)].copy()
        labels = np.zeros(n, dtype=int)
        for _ in range(opts.max_iter):
            dist = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            labels = dist.argmin(axis=1)
            # repair: hand the farthest point to each empty cluster
            for g in range(G):
                if not (labels == g).any():
                    fit = dist[np.arange(n), labels]
                    counts = np.bincount(labels, minlength=G)
                    fit[counts[labels] < 2] = -np.inf
                    labels[fit.argmax()] = g
            moved = 0.0
            for g in range(G):
                new = pts[labels == g].mean(axis=0)
                moved = max(moved, np.abs(new - centers[g]).max())
                centers[g] = new
            if moved <= opts.tol:
                break
        dist = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        obj = float(dist[np.arange(n), labels].sum())
        if best is None or obj < best[0]:
            best = (obj, s, labels.copy())

    obj, _, labels = best
    labels, _ = _relabel_first_seen(labels)
    return Grouping(unit_groups=labels + 1, time_groups=None, G=G, C=0,
                    objective=obj)


# ---- grouped fixed effects ----

def _gf_joint_fit(y: np.ndarray, x: np.ndarray, labels: np.ndarray, G: int,
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float]:
    """Slope and group-time paths for a fixed classification."""
    n, t, k = x.shape
    yd = y.copy()
    xd = x.copy()
    for g in range(G):
        idx = labels == g
        if not idx.any():
            continue
        yd[idx] -= yd[idx].mean(axis=0)
        xd[idx] -= xd[idx].mean(axis=0)
    coef = np.linalg.lstsq(xd.reshape(n * t, k), yd.reshape(n * t), rcond=None)[0]
    e = y - x @ coef
    paths = np.zeros((G, t))
    for g in range(G):
        idx = labels == g
        if idx.any():
            paths[g] = e[idx].mean(axis=0)
    resid = e - paths[labels]
    return coef, paths, xd, resid, float(np.sum(resid * resid))


def _gf_assign(y: np.ndarray, x: np.ndarray, beta: np.ndarray,
               paths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    e = y - x @ beta
    cost = ((e[:, None, :] - paths[None, :, :]) ** 2).sum(axis=2)
    labels = cost.argmin(axis=1)
    return labels, cost


def _gf_repair(labels: np.ndarray, cost: np.ndarray, G: int) -> np.ndarray:
    # every group must keep at least one member; donors need two or more
    for g in range(G):
        if not (labels == g).any():
            fit = cost[np.arange(labels.size), labels].copy()
            counts = np.bincount(labels, minlength=G)
            fit[counts[labels] < 2] = -np.inf
            labels[fit.argmax()] = g
    return labels


def gf_estimate(panel: PanelData, G: int, opts: GfOptions | None = None,
                fixed_groups: np.ndarray | None = None,
                ) -> tuple[EstimateResult, Grouping, np.ndarray]:
    """Slope plus group-specific time paths by classify-and-fit rounds.

    Each start seeds the slope near the two-way within estimate (start 0
    uses it exactly) and the G paths from randomly chosen unit residual
    trajectories, then alternates unit classification with joint least
    squares until the classification and the slope both stop moving.
    The best start wins on (objective, start index). Groups emptied by
    a classification round are repaired with the worst-fitting unit.

    ``fixed_groups`` (1-based labels) skips the search and fits the
    supplied classification directly, which is the right benchmark when
    the grouping is known. Returns the fit, the grouping and the G x T
    matrix of group effects.
    """
    n, t, k = panel.X.shape
    y, x = panel.y, panel.X
    if not (isinstance(G, (int, np.integer)) and 1 <= G <= n):
        raise InvalidG(f"group count G={G} outside 1..{n}")

    if fixed_groups is not None:
        given = np.asarray(fixed_groups, dtype=int)
        if given.shape != (n,):
            raise DimensionMismatch(f"fixed_groups must have length N={n}")
        _check_labels(given, G, "unit")
        labels = given - 1
        beta, paths, xd, resid, ssr = _gf_joint_fit(y, x, labels, G)
        vcov, stderr = _cluster_vcov(_gram(xd), xd, resid, use_pinv=True)
        result = EstimateResult(
            beta=beta, stderr=stderr, vcov=vcov, residuals=resid, method="gf",
            m_used=None, iterations=1, converged=True, ssr=ssr, ssr_path=(ssr,),
            details={"fixed_groups": True, "G": G})
        grouping = Grouping(unit_groups=given.copy(), time_groups=None, G=G, C=0,
                            objective=ssr, unit_ids=panel.unit_ids)
        return result, grouping, paths

    opts = opts or GfOptions()
    beta_tw = fe_estimate(panel, DemeanMode.TWO_WAY).beta
    scale = 0.25 * max(np.abs(beta_tw).max(), 1.0)

    best = None
    for s, gen in enumerate(spawn(opts.seed, opts.starts)):
        beta = beta_tw.copy() if s == 0 else beta_tw + scale * gen.standard_normal(k)
        seeds = gen.choice(n, size=G, replace=False)
        paths = (y - x @ beta)[seeds]
        labels = np.full(n, -1)
        converged = False
        path_ssr = []
        for _ in range(opts.max_iter):
            new_labels, cost = _gf_assign(y, x, beta, paths)
            new_labels = _gf_repair(new_labels, cost, G)
            beta_new, paths, _, _, obj = _gf_joint_fit(y, x, new_labels, G)
            path_ssr.append(obj)
            same = (new_labels == labels).all()
            step = np.abs(beta_new - beta).max()
            labels, beta = new_labels, beta_new
            if same and step < opts.tol:
                converged = True
                break
        if best is None or path_ssr[-1] < best[0]:
            best = (path_ssr[-1], s, labels.copy(), beta.copy(), converged,
                    tuple(path_ssr))

    obj, _, labels, beta, converged, path_ssr = best
    labels, _ = _relabel_first_seen(labels)
    beta, paths, xd, resid, ssr = _gf_joint_fit(y, x, labels, G)
    vcov, stderr = _cluster_vcov(_gram(xd), xd, resid, use_pinv=True)
    flags = () if converged else ("not_converged",)
    result = EstimateResult(
        beta=beta, stderr=stderr, vcov=vcov, residuals=resid, method="gf",
        m_used=None, iterations=len(path_ssr), converged=converged, ssr=ssr,
        ssr_path=path_ssr, flags=flags, details={"G": G, "starts": opts.starts})
    grouping = Grouping(unit_groups=labels + 1, time_groups=None, G=G, C=0,
                        objective=ssr, flags=flags, unit_ids=panel.unit_ids)
    return result, grouping, paths


def gf_select_G(panel: PanelData, G_max: int, opts: GfOptions | None = None,
                ) -> tuple[int, np.ndarray]:
    """Pick the group count by a Bayesian information criterion.

    Fits the grouped-effects model for G = 1..G_max and scores each fit
    with ln(SSR/NT) + (G T + N + K) ln(NT) / NT, charging every group
    path, unit assignment and slope as a parameter. Returns the
    minimizing G (ties go to the smaller count) and the criterion path.
    """
    n, t, k = panel.X.shape
    if not 1 <= G_max <= n:
        raise InvalidG(f"G_max={G_max} outside 1..{n}")
    nt = n * t
    path = np.empty(G_max)
    for g in range(1, G_max + 1):
        result, _, _ = gf_estimate(panel, g, opts)
        ssr = max(result.ssr, np.finfo(float).tiny)
        path[g - 1] = np.log(ssr / nt) + (g * t + n + k) * np.log(nt) / nt
    return int(np.argmin(path)) + 1, path


# ---- two-sided discretization ----

def discretize_blm(panel: PanelData, gamma: float, G_max: int = 20, C_max: int = 20,
                   opts: KMeansOptions | None = None) -> Grouping:
    """Group units and periods by clustering first moments.

    Unit i is summarized by the time average of (x_it, y_it), period t
    by the cross-section average. Each side's group count is the
    smallest G whose per-point k-means objective falls below ``gamma``
    times that side's total squared variation around its own moments
    (the idiosyncratic scale); hitting the cap is flagged. ``gamma``
    must lie in (0, 1].
    """
    if not 0 < gamma <= 1:
        raise InvalidGamma(f"gamma={gamma} outside (0, 1]")
    n, t, k = panel.X.shape
    if not 1 <= G_max <= n:
        raise InvalidG(f"G_max={G_max} outside 1..{n}")
    if not 1 <= C_max <= t:
        raise InvalidG(f"C_max={C_max} outside 1..{t}")
    opts = opts or KMeansOptions(starts=20)

    cells = np.concatenate([panel.X, panel.y[:, :, None]], axis=2)  # N,T,K+1
    xi = cells.mean(axis=1)   # N x (K+1) unit moments
    psi = cells.mean(axis=0)  # T x (K+1) period moments
    v_g = float(np.sum((cells - xi[:, None, :]) ** 2)) / (n * t * t)
    v_c = float(np.sum((cells - psi[None, :, :]) ** 2)) / (t * n * n)

    def pick(points, cap, budget, side):
        flags = []
        chosen = None
        for g in range(1, cap + 1):
            run = kmeans(points, g, opts)
            if run.objective / points.shape[0] <= budget:
                chosen = run
                break
        if chosen is None:
            chosen = kmeans(points, cap, opts)
            flags.append(f"{side}_group_cap")
        return chosen, flags

    unit_run, flags_g = pick(xi, G_max, gamma * v_g, "unit")
    time_run, flags_c = pick(psi, C_max, gamma * v_c, "time")
    return Grouping(
        unit_groups=unit_run.unit_groups,
        time_groups=time_run.unit_groups,
        G=unit_run.G, C=time_run.G,
        objective=unit_run.objective / n + time_run.objective / t,
        flags=tuple(flags_g + flags_c),
        unit_ids=panel.unit_ids, time_ids=panel.time_ids)


# ---- two-sided grouped model ----

def tsgfm_estimate(panel: PanelData, grouping: Grouping) -> EstimateResult:
    """Slope for the model with unit x time-class and time x unit-class
    effects.

    Given unit classes g(i) and time classes l(t), the heterogeneity is
    delta_{i, l(t)} + nu_{t, g(i)}. Both families are swept out of y and
    X by alternating cell demeaning until the data stop moving (sup
    change below 1e-10), then the slope comes from pooled OLS on the
    swept data. With G = C = 1 the cells are unit and time means and the
    estimator reduces to the two-way within slope.

    Regressors absorbed by the cell structure get coefficient 0 and a
    ``collinear_dummies:<name>`` flag. The fitted effects are reported
    as an N x T matrix in ``details["effects"]``, which sidesteps the
    additive indeterminacy of the two families.
    """
    n, t, k = panel.X.shape
    if grouping.time_groups is None:
        raise InvalidG("two-sided estimation needs a time partition")
    if grouping.unit_groups.shape != (n,) or grouping.time_groups.shape != (t,):
        raise DimensionMismatch("grouping does not match the panel dimensions")
    g_count, c_count = grouping.G, grouping.C
    if n * c_count + t * g_count + k >= n * t:
        raise InvalidG(
            f"cell structure has {n * c_count + t * g_count + k} parameters "
            f"for {n * t} observations")

    ug = grouping.unit_groups - 1
    tg = grouping.time_groups - 1
    time_cells = [np.flatnonzero(tg == c) for c in range(c_count)]
    unit_cells = [np.flatnonzero(ug == g) for g in range(g_count)]

    data = np.concatenate([panel.y[:, :, None], panel.X], axis=2)
    sweeps = 0
    converged = False
    for _ in range(10000):
        sweeps += 1
        before = data.copy()
        for cols in time_cells:
            data[:, cols, :] -= data[:, cols, :].mean(axis=1, keepdims=True)
        for rows in unit_cells:
            data[rows, :, :] -= data[rows, :, :].mean(axis=0, keepdims=True)
        if np.abs(data - before).max() <= 1e-10:
            converged = True
            break
    ytil = data[:, :, 0]
    xtil = data[:, :, 1:].copy()

    flags = [] if converged else ["not_converged"]
    dropped = []
    for j in range(k):
        full = np.linalg.norm(panel.X[:, :, j])
        if np.linalg.norm(xtil[:, :, j]) <= 1e-8 * max(full, np.finfo(float).tiny):
            dropped.append(j)
            xtil[:, :, j] = 0.0
            flags.append(f"collinear_dummies:{panel.var_names[j]}")

    beta = np.linalg.lstsq(xtil.reshape(n * t, k), ytil.reshape(n * t), rcond=None)[0]
    resid = ytil - xtil @ beta
    effects = (panel.y - panel.X @ beta) - resid
    ssr = float(np.sum(resid * resid))
    vcov, stderr = _cluster_vcov(_gram(xtil), xtil, resid, use_pinv=True)
    if dropped:
        vcov = vcov.copy()
        vcov[dropped, :] = 0.0
        vcov[:, dropped] = 0.0
        stderr = np.sqrt(np.clip(np.diag(vcov), 0.0, None))
    return EstimateResult(
        beta=beta, stderr=stderr, vcov=vcov, residuals=resid, method="tsgfm",
        m_used=None, iterations=sweeps, converged=converged, ssr=ssr,
        ssr_path=(ssr,), flags=tuple(flags),
        details={"G": g_count, "C": c_count, "effects": effects})
