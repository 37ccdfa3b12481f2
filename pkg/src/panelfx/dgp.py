"""Seeded data-generating processes for the simulation harness.

A :class:`DGPSpec` pins down the panel dimensions, the slope, the form
of unobserved heterogeneity, the regressor-heterogeneity correlation and
the error law; :func:`simulate` maps it (deterministically, through a
counter-based generator) to a :class:`~panelfx.panel.PanelData` plus a
:class:`GroundTruth` sidecar carrying everything an evaluation needs:
the true slope, the heterogeneity matrix, factors, loadings and group
labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec
from .panel import PanelData
from .rng import generator

__all__ = ["DGPSpec", "GroundTruth", "simulate"]

_BURN_IN = 50

_HETEROGENEITY = ("none", "additive", "ife", "gfe", "nstw")
_ERROR_LAWS = ("iid_normal", "heteroskedastic", "ar1")
_LINKS = ("exp-product", "ces")


@dataclass(frozen=True)
class DGPSpec:
    """Recipe for one synthetic panel.

    ``heterogeneity`` picks the structure of the N x T nuisance matrix:
    nothing, additive unit and time effects, an m-factor interactive
    component, G group-specific time paths (their scale set by
    ``group_separation``), or a nonseparable function of scalar unit and
    time characteristics (``h`` chooses the link; the CES link uses
    ``ces_d`` and ``ces_gamma``, and collapses to an additive model at
    ces_gamma = 1). ``loading_regressor_correlation`` mixes the
    standardized heterogeneity into every regressor, which is what makes
    within estimators inconsistent. ``lag_y_coef``, when set, prepends a
    lagged outcome to the regressors (spun up over a burn-in window) and
    to the true slope vector.
    """

    N: int
    T: int
    K: int = 1
    beta: tuple = (1.0,)
    heterogeneity: str = "ife"
    m: int = 1
    G: int = 3
    h: str = "exp-product"
    ces_d: float = 0.5
    ces_gamma: float = 0.5
    group_separation: float = 1.0
    loading_regressor_correlation: float = 0.0
    error_law: str = "iid_normal"
    sigma: float = 1.0
    ar1_rho: float = 0.5
    lag_y_coef: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta", tuple(float(b) for b in np.atleast_1d(self.beta)))
        if self.N < 2 or self.T < 2 or self.K < 1:
            raise InvalidSpec(f"need N >= 2, T >= 2, K >= 1, got ({self.N}, {self.T}, {self.K})")
        if len(self.beta) != self.K:
            raise InvalidSpec(f"beta has {len(self.beta)} entries for K={self.K} regressors")
        if self.heterogeneity not in _HETEROGENEITY:
            raise InvalidSpec(f"unknown heterogeneity {self.heterogeneity!r}")
        if self.error_law not in _ERROR_LAWS:
            raise InvalidSpec(f"unknown error law {self.error_law!r}")
        if self.h not in _LINKS:
            raise InvalidSpec(f"unknown link {self.h!r}")
        if self.heterogeneity == "ife" and not 1 <= self.m < min(self.N, self.T):
            raise InvalidSpec(f"factor count m={self.m} outside 1..min(N, T)-1")
        if self.heterogeneity == "gfe" and not 1 <= self.G <= self.N:
            raise InvalidSpec(f"group count G={self.G} outside 1..N")
        if self.h == "ces" and self.ces_gamma == 0:
            raise InvalidSpec("ces_gamma must be nonzero")
        if self.h == "ces" and not 0 <= self.ces_d <= 1:
            raise InvalidSpec(f"ces_d={self.ces_d} outside [0, 1]")
        if self.group_separation < 0:
            raise InvalidSpec("group_separation must be non-negative")
        if not 0 <= abs(self.loading_regressor_correlation) < 1:
            raise InvalidSpec("loading_regressor_correlation must lie in (-1, 1)")
        if self.sigma <= 0:
            raise InvalidSpec("sigma must be positive")
        if not abs(self.ar1_rho) < 1:
            raise InvalidSpec("ar1_rho must lie strictly inside (-1, 1)")
        if self.lag_y_coef is not None and not abs(self.lag_y_coef) < 1:
            raise InvalidSpec("lag_y_coef must lie strictly inside (-1, 1)")


@dataclass
class GroundTruth:
    """Everything the evaluation of an estimate needs to know.

    ``beta`` includes the lagged-outcome coefficient in front when the
    process is dynamic. ``c`` is the realized N x T heterogeneity
    matrix; ``F`` and ``Z`` are its factor representation where one
    exists (interactive and nonseparable designs), otherwise None.
    """

    beta: np.ndarray
    c: np.ndarray
    F: np.ndarray | None = None
    Z: np.ndarray | None = None
    unit_groups: np.ndarray | None = None
    spec: DGPSpec | None = None
    aux: dict = field(default_factory=dict)


def _heterogeneity(spec: DGPSpec, gen: np.random.Generator, t_total: int):
    """Draw the nuisance component over the extended horizon."""
    n = spec.N
    f = z = labels = None
    if spec.heterogeneity == "none":
        c = np.zeros((n, t_total))
    elif spec.heterogeneity == "additive":
        alpha = gen.standard_normal(n)
        gtime = gen.standard_normal(t_total)
        c = alpha[:, None] + gtime[None, :]
    elif spec.heterogeneity == "ife":
        # Unit-mean loadings keep cross-section averages informative
        # about the factors, which projection-based estimators need.
        z = 1.0 + gen.standard_normal((n, spec.m))
        f = gen.standard_normal((t_total, spec.m))
        c = z @ f.T
    elif spec.heterogeneity == "gfe":
        labels = 1 + gen.permutation(n) % spec.G
        paths = spec.group_separation * gen.standard_normal((spec.G, t_total))
        c = paths[labels - 1]
    else:  # nstw
        z = gen.uniform(0.5, 1.5, size=(n, 1))
        f = gen.uniform(0.5, 1.5, size=(t_total, 1))
        if spec.h == "exp-product":
            c = np.exp(z @ f.T)
        else:
            g = spec.ces_gamma
            c = (spec.ces_d * z ** g + (1.0 - spec.ces_d) * (f.T) ** g) ** (1.0 / g)
    return c, f, z, labels


def _errors(spec: DGPSpec, gen: np.random.Generator, t_total: int) -> np.ndarray:
    n = spec.N
    if spec.error_law == "iid_normal":
        return spec.sigma * gen.standard_normal((n, t_total))
    if spec.error_law == "heteroskedastic":
        unit_scale = gen.uniform(0.5, 1.5, size=(n, 1))
        time_scale = gen.uniform(0.5, 1.5, size=(1, t_total))
        return spec.sigma * unit_scale * time_scale * gen.standard_normal((n, t_total))
    # stationary AR(1) innovations per unit
    rho = spec.ar1_rho
    shocks = gen.standard_normal((n, t_total))
    eps = np.empty((n, t_total))
    eps[:, 0] = shocks[:, 0]
    scale = np.sqrt(1.0 - rho * rho)
    for s in range(1, t_total):
        eps[:, s] = rho * eps[:, s - 1] + scale * shocks[:, s]
    return spec.sigma * eps


def simulate(spec: DGPSpec) -> tuple[PanelData, GroundTruth]:
    """Draw one panel from the specification.

    The same seed always reproduces the same panel bit for bit; distinct
    seeds give independent streams. Regressors are standard normal
    shocks mixed with the standardized heterogeneity at weight
    ``loading_regressor_correlation``. Dynamic specifications iterate
    the outcome over a burn-in window before the sample starts, so the
    initial condition is effectively stationary.
    """
    gen = generator(spec.seed)
    dynamic = spec.lag_y_coef is not None
    t_total = spec.T + (_BURN_IN if dynamic else 0)
    n, k = spec.N, spec.K

    c, f, z, labels = _heterogeneity(spec, gen, t_total)
    rho_x = spec.loading_regressor_correlation
    shocks = gen.standard_normal((n, t_total, k))
    if rho_x != 0.0 and spec.heterogeneity == "ife":
        # Each regressor loads on the same factors as the outcome but
        # with its own loadings: tied to the outcome loadings through
        # the shared centered draw, and shifted along a distinct mean
        # direction per regressor so the cross-section averages of
        # (y, x) jointly span the factor space.
        mix = np.sqrt(1.0 - rho_x * rho_x)
        x = np.empty_like(shocks)
        for j in range(k):
            mu = np.ones(spec.m)
            mu[j % spec.m] += 1.0
            v = mu + (z - 1.0) + gen.standard_normal((n, spec.m))
            part = v @ f.T
            x[:, :, j] = rho_x * (part - part.mean()) / part.std() + mix * shocks[:, :, j]
    elif rho_x != 0.0 and c.std() > 0:
        ctil = (c - c.mean()) / c.std()
        x = rho_x * ctil[:, :, None] + np.sqrt(1.0 - rho_x * rho_x) * shocks
    else:
        x = shocks
    eps = _errors(spec, gen, t_total)

    beta = np.asarray(spec.beta)
    if not dynamic:
        y = x @ beta + c + eps
        panel = PanelData(
            unit_ids=tuple(range(1, n + 1)), time_ids=tuple(range(1, spec.T + 1)),
            y=y, X=x, var_names=tuple(f"x{j + 1}" for j in range(k)))
        truth = GroundTruth(beta=beta.copy(), c=c, F=f, Z=z, unit_groups=labels,
                            spec=spec, aux={"eps": eps})
        return panel, truth

    lam = float(spec.lag_y_coef)
    y = np.empty((n, t_total))
    y[:, 0] = (x[:, 0] @ beta + c[:, 0] + eps[:, 0]) / (1.0 - lam)
    for s in range(1, t_total):
        y[:, s] = lam * y[:, s - 1] + x[:, s] @ beta + c[:, s] + eps[:, s]

    lagged = y[:, _BURN_IN - 1:t_total - 1]
    xk = np.concatenate([lagged[:, :, None], x[:, _BURN_IN:]], axis=2)
    panel = PanelData(
        unit_ids=tuple(range(1, n + 1)), time_ids=tuple(range(1, spec.T + 1)),
        y=y[:, _BURN_IN:], X=xk,
        var_names=("y_lag",) + tuple(f"x{j + 1}" for j in range(k)))
    truth = GroundTruth(
        beta=np.concatenate([[lam], beta]), c=c[:, _BURN_IN:],
        F=None if f is None else f[_BURN_IN:], Z=z, unit_groups=labels,
        spec=spec, aux={"eps": eps[:, _BURN_IN:]})
    return panel, truth
