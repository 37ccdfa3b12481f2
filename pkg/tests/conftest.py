"""Shared builders for the test suite.

The exact-recovery constructions here are deliberate: each one places
the unobserved structure inside the subspace its estimator projects
out, so the slope must come back at solver precision, not just in
expectation.
"""

import numpy as np
import pytest

from panelfx.panel import PanelData


def panel_from_arrays(y, x, names=None):
    n, t = y.shape
    k = x.shape[2]
    return PanelData(
        unit_ids=tuple(range(1, n + 1)), time_ids=tuple(range(1, t + 1)),
        y=np.asarray(y, dtype=float), X=np.asarray(x, dtype=float),
        var_names=tuple(names) if names else tuple(f"x{j + 1}" for j in range(k)))


def orth_columns(gen, t, m):
    """t x m matrix with orthonormal columns scaled so F'F/T = I."""
    q, _ = np.linalg.qr(gen.standard_normal((t, m)))
    return np.sqrt(t) * q[:, :m]


def make_noiseless_ife(n, t, k, m, seed, beta=None):
    """Panel whose outcome is exactly X beta + Z F' with noisy X.

    The factor component lives only in y, so any estimator that removes
    an m-dimensional common component recovers beta exactly.
    """
    gen = np.random.default_rng(seed)
    beta = np.arange(1, k + 1, dtype=float) if beta is None else np.asarray(beta, float)
    f = orth_columns(gen, t, m)
    z = 0.5 + gen.standard_normal((n, m))
    x = gen.standard_normal((n, t, k)) + 0.3 * (z @ f.T)[:, :, None]
    y = x @ beta + z @ f.T
    return panel_from_arrays(y, x), beta


def make_ccep_exact(n, t, seed, beta=1.5):
    """K=1, m=1 noiseless design whose cross-section averages span f.

    The regressor's idiosyncratic part is demeaned across units, so
    xbar is exactly proportional to the factor and the CCE projection
    removes the common component completely.
    """
    gen = np.random.default_rng(seed)
    f = gen.standard_normal(t)
    a = 1.0 + 0.2 * gen.standard_normal(n)       # mean bounded away from 0
    eta = gen.standard_normal((n, t))
    eta -= eta.mean(axis=0, keepdims=True)
    x = a[:, None] * f[None, :] + eta
    z = 1.0 + 0.3 * gen.standard_normal(n)
    y = beta * x + z[:, None] * f[None, :]
    return panel_from_arrays(y, x[:, :, None]), np.array([beta])


def make_tsiv_exact(n, t, k, seed, m_x=1, m=1):
    """Noiseless two-stage IV design with exactly recoverable slope.

    Regressor factors and outcome factors are distinct; idiosyncratic
    regressor parts are orthogonal to both factor spans within every
    unit, and units come in (+E, -E) pairs so the stacked spectrum
    splits into a factor block and a noise block exactly. Requires even
    n and n * k > t.
    """
    assert n % 2 == 0 and n * k > t
    gen = np.random.default_rng(seed)
    beta = np.linspace(1.0, 0.5, k)
    fx = orth_columns(gen, t, m_x)
    f = orth_columns(gen, t, m + m_x)[:, m_x:]   # not orthogonal to fx by design
    basis = np.linalg.qr(np.column_stack([fx, f]))[0]
    proj = np.eye(t) - basis @ basis.T

    x = np.empty((n, t, k))
    for i in range(0, n, 2):
        gam = 3.0 * gen.standard_normal((m_x, k))
        e = proj @ gen.standard_normal((t, k))
        x[i] = fx @ gam + e
        x[i + 1] = fx @ gam - e
    z = 1.0 + gen.standard_normal((n, f.shape[1]))
    y = x @ beta + z @ f.T
    return panel_from_arrays(y, x), beta


def make_grouped_panel(n, t, G, seed, beta=1.0, sep=4.0, noise=0.3):
    """Grouped time paths with well-separated groups."""
    gen = np.random.default_rng(seed)
    labels = 1 + gen.permutation(n) % G
    paths = sep * gen.standard_normal((G, t))
    x = gen.standard_normal((n, t, 1))
    y = beta * x[:, :, 0] + paths[labels - 1] + noise * gen.standard_normal((n, t))
    return panel_from_arrays(y, x), np.array([beta]), labels


def dummy_ols_slope(panel, unit_dummies=None, time_dummies=None, cells=None):
    """Oracle: pooled OLS of y on X plus explicit dummy columns.

    ``unit_dummies``/``time_dummies`` add one-hot blocks for the given
    label vectors; ``cells`` adds one dummy per (unit-label, period)
    pair. Returns only the slope block.
    """
    n, t = panel.y.shape
    k = panel.X.shape[2]
    cols = [panel.X.reshape(n * t, k)]
    idx_unit = np.repeat(np.arange(n), t)
    idx_time = np.tile(np.arange(t), n)
    if unit_dummies is not None:
        lab = np.asarray(unit_dummies)
        cols.append((lab[idx_unit, None] == np.unique(lab)[None, :]).astype(float))
    if time_dummies is not None:
        lab = np.asarray(time_dummies)
        cols.append((lab[idx_time, None] == np.unique(lab)[None, :]).astype(float))
    if cells is not None:
        lab = np.asarray(cells)
        cell = lab[idx_unit] * t + idx_time
        cols.append((cell[:, None] == np.unique(cell)[None, :]).astype(float))
    design = np.column_stack(cols)
    coef = np.linalg.lstsq(design, panel.y.reshape(n * t), rcond=None)[0]
    return coef[:k]


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)
