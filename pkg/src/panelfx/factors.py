"""Estimators of the number of common factors in an N x T panel.

Four families: the Bai-Ng information criteria, the Ahn-Horenstein
eigenvalue ratio and growth ratio, Onatski's eigenvalue-difference
criterion, and the GOS penalized-eigenvalue rule. All of them operate
on the spectrum of U U'/(NT) and return a :class:`FactorCountReport`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidMMax, RequiresNGreaterT

__all__ = [
    "FactorCountReport",
    "bai_ng",
    "er_gr",
    "onatski_ed",
    "gos",
    "scaled_eigenvalues",
]


@dataclass
class FactorCountReport:
    """Outcome of a factor-count selection rule.

    ``criterion_path`` holds the criterion over the search range:
    m = 0..m_max for the information criteria (length m_max + 1) and
    k = 1..m_max for the ratio, difference and penalized-eigenvalue
    rules (length m_max). ``details`` records auxiliary quantities
    (penalties, thresholds, cap flags) for audit.
    """

    method: str
    m_hat: int
    criterion_path: np.ndarray
    m_max: int
    details: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.criterion_path = np.asarray(self.criterion_path, dtype=float)
        if not np.isfinite(self.criterion_path).all():
            raise InvalidMMax(f"{self.method}: criterion path contains non-finite values")
        if not 0 <= self.m_hat <= self.m_max:
            raise InvalidMMax(f"{self.method}: m_hat={self.m_hat} outside 0..{self.m_max}")


def scaled_eigenvalues(u: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of U U'/(NT), one per min(N, T) dimension.

    Computed from the smaller Gram matrix; both sides share the nonzero
    spectrum. Values are clipped at zero to absorb eigh rounding.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise DimensionMismatch(f"panel must be 2-d, got shape {u.shape}")
    n, t = u.shape
    gram = u @ u.T if n <= t else u.T @ u
    lam = np.linalg.eigvalsh(gram / (n * t))[::-1]
    return np.clip(lam, 0.0, None)


def _check_m_max(m_max: int, limit: int, what: str) -> None:
    if not (isinstance(m_max, (int, np.integer)) and 1 <= m_max < limit):
        raise InvalidMMax(f"m_max={m_max} must satisfy 1 <= m_max < {limit} ({what})")


_PENALTIES = {1, 2, 3}


def _penalty(n: int, t: int, which: int) -> float:
    nt = n * t
    low = min(n, t)
    if which == 1:
        return (n + t) / nt * np.log(nt / (n + t))
    if which == 2:
        return (n + t) / nt * np.log(low)
    return np.log(low) / low


def bai_ng(u: np.ndarray, m_max: int, variant: str = "IC", penalty: int = 2,
           printed_scale: bool = False) -> FactorCountReport:
    """Bai-Ng information criterion for the factor count.

    Minimizes V(m) + m sigma2 g(N,T) (variant "PC") or
    ln V(m) + m g(N,T) (variant "IC") over m = 0..m_max, where V(m) is
    the mean squared residual after removing the leading m principal
    components and sigma2 = V(m_max). ``penalty`` in {1, 2, 3} selects
    g(N,T). V is scaled by 1/(NT); ``printed_scale=True`` switches to
    the 1/N convention, which rescales V but cannot change m_hat for
    the IC variant.
    """
    u = np.asarray(u, dtype=float)
    n, t = u.shape
    _check_m_max(m_max, min(n, t), "min(N, T)")
    if variant not in ("IC", "PC"):
        raise InvalidMMax(f"unknown variant {variant!r}")
    if penalty not in _PENALTIES:
        raise InvalidMMax(f"penalty must be one of {sorted(_PENALTIES)}")

    lam = scaled_eigenvalues(u)
    v = np.empty(m_max + 1)
    v[0] = lam.sum()
    v[1:] = v[0] - np.cumsum(lam[:m_max])
    v = np.clip(v, 0.0, None)
    if printed_scale:
        v = v * t
    sigma2 = v[m_max]
    g = _penalty(n, t, penalty)
    counts = np.arange(m_max + 1)
    if variant == "PC":
        crit = v + counts * sigma2 * g
    else:
        # floor keeps ln finite when a small m already fits exactly; the
        # floored value is still far below any noisy V so argmin is kept
        crit = np.log(np.maximum(v, np.finfo(float).tiny)) + counts * g
    m_hat = int(np.argmin(crit))
    return FactorCountReport(
        method=f"{variant}{penalty}", m_hat=m_hat, criterion_path=crit, m_max=m_max,
        details={"V": v, "sigma2": sigma2, "g": g, "printed_scale": printed_scale})


def er_gr(u: np.ndarray, m_max: int) -> tuple[FactorCountReport, FactorCountReport]:
    """Ahn-Horenstein eigenvalue-ratio and growth-ratio estimators.

    ER(k) = lam_k / lam_{k+1} and GR(k) = ln(V(k-1)/V(k)) / ln(V(k)/V(k+1))
    with V(k) the sum of eigenvalues beyond k, maximized over k. A mock
    zeroth eigenvalue lam_0 = sum(lam)/ln(min(N, T)) extends the argmax
    to k = 0 so "no factors" is a possible answer; the reported path
    covers k = 1..m_max.
    """
    u = np.asarray(u, dtype=float)
    n, t = u.shape
    _check_m_max(m_max, min(n, t), "min(N, T)")
    lam = scaled_eigenvalues(u)
    # relative floor keeps ratios finite on exactly low-rank panels
    floor = max(lam[0], 1.0) * np.finfo(float).eps * max(n, t)
    lam = np.maximum(lam, floor)
    total = lam.sum()
    mock = total / np.log(min(n, t))

    tails = total - np.cumsum(lam)              # V(1), V(2), ...
    v = np.concatenate(([total], tails))        # V(0), V(1), ...
    v = np.maximum(v, floor)

    ks = np.arange(1, m_max + 1)
    er_path = lam[ks - 1] / lam[ks]
    er0 = mock / lam[0]
    m_er = int(np.argmax(np.concatenate(([er0], er_path))))

    growth = np.log(v[:-1] / v[1:])             # ln(V(k-1)/V(k)) at index k-1
    # A zero growth means the tail variance already sits at the floor:
    # the spectrum ends at k-1. Positive-over-zero marks that edge as
    # the (finite, dominant) winner; zero-over-zero carries no signal.
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = growth[ks - 1] / growth[ks]
    edge = np.where(growth[ks - 1] > 0.0, 1e300, 0.0)
    gr_path = np.where(growth[ks] > 0.0, raw, edge)
    gr0 = np.log((v[0] + mock) / v[0]) / growth[0] if growth[0] > 0.0 else 0.0
    m_gr = int(np.argmax(np.concatenate(([gr0], gr_path))))

    details = {"mock_eigenvalue": mock, "er0": er0, "gr0": gr0}
    er_report = FactorCountReport("ER", m_er, er_path, m_max, dict(details))
    gr_report = FactorCountReport("GR", m_gr, gr_path, m_max, dict(details))
    return er_report, gr_report


def onatski_ed(u: np.ndarray, m_max: int, max_rounds: int = 100) -> FactorCountReport:
    """Onatski eigenvalue-difference criterion.

    m_hat is the largest k <= m_max with lam_k - lam_{k+1} >= delta,
    where delta = 2 |slope| from regressing the five eigenvalues at
    indices j = c+2..c+6 on (j-1)^(2/3); the window anchor c starts at
    m_max and is re-centered at the current estimate until a fixed
    point. Requires m_max + 5 < min(N, T) so the window exists.
    """
    u = np.asarray(u, dtype=float)
    n, t = u.shape
    if not (isinstance(m_max, (int, np.integer)) and m_max >= 1 and m_max + 5 < min(n, t)):
        raise InvalidMMax(f"need 1 <= m_max and m_max + 5 < min(N, T), got m_max={m_max}")

    lam = scaled_eigenvalues(u)
    diffs = lam[:m_max] - lam[1:m_max + 1]

    def estimate(anchor: int) -> tuple[int, float]:
        j = np.arange(anchor + 2, anchor + 7)          # 1-based indices
        xs = np.column_stack([np.ones(5), (j - 1.0) ** (2.0 / 3.0)])
        slope = np.linalg.lstsq(xs, lam[j - 1], rcond=None)[0][1]
        delta = 2.0 * abs(slope)
        hits = np.nonzero(diffs >= delta)[0]
        return (int(hits[-1]) + 1 if hits.size else 0), delta

    m_hat = m_max
    delta = np.nan
    visited = set()
    rounds = 0
    converged = False
    while rounds < max_rounds:
        rounds += 1
        new_m, delta = estimate(m_hat)
        if new_m == m_hat:
            converged = True
            break
        if new_m in visited:
            m_hat = new_m
            break
        visited.add(m_hat)
        m_hat = new_m
    return FactorCountReport(
        "ED", m_hat, diffs, m_max,
        {"delta": delta, "rounds": rounds, "converged": converged})


def gos(u: np.ndarray, m_max: int) -> FactorCountReport:
    """GOS penalized-eigenvalue rule, for panels with N > T.

    Each row is standardized to unit variance, so the spectrum of
    UU'/(NT) sums to one; the criterion xi(k) = lam_k - g(N, T) with
    g = ((sqrt(N)+sqrt(T))^2 / NT) ln(NT / (sqrt(N)+sqrt(T))^2) declares
    no factors when xi(1) < 0 and otherwise m_hat = min{k : xi(k+1) < 0}.
    """
    u = np.asarray(u, dtype=float)
    n, t = u.shape
    if n <= t:
        raise RequiresNGreaterT(f"criterion needs N > T, got N={n}, T={t}")
    _check_m_max(m_max, t, "T")

    centered = u - u.mean(axis=1, keepdims=True)
    sd = np.sqrt((centered ** 2).mean(axis=1))
    degenerate = int((sd <= 0).sum())
    sd = np.where(sd > 0, sd, 1.0)
    lam = scaled_eigenvalues(centered / sd[:, None])

    edge = (np.sqrt(n) + np.sqrt(t)) ** 2
    g = edge / (n * t) * np.log(n * t / edge)
    xi = lam[:m_max] - g

    cap = False
    if xi[0] < 0:
        m_hat = 0
    else:
        below = np.nonzero(xi[1:] < 0)[0]
        if below.size:
            m_hat = int(below[0]) + 1
        else:
            m_hat = m_max
            cap = True
    return FactorCountReport(
        "GOS", m_hat, xi, m_max,
        {"g": g, "no_factors": m_hat == 0, "cap_binding": cap,
         "degenerate_rows": degenerate})
