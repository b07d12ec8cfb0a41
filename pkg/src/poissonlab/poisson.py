"""Chen-Stein bound for locally dependent Bernoulli fields and Poisson reference quantities."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .graph import Graph

DEFAULT_T_GRID = tuple(round(0.1 * k, 1) for k in range(21))
TAIL_MASS = 1e-12


@dataclass(frozen=True)
class BernoulliFieldStats:
    """Marginals p_x and pair moments E[b_x b_y] for d(x, y) <= varrho.

    ``pair`` is an n x n array; entries for pairs farther apart than
    ``varrho`` are NaN because they are never needed.
    """

    p: np.ndarray
    pair: np.ndarray
    varrho: int
    samples: int

    @property
    def lambda_bar(self) -> float:
        return float(self.p.sum())

    @classmethod
    def from_samples(cls, fields, g: Graph, varrho: int) -> "BernoulliFieldStats":
        b = np.asarray(fields, dtype=float)
        if b.ndim != 2 or b.shape[1] != g.n:
            raise ValueError("fields must be an (samples, n) array")
        if b.shape[0] == 0:
            raise ValueError("no samples")
        if not np.all((b == 0) | (b == 1)):
            raise ValueError("fields must be 0/1 valued")
        m = b.shape[0]
        pair = (b.T @ b) / m
        pair[~_near_mask(g, varrho)] = np.nan
        return cls(b.mean(axis=0), pair, varrho, m)

    @classmethod
    def independent(cls, p, g: Graph, varrho: int) -> "BernoulliFieldStats":
        """Exact moments of an independent field with marginals ``p``."""
        p = np.asarray(p, dtype=float)
        pair = np.outer(p, p)
        np.fill_diagonal(pair, p)
        pair[~_near_mask(g, varrho)] = np.nan
        return cls(p, pair, varrho, 0)


def _near_mask(g: Graph, varrho: int) -> np.ndarray:
    return np.array([(g.bfs(x) <= varrho) for x in range(g.n)])


def chen_stein_bound(st: BernoulliFieldStats, g: Graph) -> float:
    """sum_x sum_{y in B(x) \\ x} E[b_x b_y] + sum_x sum_{y in B(x)} p_x p_y."""
    near = _near_mask(g, st.varrho)
    vals = st.pair[near & ~np.eye(g.n, dtype=bool)]
    if np.any(np.isnan(vals)):
        raise ValueError("pair estimates missing inside the dependence radius")
    return float(vals.sum() + (np.outer(st.p, st.p) * near).sum())


def poisson_laplace(lam: float, t) -> float | np.ndarray:
    """E exp(-t P_lam) = exp(-lam (1 - e^{-t}))."""
    t_arr = np.asarray(t, dtype=float)
    if lam < 0 or np.any(t_arr < 0):
        raise ValueError("lambda and t must be non-negative")
    out = np.exp(-lam * -np.expm1(-t_arr))
    return float(out) if out.ndim == 0 else out


def empirical_laplace(samples, t: float) -> tuple[float, float]:
    """Mean and standard error of exp(-t * count)."""
    c = np.asarray(samples, dtype=float)
    if c.size == 0:
        raise ValueError("no samples")
    v = np.exp(-t * c)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


@dataclass(frozen=True)
class LaplaceRow:
    t: float
    empirical: float
    reference: float
    gap: float
    stderr: float


def laplace_table(samples, lambda_ref: float, t_grid=DEFAULT_T_GRID) -> list[LaplaceRow]:
    if len(t_grid) == 0:
        raise ValueError("empty t grid")
    rows = []
    for t in t_grid:
        emp, se = empirical_laplace(samples, t)
        ref = poisson_laplace(lambda_ref, t)
        rows.append(LaplaceRow(float(t), emp, ref, abs(emp - ref), se))
    return rows


def laplace_gap(samples, lambda_ref: float, t_grid=DEFAULT_T_GRID) -> tuple[float, float]:
    """Largest |empirical - Poisson| Laplace difference over the grid, and the largest stderr."""
    rows = laplace_table(samples, lambda_ref, t_grid)
    return max(r.gap for r in rows), max(r.stderr for r in rows)


def tv_to_poisson(histogram, lam: float) -> float:
    """Total variation distance between an empirical count law and Poisson(lam).

    ``histogram`` maps count value to frequency (dict or sequence indexed by
    value).  The Poisson tail is truncated once its cumulative mass exceeds
    1 - 1e-12.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if isinstance(histogram, dict):
        items = {int(k): float(v) for k, v in histogram.items()}
    else:
        items = {k: float(v) for k, v in enumerate(histogram)}
    total = sum(items.values())
    if total <= 0:
        raise ValueError("empty histogram")
    kmax = int(stats.poisson.ppf(1 - TAIL_MASS, lam))
    while stats.poisson.cdf(kmax, lam) <= 1 - TAIL_MASS:
        kmax += 1
    kmax = max(kmax, max(items))
    k = np.arange(kmax + 1)
    emp = np.zeros(kmax + 1)
    for v, c in items.items():
        emp[v] = c / total
    return float(0.5 * np.abs(emp - stats.poisson.pmf(k, lam)).sum())


def aux_poisson_bound(density_sup: float, I_len: float, K: int, R: int, n: int) -> float:
    """81 rho^2 (|I| + 1)^2 K^{8R} / n, the Chen-Stein bound for the auxiliary process."""
    return 81 * density_sup**2 * (I_len + 1) ** 2 * K ** (8 * R) / n


def bound_report(lambda_bar: float, bound: float, rows: list[LaplaceRow]) -> str:
    return json.dumps({"lambda_bar": lambda_bar, "bound": bound,
                       "grid": [r.__dict__ for r in rows]}, sort_keys=True)
