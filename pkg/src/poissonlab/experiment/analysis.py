"""Wegner and Minami checks, gap statistics and the error budget of the parameter schedule."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from ..auxprocess import admissible_a_range, schedule_radius
from ..errors import PreconditionError

MIN_WEGNER_SAMPLES = 100
MIN_GAPS = 1000
HIST_BINS = np.linspace(0.0, 5.0, 26)


def _count_matrix(records, cfg) -> np.ndarray:
    if not cfg.count_intervals:
        raise PreconditionError("config declares no count intervals")
    return np.array([r["counts"] for r in records], dtype=float).reshape(len(records), -1)


@dataclass(frozen=True)
class WegnerRow:
    interval: tuple[float, float]
    length: float
    samples: int
    mean: float
    stderr: float
    bound: float
    ratio: float
    ratio_stderr: float
    holds: bool


def wegner_bound(density_sup: float, n: int, length: float) -> float:
    return density_sup * n * length


def wegner_check(records, cfg, n: int, min_samples: int = MIN_WEGNER_SAMPLES) -> list[WegnerRow]:
    """E[N(J)] <= rho n |J| for every configured interval J, with a 3-sigma margin."""
    if len(records) < min_samples:
        raise PreconditionError(f"need at least {min_samples} realizations, got {len(records)}")
    counts = _count_matrix(records, cfg)
    m = counts.shape[0]
    rows = []
    for k, (a, b) in enumerate(cfg.count_intervals):
        c = counts[:, k]
        mean = float(c.mean())
        se = float(c.std(ddof=1) / math.sqrt(m))
        bound = wegner_bound(cfg.density_sup, n, b - a)
        rows.append(WegnerRow((a, b), b - a, m, mean, se, bound, mean / bound, se / bound,
                              mean <= bound + 3 * se))
    return rows


@dataclass(frozen=True)
class MinamiRow:
    interval: tuple[float, float]
    k: int
    samples: int
    probability: float
    stderr: float
    bound: float
    vacuous: bool
    holds: bool | None

    def to_dict(self):
        return asdict(self)


def minami_bound(density_sup: float, n: int, length: float, k: int) -> float:
    return (density_sup * n * length) ** k / math.factorial(k)


def minami_check(records, cfg, n: int, k: int = 2,
                 min_samples: int = MIN_WEGNER_SAMPLES) -> list[MinamiRow]:
    """P[N(J) >= k] <= (rho n |J|)^k / k!; bounds >= 1 are flagged vacuous and not asserted."""
    if k < 1:
        raise ValueError("k must be positive")
    if len(records) < min_samples:
        raise PreconditionError(f"need at least {min_samples} realizations, got {len(records)}")
    counts = _count_matrix(records, cfg)
    m = counts.shape[0]
    rows = []
    for j, (a, b) in enumerate(cfg.count_intervals):
        hit = counts[:, j] >= k
        prob = float(hit.mean())
        se = math.sqrt(prob * (1 - prob) / m)
        bound = minami_bound(cfg.density_sup, n, b - a, k)
        vacuous = bound >= 1
        rows.append(MinamiRow((a, b), k, m, prob, se, bound, vacuous,
                              None if vacuous else prob <= bound + 3 * se))
    return rows


# -- gap statistics -----------------------------------------------------------

@dataclass(frozen=True)
class GapStatistics:
    n_gaps: int
    ks_statistic: float
    ks_pvalue: float
    spacing_ratio_mean: float
    n_ratios: int
    histogram_edges: list
    histogram_counts: list

    def to_dict(self):
        return asdict(self)


def spacing_statistics(level_sets, min_gaps: int = MIN_GAPS) -> GapStatistics:
    """Consecutive spacings pooled over level sets and normalized to unit mean.

    Each level set contributes its own spacings and spacing ratios
    min(s_i, s_{i+1}) / max(s_i, s_{i+1}); nothing is paired across sets.
    """
    gaps, ratios = [], []
    for levels in level_sets:
        s = np.diff(np.sort(np.asarray(levels, dtype=float)))
        gaps.append(s)
        if s.size >= 2:
            lo = np.minimum(s[:-1], s[1:])
            hi = np.maximum(s[:-1], s[1:])
            ok = hi > 0
            ratios.append(np.where(ok, lo / np.where(ok, hi, 1.0), 1.0))
    pooled = np.concatenate(gaps) if gaps else np.empty(0)
    if pooled.size < min_gaps:
        raise PreconditionError(f"need at least {min_gaps} gaps, got {pooled.size}")
    unit = pooled / pooled.mean()
    ks = stats.kstest(unit, "expon")
    r = np.concatenate(ratios) if ratios else np.empty(0)
    counts, edges = np.histogram(unit, bins=HIST_BINS)
    return GapStatistics(int(pooled.size), float(ks.statistic), float(ks.pvalue),
                         float(r.mean()) if r.size else math.nan, int(r.size),
                         edges.tolist(), counts.tolist())


def gap_statistics(records, cfg=None, min_gaps: int = MIN_GAPS) -> GapStatistics:
    """Spacing statistics of the rescaled points stored in campaign records."""
    return spacing_statistics((r["points"] for r in records), min_gaps)


# -- error budget -------------------------------------------------------------

def proof_a_interval(K: int, mu_s: float) -> tuple[float, float]:
    """Exponents a with a > (4 sqrt(101) + 41)/(2 sqrt(101) + 21) that are admissible for mu_s."""
    lo = (4 * math.sqrt(101) + 41) / (2 * math.sqrt(101) + 21)
    hi = admissible_a_range(K, mu_s)[1]
    if hi <= lo:
        raise PreconditionError(f"no admissible a above {lo:.6f} for mu_s = {mu_s}")
    return lo, hi


def feasible(K: int, mu_s: float, a: float) -> bool:
    return (mu_s / math.log(K) - 34) * (a - 1) / a > 4


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 709 else math.inf


def error_budget(K: int, n: int, mu_s: float, a: float, R: int | None = None,
                 tau: float | None = None) -> dict:
    """The three error terms K^{8R}/n, tau n^2 and tau^{-4(a-1)/a} e^{-2(mu_s - 2 ln K) R (a-1)/a} n.

    R and tau default to the schedule values.  Infeasible (mu_s, a) is
    reported through the ``feasible`` flag, not raised.
    """
    lnK = math.log(K)
    if R is None:
        R = schedule_radius(n, K, mu_s, a)
    if tau is None:
        tau = _safe_exp(8 * R * lnK - 3 * math.log(n))
    q = (a - 1) / a
    logs = [8 * R * lnK - math.log(n),
            math.log(tau) + 2 * math.log(n),
            -4 * q * math.log(tau) - 2 * (mu_s - 2 * lnK) * R * q + math.log(n)]
    terms = [_safe_exp(v) for v in logs]
    rate = ((a - 1) * mu_s - (38 * a - 34) * lnK) / ((a - 1) * mu_s + (18 * a - 14) * lnK)
    return {"K": K, "n": n, "mu_s": mu_s, "a": a, "R": R, "tau": tau,
            "terms": terms, "log10_terms": [v / math.log(10) for v in logs],
            "max": max(terms), "decay_exponent": rate,
            "feasible": feasible(K, mu_s, a),
            "schedule_consistent": tau <= 1 / (6 * math.sqrt(K) * n)}
