"""Eigendecomposition, eigenvalue counting, the rescaled process and Green functions.

Intervals are half-open ``[a, b)`` everywhere so counts add up over partitions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .eigensolver import symmetric_eig
from .graph import Graph, VertexSet
from .hamiltonian import DisorderRealization, Operator, assemble

DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class EigenSystem:
    values: np.ndarray
    vectors: np.ndarray | None
    residual_sup: float
    norm_estimate: float
    support: VertexSet

    @property
    def size(self) -> int:
        return self.values.size

    def vector(self, j: int) -> np.ndarray:
        if self.vectors is None:
            raise ValueError("eigensystem was computed without eigenvectors")
        return self.vectors[:, j]

    def amplitudes_at(self, x: int) -> np.ndarray:
        """|phi_j(x)| for all j; ``x`` is a global vertex id."""
        if self.vectors is None:
            raise ValueError("eigensystem was computed without eigenvectors")
        return np.abs(self.vectors[self.index[x]])

    @property
    def index(self) -> dict[int, int]:
        try:
            return self.__dict__["_index"]
        except KeyError:
            idx = self.support.index()
            object.__setattr__(self, "_index", idx)
            return idx

    def check(self, norm_tol=1e-10, orth_tol=1e-8, residual_rel=1e-9) -> None:
        """Assert the orthonormality and residual invariants."""
        if self.vectors is None:
            return
        v = self.vectors
        norms = np.linalg.norm(v, axis=0)
        if np.any(np.abs(norms - 1) > norm_tol):
            raise AssertionError("eigenvectors not normalized")
        gram = v.T @ v - np.eye(self.size)
        if np.abs(gram).max(initial=0.0) > orth_tol:
            raise AssertionError("eigenvectors not orthogonal")
        if self.residual_sup > residual_rel * max(self.norm_estimate, 1.0):
            raise AssertionError(f"residual {self.residual_sup} too large")


def eigendecompose(h: Operator, vectors: bool = True, method: str = "householder-ql") -> EigenSystem:
    """Full spectrum of ``h``; ``method`` is ``householder-ql`` (in-repo) or ``lapack``."""
    if method == "householder-ql":
        values, vecs = symmetric_eig(h.matrix, want_vectors=vectors)
    elif method == "lapack":
        if vectors:
            values, vecs = np.linalg.eigh(h.matrix)
        else:
            values, vecs = np.linalg.eigvalsh(h.matrix), None
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    residual = 0.0
    if vecs is not None and h.dim:
        residual = float(np.linalg.norm(h.matrix @ vecs - vecs * values, axis=0).max())
    return EigenSystem(values, vecs, residual, h.norm_estimate(), h.support)


def count_values(values: np.ndarray, a: float, b: float) -> int:
    """Number of entries of the sorted array ``values`` in [a, b)."""
    if b <= a:
        return 0
    return int(np.searchsorted(values, b, "left") - np.searchsorted(values, a, "left"))


def count_in_interval(es: EigenSystem, J: tuple[float, float]) -> int:
    a, b = J
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("interval must be bounded")
    return count_values(es.values, a, b)


@dataclass(frozen=True)
class RescaledWindow:
    """I_n = E + I/n for I = [a, b), plus the endpoint neighbourhood of half-width epsilon."""

    E: float
    a: float
    b: float
    n: int
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("window needs a < b")
        if self.n < 1 or self.epsilon < 0:
            raise ValueError("need n >= 1 and epsilon >= 0")

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def interval(self) -> tuple[float, float]:
        return self.E + self.a / self.n, self.E + self.b / self.n

    @property
    def endpoint_set(self) -> tuple[tuple[float, float], tuple[float, float]]:
        lo, hi = self.interval
        eps = self.epsilon
        return (lo - eps, lo + eps), (hi - eps, hi + eps)

    def count_endpoint(self, values: np.ndarray) -> int:
        """Eigenvalues in the open set I_n^e (each counted once)."""
        lo, hi = self.interval
        dist = np.minimum(np.abs(values - lo), np.abs(values - hi))
        return int(np.count_nonzero(dist < self.epsilon))

    def with_epsilon(self, epsilon: float) -> "RescaledWindow":
        return RescaledWindow(self.E, self.a, self.b, self.n, epsilon)


def rescaled_points(es: EigenSystem, w: RescaledWindow) -> np.ndarray:
    lo, hi = w.interval
    i0 = np.searchsorted(es.values, lo, "left")
    i1 = np.searchsorted(es.values, hi, "left")
    return w.n * (es.values[i0:i1] - w.E)


# -- Green functions ----------------------------------------------------------

def green_column(h: Operator, y: int, z: complex) -> np.ndarray:
    """(H - z)^{-1} delta_y, indexed like ``h.support``."""
    if not z.imag > 0:
        raise ValueError("need Im z > 0")
    rhs = np.zeros(h.dim, dtype=complex)
    rhs[h.index[y]] = 1.0
    mat = h.matrix.astype(complex)
    mat[np.diag_indices(h.dim)] -= z
    try:
        col = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"resolvent solve failed at z={z}") from exc
    if not np.all(np.isfinite(col)):
        raise ArithmeticError(f"resolvent solve produced non-finite values at z={z}")
    return col


def green_entry(h: Operator, x: int, y: int, z: complex) -> complex:
    return complex(green_column(h, y, z)[h.index[x]])


def _mean_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no samples")
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def fractional_moment(ensemble: Iterable[DisorderRealization], g: Graph, x: int, y: int,
                      z: complex, s: float, samples: int) -> tuple[float, float]:
    """Monte Carlo estimate of E|G(x, y; z)|^s with its standard error."""
    if samples < 1:
        raise ValueError("samples must be positive")
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    vals = []
    for w in ensemble:
        vals.append(abs(green_entry(assemble(g, w), x, y, z)) ** s)
        if len(vals) == samples:
            break
    if len(vals) < samples:
        raise ValueError(f"ensemble exhausted after {len(vals)} samples")
    return _mean_stderr(vals)


def fractional_moment_scan(ensemble: Iterable[DisorderRealization], g: Graph,
                           sources: list[int], distances: list[int], z: complex, s: float,
                           samples: int) -> list[tuple[int, float, float]]:
    """E|G(x, y; z)|^s averaged over pairs at each distance.

    For every realization the values |G(x, y)|^s are averaged over all sources
    ``x`` and all ``y`` with d(x, y) = d; mean and standard error are then
    taken over realizations.  Returns ``(distance, mean, stderr)`` rows.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    shells = {d: [g.bfs(x) == d for x in sources] for d in distances}
    per_real = {d: [] for d in distances}
    count = 0
    for w in ensemble:
        h = assemble(g, w)
        cols = [np.abs(green_column(h, x, z)) ** s for x in sources]
        for d in distances:
            parts = [c[mask] for c, mask in zip(cols, shells[d])]
            pooled = np.concatenate(parts)
            if pooled.size == 0:
                raise ValueError(f"no vertex pair at distance {d}")
            per_real[d].append(pooled.mean())
        count += 1
        if count == samples:
            break
    if count < samples:
        raise ValueError(f"ensemble exhausted after {count} samples")
    return [(d, *_mean_stderr(per_real[d])) for d in distances]


def decay_rate_fit(moments: list[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares slope of -log(mean) against distance, and its r^2."""
    d = np.array([m[0] for m in moments], dtype=float)
    y = np.array([m[1] for m in moments], dtype=float)
    if len(np.unique(d)) < 3:
        raise ValueError("need at least 3 distinct distances")
    if np.any(y <= 0):
        raise ValueError("means must be positive")
    y = -np.log(y)
    dc = d - d.mean()
    slope = float((dc @ (y - y.mean())) / (dc @ dc))
    resid = y - (y.mean() + slope * dc)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float((resid**2).sum())
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    return slope, r2


# -- CSV export ---------------------------------------------------------------

def write_spectrum_csv(path, spectra: Iterable[tuple[int, np.ndarray]]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["realization_index", "j", "eigenvalue"])
        for idx, values in spectra:
            for j, e in enumerate(values):
                out.writerow([idx, j, repr(float(e))])


def write_green_scan_csv(path, rows: Iterable[tuple[int, float, float]], s: float) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["distance", "s", "mean", "stderr"])
        for d, mean, se in rows:
            out.writerow([d, s, repr(mean), repr(se)])
