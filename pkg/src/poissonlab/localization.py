"""Eigenfunction correlators, localization envelopes and approximate-eigenvector checks."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import BoundViolation, PreconditionError
from .graph import Graph, VertexSet, ball, inner_boundary
from .hamiltonian import Operator
from .spectral import EigenSystem, count_values

NUMERICAL_SLACK = 1e-8


def correlator(es: EigenSystem, x: int, y: int, interval: tuple[float, float]) -> float:
    """Q(x, y; I) = sum over E_j in [a, b) of |phi_j(x)| |phi_j(y)|."""
    a, b = interval
    i0 = np.searchsorted(es.values, a, "left")
    i1 = np.searchsorted(es.values, b, "left")
    if i1 <= i0:
        return 0.0
    ax = es.amplitudes_at(x)[i0:i1]
    ay = es.amplitudes_at(y)[i0:i1]
    return float(ax @ ay)


# -- envelopes ----------------------------------------------------------------

@dataclass(frozen=True)
class LocalizationProfile:
    j: int
    eigenvalue: float
    center: int
    X: float
    mu: float
    violation: float

    def to_json(self) -> str:
        return json.dumps({"E_j": self.eigenvalue, "center": self.center, "X": self.X,
                           "mu": self.mu, "violation": self.violation, "j": self.j},
                          sort_keys=True)


def localization_profile(es: EigenSystem, g: Graph, j: int, mu: float,
                         X: float | None = None) -> LocalizationProfile:
    """Center, minimal envelope constant and envelope violation of eigenvector ``j``.

    The center is the argmax of |phi_j| with ties going to the lowest vertex
    id.  Without ``X`` the minimal constant max_x |phi_j(x)| e^{mu d(x, center)}
    is used, for which the violation is zero up to rounding.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    amp = np.abs(es.vector(j))
    verts = np.asarray(es.support.members)
    center_local = int(np.argmax(amp))  # argmax returns the first, i.e. lowest id
    center = int(verts[center_local])
    dist = g.bfs(center)[verts]
    weights = np.exp(mu * dist)
    x_min = float((amp * weights).max())
    if X is None:
        X = x_min
    violation = float((amp - X / weights).max())
    return LocalizationProfile(j, float(es.values[j]), center, X, mu, violation)


def interval_profiles(es: EigenSystem, g: Graph, interval: tuple[float, float],
                      mu: float) -> list[LocalizationProfile]:
    a, b = interval
    i0 = int(np.searchsorted(es.values, a, "left"))
    i1 = int(np.searchsorted(es.values, b, "left"))
    return [localization_profile(es, g, j, mu) for j in range(i0, i1)]


def envelope_constant(es: EigenSystem, g: Graph, interval: tuple[float, float],
                      mu: float) -> float:
    """Max over eigenvalues in ``interval`` of the per-vector minimal envelope.

    This is the random variable X_n: the smallest constant for which every
    eigenvector with eigenvalue in the interval obeys the exponential
    envelope around its own center.  Zero when the interval is empty.
    """
    return max((p.X for p in interval_profiles(es, g, interval, mu)), default=0.0)


def default_mu(K: int, mu_s_hat: float) -> float:
    """Midpoint of (ln K, mu_s_hat - ln K)."""
    lo, hi = math.log(K), mu_s_hat - math.log(K)
    if hi <= lo:
        raise ValueError(f"fitted rate {mu_s_hat:.4g} <= 2 ln K leaves no admissible mu")
    return 0.5 * (lo + hi)


def write_localization_report(path, rows) -> None:
    """JSON lines, one per (realization, j)."""
    with open(path, "w") as fh:
        for realization, profile in rows:
            rec = json.loads(profile.to_json())
            rec["realization"] = realization
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


# -- approximate eigenvectors -------------------------------------------------

@dataclass(frozen=True)
class ApproxEigenReport:
    lam: float
    tau: float
    j: int
    eigenvalue: float
    gap: float
    bound: float
    residual_norm: float
    holds: bool
    epsilon: float
    count_near: int
    overlap: float | None
    overlap_bound: float | None
    overlap_holds: bool | None

    def assert_holds(self):
        if not self.holds or self.overlap_holds is False:
            raise BoundViolation("approximate eigenvector bound violated", asdict(self))


def _check_same_support(h: Operator, es: EigenSystem):
    if h.support.members != es.support.members:
        raise PreconditionError("operator and eigensystem live on different supports")


def boundary_mass(psi: np.ndarray, h: Operator, b: VertexSet) -> float:
    """Sum of |psi|^2 over the inner boundary of ``b`` inside the support of ``h``."""
    bd = inner_boundary(h.graph, b, ambient=h.support)
    idx = h.index
    return float(sum(psi[idx[v]] ** 2 for v in bd))


def check_approx_eigenvector(h: Operator, psi: np.ndarray, b: VertexSet, lam: float,
                             es: EigenSystem, epsilon: float | None = None,
                             tol: float = 1e-9) -> ApproxEigenReport:
    """Nearest-eigenvalue gap and eigenvector overlap for an approximate eigenvector.

    ``psi`` is indexed like ``h.support`` and must be normalized, vanish off
    ``b`` and satisfy H psi = lam psi on ``b``.  tau is taken as the square
    root of the boundary mass of psi, the sharpest value the hypotheses allow.

    Without ``epsilon`` the isolation half-width is the distance from ``lam``
    to the second-nearest eigenvalue, so at most one eigenvalue is inside.
    """
    _check_same_support(h, es)
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (h.dim,):
        raise PreconditionError("psi must be indexed like the operator support")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-9:
        raise PreconditionError("psi is not normalized")
    idx = h.index
    in_b = np.zeros(h.dim, dtype=bool)
    for v in b:
        if v not in idx:
            raise PreconditionError(f"vertex {v} of b lies outside the operator support")
        in_b[idx[v]] = True
    if np.any(psi[~in_b] != 0.0):
        raise PreconditionError("psi does not vanish outside b")
    resid = h.apply(psi) - lam * psi
    inside = float(np.abs(resid[in_b]).max(initial=0.0))
    if inside > tol * max(1.0, h.norm_estimate()):
        raise PreconditionError(f"H psi != lam psi inside b (max deviation {inside:.3e})")

    K = h.graph.K
    tau = math.sqrt(boundary_mass(psi, h, b))
    dist = np.abs(es.values - lam)
    j = int(np.argmin(dist))
    gap = float(dist[j])
    bound = math.sqrt(K) * tau
    if epsilon is None:
        epsilon = float(np.partition(dist, 1)[1]) if dist.size > 1 else math.inf
    count_near = int(np.count_nonzero(dist < epsilon))
    overlap = overlap_bound = overlap_holds = None
    if count_near <= 1 and es.vectors is not None and epsilon > 0:
        overlap = float((psi @ es.vector(j)) ** 2)
        overlap_bound = 1.0 - K * tau**2 / epsilon**2 if math.isfinite(epsilon) else 1.0
        overlap_holds = overlap >= overlap_bound - NUMERICAL_SLACK
    return ApproxEigenReport(
        lam=float(lam), tau=tau, j=j, eigenvalue=float(es.values[j]), gap=gap, bound=bound,
        residual_norm=float(np.linalg.norm(resid)), holds=gap <= bound + NUMERICAL_SLACK,
        epsilon=float(epsilon), count_near=count_near, overlap=overlap,
        overlap_bound=overlap_bound, overlap_holds=overlap_holds)


@dataclass(frozen=True)
class ReverseApproxReport:
    xi: float
    gap: float
    gap_bound: float
    restricted_norm_sq: float
    norm_bound: float
    isolated: bool
    overlap: float | None
    overlap_bound: float | None

    @property
    def holds(self) -> bool:
        ok = (self.gap <= self.gap_bound + NUMERICAL_SLACK
              and self.restricted_norm_sq >= self.norm_bound - NUMERICAL_SLACK)
        if self.overlap is not None:
            ok = ok and self.overlap >= self.overlap_bound - NUMERICAL_SLACK
        return ok

    def assert_holds(self):
        if not self.holds:
            raise BoundViolation("restricted eigenvector bounds violated", asdict(self))


def vector_constant_cap(K: int, mu: float, R: int) -> float:
    """Largest envelope constant C admitted for the restricted-eigenvector check."""
    mu_K = mu - 0.5 * math.log(K)
    if mu_K <= 0:
        raise PreconditionError("need mu > ln(K)/2")
    return math.sqrt((math.exp(2 * mu_K) - 1) / 3) * math.exp(mu_K * R)


def check_reverse_approx(h_full: Operator, phi: np.ndarray, E: float, hat_x: int, R: int,
                         C: float, mu: float, es_restricted: EigenSystem,
                         epsilon: float) -> ReverseApproxReport:
    """Compare an exponentially localized eigenvector with the restriction to ball(hat_x, R).

    Checks, for mu_K = mu - ln(K)/2:
      * some restricted eigenvalue xi has |E - xi| <= sqrt(3K) C e^{-mu_K (R+1)};
      * ||phi restricted||^2 >= 1 - 1.5 C^2 e^{-2 mu_K R} / (e^{2 mu_K} - 1);
      * if xi is the only restricted eigenvalue in (E - eps, E + eps), the
        normalized restriction overlaps the matching restricted eigenvector
        by at least 1 - 3K C^2 e^{-2 mu_K (R+1)} / eps^2.
    """
    g = h_full.graph
    if len(h_full.support) != g.n:
        raise PreconditionError("h_full must be the operator on the whole graph")
    K = g.K
    mu_K = mu - 0.5 * math.log(K)
    if mu_K <= 0:
        raise PreconditionError("need mu > ln(K)/2")
    phi = np.asarray(phi, dtype=float)
    if abs(np.linalg.norm(phi) - 1) > 1e-9:
        raise PreconditionError("phi is not normalized")
    if np.linalg.norm(h_full.apply(phi) - E * phi) > 1e-8 * max(1.0, h_full.norm_estimate()):
        raise PreconditionError("phi is not an eigenvector with eigenvalue E")
    dist = g.bfs(hat_x)
    excess = np.abs(phi) - C * np.exp(-mu * dist)
    worst = int(np.argmax(excess))
    if excess[worst] > NUMERICAL_SLACK * max(C, 1e-300):
        raise PreconditionError(f"envelope violated at vertex {worst}: "
                                f"|phi| = {abs(phi[worst]):.6g} > {C * math.exp(-mu * dist[worst]):.6g}")
    cap = vector_constant_cap(K, mu, R)
    if C > cap:
        raise PreconditionError(f"envelope constant {C:.6g} exceeds the admissible {cap:.6g}")
    bset = ball(g, hat_x, R)
    if es_restricted.support.members != bset.members:
        raise PreconditionError("restricted eigensystem is not on ball(hat_x, R)")

    gaps = np.abs(es_restricted.values - E)
    k = int(np.argmin(gaps))
    members = list(bset.members)
    restricted = phi[members]
    norm_sq = float(restricted @ restricted)
    gap_bound = math.sqrt(3 * K) * C * math.exp(-mu_K * (R + 1))
    norm_bound = 1 - 1.5 * C**2 * math.exp(-2 * mu_K * R) / (math.exp(2 * mu_K) - 1)
    isolated = count_values(es_restricted.values, E - epsilon, E + epsilon) <= 1 and \
        not np.any(np.abs(es_restricted.values - (E - epsilon)) == 0)
    overlap = overlap_bound = None
    if isolated and es_restricted.vectors is not None and norm_sq > 0:
        tilde = restricted / math.sqrt(norm_sq)
        overlap = float((tilde @ es_restricted.vector(k)) ** 2)
        overlap_bound = 1 - 3 * K * C**2 * math.exp(-2 * mu_K * (R + 1)) / epsilon**2
    return ReverseApproxReport(float(es_restricted.values[k]), float(gaps[k]), gap_bound,
                               norm_sq, norm_bound, isolated, overlap, overlap_bound)


# -- overlap transfer ---------------------------------------------------------

def _overlap_sq(psi, es, j):
    return float((np.asarray(psi, dtype=float) @ es.vector(j)) ** 2)


def _require_close(psi, es, j, delta, name):
    if abs(np.linalg.norm(psi) - 1) > 1e-9:
        raise PreconditionError(f"{name} is not normalized")
    if _overlap_sq(psi, es, j) < 1 - delta**2 - 1e-12:
        raise PreconditionError(f"|<{name}, phi_{j}>|^2 < 1 - delta^2")


def overlap_transfer(psi1, psi2, es: EigenSystem, j: int, delta: float) -> float:
    """|<psi1, psi2>|, asserted to be at least 1 - 2 delta^2."""
    _require_close(psi1, es, j, delta, "psi1")
    _require_close(psi2, es, j, delta, "psi2")
    val = abs(float(np.asarray(psi1) @ np.asarray(psi2)))
    if val < 1 - 2 * delta**2 - 1e-12:
        raise BoundViolation("overlap transfer failed", {"overlap": val, "delta": delta, "j": j})
    return val


def pointwise_transfer(psi, es: EigenSystem, j: int, delta: float, x: int) -> tuple[float, float]:
    """Returns (|psi(x)|, |phi_j(x)| + delta) after asserting the first is not larger."""
    psi = np.asarray(psi, dtype=float)
    _require_close(psi, es, j, delta, "psi")
    i = es.index[x]
    lhs = abs(float(psi[i]))
    rhs = abs(float(es.vectors[i, j])) + delta
    if lhs > rhs + 1e-12:
        raise BoundViolation("pointwise transfer failed", {"x": x, "lhs": lhs, "rhs": rhs})
    return lhs, rhs
