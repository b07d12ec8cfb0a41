"""The auxiliary point process: candidates, clusters, selected vertices and events.

For every vertex x the Neumann restriction H^{(x)} of H to B_R(x) is
diagonalized.  x is a candidate (x in F) if some eigenvalue xi of H^{(x)}
lies in I_n and its normalized eigenvector psi has boundary mass at most
tau^2.  The cluster of a candidate x is

    C(x) = {y in F : d(x, y) <= 2R, |xi(x) - xi(y)| <= 2 sqrt(K) tau}

and x is selected (x in E, b_x = 1) if |psi^{(x)}(x)| is maximal over C(x).
eta counts the selected vertices.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .eigensolver import EigensolverError, symmetric_eig
from .errors import BoundViolation, PreconditionError
from .graph import Graph
from .hamiltonian import DisorderRealization, assemble
from .localization import vector_constant_cap
from .spectral import EigenSystem, RescaledWindow, count_values

TIE_RTOL = 1e-12
SCHEDULE = "schedule"
MANUAL = "manual"


# -- parameters ---------------------------------------------------------------

@dataclass(frozen=True)
class AuxParams:
    R: int
    tau: float
    C: float
    source: str
    K: int
    mu_s: float | None = None
    a: float | None = None
    mu: float | None = None
    consistent: bool = True

    def __post_init__(self):
        if self.R < 0 or self.tau <= 0 or not self.C > 0:
            raise ValueError("need R >= 0, tau > 0 and C > 0")
        if self.source not in (SCHEDULE, MANUAL):
            raise ValueError(f"unknown parameter source {self.source!r}")

    @property
    def epsilon(self) -> float:
        return 6 * math.sqrt(self.K) * self.tau

    @property
    def cluster_width(self) -> float:
        return 2 * math.sqrt(self.K) * self.tau

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epsilon"] = self.epsilon
        return d


def admissible_a_range(K: int, mu_s: float) -> tuple[float, float]:
    lnK = math.log(K)
    if mu_s <= 2 * lnK:
        raise PreconditionError("need mu_s > 2 ln K")
    return 1.0, 2 - lnK / (mu_s - lnK)


def schedule_radius(n: int, K: int, mu_s: float, a: float) -> int:
    lnK = math.log(K)
    return math.ceil((7 * a - 6) * math.log(n) / ((a - 1) * mu_s + (18 * a - 14) * lnK))


def schedule_params(n: int, K: int, mu_s: float, a: float, strict: bool = True) -> AuxParams:
    """R = ceil((7a-6) ln n / ((a-1) mu_s + (18a-14) ln K)), tau = K^{8R}/n^3,
    C = tau^2 e^{(mu_s - 2 ln K) R}.

    The schedule only makes sense once tau <= 1/(6 sqrt(K) n).  When it does
    not, ``strict`` raises; otherwise the result is marked inconsistent.
    """
    lo, hi = admissible_a_range(K, mu_s)
    if not lo < a < hi:
        raise PreconditionError(f"a = {a} outside the admissible range ({lo}, {hi:.6g})")
    if n < 2:
        raise PreconditionError("need n >= 2")
    R = schedule_radius(n, K, mu_s, a)
    tau = math.exp(8 * R * math.log(K) - 3 * math.log(n))
    C = tau**2 * math.exp((mu_s - 2 * math.log(K)) * R)
    ok = tau <= 1 / (6 * math.sqrt(K) * n)
    if strict and not ok:
        raise PreconditionError(f"schedule inconsistent at n={n}: tau = {tau:.3e} > 1/(6 sqrt(K) n)")
    return AuxParams(R, tau, C, SCHEDULE, K, mu_s=mu_s, a=a, consistent=ok)


def envelope_budget(K: int, R: int, tau: float, mu: float) -> float:
    """Largest C allowed for the lower comparison: tau^2 e^{(mu - ln K) R}, capped
    by the restricted-eigenvector constant."""
    return min(tau**2 * math.exp((mu - math.log(K)) * R), vector_constant_cap(K, mu, R))


def manual_params(R: int, tau: float, K: int, mu: float | None = None,
                  C: float | None = None) -> AuxParams:
    """Hand-picked (R, tau).  Without ``C`` the envelope budget at ``mu`` is used."""
    if C is None:
        C = envelope_budget(K, R, tau, mu) if mu is not None else math.inf
    return AuxParams(R, tau, C, MANUAL, K, mu=mu)


# -- ball geometry ------------------------------------------------------------

@dataclass(frozen=True)
class _Ball:
    members: np.ndarray     # global ids, ascending
    center: int             # local index of the center
    boundary: np.ndarray    # local indices of the inner boundary


def ball_geometry(g: Graph, R: int) -> list[_Ball]:
    """Per-vertex balls of radius R with their inner boundaries, cached on the graph."""
    key = ("ball-geometry", R)
    cached = g._bfs_cache.get(key)
    if cached is not None:
        return cached
    out = []
    for x in range(g.n):
        dist = g.bfs(x)
        members = np.flatnonzero(dist <= R)
        local = {int(v): i for i, v in enumerate(members)}
        bd = [local[int(v)] for v in members
              if dist[v] == R and any(dist[u] > R for u in g.adjacency[v])]
        out.append(_Ball(members, local[x], np.array(bd, dtype=np.int64)))
    g._bfs_cache[key] = out
    return out


# -- outcome ------------------------------------------------------------------

@dataclass
class AuxOutcome:
    in_F: np.ndarray
    xi: np.ndarray
    boundary_mass: np.ndarray
    psi_center: np.ndarray
    local_double: np.ndarray          # Delta^{(x)}: two restricted eigenvalues in I_n within 2 eps
    local_double_strict: np.ndarray   # same at threshold eps (strict <)
    psi: dict = field(default_factory=dict, repr=False)
    in_E: np.ndarray | None = None
    cluster_sizes: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.in_F.size

    @property
    def candidates(self) -> np.ndarray:
        return np.flatnonzero(self.in_F)

    @property
    def eta(self) -> int:
        if self.in_E is None:
            raise ValueError("selection has not been run")
        return int(np.count_nonzero(self.in_E))

    def b_field(self) -> np.ndarray:
        if self.in_E is None:
            raise ValueError("selection has not been run")
        return self.in_E.astype(np.uint8)

    def vertex_records(self) -> list[dict]:
        rows = []
        for x in range(self.n):
            f = bool(self.in_F[x])
            rows.append({"x": x, "in_F": f,
                         "xi": float(self.xi[x]) if f else None,
                         "boundary_mass": float(self.boundary_mass[x]) if f else None,
                         "psi_center": float(self.psi_center[x]) if f else None,
                         "in_E": bool(self.in_E[x]) if self.in_E is not None else None})
        return rows


def build_candidates(g: Graph, w: DisorderRealization, window: RescaledWindow, p: AuxParams,
                     method: str = "householder-ql", h=None) -> AuxOutcome:
    """Diagonalize every ball restriction and record the candidate data.

    Among eigenvalues of H^{(x)} in I_n whose eigenvector has boundary mass
    <= tau^2, the one with the smallest boundary mass is kept; remaining ties
    go to the larger |psi(x)|, then to the lower eigen index.
    """
    if p.K != g.K:
        raise PreconditionError(f"parameters are for K={p.K}, graph has K={g.K}")
    if h is None:
        h = assemble(g, w)
    mat = h.matrix
    lo, hi = window.interval
    eps = p.epsilon
    tau2 = p.tau**2
    n = g.n
    in_F = np.zeros(n, dtype=bool)
    xi = np.full(n, np.nan)
    mass = np.full(n, np.nan)
    center_amp = np.full(n, np.nan)
    ldouble = np.zeros(n, dtype=bool)
    ldouble_strict = np.zeros(n, dtype=bool)
    psi = {}
    for x, b in enumerate(ball_geometry(g, p.R)):
        sub = mat[np.ix_(b.members, b.members)]
        try:
            if method == "lapack":
                vals, vecs = np.linalg.eigh(sub)
            else:
                vals, vecs = symmetric_eig(sub)
        except EigensolverError as exc:
            raise EigensolverError(f"ball restriction at vertex {x}: {exc}") from exc
        i0 = int(np.searchsorted(vals, lo, "left"))
        i1 = int(np.searchsorted(vals, hi, "left"))
        if i1 <= i0:
            continue
        inside = vals[i0:i1]
        if inside.size > 1:
            gaps = np.diff(inside)
            ldouble[x] = bool(np.any(gaps <= 2 * eps))
            ldouble_strict[x] = bool(np.any(gaps < eps))
        best = None
        for j in range(i0, i1):
            v = vecs[:, j]
            m = float(v[b.boundary] @ v[b.boundary]) if b.boundary.size else 0.0
            if m > tau2:
                continue
            key = (m, -abs(v[b.center]), j)
            if best is None or key < best[0]:
                best = (key, j)
        if best is None:
            continue
        j = best[1]
        v = vecs[:, j]
        in_F[x] = True
        xi[x] = vals[j]
        mass[x] = best[0][0]
        center_amp[x] = abs(v[b.center])
        psi[x] = v.copy()
    return AuxOutcome(in_F, xi, mass, center_amp, ldouble, ldouble_strict, psi)


def build_clusters_and_select(outcome: AuxOutcome, g: Graph, p: AuxParams) -> AuxOutcome:
    """Fill ``in_E`` and the cluster sizes of the selected vertices.

    Ordering key is (|psi(x)|, -x), so among exactly tied amplitudes the
    lowest vertex id wins.
    """
    cand = outcome.candidates
    in_E = np.zeros(outcome.n, dtype=bool)
    sizes = {}
    width = p.cluster_width
    for x in cand:
        x = int(x)
        near = cand[g.bfs(x)[cand] <= 2 * p.R]
        members = near[np.abs(outcome.xi[near] - outcome.xi[x]) <= width]
        kx = (outcome.psi_center[x], -x)
        if all(kx >= (outcome.psi_center[y], -int(y)) for y in members):
            in_E[x] = True
            sizes[x] = int(members.size)
    outcome.in_E = in_E
    outcome.cluster_sizes = sizes
    return outcome


def run_aux(g: Graph, w: DisorderRealization, window: RescaledWindow, p: AuxParams,
            method: str = "householder-ql", h=None) -> AuxOutcome:
    return build_clusters_and_select(build_candidates(g, w, window, p, method, h), g, p)


# -- events -------------------------------------------------------------------

@dataclass(frozen=True)
class EventFlags:
    endpoint_clear: bool        # N(I_n^e) = 0
    no_double: bool             # no two eigenvalues in I_n within 2 eps
    no_double_strict: bool      # no two eigenvalues in I_n within eps (strict)
    local_no_double: bool       # no Delta^{(x)} at threshold 2 eps
    local_no_double_strict: bool
    no_ties: bool               # O_n^c up to relative tolerance
    envelope_ok: bool | None    # X_n <= C; None when no decay rate is configured
    X_n: float | None

    @property
    def omega(self) -> bool:
        return self.endpoint_clear and self.no_double and self.no_ties

    @property
    def omega_prime(self) -> bool:
        return self.omega and bool(self.envelope_ok) and self.local_no_double

    def to_dict(self) -> dict:
        d = asdict(self)
        d["omega"] = self.omega
        d["omega_prime"] = self.omega_prime
        return d


def has_close_pair(values: np.ndarray, lo: float, hi: float, gap: float, strict: bool) -> bool:
    """Two eigenvalues in [lo, hi) within ``gap`` of each other (multiplicity counts)."""
    i0 = int(np.searchsorted(values, lo, "left"))
    i1 = int(np.searchsorted(values, hi, "left"))
    d = np.diff(values[i0:i1])
    return bool(np.any(d < gap) if strict else np.any(d <= gap))


def amplitude_ties(outcome: AuxOutcome, rtol: float = TIE_RTOL) -> bool:
    amps = np.sort(outcome.psi_center[outcome.in_F])
    if amps.size < 2:
        return False
    return bool(np.any(np.diff(amps) <= rtol * amps[1:]))


def detect_events(es_full: EigenSystem, outcome: AuxOutcome, window: RescaledWindow,
                  p: AuxParams, X_n: float | None = None) -> EventFlags:
    """Event flags for one realization.

    Delta(eps_n) is flagged when two eigenvalues of H_n in I_n are less than
    2 eps_n apart, the separation the upper comparison needs; the flag at
    threshold eps_n is reported alongside.
    """
    eps = p.epsilon
    lo, hi = window.interval
    vals = es_full.values
    endpoint = window.with_epsilon(eps).count_endpoint(vals) == 0
    envelope = None if X_n is None else bool(X_n <= p.C)
    return EventFlags(
        endpoint_clear=endpoint,
        no_double=not has_close_pair(vals, lo, hi, 2 * eps, strict=True),
        no_double_strict=not has_close_pair(vals, lo, hi, eps, strict=True),
        local_no_double=not bool(outcome.local_double.any()),
        local_no_double_strict=not bool(outcome.local_double_strict.any()),
        no_ties=not amplitude_ties(outcome),
        envelope_ok=envelope, X_n=X_n)


@dataclass(frozen=True)
class Comparison:
    eta: int
    nu: int
    flags: EventFlags

    @property
    def diff(self) -> int:
        return self.eta - self.nu

    @property
    def upper_checked(self) -> bool:
        return self.flags.omega

    @property
    def equality_checked(self) -> bool:
        return self.flags.omega_prime


def compare_eta_nu(outcome: AuxOutcome, es_full: EigenSystem, window: RescaledWindow,
                   flags: EventFlags, seed: int | None = None,
                   dump_dir: str | Path | None = None) -> Comparison:
    """eta versus nu = N(I_n); eta <= nu is asserted on Omega_n and eta = nu on Omega'_n.

    A breach raises BoundViolation carrying the full state, which is also
    written to ``dump_dir`` when given.
    """
    nu = count_values(es_full.values, *window.interval)
    cmp = Comparison(outcome.eta, nu, flags)
    bad = (flags.omega and cmp.eta > nu) or (flags.omega_prime and cmp.eta != nu)
    if bad:
        state = {"seed": seed, "eta": cmp.eta, "nu": nu, "flags": flags.to_dict(),
                 "window": list(window.interval),
                 "eigenvalues_in_window": es_full.values[
                     (es_full.values >= window.interval[0])
                     & (es_full.values < window.interval[1])].tolist(),
                 "vertices": outcome.vertex_records()}
        if dump_dir is not None:
            path = Path(dump_dir) / f"violation-{seed}.json"
            path.write_text(json.dumps(state, indent=1))
        raise BoundViolation(f"eta={cmp.eta} vs nu={nu} breaches the comparison on a flagged "
                             f"realization (seed {seed})", state)
    return cmp


# -- correlations -------------------------------------------------------------

@dataclass(frozen=True)
class CovarianceEstimate:
    x: int
    y: int
    distance: int
    samples: int
    mean_x: float
    mean_y: float
    mean_xy: float
    cov: float
    stderr: float

    @property
    def holds(self) -> bool:
        return abs(self.cov) <= 3 * self.stderr


def independence_probe(fields, g: Graph, p: AuxParams, x: int, y: int,
                       min_samples: int = 100) -> CovarianceEstimate:
    """Empirical covariance of (b_x, b_y) over realizations, with its standard error.

    ``fields`` is a sequence of AuxOutcome or of 0/1 arrays indexed by vertex.
    """
    d = int(g.bfs(x)[y])
    if d <= 6 * p.R:
        raise PreconditionError(f"d({x}, {y}) = {d} is not larger than 6R = {6 * p.R}")
    rows = [f.b_field() if isinstance(f, AuxOutcome) else np.asarray(f) for f in fields]
    if len(rows) < min_samples:
        raise PreconditionError(f"need at least {min_samples} samples, got {len(rows)}")
    bx = np.array([r[x] for r in rows], dtype=float)
    by = np.array([r[y] for r in rows], dtype=float)
    m = bx.size
    prod = (bx - bx.mean()) * (by - by.mean())
    cov = float(prod.sum() / (m - 1))
    se = float(prod.std(ddof=1) / math.sqrt(m))
    return CovarianceEstimate(x, y, d, m, float(bx.mean()), float(by.mean()),
                              float((bx * by).mean()), cov, se)


def locminami_bound(density_sup: float, I_len: float, K: int, R: int, n: int, tau: float) -> float:
    """18 rho^2 (|I| + 6 sqrt(K) n tau)^2 K^{2R} / n^2, the bound on E[b_x b_y] for x != y."""
    return 18 * density_sup**2 * (I_len + 6 * math.sqrt(K) * n * tau) ** 2 * K ** (2 * R) / n**2


def local_double_bound(density_sup: float, I_len: float, K: int, R: int, n: int,
                       tau: float) -> float:
    """36 rho^2 |I| K^{2R} eps / n, the bound on P[Delta^{(x)}(eps)]."""
    return 36 * density_sup**2 * I_len * K ** (2 * R) * 6 * math.sqrt(K) * tau / n


def outcome_record(seed, outcome: AuxOutcome, cmp: Comparison, verbose: bool = False) -> dict:
    rec = {"seed": seed, "eta": cmp.eta, "nu": cmp.nu, "flags": cmp.flags.to_dict(),
           "F_size": int(outcome.in_F.sum()),
           "cluster_sizes": [outcome.cluster_sizes[x] for x in sorted(outcome.cluster_sizes)]}
    if verbose:
        rec["vertices"] = outcome.vertex_records()
    return rec

