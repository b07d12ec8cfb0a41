"""Random Schrödinger operators H = A + alpha*V on a graph and their Neumann restrictions.

The hopping term uses the sign convention (A phi)(x) = -sum_{y~x} phi(y), so
off-diagonal entries are -1 on edges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, VertexSet
from .seeding import make_rng, mix_seed

# family -> (sampler on [-1, 1], sup of the density on [-1, 1])
_FAMILIES = {
    "uniform": (lambda rng, n: rng.uniform(-1.0, 1.0, n), 0.5),
    "triangular": (lambda rng, n: rng.triangular(-1.0, 0.0, 1.0, n), 1.0),
}


@dataclass(frozen=True)
class DisorderSpec:
    rho0: float = 1.0
    family: str = "uniform"

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unsupported disorder family {self.family!r}; "
                             f"known: {sorted(_FAMILIES)}")
        if not (np.isfinite(self.rho0) and self.rho0 > 0):
            raise ValueError("rho0 must be positive and finite")

    @property
    def density_sup(self) -> float:
        """||rho||_inf of the single-site density on [-rho0, rho0]."""
        return _FAMILIES[self.family][1] / self.rho0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.rho0 * _FAMILIES[self.family][0](rng, n)


@dataclass(frozen=True)
class DisorderRealization:
    omega: np.ndarray
    alpha: float
    spec: DisorderSpec
    seed: int | None = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        omega = np.asarray(self.omega, dtype=float)
        if omega.ndim != 1:
            raise ValueError("omega must be a vector")
        if np.any(np.abs(omega) > self.spec.rho0):
            raise ValueError("omega leaves the support [-rho0, rho0]")
        omega.flags.writeable = False
        object.__setattr__(self, "omega", omega)

    @property
    def n(self) -> int:
        return self.omega.size

    @property
    def potential(self) -> np.ndarray:
        return self.alpha * self.omega

    @property
    def effective_density_sup(self) -> float:
        """Sup of the density of the diagonal entries alpha*omega_x."""
        return self.spec.density_sup / self.alpha if self.alpha > 0 else float("inf")

    def with_omega(self, omega) -> "DisorderRealization":
        """Copy with a modified potential (the seed no longer describes it)."""
        return DisorderRealization(np.asarray(omega, dtype=float), self.alpha, self.spec, None)

    def to_json(self) -> str:
        if self.seed is None:
            raise ValueError("only seeded realizations can be serialized")
        return json.dumps({"seed": self.seed, "alpha": self.alpha, "rho0": self.spec.rho0,
                           "family": self.spec.family, "n": self.n}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DisorderRealization":
        rec = json.loads(text)
        return sample_disorder(rec["n"], DisorderSpec(rec["rho0"], rec["family"]),
                               rec["alpha"], rec["seed"])


def sample_disorder(n: int, spec: DisorderSpec, alpha: float, seed: int) -> DisorderRealization:
    return DisorderRealization(spec.sample(make_rng(seed), n), alpha, spec, seed)


def disorder_stream(n: int, spec: DisorderSpec, alpha: float, base_seed: int, start: int = 0):
    """Realizations start, start+1, ... seeded by ``mix_seed(base_seed, i)``."""
    i = start
    while True:
        yield sample_disorder(n, spec, alpha, mix_seed(base_seed, i))
        i += 1


@dataclass(frozen=True)
class Operator:
    """Real symmetric matrix indexed by ``support`` (ascending vertex ids)."""

    matrix: np.ndarray
    support: VertexSet
    graph: Graph = field(repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def index(self) -> dict[int, int]:
        try:
            return self.__dict__["_index"]
        except KeyError:
            idx = self.support.index()
            object.__setattr__(self, "_index", idx)
            return idx

    def apply(self, phi: np.ndarray) -> np.ndarray:
        return self.matrix @ phi

    def norm_estimate(self) -> float:
        """Max absolute row sum; an upper bound on the spectral norm."""
        try:
            return self.__dict__["_norm"]
        except KeyError:
            val = float(np.abs(self.matrix).sum(axis=1).max()) if self.dim else 0.0
            object.__setattr__(self, "_norm", val)
            return val


def spectral_enclosure(g: Graph, w: DisorderRealization) -> tuple[float, float]:
    half = g.max_degree + w.alpha * w.spec.rho0
    return -half, half


def operator_from_potential(g: Graph, potential, support: VertexSet | None = None) -> Operator:
    """Operator with -1 on edges inside ``support`` and ``potential[x]`` on the diagonal.

    ``potential`` is indexed by global vertex id.
    """
    potential = np.asarray(potential, dtype=float)
    if potential.shape != (g.n,):
        raise ValueError(f"potential has length {potential.size}, graph has {g.n} vertices")
    if support is None:
        support = VertexSet.whole(g)
    if len(support) == 0:
        raise ValueError("empty support")
    members = support.members
    m = len(members)
    mat = np.zeros((m, m))
    if m == g.n:
        for x, nbrs in enumerate(g.adjacency):
            mat[x, list(nbrs)] = -1.0
    else:
        idx = support.index()
        for i, x in enumerate(members):
            for y in g.adjacency[x]:
                j = idx.get(y)
                if j is not None:
                    mat[i, j] = -1.0
    mat[np.diag_indices(m)] = potential[list(members)]
    return Operator(mat, support, g)


def assemble(g: Graph, w: DisorderRealization) -> Operator:
    if w.n != g.n:
        raise ValueError(f"disorder has {w.n} sites, graph has {g.n} vertices")
    return operator_from_potential(g, w.potential)


def restrict_neumann(g: Graph, w: DisorderRealization, support: VertexSet) -> Operator:
    """Restriction to ``support``: only edges with both ends inside survive."""
    if w.n != g.n:
        raise ValueError(f"disorder has {w.n} sites, graph has {g.n} vertices")
    return operator_from_potential(g, w.potential, support)


def submatrix(h: Operator, support: VertexSet) -> Operator:
    """Neumann restriction of an already assembled operator (same entries, fewer rows)."""
    idx = h.index
    sel = [idx[v] for v in support.members]
    return Operator(h.matrix[np.ix_(sel, sel)], support, h.graph)
