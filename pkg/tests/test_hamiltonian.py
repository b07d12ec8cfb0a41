import json

import numpy as np
import pytest

from poissonlab.graph import VertexSet, ball, complete_graph, cycle_graph, path_graph, random_regular
from poissonlab.hamiltonian import (DisorderRealization, DisorderSpec, assemble, disorder_stream,
                                    operator_from_potential, restrict_neumann, sample_disorder,
                                    spectral_enclosure, submatrix)
from poissonlab.seeding import mix_seed


def _zero(g, alpha=1.0):
    return DisorderRealization(np.zeros(g.n), alpha, DisorderSpec())


def test_uniform_samples_in_support():
    w = sample_disorder(10_000, DisorderSpec(), 2.0, 1)
    assert np.all(np.abs(w.omega) <= 1.0)
    assert DisorderSpec().density_sup == 0.5
    assert w.effective_density_sup == 0.25


def test_uniform_mean_clt():
    w = sample_disorder(10**6, DisorderSpec(), 1.0, 2)
    assert abs(w.omega.mean()) <= 3 / (np.sqrt(3) * 1e3)


def test_same_seed_same_vector():
    a = sample_disorder(50, DisorderSpec(2.0), 1.0, 99)
    b = sample_disorder(50, DisorderSpec(2.0), 1.0, 99)
    np.testing.assert_array_equal(a.omega, b.omega)


@pytest.mark.parametrize("family,sup", [("uniform", 0.25), ("triangular", 0.5)])
def test_density_sup_scales_with_rho0(family, sup):
    assert DisorderSpec(2.0, family).density_sup == sup


def test_bad_disorder_specs():
    with pytest.raises(ValueError):
        DisorderSpec(family="gaussian")
    with pytest.raises(ValueError):
        DisorderSpec(rho0=0)
    with pytest.raises(ValueError):
        DisorderRealization(np.array([2.0]), 1.0, DisorderSpec())
    with pytest.raises(ValueError):
        DisorderRealization(np.array([0.0]), -1.0, DisorderSpec())


def test_json_roundtrip():
    w = sample_disorder(20, DisorderSpec(1.5, "triangular"), 3.0, 7)
    v = DisorderRealization.from_json(w.to_json())
    np.testing.assert_array_equal(v.omega, w.omega)
    assert json.loads(w.to_json())["seed"] == 7
    with pytest.raises(ValueError):
        w.with_omega(w.omega).to_json()


def test_stream_uses_mixed_seeds():
    stream = disorder_stream(5, DisorderSpec(), 1.0, 42, start=3)
    first = next(stream)
    assert first.seed == mix_seed(42, 3)
    assert next(stream).seed == mix_seed(42, 4)


def test_triangle_spectrum():
    g = complete_graph(3)
    vals = np.linalg.eigvalsh(assemble(g, _zero(g)).matrix)
    np.testing.assert_allclose(vals, [-2, 1, 1], atol=1e-14)


def test_single_edge_spectrum():
    g = path_graph(2)
    vals = np.linalg.eigvalsh(assemble(g, _zero(g)).matrix)
    np.testing.assert_allclose(vals, [-1, 1], atol=1e-14)


def test_alpha_zero_has_zero_diagonal():
    g = random_regular(20, 3, 0)
    h = assemble(g, sample_disorder(20, DisorderSpec(), 0.0, 1))
    assert np.all(np.diag(h.matrix) == 0)
    assert np.array_equal(h.matrix, h.matrix.T)


def test_restriction_to_whole_graph_is_identity():
    g = random_regular(30, 3, 1)
    w = sample_disorder(30, DisorderSpec(), 5.0, 3)
    np.testing.assert_array_equal(restrict_neumann(g, w, VertexSet.whole(g)).matrix,
                                  assemble(g, w).matrix)


def test_single_vertex_restriction():
    g = random_regular(30, 3, 1)
    w = sample_disorder(30, DisorderSpec(), 5.0, 3)
    h = restrict_neumann(g, w, VertexSet.of(g, [4]))
    assert h.matrix.shape == (1, 1) and h.matrix[0, 0] == 5.0 * w.omega[4]


def test_six_cycle_ball_is_path():
    g = cycle_graph(6)
    h = restrict_neumann(g, _zero(g), ball(g, 0, 1))
    np.testing.assert_allclose(np.linalg.eigvalsh(h.matrix), [-np.sqrt(2), 0, np.sqrt(2)],
                               atol=1e-14)


def test_restriction_locality_and_measurability():
    g = random_regular(60, 3, 2)
    w = sample_disorder(60, DisorderSpec(), 3.0, 4)
    b = ball(g, 0, 2)
    hb = restrict_neumann(g, w, b)
    h = assemble(g, w)
    phi = np.zeros(g.n)
    phi[list(b)] = np.random.default_rng(0).normal(size=len(b))
    interior = ball(g, 0, 1)
    full = h.apply(phi)
    local = hb.apply(phi[list(b)])
    for y in interior:
        assert local[hb.index[y]] == pytest.approx(full[y], abs=1e-14)
    # changing omega outside b leaves the restriction unchanged
    outside = next(v for v in range(g.n) if v not in b)
    om = w.omega.copy()
    om[outside] = -om[outside]
    np.testing.assert_array_equal(restrict_neumann(g, w.with_omega(om), b).matrix, hb.matrix)
    np.testing.assert_array_equal(submatrix(h, b).matrix, hb.matrix)


@pytest.mark.parametrize("alpha", [0.5, 5.0, 15.0])
def test_spectral_enclosure(alpha):
    g = random_regular(100, 3, 5)
    w = sample_disorder(100, DisorderSpec(), alpha, 6)
    lo, hi = spectral_enclosure(g, w)
    vals = np.linalg.eigvalsh(assemble(g, w).matrix)
    assert lo - 1e-9 <= vals.min() and vals.max() <= hi + 1e-9
    assert assemble(g, w).norm_estimate() <= hi


def test_potential_length_checked():
    g = path_graph(4)
    with pytest.raises(ValueError):
        operator_from_potential(g, np.zeros(3))
    with pytest.raises(ValueError):
        assemble(g, sample_disorder(5, DisorderSpec(), 1.0, 0))
