import numpy as np
import pytest

from dualssc.knn_graph import build_knn_graph, cosine_similarity, normalize_adjacency, write_edge_list
from dualssc.synthetic import SubspaceSpec, generate


def test_cosine_orthogonal_rows():
    sim = cosine_similarity(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert sim[0, 1] == pytest.approx(0.0, abs=1e-15)


def test_cosine_scale_invariant_value():
    sim = cosine_similarity(np.array([[1.0, 0.0], [2.0, 0.0]]))
    assert sim[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_cosine_analytic_45_degrees():
    sim = cosine_similarity(np.array([[1.0, 0.0], [1.0, 1.0]]))
    assert sim[0, 1] == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-12)


def test_cosine_unit_diagonal_and_symmetry():
    rng = np.random.default_rng(2)
    sim = cosine_similarity(rng.standard_normal((8, 5)))
    assert np.array_equal(sim, sim.T)
    assert np.all(np.diagonal(sim) == 1.0)


def test_cosine_zero_row_rejected():
    x = np.ones((3, 2))
    x[1] = 0.0
    with pytest.raises(ValueError, match="zero-norm feature row at index 1"):
        cosine_similarity(x)


def test_knn_triangle_k1():
    x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    graph = build_knn_graph(x, 1)
    expected = np.zeros((3, 3))
    expected[0, 2] = expected[2, 0] = 1.0
    expected[1, 2] = expected[2, 1] = 1.0
    assert np.array_equal(graph.adjacency, expected)


def test_two_identical_points():
    graph = build_knn_graph(np.array([[1.0, 2.0], [1.0, 2.0]]), 1)
    assert np.array_equal(graph.self_loop_adjacency, np.ones((2, 2)))
    assert np.array_equal(graph.norm_propagation, np.full((2, 2), 0.5))


def test_adjacency_exactly_symmetric():
    rng = np.random.default_rng(4)
    graph = build_knn_graph(rng.standard_normal((30, 6)), 4)
    a = graph.adjacency
    assert np.array_equal(a, a.T)
    assert np.isin(a, (0.0, 1.0)).all()
    assert not np.diagonal(a).any()


def test_scale_invariance_of_graph():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((25, 7))
    for c in (0.5, 3.7, 1000.0):
        assert np.array_equal(build_knn_graph(x, 5).adjacency, build_knn_graph(c * x, 5).adjacency)


def test_propagation_spectrum_bounded():
    # dense symmetric eigensolver is the oracle
    rng = np.random.default_rng(3)
    for n in (6, 20, 50):
        x = rng.standard_normal((n, 4))
        graph = build_knn_graph(x, min(5, n - 1))
        eigs = np.linalg.eigvalsh(graph.norm_propagation)
        assert eigs.min() >= -1.0 - 1e-9
        assert eigs.max() <= 1.0 + 1e-9


def test_propagation_positive_diagonal():
    rng = np.random.default_rng(8)
    graph = build_knn_graph(rng.standard_normal((15, 3)), 3)
    assert (np.diagonal(graph.norm_propagation) > 0.0).all()


def test_normalize_isolated_node():
    assert np.array_equal(normalize_adjacency(np.zeros((1, 1))), np.eye(1))


def test_normalize_two_cycle():
    p = normalize_adjacency(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.array_equal(p, np.full((2, 2), 0.5))


def test_normalize_random_spectrum_seed3():
    rng = np.random.default_rng(3)
    upper = np.triu(rng.integers(0, 2, size=(6, 6)).astype(float), k=1)
    adjacency = upper + upper.T
    p = normalize_adjacency(adjacency)
    assert np.abs(np.linalg.eigvalsh(p)).max() <= 1.0 + 1e-12


def test_normalize_rejects_asymmetric():
    bad = np.zeros((3, 3))
    bad[0, 1] = 1.0
    with pytest.raises(ValueError, match="symmetric"):
        normalize_adjacency(bad)


def test_normalize_rejects_nonbinary():
    with pytest.raises(ValueError, match="0 or 1"):
        normalize_adjacency(np.array([[0.0, 0.5], [0.5, 0.0]]))


def test_normalize_rejects_nonzero_diagonal():
    with pytest.raises(ValueError, match="diagonal"):
        normalize_adjacency(np.eye(3))


def test_k_out_of_range():
    x = np.eye(4)
    with pytest.raises(ValueError, match="1 <= k < n"):
        build_knn_graph(x, 4)
    with pytest.raises(ValueError, match="1 <= k < n"):
        build_knn_graph(x, 0)


def test_subspace_edges_mostly_intra():
    # layer features of a 3-cluster bundle are three well-separated subspaces;
    # count edges against the generator's labels
    spec = SubspaceSpec(
        ambient_dim=50, subspace_dim=4, clusters=3, per_cluster=100,
        noise_sigma=0.0, structure_corruption=0.0, seed=1,
    )
    bundle = generate(spec)
    labels = bundle.labels
    graph = build_knn_graph(bundle.layer_features[0], 10)
    rows, cols = np.nonzero(np.triu(graph.adjacency, k=1))
    intra = (labels[rows] == labels[cols]).mean()
    assert intra >= 0.95


def test_edge_list_export(tmp_path):
    x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    graph = build_knn_graph(x, 1)
    out = tmp_path / "edges.txt"
    write_edge_list(graph.adjacency, out)
    assert out.read_text() == "0 2\n1 2\n"
