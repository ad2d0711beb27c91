import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from markovtype import spaces
from markovtype.errors import InvariantViolation


@pytest.mark.parametrize(
    "kind, params, n, diam",
    [
        ("hypercube", (3,), 8, 3.0),
        ("grid", (8, 8), 64, 14.0),
        ("cycle", (7,), 7, 3.0),
        ("diamond", (0,), 2, 1.0),
        ("diamond", (2,), 12, 1.0),
        ("laakso", (1,), 6, 1.0),
        ("random_tree", (20,), 20, None),
    ],
)
def test_generators_sizes(kind, params, n, diam):
    X = spaces.generate(kind, params, seed=3)
    assert X.n == n
    if diam is not None:
        assert X.diam == pytest.approx(diam)


def test_hypercube_is_hamming():
    X = spaces.generate("hypercube", (4,))
    for a in range(16):
        for b in range(16):
            assert X.dist[a, b] == bin(a ^ b).count("1")


def test_grid_is_l1():
    X = spaces.generate("grid", (5, 3))
    for i in range(X.n):
        xi, yi = map(int, X.labels[i].split(","))
        for j in range(X.n):
            xj, yj = map(int, X.labels[j].split(","))
            assert X.dist[i, j] == abs(xi - xj) + abs(yi - yj)


def test_diamond_min_distance_and_counts():
    X = spaces.generate("diamond", (3,))
    # 4^k edges and (2 * 4^k + 4) / 3 vertices
    assert X.n == (2 * 4**3 + 4) // 3
    assert X.min_distance == pytest.approx(1 / 8)


def test_size_cap():
    with pytest.raises(ValueError, match="cap"):
        spaces.generate("hypercube", (13,))


@pytest.mark.parametrize("bad", [("nope", (1,)), ("grid", (3,)), ("cycle", (1,)), ("grid", (0, 3))])
def test_generator_rejects(bad):
    with pytest.raises(ValueError):
        spaces.generate(*bad)


def test_random_tree_is_seeded():
    a = spaces.generate("random_tree", (30,), seed=5)
    b = spaces.generate("random_tree", (30,), seed=5)
    c = spaces.generate("random_tree", (30,), seed=6)
    assert np.array_equal(a.dist, b.dist)
    assert not np.array_equal(a.dist, c.dist)
    assert len(a.graph.edges) == 29


def test_check_metric_names_violation():
    d = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float)
    with pytest.raises(InvariantViolation) as info:
        spaces.check_metric(d)
    assert "triangle" in info.value.invariant


@pytest.mark.parametrize(
    "d",
    [
        np.array([[0, 1], [2, 0]], dtype=float),
        np.array([[1, 1], [1, 0]], dtype=float),
        np.array([[0, 0], [0, 0]], dtype=float),
        np.array([[0, -1], [-1, 0]], dtype=float),
    ],
)
def test_check_metric_rejects(d):
    with pytest.raises(InvariantViolation):
        spaces.check_metric(d)


def test_disconnected_graph_rejected():
    g = spaces.WeightedGraph.from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
    with pytest.raises(ValueError, match="disconnected|unreachable|connected"):
        spaces.shortest_path_metric(g)


@given(st.integers(2, 12), st.integers(0, 10**6))
def test_random_points_give_metrics(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 2))
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    X = spaces.FiniteMetricSpace(d, "points")
    assert X.diam >= X.min_distance > 0


@given(st.floats(0.05, 0.95))
def test_snowflake_is_metric(eps):
    X = spaces.generate("grid", (4, 4))
    Y = spaces.snowflake(X, eps)
    assert np.allclose(Y.dist, X.dist ** (1 - eps))


def test_doubling_constants():
    assert spaces.doubling_constant(spaces.generate("cycle", (2,))).value == 2
    path = spaces.shortest_path_metric(spaces.WeightedGraph.from_edges(5, [(i, i + 1, 1.0) for i in range(4)]))
    res = spaces.doubling_constant(path)
    assert res.method == "exact"
    assert 2 <= res.value <= 3


def test_doubling_greedy_upper_bounds_exact():
    X = spaces.generate("grid", (4, 4))
    exact = spaces.doubling_constant(X, exact_max=16)
    greedy = spaces.doubling_constant(X, exact_max=0)
    assert greedy.method == "greedy-upper-bound"
    assert greedy.value >= exact.value


def test_graph_roundtrip(tmp_path):
    g = spaces.generate("laakso", (1,)).graph
    text = spaces.format_graph(g)
    path = tmp_path / "g.txt"
    path.write_text(text)
    X = spaces.load_space(path)
    assert np.allclose(X.dist, spaces.generate("laakso", (1,)).dist)


@pytest.mark.parametrize(
    "text, lineno",
    [("3 1\n0 1 x\n", 2), ("3 2\n0 1 1\n# c\n0 5 1\n", 4), ("3 1\n1 1 1\n", 2), ("foo\n", 1)],
)
def test_parse_errors_name_line(text, lineno):
    with pytest.raises(ValueError, match=f"g.txt:{lineno}"):
        spaces.parse_graph(text, "g.txt")


def test_space_json_roundtrip_and_unknown_keys():
    X = spaces.generate("cycle", (5,))
    obj = json.loads(json.dumps(spaces.space_to_json(X)))
    Y = spaces.space_from_json(obj)
    assert np.array_equal(X.dist, Y.dist)
    with pytest.raises(ValueError, match="unknown"):
        spaces.space_from_json(obj | {"extra": 1})


def test_parse_space_spec():
    assert spaces.parse_space_spec("grid:8,8") == ("grid", (8, 8))
    assert spaces.parse_space_spec("hypercube(4)") == ("hypercube", (4,))


def test_scaled_and_ball():
    X = spaces.generate("grid", (3, 3))
    Y = X.scaled(2.0)
    assert Y.diam == 2 * X.diam
    assert set(X.ball(4, 1.0).tolist()) == {1, 3, 4, 5, 7}
