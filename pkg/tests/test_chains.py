import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_reversible_chain
from markovtype import chains, spaces
from markovtype.errors import InvariantViolation

FLIP = chains.ReversibleChain(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.5, 0.5]))
PAIR = spaces.FiniteMetricSpace(np.array([[0.0, 1.0], [1.0, 0.0]]), "pair")


def test_flip_chain_ratios():
    rep = chains.markov_type_ratio(FLIP, PAIR, None, 2, range(1, 6))
    assert [r.ratio for r in rep.rows] == pytest.approx([1, 0, 1 / 3, 0, 1 / 5])


def test_lazy_flip_one_step():
    rep = chains.markov_type_ratio(chains.lazy(FLIP), PAIR, None, 2, [1, 2])
    assert rep.rows[0].ratio == pytest.approx(1.0)
    # two lazy steps: endpoints differ with probability 1/2, one step differs w.p. 1/2
    assert rep.rows[1].ratio == pytest.approx(0.5)


@pytest.mark.parametrize(
    "P, pi, invariant",
    [
        ([[0.5, 0.6], [0.5, 0.5]], [0.5, 0.5], "rows"),
        ([[1.2, -0.2], [0.5, 0.5]], [0.5, 0.5], "nonnegative"),
        ([[0.0, 1.0], [1.0, 0.0]], [0.3, 0.7], "detailed balance"),
        ([[0.5, 0.5], [0.5, 0.5]], [1.0, 0.0], "stationary"),
    ],
)
def test_chain_validation(P, pi, invariant):
    with pytest.raises(InvariantViolation, match=invariant):
        chains.ReversibleChain(np.array(P), np.array(pi))


def test_stationary_from_kernel_recovers_pi():
    rng = np.random.default_rng(2)
    ch = random_reversible_chain(rng, 7)
    assert np.allclose(chains.stationary_from_kernel(ch.P), ch.pi)
    assert np.allclose(chains.time_reversal(ch), ch.P)


def test_random_walk_on_grid(grid8):
    ch = chains.random_walk(grid8.graph, 0.5)
    assert np.allclose(ch.pi @ ch.P, ch.pi)
    assert np.allclose(np.diag(ch.P), 0.5)


def test_chain_json_roundtrip(tmp_path):
    ch = random_reversible_chain(np.random.default_rng(0), 5, 0.3)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(chains.chain_to_json(ch)))
    back = chains.load_chain(path)
    assert np.allclose(back.P, ch.P) and np.allclose(back.pi, ch.pi)
    with pytest.raises(ValueError, match="unknown"):
        chains.chain_from_json(chains.chain_to_json(ch) | {"bogus": 1})


def test_trajectories_follow_kernel_and_are_seeded():
    ch = random_reversible_chain(np.random.default_rng(1), 6, 0.2)
    a = chains.sample_trajectories(ch, 10, 3000, 4)
    b = chains.sample_trajectories(ch, 10, 3000, 4)
    assert np.array_equal(a, b)
    chains.check_trajectories(ch, a)
    # a prefix of trials does not depend on the total requested
    assert np.array_equal(a[:100], chains.sample_trajectories(ch, 10, 100, 4))
    # stationarity of the starting state
    freq = np.bincount(a[:, 0], minlength=6) / 3000
    assert np.all(np.abs(freq - ch.pi) < 5 * np.sqrt(ch.pi * (1 - ch.pi) / 3000))


def test_check_trajectories_names_step():
    with pytest.raises(ValueError, match="step 2"):
        chains.check_trajectories(FLIP, np.array([[0, 1, 1]]))


def test_exact_matches_montecarlo(cube4):
    ch = chains.random_walk(cube4.graph, 0.5)
    ex = chains.markov_type_ratio(ch, cube4, None, 2, [1, 4, 8])
    mc = chains.markov_type_ratio(ch, cube4, None, 2, [1, 4, 8], "montecarlo", 20000, 1)
    for e, m in zip(ex.rows, mc.rows):
        assert abs(e.ratio - m.ratio) < 5 * m.stderr + 1e-12


def test_exact_cap(grid8):
    ch = chains.random_walk(grid8.graph)
    with pytest.raises(ValueError, match="exact cap"):
        chains.markov_type_ratio(ch, grid8, None, 2, [1], exact_cap=10)


@given(st.integers(0, 10**6), st.integers(2, 9))
def test_euclidean_type_two_constant_one(seed, n):
    rng = np.random.default_rng(seed)
    ch = random_reversible_chain(rng, n, 0.5)
    pts = rng.normal(size=(n, 3))
    rep = chains.markov_type_ratio(ch, None, pts, 2, range(1, 17))
    assert rep.max_ratio <= 1 + 1e-9


def test_csv_shape(cube4):
    ch = chains.random_walk(cube4.graph, 0.5)
    text = chains.markov_type_ratio(ch, cube4, None, 2, range(1, 17)).csv()
    lines = text.splitlines()
    assert lines[0] == "t,ratio,stderr,method" and len(lines) == 17
    assert all(math.isfinite(float(r.split(",")[1])) for r in lines[1:])


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_enflo_hamming_and_euclidean(n):
    cube = spaces.generate("hypercube", (n,))
    assert chains.enflo_ratio(np.arange(cube.n), 2, cube).ratio == n
    assert chains.enflo_ratio(chains.cube_coordinates(n), 2).ratio == pytest.approx(1.0, abs=1e-12)


def test_enflo_rejects_non_cube():
    with pytest.raises(ValueError):
        chains.enflo_ratio(np.zeros((6, 2)), 2)


def test_state_distances_forms(cube4):
    idx = np.array([0, 3, 5])
    assert np.array_equal(chains.state_distances(cube4, idx), cube4.dist[np.ix_(idx, idx)])
    pts = np.array([[0.0], [2.0]])
    assert np.array_equal(chains.state_distances(None, pts), [[0, 2], [2, 0]])
