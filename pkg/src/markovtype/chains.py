"""Reversible Markov chains on finite state spaces and Markov-type ratios."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.spatial.distance import cdist

from . import seeding
from .errors import InvariantViolation
from .spaces import FiniteMetricSpace, WeightedGraph

CHAIN_TOL = 1e-12
EXACT_CAP = 2048
# trajectories are simulated in blocks, each with its own derived stream
TRAJECTORY_BLOCK = 1024


@dataclass(frozen=True, eq=False)
class ReversibleChain:
    """Row-stochastic kernel ``P`` with stationary, reversing measure ``pi``."""

    P: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        pi = np.array(self.pi, dtype=float)
        n = P.shape[0]
        if P.ndim != 2 or P.shape != (n, n) or pi.shape != (n,):
            raise ValueError(f"kernel shape {P.shape} and measure shape {pi.shape} disagree")
        if np.any(P < 0):
            raise InvariantViolation("chain: nonnegative kernel", f"P has a negative entry at {tuple(np.argwhere(P < 0)[0])}")
        rows = np.abs(P.sum(axis=1) - 1)
        if rows.max() > CHAIN_TOL:
            raise InvariantViolation("chain: rows sum to 1", f"row {int(rows.argmax())} sums to {P[rows.argmax()].sum()!r}")
        if np.any(pi <= 0) or abs(pi.sum() - 1) > CHAIN_TOL:
            raise InvariantViolation("chain: stationary measure", "pi must be positive and sum to 1")
        flow = pi[:, None] * P
        gap = np.abs(flow - flow.T)
        if gap.max() > CHAIN_TOL:
            i, j = np.unravel_index(gap.argmax(), gap.shape)
            raise InvariantViolation("chain: detailed balance", f"pi_{i} P_{i}{j} - pi_{j} P_{j}{i} = {flow[i, j] - flow[j, i]:.3e}")
        P.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "pi", pi)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def sparse(self) -> csr_matrix:
        return csr_matrix(self.P)

    def step_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded successor lists with cumulative probabilities (inf padding)."""
        nz = self.P > 0
        k = int(nz.sum(axis=1).max())
        order = np.argsort(~nz, axis=1, kind="stable")[:, :k]
        valid = np.take_along_axis(nz, order, axis=1)
        probs = np.where(valid, np.take_along_axis(self.P, order, axis=1), 0.0)
        cum = np.cumsum(probs, axis=1)
        last = valid.sum(axis=1) - 1
        cum[np.arange(self.n), last] = np.inf
        cum[~valid] = np.inf
        return order, cum


def from_conductances(W) -> ReversibleChain:
    """Chain with ``P_ij`` proportional to the symmetric weights ``W_ij``."""
    W = np.asarray(W.toarray() if hasattr(W, "toarray") else W, dtype=float)
    if np.any(W != W.T) or np.any(W < 0):
        raise ValueError("conductances must be symmetric and nonnegative")
    deg = W.sum(axis=1)
    if np.any(deg <= 0):
        raise ValueError(f"state {int(np.argmin(deg))} has no outgoing conductance")
    return ReversibleChain(W / deg[:, None], deg / deg.sum())


def random_walk(graph: WeightedGraph, laziness: float = 0.0) -> ReversibleChain:
    """Weighted random walk holding with probability ``laziness`` each step."""
    if not 0 <= laziness < 1:
        raise ValueError(f"laziness must lie in [0, 1), got {laziness}")
    if not graph.is_connected():
        raise ValueError("random walk needs a connected graph")
    if graph.n == 1:
        return ReversibleChain(np.ones((1, 1)), np.ones(1))
    W = graph.conductances().toarray()
    deg = W.sum(axis=1)
    P = (1 - laziness) * W / deg[:, None] + laziness * np.eye(graph.n)
    return ReversibleChain(P, deg / deg.sum())


def lazy(chain: ReversibleChain, laziness: float = 0.5) -> ReversibleChain:
    return ReversibleChain(laziness * np.eye(chain.n) + (1 - laziness) * chain.P, chain.pi)


def time_reversal(chain: ReversibleChain) -> np.ndarray:
    """Kernel of the reversed chain, ``pi_j P_ji / pi_i`` (equals ``P`` here)."""
    return chain.P.T * chain.pi[None, :] / chain.pi[:, None]


def stationary_from_kernel(P: np.ndarray) -> np.ndarray:
    """Reversing measure read off detailed balance along a BFS tree.

    Raises ``ValueError`` when the kernel is not irreducible.
    """
    n = P.shape[0]
    w = np.zeros(n)
    w[0] = 1.0
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(P[i] > 0):
            if not seen[j]:
                if P[j, i] <= 0:
                    raise InvariantViolation("chain: detailed balance", f"P_{i}{j} > 0 but P_{j}{i} = 0")
                w[j] = w[i] * P[i, j] / P[j, i]
                seen[j] = True
                queue.append(j)
    if not seen.all():
        raise ValueError(f"kernel is reducible: state {int(np.argmin(seen))} unreachable from 0")
    return w / w.sum()


def chain_from_json(obj: dict) -> ReversibleChain:
    """Parse ``{n, rows: [[[j, p_ij], ...], ...]}`` (optional ``pi``)."""
    unknown = set(obj) - {"n", "rows", "pi"}
    if unknown:
        raise ValueError(f"unknown keys in chain JSON: {sorted(unknown)}")
    n = int(obj["n"])
    rows = obj["rows"]
    if len(rows) != n:
        raise ValueError(f"chain JSON: {len(rows)} rows for n={n}")
    P = np.zeros((n, n))
    for i, row in enumerate(rows):
        for j, pij in row:
            if not 0 <= int(j) < n:
                raise ValueError(f"chain JSON: row {i} refers to state {j}")
            P[i, int(j)] += float(pij)
    pi = np.asarray(obj["pi"], dtype=float) if "pi" in obj else stationary_from_kernel(P)
    return ReversibleChain(P, pi)


def chain_to_json(chain: ReversibleChain) -> dict:
    rows = [[[int(j), float(chain.P[i, j])] for j in np.flatnonzero(chain.P[i])] for i in range(chain.n)]
    return {"n": chain.n, "rows": rows, "pi": chain.pi.tolist()}


def load_chain(path: str | Path) -> ReversibleChain:
    return chain_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# simulation


def sample_trajectories(chain: ReversibleChain, t: int, trials: int, seed: int, start=None) -> np.ndarray:
    """``trials`` stationary trajectories ``Z_0..Z_t`` as a (trials, t+1) array.

    ``Z_0`` is drawn from ``pi`` by inverse CDF over the state order (or fixed
    to ``start``).  Block ``b`` of ``TRAJECTORY_BLOCK`` trials uses the stream
    ``rng(seed, "trajectory", b)``, so a prefix of trials does not depend on
    how many trials are requested in total.
    """
    succ, cum = chain.step_table()
    cdf = np.cumsum(chain.pi)
    cdf[-1] = np.inf
    out = np.empty((trials, t + 1), dtype=np.int64)
    for b, lo in enumerate(range(0, trials, TRAJECTORY_BLOCK)):
        size = min(TRAJECTORY_BLOCK, trials - lo)
        g = seeding.rng(seed, "trajectory", b)
        u = g.random((size, t + 1))
        z = np.searchsorted(cdf, u[:, 0], side="right") if start is None else np.full(size, start)
        block = out[lo : lo + size]
        block[:, 0] = z
        for s in range(1, t + 1):
            k = (cum[z] <= u[:, s, None]).sum(axis=1)
            z = succ[z, k]
            block[:, s] = z
    return out


def check_trajectories(chain: ReversibleChain, traj: np.ndarray) -> None:
    probs = chain.P[traj[:, :-1], traj[:, 1:]]
    if np.any(probs <= 0):
        k, s = np.argwhere(probs <= 0)[0]
        raise ValueError(f"impossible transition at step {s + 1} of trajectory {k}: {traj[k, s]} -> {traj[k, s + 1]}")


# ---------------------------------------------------------------------------
# displacement moments


def state_distances(space: FiniteMetricSpace | None = None, f=None) -> np.ndarray:
    """Distance matrix ``d(f(i), f(j))`` between chain states.

    ``f`` is an index array into ``space``, a coordinate array (Euclidean
    distances, ``space`` ignored), or ``None`` for the identity on ``space``.
    """
    if f is None:
        return np.asarray(space.dist)
    f = np.asarray(f)
    if f.dtype.kind in "iu":
        return space.dist[np.ix_(f, f)]
    coords = f.reshape(f.shape[0], -1).astype(float)
    return cdist(coords, coords)


def one_step_moment(chain: ReversibleChain, D: np.ndarray, p: float) -> float:
    """``E d(f(Z_0), f(Z_1))^p`` under stationarity."""
    return float(np.sum(chain.pi[:, None] * chain.P * D**p))


def displacement_moments_exact(chain: ReversibleChain, D: np.ndarray, p: float, t_list, exact_cap: int = EXACT_CAP, kernel=None) -> dict[int, float]:
    """``E d(f(Z_0), f(Z_t))^p`` for each ``t`` via repeated sparse products.

    Rows of ``P^t`` are advanced one sparse product per step; ``kernel``
    substitutes another transition matrix with the same ``pi`` (used to
    compare against the time reversal).
    """
    if chain.n > exact_cap:
        raise ValueError(f"{chain.n} states exceeds the exact cap {exact_cap}; use the Monte Carlo method")
    ts = sorted(set(int(t) for t in t_list))
    if ts and ts[0] < 0:
        raise ValueError("times must be non-negative")
    Dp = D**p
    PT = csr_matrix(chain.P if kernel is None else kernel).T.tocsr()
    R = np.eye(chain.n)
    out, cur = {}, 0
    for t in ts:
        while cur < t:
            R = (PT @ R.T).T
            cur += 1
        out[t] = float(chain.pi @ np.sum(R * Dp, axis=1))
    return out


def displacement_moment_exact(chain, space, f, p: float, t: int, exact_cap: int = EXACT_CAP) -> float:
    return displacement_moments_exact(chain, state_distances(space, f), p, [t], exact_cap)[t]


@dataclass(frozen=True)
class TypeRatioRow:
    t: int
    ratio: float
    stderr: float
    method: str


@dataclass(frozen=True)
class TypeRatioReport:
    p: float
    rows: tuple[TypeRatioRow, ...]
    one_step: float

    @property
    def max_ratio(self) -> float:
        """Lower-bound estimate of M_p^p for this (chain, map) pair."""
        return max(r.ratio for r in self.rows)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "ratio", "stderr", "method"])
        for r in self.rows:
            w.writerow([r.t, repr(r.ratio), repr(r.stderr), r.method])
        return buf.getvalue()


def markov_type_ratio(chain, space, f, p: float, t_list, method: str = "exact", trials: int = 10_000, seed: int = 0, exact_cap: int = EXACT_CAP) -> TypeRatioReport:
    """``E d(f(Z_0), f(Z_t))^p / (t E d(f(Z_0), f(Z_1))^p)`` for each t.

    ``method`` is ``"exact"`` (matrix powers) or ``"montecarlo"`` (stationary
    trajectories; the denominator is always exact).
    """
    ts = [int(t) for t in t_list]
    if not ts or min(ts) < 1:
        raise ValueError("t_list must be non-empty with every t >= 1")
    D = state_distances(space, f)
    denom = one_step_moment(chain, D, p)
    if denom <= 0:
        raise ValueError("degenerate chain: f is constant along every transition")
    rows = []
    if method == "exact":
        num = displacement_moments_exact(chain, D, p, ts, exact_cap)
        rows = [TypeRatioRow(t, num[t] / (t * denom), 0.0, "exact") for t in ts]
    elif method == "montecarlo":
        traj = sample_trajectories(chain, max(ts), trials, seed)
        label = f"montecarlo({trials})"
        for t in ts:
            vals = D[traj[:, 0], traj[:, t]] ** p
            se = vals.std(ddof=1) / math.sqrt(trials) if trials > 1 else math.inf
            rows.append(TypeRatioRow(t, float(vals.mean() / (t * denom)), float(se / (t * denom)), label))
    else:
        raise ValueError(f"unknown method {method!r}")
    return TypeRatioReport(p, tuple(rows), denom)


# ---------------------------------------------------------------------------
# Enflo type


@dataclass(frozen=True)
class EnfloResult:
    n: int
    p: float
    diagonal_sum: float
    edge_sum: float

    @property
    def ratio(self) -> float:
        return self.diagonal_sum / self.edge_sum

    @property
    def E_emp(self) -> float:
        return self.ratio ** (1 / self.p)


def enflo_ratio(f, p: float, space: FiniteMetricSpace | None = None, max_dim: int = 14) -> EnfloResult:
    """Diagonal-to-edge ratio of ``f`` on the hypercube {0,1}^n.

    Vertex ``x`` of the cube is the integer with the same bits.  ``f`` is an
    index array into ``space`` or a coordinate array (Euclidean).  Sums run
    over ordered pairs: ``2**n`` diagonals and ``n 2**n`` edges.
    """
    f = np.asarray(f)
    N = f.shape[0]
    if N < 2 or N & (N - 1):
        raise ValueError(f"domain of size {N} is not a hypercube")
    n = N.bit_length() - 1
    if n > max_dim:
        raise ValueError(f"cube dimension {n} above the enumeration limit {max_dim}")
    x = np.arange(N)
    if f.dtype.kind in "iu":
        if space is None:
            raise ValueError("index-valued f needs a target space")
        dist = lambda a, b: space.dist[f[a], f[b]]  # noqa: E731
    else:
        coords = f.reshape(N, -1).astype(float)
        dist = lambda a, b: np.linalg.norm(coords[a] - coords[b], axis=1)  # noqa: E731
    diag = float(np.sum(dist(x, x ^ (N - 1)) ** p))
    edges = float(sum(np.sum(dist(x, x ^ (1 << i)) ** p) for i in range(n)))
    if edges == 0:
        raise ValueError("degenerate map: f is constant on every cube edge")
    return EnfloResult(n, p, diag, edges)


def cube_coordinates(n: int) -> np.ndarray:
    """Standard embedding of {0,1}^n into R^n (row x has the bits of x)."""
    x = np.arange(1 << n)
    return ((x[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
