"""Finite metric spaces: construction, validation, generators and I/O."""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from . import seeding
from .errors import InvariantViolation

TRIANGLE_TOL = 1e-9
NORMALIZED_DIAM = 1e6
MAX_POINTS = 4096
# above this size the triangle check uses a fixed sample of pivot points
FULL_TRIANGLE_CHECK = 512
PIVOT_SAMPLE = 256


@dataclass(frozen=True)
class WeightedGraph:
    n: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one vertex")
        for u, v, w in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (w > 0 and np.isfinite(w)):
                raise ValueError(f"edge ({u}, {v}) has non-positive weight {w}")

    @classmethod
    def from_edges(cls, n: int, edges) -> "WeightedGraph":
        return cls(n, tuple((int(u), int(v), float(w)) for u, v, w in edges))

    def conductances(self) -> csr_matrix:
        """Symmetric n x n matrix of edge weights (parallel edges summed)."""
        if not self.edges:
            return csr_matrix((self.n, self.n))
        e = np.array(self.edges, dtype=float)
        rows = np.concatenate([e[:, 0], e[:, 1]]).astype(int)
        cols = np.concatenate([e[:, 1], e[:, 0]]).astype(int)
        w = np.concatenate([e[:, 2], e[:, 2]])
        return csr_matrix((w, (rows, cols)), shape=(self.n, self.n))

    def lengths(self) -> csr_matrix:
        """Symmetric matrix of edge lengths, keeping the shortest of parallel edges."""
        best: dict[tuple[int, int], float] = {}
        for u, v, w in self.edges:
            key = (min(u, v), max(u, v))
            best[key] = min(w, best.get(key, np.inf))
        if not best:
            return csr_matrix((self.n, self.n))
        keys = np.array(list(best.keys()), dtype=int)
        w = np.array(list(best.values()))
        rows = np.concatenate([keys[:, 0], keys[:, 1]])
        cols = np.concatenate([keys[:, 1], keys[:, 0]])
        return csr_matrix((np.concatenate([w, w]), (rows, cols)), shape=(self.n, self.n))

    def is_connected(self) -> bool:
        ncomp, _ = connected_components(self.lengths(), directed=False)
        return ncomp == 1


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """A finite point set with its full distance matrix.

    The matrix is validated on construction (symmetry, zero diagonal,
    positivity off the diagonal, triangle inequality up to ``TRIANGLE_TOL``
    after rescaling the diameter to at most ``NORMALIZED_DIAM``) and then
    frozen.
    """

    dist: np.ndarray
    provenance: str = "raw"
    labels: tuple[str, ...] | None = None
    graph: WeightedGraph | None = field(default=None, repr=False)

    def __post_init__(self):
        d = np.array(self.dist, dtype=float, copy=True)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
            raise ValueError(f"distance matrix must be square and non-empty, got shape {d.shape}")
        if d.shape[0] > MAX_POINTS:
            raise ValueError(f"{d.shape[0]} points exceeds the cap of {MAX_POINTS}")
        if self.labels is not None and len(self.labels) != d.shape[0]:
            raise ValueError("labels length does not match the point count")
        check_metric(d)
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def diam(self) -> float:
        return float(self.dist.max())

    @property
    def min_distance(self) -> float:
        if self.n < 2:
            return 0.0
        return float(self.dist[~np.eye(self.n, dtype=bool)].min())

    @property
    def fingerprint(self) -> str:
        return hashlib.sha1(self.dist.tobytes()).hexdigest()[:12]

    def ball(self, x: int, r: float) -> np.ndarray:
        """Indices of the closed ball B(x, r)."""
        return np.flatnonzero(self.dist[x] <= r)

    def distinct_distances(self) -> np.ndarray:
        iu = np.triu_indices(self.n, 1)
        return np.unique(self.dist[iu])

    def scaled(self, c: float) -> "FiniteMetricSpace":
        if not c > 0:
            raise ValueError("scale factor must be positive")
        return FiniteMetricSpace(self.dist * c, f"{self.provenance}*{c:g}", self.labels, None)


def check_metric(d: np.ndarray, tol: float = TRIANGLE_TOL) -> None:
    """Raise ``InvariantViolation`` unless ``d`` is a metric up to ``tol``."""
    n = d.shape[0]
    if not np.all(np.isfinite(d)):
        raise InvariantViolation("metric: finite distances", "matrix has non-finite entries")
    if np.any(np.diag(d) != 0):
        i = int(np.flatnonzero(np.diag(d))[0])
        raise InvariantViolation("metric: zero diagonal", f"dist[{i}][{i}] = {d[i, i]}")
    asym = np.argwhere(d != d.T)
    if asym.size:
        i, j = asym[0]
        raise InvariantViolation("metric: symmetry", f"dist[{i}][{j}] != dist[{j}][{i}]")
    off = d + np.eye(n)
    if np.any(off <= 0):
        i, j = np.argwhere(off <= 0)[0]
        raise InvariantViolation("metric: positivity", f"dist[{i}][{j}] = {d[i, j]}")
    if n < 3:
        return
    scale = min(1.0, NORMALIZED_DIAM / d.max())
    dn = d * scale
    if n <= FULL_TRIANGLE_CHECK:
        pivots = range(n)
    else:
        pivots = np.sort(seeding.rng(0, "triangle-pivots", n).choice(n, PIVOT_SAMPLE, replace=False))
    for j in pivots:
        via = dn[:, j, None] + dn[None, j, :]
        bad = dn > via + tol
        if bad.any():
            i, k = np.argwhere(bad)[0]
            raise InvariantViolation(
                "metric: triangle inequality",
                f"d({i},{k}) = {d[i, k]} > d({i},{j}) + d({j},{k}) = {d[i, j] + d[j, k]}",
            )


def shortest_path_metric(g: WeightedGraph, provenance: str = "graph", labels=None) -> FiniteMetricSpace:
    """All-pairs shortest-path metric of a connected weighted graph."""
    if g.n == 1:
        return FiniteMetricSpace(np.zeros((1, 1)), provenance, labels, g)
    d = shortest_path(g.lengths(), method="D", directed=False)
    if not np.all(np.isfinite(d)):
        i, j = np.argwhere(~np.isfinite(d))[0]
        raise ValueError(f"graph is disconnected: no path between {i} and {j}")
    # Dijkstra can leave last-bit asymmetries
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return FiniteMetricSpace(d, provenance, labels, g)


# ---------------------------------------------------------------------------
# generators


def _hypercube_graph(n: int) -> WeightedGraph:
    edges = [(x, x ^ (1 << i), 1.0) for x in range(1 << n) for i in range(n) if x < x ^ (1 << i)]
    return WeightedGraph.from_edges(1 << n, edges)


def _grid_graph(w: int, h: int) -> WeightedGraph:
    idx = lambda x, y: y * w + x  # noqa: E731
    edges = []
    for y in range(h):
        for x in range(w):
            if x + 1 < w:
                edges.append((idx(x, y), idx(x + 1, y), 1.0))
            if y + 1 < h:
                edges.append((idx(x, y), idx(x, y + 1), 1.0))
    return WeightedGraph.from_edges(w * h, edges)


def _cycle_graph(n: int) -> WeightedGraph:
    if n == 2:
        return WeightedGraph.from_edges(2, [(0, 1, 1.0)])
    return WeightedGraph.from_edges(n, [(i, (i + 1) % n, 1.0) for i in range(n)])


def _substitute(k: int, gadget_vertices: int, gadget_edges: Sequence[tuple[int, int]]):
    """Iterated edge substitution starting from one edge 0-1.

    The gadget is given on local vertices where 0 is the edge's source and 1
    its sink; the remaining ``gadget_vertices - 2`` are fresh at every
    substitution.  Edge lengths are left to the caller.
    """
    n = 2
    edges = [(0, 1)]
    for _ in range(k):
        new_edges = []
        for s, t in edges:
            local = [s, t] + list(range(n, n + gadget_vertices - 2))
            n += gadget_vertices - 2
            new_edges.extend((local[a], local[b]) for a, b in gadget_edges)
        edges = new_edges
    return n, edges


# diamond: each edge becomes a 4-cycle s-a-t, s-b-t
_DIAMOND = (4, [(0, 2), (2, 1), (0, 3), (3, 1)])
# Laakso: each edge becomes s-u, u-a-w, u-b-w, w-t (six edges of a quarter length)
_LAAKSO = (6, [(0, 2), (2, 3), (3, 5), (2, 4), (4, 5), (5, 1)])


def _series_parallel(k: int, gadget, shrink: float) -> WeightedGraph:
    n, edges = _substitute(k, *gadget)
    w = shrink**k
    return WeightedGraph.from_edges(n, [(u, v, w) for u, v in edges])


def _random_tree(n: int, seed: int) -> WeightedGraph:
    gen = seeding.rng(seed, "random-tree", n)
    parents = [int(gen.integers(0, i)) for i in range(1, n)]
    return WeightedGraph.from_edges(n, [(p, i, 1.0) for i, p in enumerate(parents, start=1)])


def _predicted_size(kind: str, p: tuple[int, ...]) -> int:
    if kind == "hypercube":
        return 2 ** p[0] if p[0] < 64 else 1 << 64
    if kind == "grid":
        return p[0] * p[1]
    if kind in ("cycle", "random_tree"):
        return p[0]
    if kind == "diamond":
        return 2 + 2 * (4 ** p[0] - 1) // 3
    if kind == "laakso":
        return 2 + 4 * (6 ** p[0] - 1) // 5
    raise ValueError(f"unknown space kind {kind!r}")


SPACE_KINDS = {"hypercube": 1, "grid": 2, "cycle": 1, "diamond": 1, "laakso": 1, "random_tree": 1}


def generate(kind: str, params: Sequence[int] = (), seed: int = 0, max_points: int = MAX_POINTS) -> FiniteMetricSpace:
    """Build one of the standard test spaces.

    kinds: ``hypercube(n)`` (Hamming metric), ``grid(w, h)``, ``cycle(n)``,
    ``diamond(k)`` (edge length 2**-k), ``laakso(k)`` (edge length 4**-k) and
    ``random_tree(n)`` (uniform random recursive tree drawn from ``seed``).
    All but the hypercube are shortest-path metrics with unit or dyadic
    edge lengths; the hypercube distance is also its graph metric.
    """
    if kind not in SPACE_KINDS:
        raise ValueError(f"unknown space kind {kind!r}; expected one of {sorted(SPACE_KINDS)}")
    p = tuple(int(v) for v in params)
    if len(p) != SPACE_KINDS[kind]:
        raise ValueError(f"{kind} takes {SPACE_KINDS[kind]} parameter(s), got {len(p)}")
    if any(v < (0 if kind in ("diamond", "laakso") else 1) for v in p):
        raise ValueError(f"invalid parameters {p} for {kind}")
    if kind == "cycle" and p[0] < 2:
        raise ValueError("cycle needs at least 2 vertices")
    size = _predicted_size(kind, p)
    if size > max_points:
        raise ValueError(f"{kind}{p} would have {size} points, above the cap of {max_points}")

    name = f"{kind}({','.join(map(str, p))})"
    labels = None
    if kind == "hypercube":
        n = p[0]
        labels = tuple(format(x, f"0{n}b") if n else "" for x in range(1 << n))
        g = _hypercube_graph(n)
        x = np.arange(1 << n)
        ham = np.zeros((1 << n, 1 << n))
        for i in range(n):
            b = (x >> i) & 1
            ham += b[:, None] != b[None, :]
        return FiniteMetricSpace(ham, name, labels, g)
    if kind == "grid":
        g = _grid_graph(*p)
        labels = tuple(f"{x},{y}" for y in range(p[1]) for x in range(p[0]))
    elif kind == "cycle":
        g = _cycle_graph(p[0])
    elif kind == "diamond":
        g = _series_parallel(p[0], _DIAMOND, 0.5)
    elif kind == "laakso":
        g = _series_parallel(p[0], _LAAKSO, 0.25)
    else:
        g = _random_tree(p[0], seed)
        name = f"random_tree({p[0]};seed={seed})"
    return shortest_path_metric(g, name, labels)


def parse_space_spec(text: str) -> tuple[str, tuple[int, ...]]:
    """``"grid:8,8"`` -> ``("grid", (8, 8))``; also accepts ``grid(8,8)``."""
    t = text.strip().replace("(", ":").rstrip(")")
    kind, _, rest = t.partition(":")
    params = tuple(int(v) for v in rest.split(",") if v.strip()) if rest else ()
    return kind.strip(), params


def snowflake(space: FiniteMetricSpace, eps: float) -> FiniteMetricSpace:
    """The snowflaked space (X, d^(1-eps)) for eps in (0, 1)."""
    if not 0 < eps < 1:
        raise ValueError(f"snowflake exponent eps must lie in (0, 1), got {eps}")
    return FiniteMetricSpace(space.dist ** (1 - eps), f"snowflake({space.provenance},{eps:g})", space.labels, None)


# ---------------------------------------------------------------------------
# doubling constant


@dataclass(frozen=True)
class DoublingResult:
    value: int
    method: str  # "exact" or "greedy-upper-bound"
    witness: tuple[int, float]  # (center, radius) attaining the value


def _greedy_cover(target: np.ndarray, sets: np.ndarray) -> int:
    uncovered = target.copy()
    count = 0
    while uncovered.any():
        gain = (sets & uncovered).sum(axis=1)
        best = int(gain.argmax())
        uncovered &= ~sets[best]
        count += 1
    return count


def _exact_cover(target: int, sets: list[int]) -> int:
    sets = sorted({s & target for s in sets if s & target}, reverse=True)
    for k in range(1, len(sets) + 1):
        for combo in itertools.combinations(sets, k):
            acc = 0
            for s in combo:
                acc |= s
            if acc == target:
                return k
    raise AssertionError("balls around every point always cover")


def doubling_constant(space: FiniteMetricSpace, exact_max: int = 12) -> DoublingResult:
    """Least number of r/2-balls (centered in the space) covering any r-ball.

    Radii range over the distinct pairwise distances.  Exhaustive search for
    ``n <= exact_max``, greedy set cover (an upper bound) otherwise.
    """
    n = space.n
    if n == 1:
        return DoublingResult(1, "exact", (0, 0.0))
    d = space.dist
    exact = n <= exact_max
    best, witness = 1, (0, 0.0)
    for r in space.distinct_distances():
        half = d <= r / 2
        for x in range(n):
            target = d[x] <= r
            if exact:
                tmask = int(sum(1 << i for i in np.flatnonzero(target)))
                smasks = [int(sum(1 << i for i in np.flatnonzero(row))) for row in half]
                k = _exact_cover(tmask, smasks)
            else:
                k = _greedy_cover(target, half & target)
            if k > best:
                best, witness = k, (x, float(r))
    return DoublingResult(best, "exact" if exact else "greedy-upper-bound", witness)


# ---------------------------------------------------------------------------
# I/O


def parse_graph(text: str, source: str = "<graph>") -> WeightedGraph:
    """Parse ``n m`` followed by ``m`` lines ``u v w`` (0-indexed vertices)."""
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{source}: empty graph file")
    lineno, head = lines[0]
    try:
        n, m = (int(v) for v in head.split())
    except ValueError:
        raise ValueError(f"{source}:{lineno}: expected header 'n m', got {head!r}") from None
    body = lines[1:]
    if len(body) != m:
        raise ValueError(f"{source}: header declares {m} edges but {len(body)} edge lines follow")
    edges = []
    for lineno, ln in body:
        parts = ln.split()
        try:
            if len(parts) != 3:
                raise ValueError
            u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ValueError(f"{source}:{lineno}: expected 'u v w', got {ln!r}") from None
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"{source}:{lineno}: vertex out of range 0..{n - 1}")
        if u == v or not w > 0:
            raise ValueError(f"{source}:{lineno}: self-loop or non-positive weight")
        edges.append((u, v, w))
    return WeightedGraph.from_edges(n, edges)


def format_graph(g: WeightedGraph) -> str:
    out = [f"{g.n} {len(g.edges)}"]
    out += [f"{u} {v} {w!r}" for u, v, w in g.edges]
    return "\n".join(out) + "\n"


def load_graph(path: str | Path) -> WeightedGraph:
    path = Path(path)
    return parse_graph(path.read_text(encoding="utf-8"), str(path))


def space_to_json(space: FiniteMetricSpace) -> dict:
    return {"n": space.n, "provenance": space.provenance, "dist": space.dist.ravel().tolist()}


def space_from_json(obj: dict) -> FiniteMetricSpace:
    unknown = set(obj) - {"n", "provenance", "dist", "labels"}
    if unknown:
        raise ValueError(f"unknown keys in space JSON: {sorted(unknown)}")
    n = int(obj["n"])
    flat = np.asarray(obj["dist"], dtype=float)
    if flat.size != n * n:
        raise ValueError(f"space JSON: dist has {flat.size} entries, expected {n * n}")
    labels = tuple(obj["labels"]) if obj.get("labels") else None
    return FiniteMetricSpace(flat.reshape(n, n), obj.get("provenance", "raw"), labels)


def load_space(path: str | Path) -> FiniteMetricSpace:
    path = Path(path)
    if path.suffix == ".json":
        return space_from_json(json.loads(path.read_text(encoding="utf-8")))
    return shortest_path_metric(load_graph(path), f"graph-file({path.name})")
