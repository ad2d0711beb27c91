"""Delta-bounded random partitions by ball carving, and padding measurement.

Scheme: draw a radius fraction ``r`` uniform on [1/4, 1/2) and a uniformly
random ordering of the points; every point joins the cluster of the first
point in that ordering lying within distance ``r * Delta`` of it.  Each
cluster then sits inside a ball of radius ``r * Delta < Delta / 2``, so the
partition is Delta-bounded.  Distances are compared as ratios ``d / Delta``,
which makes the sampler covariant under rescaling the metric.

Trial ``i`` of a run with root seed ``s`` draws from the stream
``seeding.rng(s, "partition", i)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import seeding
from .errors import InvariantViolation
from .spaces import FiniteMetricSpace

RADIUS_LOW, RADIUS_HIGH = 0.25, 0.5
# max number of (trial, point, candidate) entries held at once
_CHUNK_ENTRIES = 4_000_000


@dataclass(frozen=True, eq=False)
class PartitionSample:
    space_id: str
    delta: float
    cluster_of: np.ndarray  # center index of each point's cluster
    seed: int
    trial: int = 0
    radius: float = float("nan")  # carving radius, in units of delta

    def clusters(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.cluster_of == c) for c in np.unique(self.cluster_of)]


@dataclass(frozen=True, eq=False)
class PaddingReport:
    delta: float
    eps: float
    trials: int
    padded_count: np.ndarray
    delta_emp: float

    @property
    def per_point(self) -> np.ndarray:
        return self.padded_count / self.trials

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "eps": self.eps,
            "trials": self.trials,
            "delta_emp": self.delta_emp,
            "per_point": self.per_point.tolist(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _candidates(dist: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Per point, the points within delta/2 (possible centers) as a padded table."""
    ratio = dist / delta
    near = ratio < RADIUS_HIGH
    k = int(near.sum(axis=1).max())
    order = np.argsort(~near, axis=1, kind="stable")[:, :k]
    cand = order
    cand_ratio = np.take_along_axis(ratio, order, axis=1)
    valid = np.take_along_axis(near, order, axis=1)
    cand_ratio = np.where(valid, cand_ratio, np.inf)
    return cand, cand_ratio


def _draws(n: int, seed: int, trials: range, tag: str = "partition"):
    radii = np.empty(len(trials))
    ranks = np.empty((len(trials), n), dtype=np.int64)
    for row, i in enumerate(trials):
        g = seeding.rng(seed, tag, i)
        radii[row] = g.uniform(RADIUS_LOW, RADIUS_HIGH)
        perm = g.permutation(n)
        ranks[row, perm] = np.arange(n)
    return radii, ranks


def carve(space: FiniteMetricSpace, delta: float, seed: int, trials, tag: str = "partition"):
    """Cluster labels for a batch of trials.

    Returns ``(labels, radii)`` with ``labels[k, x]`` the center of the
    cluster containing ``x`` in trial ``trials[k]``.  Labels are checked
    against the carving radius, which certifies Delta-boundedness.
    """
    if not delta > 0:
        raise ValueError(f"partition scale must be positive, got {delta}")
    trials = range(trials) if isinstance(trials, int) else trials
    n = space.n
    cand, cand_ratio = _candidates(space.dist, delta)
    k = cand.shape[1]
    chunk = max(1, _CHUNK_ENTRIES // (n * k))
    labels = np.empty((len(trials), n), dtype=np.int64)
    radii = np.empty(len(trials))
    for lo in range(0, len(trials), chunk):
        sub = trials[lo : lo + chunk]
        r, ranks = _draws(n, seed, sub, tag)
        cr = ranks[:, cand]  # (T, n, k)
        cr = np.where(cand_ratio[None] <= r[:, None, None], cr, n)
        best = cr.argmin(axis=2)
        lab = np.take_along_axis(np.broadcast_to(cand, cr.shape), best[..., None], axis=2)[..., 0]
        labels[lo : lo + len(sub)] = lab
        radii[lo : lo + len(sub)] = r
    reach = space.dist[np.arange(n)[None, :], labels] / delta
    if np.any(reach > radii[:, None]):
        t, x = np.argwhere(reach > radii[:, None])[0]
        raise InvariantViolation("partition: Delta-bounded", f"trial {trials[t]}, point {x} outside its carving ball")
    return labels, radii


def sample_partition(space: FiniteMetricSpace, delta: float, seed: int, trial: int = 0) -> PartitionSample:
    labels, radii = carve(space, delta, seed, range(trial, trial + 1))
    return PartitionSample(space.fingerprint, float(delta), labels[0], seed, trial, float(radii[0]))


def cluster_diameters(space: FiniteMetricSpace, cluster_of: np.ndarray) -> np.ndarray:
    out = []
    for c in np.unique(cluster_of):
        idx = np.flatnonzero(cluster_of == c)
        out.append(space.dist[np.ix_(idx, idx)].max())
    return np.array(out)


def ball_table(space: FiniteMetricSpace, radius: float) -> np.ndarray:
    """Closed balls B(x, radius) as a padded index table (padding repeats x)."""
    inside = space.dist <= radius
    k = int(inside.sum(axis=1).max())
    order = np.argsort(~inside, axis=1, kind="stable")[:, :k]
    valid = np.take_along_axis(inside, order, axis=1)
    return np.where(valid, order, np.arange(space.n)[:, None])


def padded_mask(labels: np.ndarray, balls: np.ndarray) -> np.ndarray:
    """``mask[k, x]``: the ball around x lies inside x's cluster in trial k."""
    own = labels[:, :, None]
    return (labels[:, balls] == own).all(axis=2)


def padding_report(space: FiniteMetricSpace, delta: float, eps: float, trials: int, seed: int) -> PaddingReport:
    """Empirical padding frequencies of ``trials`` independent partitions.

    ``delta_emp`` is the minimum frequency over points.
    """
    if not 0 < eps <= 0.5:
        raise ValueError(f"padding fraction eps must lie in (0, 1/2], got {eps}")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    balls = ball_table(space, eps * delta)
    counts = np.zeros(space.n, dtype=np.int64)
    step = max(1, _CHUNK_ENTRIES // (space.n * balls.shape[1]))
    for lo in range(0, trials, step):
        labels, _ = carve(space, delta, seed, range(lo, min(trials, lo + step)))
        counts += padded_mask(labels, balls).sum(axis=0)
    return PaddingReport(float(delta), float(eps), int(trials), counts, float(counts.min() / trials))


def padding_sweep(space: FiniteMetricSpace, scales: range, eps: float, trials: int, seed: int) -> list[PaddingReport]:
    """Padding reports at Delta = 2**j for each j in ``scales``."""
    return [padding_report(space, 2.0**j, eps, trials, seed) for j in scales]
