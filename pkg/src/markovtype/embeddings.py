"""Threshold maps from random partitions and multi-scale snowflake maps.

A threshold map at scale ``tau`` is a finite Monte Carlo realization of the
random-partition map: each of its ``m`` coordinates samples a partition at
``Delta = tau / 2``, a {0, 1} coin per cluster, and sends ``x`` to
``coin(P(x)) * d(x, X \\ P(x))``; the coordinates are scaled by ``1/sqrt(m)``.
Every coordinate is 1-Lipschitz on every sample, so the whole map is
1-Lipschitz in the Euclidean norm, not only in expectation.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from . import seeding
from .partitions import carve
from .spaces import FiniteMetricSpace

LIP_TOL = 1e-9


def _stream(j: int) -> int:
    # zigzag: signed scale exponent -> non-negative seed index
    return 2 * j if j >= 0 else -2 * j - 1


@dataclass(frozen=True, eq=False)
class EmbeddingMap:
    space_id: str
    tau: float | str  # threshold scale, or "multi" for a snowflake map
    coords: np.ndarray  # n x m
    scaling: str
    seed: int
    blocks: tuple[tuple[int, float, int, int], ...] = ()  # (scale exponent, weight, start, stop)
    cap: float | None = None

    @property
    def m(self) -> int:
        return self.coords.shape[1]

    def to_json(self) -> dict:
        return {
            "tau_or_multi": self.tau,
            "m": self.m,
            "n": self.coords.shape[0],
            "space_id": self.space_id,
            "seed": self.seed,
            "scaling": self.scaling,
            "blocks": [list(b) for b in self.blocks],
            "coords": self.coords.ravel().tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EmbeddingMap":
        coords = np.asarray(obj["coords"], dtype=float).reshape(int(obj["n"]), int(obj["m"]))
        blocks = tuple((int(b[0]), float(b[1]), int(b[2]), int(b[3])) for b in obj.get("blocks", []))
        return cls(obj.get("space_id", ""), obj["tau_or_multi"], coords, obj.get("scaling", ""), int(obj.get("seed", 0)), blocks)


def distance_to_complement(dist: np.ndarray, labels: np.ndarray, order: np.ndarray | None = None) -> np.ndarray:
    """``out[k, x] = d(x, X \\ P_k(x))``, or 0 when P_k(x) is all of X.

    ``order`` is ``argsort(dist, axis=1)``; only the nearest ``s + 1``
    neighbours of each point are scanned, ``s`` the largest cluster size.
    """
    n = dist.shape[0]
    if order is None:
        order = np.argsort(dist, axis=1, kind="stable")
    biggest = max(int(np.bincount(row, minlength=n).max()) for row in labels)
    width = min(n, biggest + 1)
    near = order[:, :width]
    outside = labels[:, near] != labels[:, :, None]  # (T, n, width)
    first = outside.argmax(axis=2)
    found = np.take_along_axis(outside, first[..., None], axis=2)[..., 0]
    out = np.take_along_axis(dist, near, axis=1)[np.arange(n)[None, :], first]
    return np.where(found, out, 0.0)


def threshold_coordinates(space: FiniteMetricSpace, tau: float, m: int, seed: int, stream: int = 0, cap=None) -> np.ndarray:
    """Unscaled coordinates (n x m) of the threshold map at scale ``tau``."""
    if not tau > 0:
        raise ValueError(f"threshold scale must be positive, got {tau}")
    if m < 1:
        raise ValueError("need at least one coordinate")
    n = space.n
    delta = tau / 2
    base = stream * (1 << 32)
    labels, _ = carve(space, delta, seed, range(base, base + m), "threshold-partition")
    coins = np.stack([seeding.rng(seed, "threshold-coin", stream, k).integers(0, 2, n) for k in range(m)])
    sigma = np.take_along_axis(coins, labels, axis=1)
    order = np.argsort(space.dist, axis=1, kind="stable")
    out = np.empty((n, m))
    step = max(1, 4_000_000 // (n * n))
    for lo in range(0, m, step):
        dc = distance_to_complement(space.dist, labels[lo : lo + step], order)
        if cap is not None:
            dc = np.minimum(dc, cap)
        out[:, lo : lo + step] = (sigma[lo : lo + step] * dc).T
    return out


def build_threshold_map(space: FiniteMetricSpace, tau: float, m: int, seed: int, cap: float | None = None) -> EmbeddingMap:
    """1-Lipschitz threshold map at scale ``tau`` with ``m`` coordinates.

    ``cap`` clips each coordinate at the given value, which keeps the map
    1-Lipschitz and bounds ``|phi(x)|`` (used by the snowflake construction).
    """
    coords = threshold_coordinates(space, tau, m, seed, cap=cap) / math.sqrt(m)
    return EmbeddingMap(space.fingerprint, float(tau), coords, f"1/sqrt({m})", seed, (), cap)


@dataclass(frozen=True, eq=False)
class ThresholdAudit:
    tau: float
    K_emp: float  # 0.0 when no pair is at distance >= tau
    lip_emp: float
    pairs: np.ndarray  # (P, 2) upper-triangular index pairs
    d: np.ndarray
    image_dist: np.ndarray
    K_bound: float | None = None
    violations: list[tuple[int, int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pair_i", "pair_j", "d", "image_dist", "ratio"])
        for (i, j), dd, im in zip(self.pairs, self.d, self.image_dist):
            w.writerow([int(i), int(j), repr(float(dd)), repr(float(im)), repr(float(im / dd))])
        return buf.getvalue()


def image_distances(coords: np.ndarray) -> np.ndarray:
    if coords.shape[0] < 2:
        return np.zeros(0)
    return pdist(coords)


def theorem_K_bound(eps: float, delta_emp: float) -> float:
    """The padded-partition threshold constant 4 / (eps * sqrt(delta))."""
    return math.inf if delta_emp <= 0 else 4.0 / (eps * math.sqrt(delta_emp))


def audit_threshold(space: FiniteMetricSpace, emap: EmbeddingMap, tau: float, eps=None, delta_emp=None, slack: float = 1.0) -> ThresholdAudit:
    """Empirical threshold constant and Lipschitz constant of ``emap``.

    With ``eps`` and ``delta_emp`` given, ``K_emp`` is compared against
    ``slack * 4 / (eps * sqrt(delta_emp))``.
    """
    if emap.tau != "multi" and not math.isclose(float(emap.tau), tau, rel_tol=1e-12):
        raise ValueError(f"map was built for tau={emap.tau}, audit asked for tau={tau}")
    n = space.n
    iu = np.triu_indices(n, 1)
    d = space.dist[iu]
    img = image_distances(emap.coords)
    ratio = img / d if d.size else np.zeros(0)
    lip = float(ratio.max()) if d.size else 0.0
    far = d >= tau
    if far.any():
        with np.errstate(divide="ignore"):
            K = float(np.max(tau / img[far]))
    else:
        K = 0.0
    bound = None if eps is None else slack * theorem_K_bound(eps, delta_emp)
    viol = []
    for k in np.flatnonzero(ratio > 1 + LIP_TOL):
        viol.append((int(iu[0][k]), int(iu[1][k]), "lipschitz"))
    if bound is not None:
        for k in np.flatnonzero(far & (img * bound < tau)):
            viol.append((int(iu[0][k]), int(iu[1][k]), "threshold"))
    return ThresholdAudit(float(tau), K, lip, np.column_stack(iu), d, img, bound, viol)


# ---------------------------------------------------------------------------
# snowflake


def snowflake_scales(space: FiniteMetricSpace) -> range:
    """Exponents n with 2**n in [min distance / 2, 2 * diam]."""
    if space.n < 2:
        return range(0, 1)
    lo = math.ceil(math.log2(space.min_distance / 2))
    hi = math.floor(math.log2(2 * space.diam))
    return range(lo, hi + 1)


def snowflake_upper_constant(eps: float) -> float:
    """C with |Phi(x) - Phi(y)|^2 <= C d(x,y)^(2(1-eps)) for capped blocks.

    Each block at scale 2**n is clipped at 2**(n-1), so its contribution is at
    most 4**(-eps n) min(d, 2**(n-1))**2; summing the two geometric tails
    around the scale 2**m <= d < 2**(m+1) gives the constant below.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    return 1 / (4 * (1 - 4 ** (eps - 1))) + 1 / (1 - 4 ** (-eps))


def build_snowflake_map(space: FiniteMetricSpace, eps: float, m_per_scale: int, seed: int, scales: range | None = None) -> EmbeddingMap:
    """Weighted concatenation of threshold maps over dyadic scales.

    Block ``n`` is ``2**(-eps n) * phi_{2**n}`` with ``phi`` clipped at
    ``2**(n-1)``; scales default to :func:`snowflake_scales`.
    """
    if not 0 < eps < 1:
        raise ValueError(f"snowflake exponent eps must lie in (0, 1), got {eps}")
    scales = snowflake_scales(space) if scales is None else scales
    blocks, parts, start = [], [], 0
    for j in scales:
        tau = 2.0**j
        raw = threshold_coordinates(space, tau, m_per_scale, seed, stream=_stream(j), cap=tau / 2)
        w = 2.0 ** (-eps * j)
        parts.append(w * raw / math.sqrt(m_per_scale))
        blocks.append((j, w, start, start + m_per_scale))
        start += m_per_scale
    coords = np.hstack(parts)
    return EmbeddingMap(space.fingerprint, "multi", coords, f"2^(-{eps:g} n)/sqrt({m_per_scale}) per block", seed, tuple(blocks))


def block_map(emap: EmbeddingMap, j: int) -> EmbeddingMap:
    """The unweighted threshold map of block ``j`` of a snowflake map."""
    for jj, w, a, b in emap.blocks:
        if jj == j:
            return EmbeddingMap(emap.space_id, 2.0**j, emap.coords[:, a:b] / w, "block", emap.seed, (), 2.0 ** (j - 1))
    raise KeyError(f"no block at scale exponent {j}")


@dataclass(frozen=True, eq=False)
class SnowflakeAudit:
    eps: float
    K_by_scale: dict[int, float]
    C_eps: float
    lower_ok: bool
    upper_ok: bool
    upper_ratio: float  # max |Phi(x)-Phi(y)|^2 / d^(2(1-eps))
    lower_ratio: float  # min |Phi(x)-Phi(y)| * 4 K_m / d^(1-eps)
    distortion: float


def audit_snowflake(space: FiniteMetricSpace, emap: EmbeddingMap, eps: float) -> SnowflakeAudit:
    """Check the two-sided snowflake bounds pair by pair.

    Lower: ``|Phi(x)-Phi(y)| >= d^(1-eps) / (4 K_m)`` where ``2**m <= d <
    2**(m+1)`` and ``K_m`` is the audited threshold constant of block m.
    Upper: ``|Phi(x)-Phi(y)|^2 <= C_eps d^(2(1-eps))``.
    """
    iu = np.triu_indices(space.n, 1)
    d = space.dist[iu]
    img = image_distances(emap.coords)
    K = {}
    for j, *_ in emap.blocks:
        K[j] = audit_threshold(space, block_map(emap, j), 2.0**j).K_emp
    C = snowflake_upper_constant(eps)
    if d.size == 0:
        return SnowflakeAudit(eps, K, C, True, True, 0.0, math.inf, 1.0)
    target = d ** (1 - eps)
    mexp = np.floor(np.log2(d)).astype(int)
    Km = np.array([K.get(int(j), math.inf) for j in mexp])
    lower = img * 4 * Km / target
    upper = img**2 / target**2
    dist_val = distortion(FiniteMetricSpace(space.dist ** (1 - eps), "snowflaked"), emap.coords)
    return SnowflakeAudit(
        eps, K, C,
        bool(np.all(lower >= 1 - 1e-12)),
        bool(np.all(upper <= C * (1 + 1e-12))),
        float(upper.max()),
        float(lower.min()),
        dist_val,
    )


# ---------------------------------------------------------------------------
# distortion


@dataclass(frozen=True)
class Distortion:
    value: float
    expansion: float
    contraction: float
    coincident_pair: tuple[int, int] | None = None


def distortion_details(space: FiniteMetricSpace, coords: np.ndarray) -> Distortion:
    if space.n < 2:
        raise ValueError("distortion needs at least two points")
    coords = np.asarray(coords, dtype=float).reshape(space.n, -1)
    iu = np.triu_indices(space.n, 1)
    d = space.dist[iu]
    img = image_distances(coords)
    if np.any(img == 0):
        k = int(np.flatnonzero(img == 0)[0])
        return Distortion(math.inf, float((img / d).max()), math.inf, (int(iu[0][k]), int(iu[1][k])))
    expansion = float((img / d).max())
    contraction = float((d / img).max())
    return Distortion(expansion * contraction, expansion, contraction)


def distortion(space: FiniteMetricSpace, coords: np.ndarray) -> float:
    """Lipschitz constant times inverse Lipschitz constant; inf on collisions."""
    return distortion_details(space, coords).value


def dumps_map(emap: EmbeddingMap) -> str:
    return json.dumps(emap.to_json(), sort_keys=True)
