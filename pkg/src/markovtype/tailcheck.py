"""Uniform tail inequalities for martingale families built from threshold maps.

For each dyadic scale ``j`` the chain is pushed through ``f_j = phi_{2^j}``
(a threshold map at ``tau = 2^j``) and split into the forward/backward
martingales ``A^(j)`` and ``B^(j)``.  All scales share one set of sampled
trajectories and one pair of dominating sequences ``alpha``, ``beta``, so
the family sits on a single filtration.

Filtration conventions: ``A_s`` is adapted to ``F_{2s+1}`` (the chain up to
time 2s+1), under which the step ``A_s - A_{s-1}`` has conditional law
determined by ``Z_{2s-1}``.  ``B`` mirrors this on the reversed path.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import embeddings
from .chains import ReversibleChain, displacement_moments_exact, one_step_moment, sample_trajectories
from .errors import InvariantViolation
from .martingales import decompose, dominating_sequences
from .spaces import FiniteMetricSpace

Y_GRID_POINTS = 64
STATIONARITY_SE = 3.0
_BATCH = 512


@dataclass(frozen=True, eq=False)
class SideData:
    """Per-scale path statistics of one side (A or B), arrays of shape (J, T)."""

    final: np.ndarray  # |X_u - X_0|
    running_max: np.ndarray  # M* = max_s |X_s - X_0|
    step_max: np.ndarray  # Delta* = max_s |X_s - X_{s-1}|
    gamma: np.ndarray  # (sum_s E[|X_s - X_{s-1}|^p | past])^(1/p)
    dom: np.ndarray  # (T, u) dominating sequence shared by all scales

    @property
    def trials(self) -> int:
        return self.final.shape[1]


@dataclass(frozen=True, eq=False)
class FamilyExperiment:
    scales: tuple[int, ...]
    t: int
    p: float
    trials: int
    seed: int
    A: SideData
    B: SideData | None = None
    d_end: np.ndarray | None = None  # d(Z_0, Z_t) per path
    d_one: np.ndarray | None = None  # d(Z_0, Z_1) per path
    one_step_moment: float | None = None  # exact E d(Z_0, Z_1)^p
    K_threshold: tuple[float, ...] = ()  # audited threshold constant per scale
    domination_slack: float = 0.0  # min over paths/scales of dom - |step|
    chain: ReversibleChain | None = field(default=None, repr=False)
    space: FiniteMetricSpace | None = field(default=None, repr=False)

    @property
    def u(self) -> int:
        return self.t // 2

    @property
    def D(self) -> float:
        """Threshold constant used for the end-to-end bound (max over scales)."""
        vals = [k for k in self.K_threshold if k > 0]
        return max(vals) if vals else 1.0

    def side(self, name: str) -> SideData:
        data = self.A if name == "A" else self.B
        if data is None:
            raise ValueError(f"experiment has no side {name!r}")
        return data


def default_scales(space: FiniteMetricSpace) -> range:
    """Exponents j with 2^j running from at most the min distance to twice the diameter or more."""
    j0 = math.floor(math.log2(space.min_distance))
    j1 = math.ceil(math.log2(space.diam)) + 1
    return range(j0, j1 + 1)


def _side_stats(X: np.ndarray, cond: np.ndarray, p: float) -> tuple[np.ndarray, ...]:
    """X: (T, u+1, d) paths with X_0 = 0; cond: (T, u) conditional p-th moments."""
    norms = np.linalg.norm(X, axis=-1)
    steps = np.linalg.norm(np.diff(X, axis=1), axis=-1)
    final = norms[:, -1]
    running = norms[:, 1:].max(axis=1) if X.shape[1] > 1 else np.zeros(len(X))
    smax = steps.max(axis=1) if steps.shape[1] else np.zeros(len(X))
    gamma = cond.sum(axis=1) ** (1 / p)
    return final, running, smax, gamma


def _cond_moments(chain: ReversibleChain, F: np.ndarray, p: float) -> np.ndarray:
    """``sum_b P[a, b] |f(b) - (Pf)(a)|^p`` per state a."""
    PF = chain.P @ F
    diff = np.linalg.norm(F[None, :, :] - PF[:, None, :], axis=-1)
    return np.sum(chain.P * diff**p, axis=1)


def run_family_experiment(
    space: FiniteMetricSpace,
    chain: ReversibleChain,
    scales=None,
    t: int = 8,
    trials: int = 2000,
    p: float = 2.0,
    seed: int = 0,
    m: int = 128,
) -> FamilyExperiment:
    """Sample trajectories, decompose ``phi_{2^j}`` along them for every j.

    The chain's states are the points of ``space`` (g is the identity).  The
    family-domination invariant ``|A^(j)_s - A^(j)_{s-1}| <= alpha_s`` (and
    for B) is asserted on every path and every scale.
    """
    if chain.n != space.n:
        raise ValueError(f"chain has {chain.n} states but the space has {space.n} points")
    if t < 2 or t % 2:
        raise ValueError(f"horizon t must be even and positive, got {t}")
    if not 1 < p <= 2:
        raise ValueError(f"p must lie in (1, 2], got {p}")
    scales = tuple(default_scales(space) if scales is None else scales)
    if not scales:
        raise ValueError("empty scale set")
    traj = sample_trajectories(chain, t, trials, seed)
    u = t // 2
    D = space.dist
    J = len(scales)
    stats = {side: np.zeros((4, J, trials)) for side in "AB"}
    alpha = np.empty((trials, u))
    beta = np.empty((trials, u))
    K = []
    slack = np.inf
    for ji, j in enumerate(scales):
        tau = 2.0**j
        emap = embeddings.build_threshold_map(space, tau, m, seed)
        K.append(embeddings.audit_threshold(space, emap, tau).K_emp)
        F = emap.coords
        cond = _cond_moments(chain, F, p)
        for lo in range(0, trials, _BATCH):
            sl = slice(lo, min(trials, lo + _BATCH))
            tr = decompose(chain, F, traj[sl])
            a, b = dominating_sequences(tr, chain, p, D=D, check=True)
            stepA = np.linalg.norm(np.diff(tr.A, axis=1), axis=-1)
            stepB = np.linalg.norm(np.diff(tr.B, axis=1), axis=-1)
            slack = min(slack, float((a - stepA).min()), float((b - stepB).min()))
            if ji == 0:
                alpha[sl], beta[sl] = a, b
            condA = cond[traj[sl, 1:t:2]]
            condB = cond[traj[sl, ::-1][:, 1:t:2]]
            stats["A"][:, ji, sl] = _side_stats(tr.A, condA, p)
            stats["B"][:, ji, sl] = _side_stats(tr.B, condB, p)
    sides = {s: SideData(*stats[s], dom=alpha if s == "A" else beta) for s in "AB"}
    return FamilyExperiment(
        scales=scales,
        t=t,
        p=float(p),
        trials=trials,
        seed=seed,
        A=sides["A"],
        B=sides["B"],
        d_end=D[traj[:, 0], traj[:, -1]],
        d_one=D[traj[:, 0], traj[:, 1]],
        one_step_moment=one_step_moment(chain, D, p),
        K_threshold=tuple(K),
        domination_slack=slack,
        chain=chain,
        space=space,
    )


def family_from_increments(increments: np.ndarray, dom: np.ndarray, cond_moments: np.ndarray, p: float = 2.0, seed: int = 0) -> FamilyExperiment:
    """Single-member family from explicit martingale increments.

    ``increments`` has shape (T, n) or (T, n, d); ``dom`` (T, n) must dominate
    the increment norms and ``cond_moments`` (T, n) holds the conditional p-th
    moments of each increment given the past.
    """
    inc = np.asarray(increments, dtype=float)
    inc = inc[..., None] if inc.ndim == 2 else inc
    T, n, _ = inc.shape
    dom = np.broadcast_to(np.asarray(dom, dtype=float), (T, n))
    steps = np.linalg.norm(inc, axis=-1)
    if np.any(steps > dom * (1 + 1e-12)):
        k, s = np.argwhere(steps > dom * (1 + 1e-12))[0]
        raise InvariantViolation("family domination", f"path {k}, step {s + 1}")
    X = np.concatenate([np.zeros((T, 1, inc.shape[2])), np.cumsum(inc, axis=1)], axis=1)
    cond = np.broadcast_to(np.asarray(cond_moments, dtype=float), (T, n))
    final, running, smax, gamma = _side_stats(X, cond, p)
    side = SideData(final[None], running[None], smax[None], gamma[None], np.array(dom))
    return FamilyExperiment(
        scales=(0,), t=2 * n, p=float(p), trials=T, seed=seed, A=side,
        domination_slack=float((dom - steps).min()) if n else 0.0,
    )


# ---------------------------------------------------------------------------
# tail integrals


def tail_curves(values: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``P(X_j >= y)`` for each row of ``values`` (J, T) at each y."""
    srt = np.sort(values, axis=1)
    T = values.shape[1]
    return np.stack([(T - np.searchsorted(row, y, side="left")) / T for row in srt])


def tail_integral(values: np.ndarray, p: float) -> float:
    """Exact ``int_0^inf y^(p-1) max_j P(X_j >= y) dy`` for empirical laws.

    The integrand is a step function whose jumps sit at the observed
    values, so summing over the pieces between consecutive breakpoints
    gives the integral without discretisation error.
    """
    values = np.atleast_2d(values)
    b = np.unique(values[values > 0])
    if b.size == 0:
        return 0.0
    S = tail_curves(values, b).max(axis=0)  # on (b_{k-1}, b_k] the tail equals its value at b_k
    prev = np.concatenate([[0.0], b[:-1]])
    return float(np.sum(S * (b**p - prev**p)) / p)


def geometric_grid(values: np.ndarray, points: int = Y_GRID_POINTS) -> np.ndarray:
    pos = values[values > 0]
    if pos.size == 0:
        return np.zeros(0)
    return np.geomspace(pos.min() / 4, pos.max() * 2, points)


@dataclass(frozen=True, eq=False)
class TailReport:
    side: str
    p: float
    scales: tuple[int, ...]
    y_grid: np.ndarray
    sup_tail: np.ndarray
    scale_tails: np.ndarray  # (J, G)
    lhs: float
    rhs: float
    K_emp: float

    @property
    def ratio(self) -> float:
        if self.rhs > 0:
            return self.lhs / self.rhs
        return 0.0 if self.lhs == 0 else math.inf

    @property
    def violation(self) -> bool:
        return self.rhs == 0 and self.lhs > 0

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["y", "sup_tail"] + [f"scale_{j}" for j in self.scales])
        for g, y in enumerate(self.y_grid):
            w.writerow([repr(float(y)), repr(float(self.sup_tail[g]))] + [repr(float(v)) for v in self.scale_tails[:, g]])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"side": self.side, "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, "K_emp": self.K_emp}

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def tail_report(exp: FamilyExperiment, y_grid=None, side: str = "A", beta: float = 5.0, delta: float = 0.25) -> TailReport:
    """LHS ``int y^(p-1) sup_j P(|X^(j)_u| >= y) dy`` vs RHS ``sum_s E dom_s^p``.

    ``y_grid`` only controls the tabulated curve; the LHS is integrated
    exactly.  ``K_emp`` is the largest constant demanded by the maximal
    inequality over the triple grid (see :func:`osekowski_triple_check`).
    """
    data = exp.side(side)
    y = geometric_grid(data.final) if y_grid is None else np.asarray(y_grid, dtype=float)
    scale_tails = tail_curves(data.final, y) if y.size else np.zeros((len(exp.scales), 0))
    sup = scale_tails.max(axis=0) if y.size else np.zeros(0)
    lhs = tail_integral(data.final, exp.p)
    rhs = float(np.mean(np.sum(data.dom**exp.p, axis=1)))
    K = osekowski_triple_check(exp, None, beta, delta, side).K_emp
    rep = TailReport(side, exp.p, exp.scales, y, sup, scale_tails, lhs, rhs, K)
    if rep.violation:
        raise InvariantViolation("tail inequality", f"side {side}: LHS {lhs:.6g} > 0 with zero RHS")
    return rep


# ---------------------------------------------------------------------------
# maximal inequality


@dataclass(frozen=True)
class TripleRow:
    side: str
    scale: int
    lam: float
    p_big: float  # P(M* >= beta lambda)
    p_small: float  # P(M* >= lambda)
    p_ctrl: float  # P(Gamma v Delta* >= delta lambda)
    K_needed: float


@dataclass(frozen=True)
class TripleTable:
    beta: float
    delta: float
    p: float
    rows: tuple[TripleRow, ...]

    @property
    def K_emp(self) -> float:
        return max((r.K_needed for r in self.rows), default=0.0)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["side", "scale", "lambda", "P_M_beta_lambda", "P_M_lambda", "P_ctrl", "K_needed"])
        for r in self.rows:
            w.writerow([r.side, r.scale, repr(r.lam), repr(r.p_big), repr(r.p_small), repr(r.p_ctrl), repr(r.K_needed)])
        return buf.getvalue()


def required_K(p_big: float, p_small: float, p_ctrl: float, beta: float, delta: float, p: float) -> float:
    """Smallest K with ``p_big <= (K delta / (beta - delta - 1))^p p_small + p_ctrl``."""
    excess = p_big - p_ctrl
    if excess <= 0:
        return 0.0
    if p_small <= 0:
        return math.inf
    return (excess / p_small) ** (1 / p) * (beta - delta - 1) / delta


def osekowski_triple_check(exp: FamilyExperiment, lam_grid=None, beta: float = 5.0, delta: float = 0.25, side: str = "A") -> TripleTable:
    """Empirical probabilities of the good-lambda maximal inequality per scale.

    With no ``lam_grid``, lambda runs over the distinct positive observed
    values of ``M*`` for each scale, which are the only places the
    required constant can change from above.
    """
    if not beta > 1:
        raise ValueError(f"beta must exceed 1, got {beta}")
    if not 0 < delta < beta - 1:
        raise ValueError(f"delta must lie in (0, beta - 1), got {delta}")
    data = exp.side(side)
    rows = []
    for ji, j in enumerate(exp.scales):
        mstar = data.running_max[ji]
        ctrl = np.maximum(data.gamma[ji], data.step_max[ji])
        lams = np.unique(mstar[mstar > 0]) / beta if lam_grid is None else np.asarray(lam_grid, dtype=float)
        ms, cs = np.sort(mstar), np.sort(ctrl)
        T = len(ms)
        for lam in lams:
            pb = (T - np.searchsorted(ms, beta * lam, side="left")) / T
            ps = (T - np.searchsorted(ms, lam, side="left")) / T
            pc = (T - np.searchsorted(cs, delta * lam, side="left")) / T
            rows.append(TripleRow(side, int(j), float(lam), float(pb), float(ps), float(pc), required_K(pb, ps, pc, beta, delta, exp.p)))
    return TripleTable(float(beta), float(delta), exp.p, tuple(rows))


# ---------------------------------------------------------------------------
# stationarity budget and end-to-end assembly


@dataclass(frozen=True)
class BudgetCheck:
    side: str
    mean: float  # empirical E sum_s dom_s^p
    stderr: float
    budget: float  # 2t E d(Z_0, Z_1)^p
    ok: bool


def stationarity_budget(exp: FamilyExperiment, side: str = "A", n_se: float = STATIONARITY_SE) -> BudgetCheck:
    """``E sum_s alpha_s^p <= 2t E d(Z_0, Z_1)^p`` within ``n_se`` standard errors."""
    if exp.one_step_moment is None:
        raise ValueError("experiment has no one-step moment (not chain-driven)")
    s = np.sum(exp.side(side).dom**exp.p, axis=1)
    mean = float(s.mean())
    se = float(s.std(ddof=1) / math.sqrt(len(s))) if len(s) > 1 else 0.0
    budget = 2 * exp.t * exp.one_step_moment
    return BudgetCheck(side, mean, se, budget, mean <= budget + n_se * se)


@dataclass(frozen=True)
class EndToEnd:
    t: int
    p: float
    D: float
    moment_emp: float  # empirical E d(Z_0, Z_t)^p on the sampled paths
    moment_exact: float | None
    dyadic: float  # p sum_j w_j [P(|A_j| >= 2^(j-1)/D) + P(|B_j| >= ...)]
    bound: float  # p 2^(3p-1) D^p (LHS_A + LHS_B)
    one_step: float

    @property
    def holds(self) -> bool:
        tol = 1e-9 * max(1.0, self.bound)
        return self.moment_emp <= self.dyadic + tol and self.dyadic <= self.bound + tol

    @property
    def ratio_emp(self) -> float:
        return self.moment_emp / (self.t * self.one_step)

    @property
    def ratio_bound(self) -> float:
        return self.bound / (self.t * self.one_step)

    def to_json(self) -> dict:
        return {
            "t": self.t, "p": self.p, "D": self.D, "moment_emp": self.moment_emp,
            "moment_exact": self.moment_exact, "dyadic": self.dyadic, "bound": self.bound,
            "ratio_emp": self.ratio_emp, "ratio_bound": self.ratio_bound, "holds": self.holds,
        }


def end_to_end(exp: FamilyExperiment, exact: bool = True) -> EndToEnd:
    """Assemble the displacement bound from threshold constants and tail integrals.

    Each inequality in the chain holds path by path for the empirical
    measure, so ``moment_emp <= dyadic <= bound`` is checked exactly.  The
    lowest scale ``j0`` (with ``2^j0 <= min distance``) absorbs the weight of
    all smaller scales.
    """
    if exp.B is None or exp.d_end is None:
        raise ValueError("end-to-end assembly needs a chain-driven experiment")
    p, D = exp.p, exp.D
    if not np.isfinite(D):
        bound = dyadic = math.inf
    else:
        js = np.array(exp.scales, dtype=float)
        w = 2.0 ** ((js + 1) * (p - 1) + js)
        w[0] = 2.0 ** (p - 1) * 2.0 ** (js[0] * p) / (1 - 2.0**-p)
        thr = 2.0 ** (js - 1) / D
        hitA = (exp.A.final >= thr[:, None]).mean(axis=1)
        hitB = (exp.B.final >= thr[:, None]).mean(axis=1)
        dyadic = float(p * np.sum(w * (hitA + hitB)))
        lhs = tail_integral(exp.A.final, p) + tail_integral(exp.B.final, p)
        bound = float(p * 2.0 ** (3 * p - 1) * D**p * lhs)
    mom = float(np.mean(exp.d_end**p))
    mexact = None
    if exact and exp.chain is not None and exp.chain.n <= 2048:
        mexact = displacement_moments_exact(exp.chain, exp.space.dist, p, [exp.t])[exp.t]
    return EndToEnd(exp.t, p, D, mom, mexact, dyadic, bound, exp.one_step_moment)
