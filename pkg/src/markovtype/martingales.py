"""Forward/backward martingale decomposition, duality maps, dimension reduction.

Vectors live in R^d with an l_q norm.  Path arrays are batched: a batch of
``T`` paths of a vector martingale has shape ``(T, t + 1, d)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import seeding
from .chains import ReversibleChain, check_trajectories
from .errors import InvariantViolation

IDENTITY_TOL = 1e-9
MARTINGALE_TOL = 1e-9
PATH_TOL = 1e-9


# ---------------------------------------------------------------------------
# norms and duality


def lq_norm(z: np.ndarray, q: float) -> np.ndarray:
    return np.linalg.norm(z, ord=q, axis=-1) if np.ndim(z) == 1 else np.sum(np.abs(z) ** q, axis=-1) ** (1 / q)


def scalar_smoothness_constant(q: float) -> float:
    """Best C in |a+b|^q <= |a|^q + q sgn(a)|a|^(q-1) b + C|b|^q, 1 < q <= 2.

    The l_q inequality splits over coordinates, so this scalar constant is
    also the constant for l_q in every dimension.  Homogeneity reduces it to
    maximizing ``h(s) = |s+1|^q - |s|^q - q sgn(s)|s|^(q-1)`` over s.
    """
    if not 1 < q <= 2:
        raise ValueError("scalar smoothness constant is for 1 < q <= 2")

    def h(s):
        return np.abs(s + 1) ** q - np.abs(s) ** q - q * np.sign(s) * np.abs(s) ** (q - 1)

    grid = np.concatenate([-np.logspace(-4, 4, 20001), np.logspace(-4, 4, 20001), [0.0]])
    vals = h(grid)
    k = int(vals.argmax())
    best = float(vals[k])
    s0 = grid[k]
    if s0 != 0:
        lo, hi = sorted((s0 * 0.99, s0 * 1.01))
        res = minimize_scalar(lambda s: -h(s), bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
        best = max(best, float(-res.fun))
    return best


@dataclass(frozen=True)
class NormContext:
    """l_q norm with smoothness exponent p and constant C.

    For q >= 2: p = 2, C = q - 1.  For 1 < q < 2: p = q and C is the best
    scalar constant (see :func:`scalar_smoothness_constant`).
    """

    q: float
    p: float
    C: float

    @classmethod
    def for_q(cls, q: float) -> "NormContext":
        if not q > 1:
            raise ValueError(f"duality maps need a smooth norm, q > 1 (got {q})")
        if q >= 2:
            return cls(float(q), 2.0, float(q - 1))
        return cls(float(q), float(q), scalar_smoothness_constant(q))

    @property
    def dual(self) -> float:
        return self.q / (self.q - 1)

    def norm(self, z):
        return lq_norm(np.asarray(z, dtype=float), self.q)

    @property
    def K_step(self) -> float:
        """Constant in the step bound of :func:`reduce_dimension_smooth`."""
        return self.p**2 / 2 + 2 * (self.C + self.p)


def duality_map(z: np.ndarray, ctx: NormContext) -> np.ndarray:
    """J_z with <J_z, z> = |z|^p and |J_z|_dual = |z|^(p-1); zero at z = 0.

    Works on a single vector or on a stack of vectors (last axis).
    """
    z = np.asarray(z, dtype=float)
    r = ctx.norm(z)
    safe = np.where(r > 0, r, 1.0)
    u = z / np.expand_dims(safe, -1)
    star = np.sign(u) * np.abs(u) ** (ctx.q - 1)
    J = np.expand_dims(r ** (ctx.p - 1), -1) * star
    return np.where(np.expand_dims(r > 0, -1), J, 0.0)


def smoothness_gap(x: np.ndarray, y: np.ndarray, ctx: NormContext) -> np.ndarray:
    """RHS minus LHS of |x+y|^p <= |x|^p + p<J_x, y> + C|y|^p (>= 0 when it holds)."""
    J = duality_map(x, ctx)
    lhs = ctx.norm(x + y) ** ctx.p
    rhs = ctx.norm(x) ** ctx.p + ctx.p * np.sum(J * y, axis=-1) + ctx.C * ctx.norm(y) ** ctx.p
    return rhs - lhs


# ---------------------------------------------------------------------------
# decomposition


@dataclass(frozen=True, eq=False)
class MartingaleTrace:
    """Batched decomposition of ``f(Z_t) - f(Z_0)`` along trajectories.

    ``M`` and ``N`` have shape (T, t+1, d), ``A`` and ``B`` (T, u+1, d) with
    ``u = t/2``; ``alpha``/``beta`` (T, u) once dominating sequences are
    attached.
    """

    t: int
    trajectory: np.ndarray
    f_values: np.ndarray
    q: float
    M: np.ndarray
    N: np.ndarray
    A: np.ndarray
    B: np.ndarray
    identity_error: float
    alpha: np.ndarray | None = None
    beta: np.ndarray | None = None

    @property
    def u(self) -> int:
        return self.t // 2

    def with_domination(self, alpha, beta) -> "MartingaleTrace":
        return MartingaleTrace(self.t, self.trajectory, self.f_values, self.q, self.M, self.N, self.A, self.B, self.identity_error, alpha, beta)

    def jsonl(self, k: int = 0) -> str:
        """One JSON object per step for trajectory ``k``."""
        lines = []
        for s in range(self.t + 1):
            row = {
                "t": s,
                "M": self.M[k, s].tolist(),
                "N": self.N[k, s].tolist(),
                "A": self.A[k, s].tolist() if s <= self.u else None,
                "B": self.B[k, s].tolist() if s <= self.u else None,
                "alpha": float(self.alpha[k, s - 1]) if self.alpha is not None and 1 <= s <= self.u else None,
                "beta": float(self.beta[k, s - 1]) if self.beta is not None and 1 <= s <= self.u else None,
            }
            lines.append(json.dumps(row))
        return "\n".join(lines) + "\n"


def _as_batch(trajectory) -> np.ndarray:
    traj = np.asarray(trajectory, dtype=np.int64)
    return traj[None, :] if traj.ndim == 1 else traj


def decompose(chain: ReversibleChain, f: np.ndarray, trajectory, q: float = 2.0) -> MartingaleTrace:
    """Forward martingale M, backward martingale N and their even-step sums.

    ``M_0 = f(Z_0)``, ``M_{s+1} - M_s = f(Z_{s+1}) - (Pf)(Z_s)``;
    ``N_0 = f(Z_t)``, ``N_{s+1} - N_s = f(Z_{t-s-1}) - (Pf)(Z_{t-s})``.
    ``A_k`` and ``B_k`` sum the increments ``M_{2s} - M_{2s-1}`` and
    ``N_{2s} - N_{2s-1}`` over s <= k.  The identity
    ``f(Z_t) - f(Z_0) = A_{t/2} - B_{t/2}`` is asserted on every trajectory.
    """
    traj = _as_batch(trajectory)
    t = traj.shape[1] - 1
    if t % 2:
        raise ValueError("A/B identity requires even t")
    check_trajectories(chain, traj)
    F = np.asarray(f, dtype=float)
    F = F[:, None] if F.ndim == 1 else F
    PF = chain.P @ F
    fz = F[traj]  # (T, t+1, d)
    pfz = PF[traj]
    dM = fz[:, 1:] - pfz[:, :-1]  # step s -> s+1, s = 0..t-1
    rev = traj[:, ::-1]
    dN = F[rev[:, 1:]] - PF[rev[:, :-1]]
    M = np.concatenate([fz[:, :1], fz[:, :1] + np.cumsum(dM, axis=1)], axis=1)
    N = np.concatenate([fz[:, -1:], fz[:, -1:] + np.cumsum(dN, axis=1)], axis=1)
    # increments with index 2s-1 -> 2s, s = 1..u
    dA = dM[:, 1::2]
    dB = dN[:, 1::2]
    zero = np.zeros_like(fz[:, :1])
    A = np.concatenate([zero, np.cumsum(dA, axis=1)], axis=1)
    B = np.concatenate([zero, np.cumsum(dB, axis=1)], axis=1)
    err = float(np.abs(fz[:, -1] - fz[:, 0] - (A[:, -1] - B[:, -1])).max()) if t else 0.0
    if err > IDENTITY_TOL:
        raise InvariantViolation("decomposition identity", f"max coordinate error {err:.3e}")
    return MartingaleTrace(t, traj, F, float(q), M, N, A, B, err)


def step_moments(chain: ReversibleChain, D: np.ndarray, p: float) -> np.ndarray:
    """``E[D(Z_0, Z_1)^p | Z_0 = a]`` for every state a."""
    return np.sum(chain.P * D**p, axis=1)


def dominating_sequences(trace: MartingaleTrace, chain: ReversibleChain, p: float, D: np.ndarray | None = None, check: bool = True):
    """alpha_s, beta_s bounding the steps of A and B (shape (T, u) each).

    ``alpha_s^p = 2^(p-1) D(Z_2s-1, Z_2s)^p + 2^(p-1) E[D(Z_2s-1, Z_2s)^p | Z_2s-1]``
    and ``beta_s`` mirrors it on the reversed path, conditioning on
    ``Z_{t-2s+1}`` (the state the backward step starts from).  ``D`` defaults
    to the l_q distances between the f-values; any D dominating them (e.g. a
    metric into which f is 1-Lipschitz) also works.  With ``check`` the
    domination ``|A_s - A_{s-1}| <= alpha_s`` (and for B) is asserted.
    """
    if D is None:
        F = trace.f_values
        D = lq_norm(F[:, None, :] - F[None, :, :], trace.q)
    traj = trace.trajectory
    t, u = trace.t, trace.u
    cm = step_moments(chain, D, p)
    c = 2.0 ** (p - 1)
    odd = traj[:, 1:t:2]  # Z_{2s-1}
    even = traj[:, 2 : t + 1 : 2]  # Z_{2s}
    alpha = (c * D[odd, even] ** p + c * cm[odd]) ** (1 / p)
    rev = traj[:, ::-1]
    b_from = rev[:, 1:t:2]  # Z_{t-2s+1}
    b_to = rev[:, 2 : t + 1 : 2]  # Z_{t-2s}
    beta = (c * D[b_from, b_to] ** p + c * cm[b_from]) ** (1 / p)
    if check and u:
        stepA = lq_norm(np.diff(trace.A, axis=1), trace.q)
        stepB = lq_norm(np.diff(trace.B, axis=1), trace.q)
        for name, step, dom in (("A", stepA, alpha), ("B", stepB, beta)):
            bad = step > dom * (1 + PATH_TOL) + PATH_TOL
            if bad.any():
                k, s = np.argwhere(bad)[0]
                raise InvariantViolation(f"step domination of {name}", f"trajectory {k}, step {s + 1}: {step[k, s]:.6g} > {dom[k, s]:.6g}")
    return alpha, beta


def increment_defects(chain: ReversibleChain, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Conditional means of single M and N increments from each state.

    Entry ``a`` of the first array is ``sum_b P_ab (f(b) - (Pf)(a))``; of the
    second, the same expectation under the reversed kernel, i.e. the mean of
    the backward increment ``f(Z_{t-s-1}) - (Pf)(Z_{t-s})`` given
    ``Z_{t-s} = a``.  Both vanish for a reversible chain.
    """
    F = np.asarray(f, dtype=float).reshape(chain.n, -1)
    PF = chain.P @ F
    fwd = np.einsum("ab,abd->ad", chain.P, F[None, :, :] - PF[:, None, :])
    Pstar = chain.P.T * chain.pi[None, :] / chain.pi[:, None]
    bwd = np.einsum("ab,abd->ad", Pstar, F[None, :, :] - PF[:, None, :])
    return fwd, bwd


# ---------------------------------------------------------------------------
# chain-driven martingales with exact conditional laws


@dataclass(frozen=True, eq=False)
class ChainMartingale:
    """``M_0 = 0``, ``M_t - M_{t-1} = h(Z_t) - (Ph)(Z_{t-1})``.

    The one-step conditional law given the past is the row of ``P`` at the
    current state, so conditional expectations are exact.  With ``h = f`` this
    is ``M - M_0`` for the forward martingale of :func:`decompose`.
    """

    chain: ReversibleChain
    h: np.ndarray
    succ: np.ndarray = field(init=False, repr=False)
    probs: np.ndarray = field(init=False, repr=False)
    incr: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        h = h[:, None] if h.ndim == 1 else h
        object.__setattr__(self, "h", h)
        succ, _ = self.chain.step_table()
        valid = np.take_along_axis(self.chain.P, succ, axis=1) > 0
        probs = np.where(valid, np.take_along_axis(self.chain.P, succ, axis=1), 0.0)
        Ph = self.chain.P @ h
        incr = h[succ] - Ph[:, None, :]
        object.__setattr__(self, "succ", succ)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "incr", incr)

    def paths(self, trajectory) -> np.ndarray:
        traj = _as_batch(trajectory)
        check_trajectories(self.chain, traj)
        Ph = self.chain.P @ self.h
        d = self.h[traj[:, 1:]] - Ph[traj[:, :-1]]
        zero = np.zeros((traj.shape[0], 1, self.h.shape[1]))
        return np.concatenate([zero, np.cumsum(d, axis=1)], axis=1)

    def cond_moment(self, ctx: NormContext) -> np.ndarray:
        """``E[|M_t - M_{t-1}|^p | Z_{t-1} = a]`` per state."""
        return np.sum(self.probs * ctx.norm(self.incr) ** ctx.p, axis=1)


def enumerate_paths(n: int, t: int, start=None) -> np.ndarray:
    """Every state sequence of length t+1 (optionally with a fixed start)."""
    grids = [range(n) if start is None else [start]] + [range(n)] * t
    return np.array(np.meshgrid(*grids, indexing="ij")).reshape(t + 1, -1).T


def feasible_paths(chain: ReversibleChain, t: int) -> np.ndarray:
    paths = enumerate_paths(chain.n, t)
    ok = np.all(chain.P[paths[:, :-1], paths[:, 1:]] > 0, axis=1)
    return paths[ok]


def coins(coin_seed: int, t: int, size: int) -> np.ndarray:
    """Fair signs, column s drawn from the stream ``(coin_seed, "coin", s)``."""
    out = np.empty((size, t + 1))
    out[:, 0] = 0
    for s in range(1, t + 1):
        out[:, s] = seeding.rng(coin_seed, "coin", s).choice([-1.0, 1.0], size)
    return out


def _perp(N: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(N, axis=-1, keepdims=True)
    rot = np.stack([-N[..., 1], N[..., 0]], axis=-1)
    default = np.broadcast_to(np.array([0.0, 1.0]), N.shape)
    return np.where(r > 0, rot / np.where(r > 0, r, 1.0), default)


# -- Hilbert case


def hilbert_step(M_prev: np.ndarray, M_next: np.ndarray, N_prev: np.ndarray, coin: np.ndarray) -> np.ndarray:
    """Next point of the planar martingale with matching norms and step sizes.

    The parallel coordinate is ``<M_next, M_prev>/|M_prev|`` along ``N_prev``;
    the perpendicular one carries the rest of ``|M_next|`` with the coin's
    sign.  Raises on inconsistent inputs (negative perpendicular mass).
    """
    r = np.linalg.norm(M_prev, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    par = np.where(r > 0, np.sum(M_next * M_prev, axis=-1) / safe, 0.0)
    perp2 = np.sum(M_next**2, axis=-1) - par**2
    scale = np.maximum(1.0, np.sum(M_next**2, axis=-1))
    if np.any(perp2 < -1e-9 * scale):
        raise ValueError("norm inconsistency: step incompatible with |M_t| and |M_t+1|")
    perp = np.sqrt(np.maximum(perp2, 0.0))
    rN = np.linalg.norm(N_prev, axis=-1, keepdims=True)
    along = np.where(rN > 0, N_prev / np.where(rN > 0, rN, 1.0), np.array([1.0, 0.0]))
    return par[..., None] * along + (coin * perp)[..., None] * _perp(N_prev)


def reduce_dimension_hilbert(M: np.ndarray, coin_seed: int = 0, coin_values: np.ndarray | None = None) -> np.ndarray:
    """Planar paths N with |N_t| = |M_t| and |N_t+1 - N_t| = |M_t+1 - M_t|.

    ``M`` has shape (T, t+1, d) with Euclidean norm; ``N_0 = (|M_0|, 0)``.
    """
    M = np.asarray(M, dtype=float)
    T, L, _ = M.shape
    eps = coins(coin_seed, L - 1, T) if coin_values is None else coin_values
    N = np.zeros((T, L, 2))
    N[:, 0, 0] = np.linalg.norm(M[:, 0], axis=-1)
    for s in range(1, L):
        N[:, s] = hilbert_step(M[:, s - 1], M[:, s], N[:, s - 1], eps[:, s])
    return N


def hilbert_equalities(M: np.ndarray, N: np.ndarray) -> tuple[float, float]:
    """Max deviations of |N_t| - |M_t| and of the step norms."""
    a = np.abs(np.linalg.norm(N, axis=-1) - np.linalg.norm(M, axis=-1)).max()
    b = np.abs(np.linalg.norm(np.diff(N, axis=1), axis=-1) - np.linalg.norm(np.diff(M, axis=1), axis=-1)).max()
    return float(a), float(b)


# -- uniformly smooth case


def smooth_step(M_prev, dM, N_prev, delta, cond_moment, coin, ctx: NormContext) -> np.ndarray:
    """One step ``N_t - N_{t-1}`` of the planar process for an l_q martingale.

    parallel: ``N_{t-1} (p/2) (<J_{M_{t-1}}, dM> 1_A - delta) / |N_{t-1}|^2``
    with ``A = {|dM|^p <= |N_{t-1}|^2}``; perpendicular: the coin times
    ``sqrt(C+p)|dM|^(p/2) + sqrt(p) cond_moment^(1/2)``.  The parallel term
    is 0 when ``N_{t-1} = 0`` and the perpendicular direction is then (0, 1).
    """
    p = ctx.p
    n2 = np.sum(N_prev**2, axis=-1)
    J = duality_map(M_prev, ctx)
    x = np.sum(J * dM, axis=-1)
    inA = ctx.norm(dM) ** p <= n2
    par = np.where(n2 > 0, (p / 2) * (np.where(inA, x, 0.0) - delta) / np.where(n2 > 0, n2, 1.0), 0.0)
    perp = np.sqrt(ctx.C + p) * ctx.norm(dM) ** (p / 2) + np.sqrt(p) * np.sqrt(cond_moment)
    return par[..., None] * N_prev + (coin * perp)[..., None] * _perp(N_prev)


def _delta(cm: ChainMartingale, state, M_prev, N_prev, ctx: NormContext) -> np.ndarray:
    """``E[<J_{M_{t-1}}, dM> 1_A | F_{t-1}]`` from the exact successor law."""
    incr = cm.incr[state]  # (T, k, d)
    probs = cm.probs[state]  # (T, k)
    J = duality_map(M_prev, ctx)[:, None, :]
    x = np.sum(J * incr, axis=-1)
    inA = ctx.norm(incr) ** ctx.p <= np.sum(N_prev**2, axis=-1)[:, None]
    return np.sum(probs * np.where(inA, x, 0.0), axis=1)


@dataclass(frozen=True, eq=False)
class SmoothReduction:
    M: np.ndarray  # (T, t+1, d)
    N: np.ndarray  # (T, t+1, 2)
    claim_i_gap: np.ndarray  # |N_t - N_0|^2 - |M_t - M_0|^p, (T, t+1)
    step_ratio: np.ndarray  # |dN|^2 / (|dM|^p + E[|dM|^p | past]), (T, t); nan on 0/0
    K: float
    ctx: NormContext

    @property
    def K_emp(self) -> float:
        vals = self.step_ratio[np.isfinite(self.step_ratio)]
        return float(vals.max()) if vals.size else 0.0

    @property
    def claim_i_holds(self) -> bool:
        lhs_scale = 1.0 + np.abs(self.claim_i_gap)
        return bool(np.all(self.claim_i_gap >= -PATH_TOL * lhs_scale))

    @property
    def claim_ii_holds(self) -> bool:
        return bool(np.all(~(self.step_ratio > self.K * (1 + PATH_TOL))))


def reduce_dimension_smooth(cm: ChainMartingale, trajectory, ctx: NormContext, coin_seed: int = 0, coin_values: np.ndarray | None = None) -> SmoothReduction:
    """Planar martingale dominating an l_q chain martingale pathwise.

    Returns the paths together with the two pathwise checks:
    (i) ``|M_t - M_0|^p <= |N_t - N_0|^2`` and
    (ii) ``|N_t - N_{t-1}|^2 <= K (|M_t - M_{t-1}|^p + E[|M_t - M_{t-1}|^p | F_{t-1}])``
    with ``K = p^2/2 + 2(C + p)``.
    """
    traj = _as_batch(trajectory)
    M = cm.paths(traj)
    T, L, _ = M.shape
    eps = coins(coin_seed, L - 1, T) if coin_values is None else coin_values
    cmom = cm.cond_moment(ctx)
    N = np.zeros((T, L, 2))
    ratio = np.full((T, L - 1), np.nan)
    for s in range(1, L):
        a = traj[:, s - 1]
        dM = M[:, s] - M[:, s - 1]
        delta = _delta(cm, a, M[:, s - 1], N[:, s - 1], ctx)
        dN = smooth_step(M[:, s - 1], dM, N[:, s - 1], delta, cmom[a], eps[:, s], ctx)
        N[:, s] = N[:, s - 1] + dN
        denom = ctx.norm(dM) ** ctx.p + cmom[a]
        num = np.sum(dN**2, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio[:, s - 1] = np.where(denom > 0, num / denom, np.where(num > 0, np.inf, np.nan))
    gap = np.sum((N - N[:, :1]) ** 2, axis=-1) - ctx.norm(M - M[:, :1]) ** ctx.p
    return SmoothReduction(M, N, gap, ratio, ctx.K_step, ctx)


def smooth_martingale_defect(cm: ChainMartingale, trajectory, ctx: NormContext, coin_seed: int = 0) -> float:
    """Max |E[N_t - N_{t-1} | F_{t-1}]| over path prefixes, computed exactly.

    For every prefix the next chain state and the next coin are both
    enumerated with their exact probabilities.
    """
    red = reduce_dimension_smooth(cm, trajectory, ctx, coin_seed)
    traj = _as_batch(trajectory)
    cmom = cm.cond_moment(ctx)
    worst = 0.0
    T, L, _ = red.M.shape
    for s in range(1, L):
        a = traj[:, s - 1]
        M_prev, N_prev = red.M[:, s - 1], red.N[:, s - 1]
        delta = _delta(cm, a, M_prev, N_prev, ctx)
        mean = np.zeros((T, 2))
        for k in range(cm.succ.shape[1]):
            w = cm.probs[a, k]
            dM = cm.incr[a, k]
            for c in (-1.0, 1.0):
                mean += 0.5 * w[:, None] * smooth_step(M_prev, dM, N_prev, delta, cmom[a], np.full(T, c), ctx)
        worst = max(worst, float(np.abs(mean).max()))
    return worst


def hilbert_martingale_defect(cm: ChainMartingale, trajectory, coin_seed: int = 0) -> float:
    """Max |E[N_{t+1} - N_t | F_t]| for the Hilbert reduction, exactly."""
    traj = _as_batch(trajectory)
    M = cm.paths(traj)
    N = reduce_dimension_hilbert(M, coin_seed)
    T, L, _ = M.shape
    worst = 0.0
    for s in range(1, L):
        a = traj[:, s - 1]
        mean = np.zeros((T, 2))
        for k in range(cm.succ.shape[1]):
            w = cm.probs[a, k]
            M_next = M[:, s - 1] + cm.incr[a, k]
            for c in (-1.0, 1.0):
                mean += 0.5 * w[:, None] * (hilbert_step(M[:, s - 1], M_next, N[:, s - 1], np.full(T, c)) - N[:, s - 1])
        worst = max(worst, float(np.abs(mean).max()))
    return worst


# ---------------------------------------------------------------------------
# Pisier-type moment ratio


def pisier_ratio(M: np.ndarray, ctx: NormContext) -> float:
    """``E|M_n - M_0|^p / sum_t E|M_{t+1} - M_t|^p`` over a batch of paths."""
    M = np.asarray(M, dtype=float)
    num = np.mean(ctx.norm(M[:, -1] - M[:, 0]) ** ctx.p)
    den = np.sum(np.mean(ctx.norm(np.diff(M, axis=1)) ** ctx.p, axis=0))
    if den <= 0:
        raise ValueError("zero denominator: the martingale never moves")
    return float(num / den)


@dataclass(frozen=True)
class PisierReport:
    ratios: tuple[tuple[str, float], ...]

    @property
    def max_ratio(self) -> float:
        return max(r for _, r in self.ratios)


def pisier_check(instances: dict[str, np.ndarray], ctx: NormContext) -> PisierReport:
    return PisierReport(tuple((name, pisier_ratio(M, ctx)) for name, M in instances.items()))


def sign_martingale(steps: int, dim: int, trials: int, seed: int, scales: np.ndarray | None = None) -> np.ndarray:
    """Paths of ``sum_i eps_i v_i`` with fair signs and Gaussian v_i.

    ``v_i`` is independent of ``eps_i`` so the increments are centred given
    the past; with ``dim = 1`` and ``scales`` all ones this is the simple
    random walk.
    """
    g = seeding.rng(seed, "sign-martingale", steps, dim)
    signs = g.choice([-1.0, 1.0], size=(trials, steps, 1))
    if scales is not None:
        v = np.broadcast_to(np.asarray(scales, dtype=float).reshape(1, steps, -1), (trials, steps, dim))
    else:
        v = g.standard_normal((trials, steps, dim))
    inc = signs * v
    zero = np.zeros((trials, 1, dim))
    return np.concatenate([zero, np.cumsum(inc, axis=1)], axis=1)
