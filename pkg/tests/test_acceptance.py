"""Acceptance criteria 1-11, one test each, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (the lines appear in
the "acceptance criteria" section of the summary) or ``python
tests/test_acceptance.py``.
"""

import json
import math

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_reversible_chain
from markovtype import chains, cli, embeddings, martingales, partitions, spaces, tailcheck


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


CHAIN_SPACES = ["hypercube:4", "grid:8,8", "diamond:2", "laakso:2", "random_tree:64"]


def _chain_battery():
    out = []
    for spec in CHAIN_SPACES:
        X = spaces.generate(*spaces.parse_space_spec(spec), seed=1)
        out.append((spec, X, chains.random_walk(X.graph, 0.25)))
    return out


def test_criterion_01_decomposition_identity():
    worst, paths = 0.0, 0
    for k, (spec, X, ch) in enumerate(_chain_battery()):
        F = np.random.default_rng(k).normal(size=(X.n, 3))
        for t in range(2, 33, 2):
            traj = chains.sample_trajectories(ch, t, 128, 100 * k + t)
            worst = max(worst, martingales.decompose(ch, F, traj).identity_error)
            paths += len(traj)
    report(1, paths >= 10_000 and worst <= 1e-9, f"{paths} trajectories, 5 chains, t=2..32, max error {worst:.2e}")


def test_criterion_02_martingale_property():
    worst, tested = 0.0, 0
    rng = np.random.default_rng(2)
    battery = [ch for _, _, ch in _chain_battery()]
    battery += [random_reversible_chain(rng, int(rng.integers(2, 11)), 0.4) for _ in range(20)]
    for ch in battery:
        fwd, bwd = martingales.increment_defects(ch, rng.normal(size=(ch.n, 4)))
        worst = max(worst, np.abs(fwd).max(), np.abs(bwd).max())
        tested += ch.n
    report(2, worst <= 1e-9, f"{len(battery)} chains, {tested} states, max conditional mean {worst:.2e}")


def test_criterion_03_threshold_contract():
    eps = 1 / 16
    G = spaces.generate("grid", (16, 16))
    rows, ok = [], True
    for tau in (2.0, 4.0, 8.0, 16.0):
        delta_emp = partitions.padding_report(G, tau / 2, eps, 100_000, 0).delta_emp
        emap = embeddings.build_threshold_map(G, tau, 4096, 0)
        audit = embeddings.audit_threshold(G, emap, tau, eps, delta_emp, slack=1.25)
        ok &= audit.lip_emp <= 1 + 1e-9 and audit.K_emp <= audit.K_bound
        rows.append(f"tau={tau:g}: K={audit.K_emp:.2f}/{audit.K_bound:.1f} lip={audit.lip_emp:.3f}")
    # Lipschitz property on other spaces and scales
    for spec in CHAIN_SPACES:
        X = spaces.generate(*spaces.parse_space_spec(spec), seed=1)
        for tau in (X.min_distance, X.diam / 4, X.diam):
            emap = embeddings.build_threshold_map(X, tau, 256, 3)
            ok &= embeddings.audit_threshold(X, emap, tau).lip_emp <= 1 + 1e-9
    report(3, ok, "grid(16,16) m=4096 eps=1/16: " + "; ".join(rows))


def test_criterion_04_pair_second_moment():
    X = spaces.FiniteMetricSpace(np.array([[0.0, 1.0], [1.0, 0.0]]), "pair")
    m, ok, rows = 10_000, True, []
    for tau in (0.5, 1.0):
        Delta = tau / 2
        emap = embeddings.build_threshold_map(X, tau, m, 4)
        vals = (emap.coords[0] - emap.coords[1]) ** 2 * m  # per-coordinate squared gaps
        mean, se = vals.mean(), vals.std(ddof=1) / math.sqrt(m)
        for eps in (1 / 8, 1 / 4, 1 / 2):
            delta = partitions.padding_report(X, Delta, eps, 10_000, 4).delta_emp
            bound = delta / 4 * eps**2 * Delta**2
            ok &= mean + 3 * se >= bound
            rows.append(f"tau={tau:g},eps={eps:g}: {mean:.4f}>={bound:.5f}")
    report(4, ok, "; ".join(rows))


def test_criterion_05_hilbert_markov_type():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 11))
        ch = random_reversible_chain(rng, n, float(rng.uniform(0, 1)))
        pts = rng.normal(size=(n, int(rng.integers(1, 5))))
        worst = max(worst, chains.markov_type_ratio(ch, None, pts, 2, range(1, 33)).max_ratio)
    report(5, worst <= 1 + 1e-9, f"50 chains, t<=32, max ratio {worst:.12f}")


def test_criterion_06_enflo():
    ok, rows = True, []
    for n in range(2, 11):
        cube = spaces.generate("hypercube", (n,))
        ham = chains.enflo_ratio(np.arange(cube.n), 2, cube).ratio
        euc = chains.enflo_ratio(chains.cube_coordinates(n), 2).ratio
        ok &= ham == n and abs(euc - 1) <= 1e-12
        rows.append(f"{n}:{ham:g}/{euc:.12g}")
    report(6, ok, "n: hamming/euclidean " + " ".join(rows))


def test_criterion_07_duality():
    rng = np.random.default_rng(7)
    worst_id, violations = 0.0, 0
    for q in (2.0, 3.0, 4.0, 8.0):
        ctx = martingales.NormContext.for_q(q)
        z = rng.normal(size=(100_000, 5)) * rng.lognormal(0, 1, (100_000, 1))
        J = martingales.duality_map(z, ctx)
        r = ctx.norm(z)
        e1 = np.abs(np.sum(J * z, axis=1) - r**ctx.p) / np.maximum(1, r**ctx.p)
        e2 = np.abs(martingales.lq_norm(J, ctx.dual) - r ** (ctx.p - 1)) / np.maximum(1, r ** (ctx.p - 1))
        worst_id = max(worst_id, e1.max(), e2.max())
        for _ in range(10):
            x = rng.normal(size=(100_000, 4)) * rng.lognormal(0, 1, (100_000, 1))
            y = rng.normal(size=(100_000, 4)) * rng.lognormal(0, 1, (100_000, 1))
            gap = martingales.smoothness_gap(x, y, ctx)
            scale = np.maximum(1, ctx.norm(x + y) ** 2 + ctx.norm(x) ** 2 + ctx.norm(y) ** 2)
            violations += int(np.sum(gap < -1e-9 * scale))
    report(7, worst_id <= 1e-9 and violations == 0, f"identity error {worst_id:.2e}; 4x10^6 pairs, {violations} violations")


def test_criterion_08_dimension_reduction(three_state_chain):
    ch = three_state_chain
    ok, rows = True, []
    enumerated = martingales.enumerate_paths(3, 6)
    sampled = chains.sample_trajectories(ch, 24, 10_000, 8)
    for q in (2.0, 4.0):
        ctx = martingales.NormContext.for_q(q)
        cm = martingales.ChainMartingale(ch, np.random.default_rng(int(q)).normal(size=(3, 3)))
        for name, paths in (("enum", enumerated), ("sampled", sampled)):
            red = martingales.reduce_dimension_smooth(cm, paths, ctx, coin_seed=8)
            M = cm.paths(paths)
            eq = max(martingales.hilbert_equalities(M, martingales.reduce_dimension_hilbert(M, 8)))
            ok &= red.claim_i_holds and red.claim_ii_holds and eq <= 1e-9
            rows.append(f"q={q:g} {name}({len(paths)}): K_emp={red.K_emp:.2f}<=K={red.K:g} eq={eq:.1e}")
    report(8, ok and len(enumerated) >= 729, "; ".join(rows))


@pytest.fixture(scope="module")
def grid16_experiments():
    G = spaces.generate("grid", (16, 16))
    ch = chains.random_walk(G.graph, 0.5)
    return {t: tailcheck.run_family_experiment(G, ch, None, t, 2000, 2.0, 9, 128) for t in (8, 64)}


def test_criterion_09_tail_harness(grid16_experiments):
    exps = grid16_experiments
    ok = all(e.domination_slack >= 0 for e in exps.values())
    parts = []
    for side in "AB":
        r8, r64 = (tailcheck.tail_report(exps[t], side=side).ratio for t in (8, 64))
        band = max(r8, r64) / min(r8, r64)
        ok &= band < 2
        parts.append(f"{side}: {r8:.4f} vs {r64:.4f}")
    n = 16
    inc = np.random.default_rng(9).choice([-1.0, 1.0], (100_000, n))
    pm = tailcheck.tail_report(tailcheck.family_from_increments(inc, 2.0, 1.0))
    ok &= abs(pm.lhs - n / 2) <= 0.05 * n / 2 and abs(pm.rhs - 4 * n) <= 0.05 * 4 * n
    parts.append(f"+-1: LHS={pm.lhs:.3f} (n/2={n / 2:g}) RHS={pm.rhs:g} (4n={4 * n})")
    report(9, ok, "domination exact; ratio t=8 vs 64 " + "; ".join(parts))


def test_criterion_10_stationarity_budget(grid16_experiments, grid8):
    exps = list(grid16_experiments.values())
    exps.append(tailcheck.run_family_experiment(grid8, chains.random_walk(grid8.graph, 0.5), None, 16, 2000, 2.0, 10, 64))
    checks = [tailcheck.stationarity_budget(e, side) for e in exps for side in "AB"]
    ok = all(c.ok for c in checks)
    worst = max((c.mean - c.budget) / c.stderr for c in checks)
    report(10, ok, f"{len(checks)} checks, worst (mean - budget)/SE = {worst:+.2f} (limit +3)")


def test_criterion_11_reproducibility(tmp_path):
    runs = {
        "gen": ["--space", "random_tree:40"],
        "partition": ["--space", "grid:6,6", "--trials", "500"],
        "embed": ["--space", "grid:8,8", "--tau", "4", "--m", "64", "--audit"],
        "mtype": ["--space", "hypercube:4", "--method", "montecarlo", "--trials", "500"],
        "enflo": ["--dims", "2:6"],
        "mgverify": ["--space", "laakso:2", "--t", "2,8", "--trials", "100"],
        "tailverify": ["--space", "grid:6,6", "--t", "4,8", "--trials", "300", "--m", "32"],
    }
    ok, checked = True, 0
    for cmd, args in runs.items():
        a, b = tmp_path / cmd / "a", tmp_path / cmd / "b"
        ok &= cli.run([cmd, *args, "--seed", "11", "--out", str(a)]) == 0
        ok &= cli.run([cmd, *args, "--seed", "11", "--out", str(b)]) == 0
        for name in json.loads((a / "manifest.json").read_text())["files"]:
            ok &= (a / name).read_bytes() == (b / name).read_bytes()
            checked += 1
    report(11, ok, f"{len(runs)} commands, {checked} report files byte-identical")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
