"""Command-line front end: seeded batch runs that write JSON/CSV reports.

Every command writes its reports plus ``manifest.json`` into ``--out``.
Reports depend only on the configuration (including ``--seed``); the
manifest also records the wall time, so it is the one file that differs
between identical runs.

Exit codes: 0 success, 2 an asserted invariant failed, 3 bad configuration
or unreadable input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import tempfile
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import chains, embeddings, martingales, partitions, spaces, tailcheck
from .errors import InvariantViolation

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 2, 3

COMMANDS = ("gen", "partition", "embed", "mtype", "enflo", "mgverify", "tailverify")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# argument types


def int_list(text: str) -> list[int]:
    """``"1:16"`` (inclusive range), ``"2,4,8"`` or a single integer."""
    text = str(text).strip()
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a range a:b or a comma list, got {text!r}") from None


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
        return v

    return conv


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--space", default="grid:8,8", help="generator spec like grid:8,8, or a graph/.json file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--trials", type=_positive(int), default=1000)
    common.add_argument("--p", type=float, default=2.0)
    common.add_argument("--exact-cap", type=_positive(int), default=chains.EXACT_CAP)
    common.add_argument("--config", help="JSON file with option values (keys as the long flag names)")

    parser = _Parser(prog="markovtype", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("gen", parents=[common], help="generate a space and write it as JSON")

    sp = sub.add_parser("partition", parents=[common], help="padding frequencies of ball-carving partitions")
    sp.add_argument("--scales", type=int_list, default=None, help="exponents j0:j1, Delta = 2^j")
    sp.add_argument("--eps", type=float, default=1 / 16)

    sp = sub.add_parser("embed", parents=[common], help="threshold or snowflake map, optional audit")
    sp.add_argument("--tau", type=_positive(float), default=None, help="threshold scale (default: diam/4)")
    sp.add_argument("--m", type=_positive(int), default=256, help="coordinates (per scale for snowflake)")
    sp.add_argument("--snowflake", type=float, default=None, metavar="EPS", help="build the snowflake map instead")
    sp.add_argument("--audit", action="store_true")

    sp = sub.add_parser("mtype", parents=[common], help="Markov-type ratios of a random walk")
    sp.add_argument("--t", type=int_list, default=list(range(1, 17)))
    sp.add_argument("--laziness", type=float, default=0.5)
    sp.add_argument("--chain", default=None, help="chain JSON (default: random walk on the space's graph)")
    sp.add_argument("--method", choices=("exact", "montecarlo"), default="exact")

    sp = sub.add_parser("enflo", parents=[common], help="Enflo diagonal/edge ratio on a hypercube")
    sp.add_argument("--dims", type=int_list, default=list(range(2, 11)))
    sp.add_argument("--euclidean", action="store_true", help="use the Euclidean image of the cube")

    sp = sub.add_parser("mgverify", parents=[common], help="decomposition identity, martingale and domination checks")
    sp.add_argument("--t", type=int_list, default=[8])
    sp.add_argument("--laziness", type=float, default=0.5)
    sp.add_argument("--chain", default=None)
    sp.add_argument("--tau", type=_positive(float), default=None)
    sp.add_argument("--m", type=_positive(int), default=64)

    sp = sub.add_parser("tailverify", parents=[common], help="tail inequalities on threshold-map families")
    sp.add_argument("--t", type=int_list, default=[8])
    sp.add_argument("--laziness", type=float, default=0.5)
    sp.add_argument("--chain", default=None)
    sp.add_argument("--scales", type=int_list, default=None)
    sp.add_argument("--m", type=_positive(int), default=128)
    sp.add_argument("--beta", type=float, default=5.0)
    sp.add_argument("--delta", type=float, default=0.25)
    return parser


_META = {"command", "config"}


def parse_config(argv: list[str]) -> argparse.Namespace:
    """Parse flags, layering an optional ``--config`` JSON file underneath them."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        path = Path(args.config)
        try:
            cfg = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(cfg, dict):
            raise ConfigError(f"{path}: top level must be an object")
        known = set(vars(args)) - _META
        keys = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = sorted(set(keys) - known)
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {unknown}")
        # config values become defaults; explicit flags still win
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k: _coerce(sub, k, v) for k, v in keys.items()})
        args = parser.parse_args(argv)
    _validate(args)
    return args


def _coerce(parser, dest, value):
    for action in parser._actions:
        if action.dest == dest and action.type is not None and not isinstance(value, (list, bool)):
            try:
                return action.type(str(value))
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise ConfigError(f"config key {dest}: {exc}") from None
    return value


def _validate(args) -> None:
    if args.command in ("mtype", "tailverify", "mgverify", "enflo") and not args.p >= 1:
        raise ConfigError(f"--p must be at least 1, got {args.p}")
    if args.command == "tailverify":
        if not 1 < args.p <= 2:
            raise ConfigError(f"tailverify needs 1 < p <= 2, got {args.p}")
        if not args.beta > 1 or not 0 < args.delta < args.beta - 1:
            raise ConfigError("need beta > 1 and 0 < delta < beta - 1")
    if args.command in ("tailverify", "mgverify"):
        bad = [t for t in args.t if t < 2 or t % 2]
        if bad:
            raise ConfigError(f"--t values must be even and >= 2, got {bad}")
    if args.command == "mtype" and (not args.t or min(args.t) < 1):
        raise ConfigError("--t values must be >= 1")
    if not 0 <= getattr(args, "laziness", 0.0) < 1:
        raise ConfigError("--laziness must lie in [0, 1)")
    if args.command == "partition" and not 0 < args.eps <= 0.5:
        raise ConfigError("--eps must lie in (0, 1/2]")
    if args.command == "embed" and args.snowflake is not None and not 0 < args.snowflake < 1:
        raise ConfigError("--snowflake EPS must lie in (0, 1)")


def config_dict(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "config"}


# ---------------------------------------------------------------------------
# helpers


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _table(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return dumps(rows)
    if not rows:
        return ""
    cols = list(rows[0])
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols))
    return "\n".join(lines) + "\n"


def load_space_arg(text: str, seed: int) -> spaces.FiniteMetricSpace:
    path = Path(text)
    if path.exists():
        return spaces.load_space(path)
    kind, params = spaces.parse_space_spec(text)
    if kind not in spaces.SPACE_KINDS:
        raise ConfigError(f"--space {text!r} is neither a file nor a generator spec")
    return spaces.generate(kind, params, seed=seed)


def load_chain_arg(args, space) -> chains.ReversibleChain:
    if args.chain:
        ch = chains.load_chain(args.chain)
    elif space.graph is not None:
        ch = chains.random_walk(space.graph, args.laziness)
    else:
        raise ConfigError("space has no graph; pass --chain")
    if ch.n != space.n:
        raise ConfigError(f"chain has {ch.n} states, space has {space.n} points")
    return ch


# ---------------------------------------------------------------------------
# commands (each returns {filename: text})


def cmd_gen(args) -> dict[str, str]:
    space = load_space_arg(args.space, args.seed)
    obj = spaces.space_to_json(space)
    if space.labels is not None:
        obj["labels"] = list(space.labels)
    out = {"space.json": dumps(obj)}
    if space.graph is not None:
        out["graph.txt"] = spaces.format_graph(space.graph)
    return out


def cmd_partition(args) -> dict[str, str]:
    space = load_space_arg(args.space, args.seed)
    scales = args.scales if args.scales is not None else list(tailcheck.default_scales(space))
    reports = partitions.padding_sweep(space, scales, args.eps, args.trials, args.seed)
    if args.format == "json":
        return {"padding.json": dumps([r.to_json() for r in reports])}
    rows = [{"delta": r.delta, "eps": r.eps, "trials": r.trials, "delta_emp": r.delta_emp, "min_point": int(r.padded_count.argmin())} for r in reports]
    return {"padding.csv": _table(rows, "csv")}


def cmd_embed(args) -> dict[str, str]:
    space = load_space_arg(args.space, args.seed)
    out = {}
    if args.snowflake is not None:
        emap = embeddings.build_snowflake_map(space, args.snowflake, args.m, args.seed)
        out["map.json"] = embeddings.dumps_map(emap)
        if args.audit:
            audit = embeddings.audit_snowflake(space, emap, args.snowflake)
            out["audit.json"] = dumps({k: v for k, v in vars(audit).items()})
            if not (audit.lower_ok and audit.upper_ok):
                raise InvariantViolation("snowflake bi-Lipschitz bounds", f"lower ratio {audit.lower_ratio:.6g}, upper ratio {audit.upper_ratio:.6g}")
        return out
    tau = args.tau if args.tau is not None else space.diam / 4
    emap = embeddings.build_threshold_map(space, tau, args.m, args.seed)
    out["map.json"] = embeddings.dumps_map(emap)
    if args.audit:
        audit = embeddings.audit_threshold(space, emap, tau)
        out["audit.csv"] = audit.csv()
        out["audit_summary.json"] = dumps({"tau": tau, "K_emp": audit.K_emp, "lip_emp": audit.lip_emp, "pairs": int(len(audit.d))})
        if not audit.ok:
            i, j, kind = audit.violations[0]
            raise InvariantViolation("threshold map 1-Lipschitz", f"pair ({i}, {j}) {kind}")
    return out


def cmd_mtype(args) -> dict[str, str]:
    space = load_space_arg(args.space, args.seed)
    ch = load_chain_arg(args, space)
    rep = chains.markov_type_ratio(ch, space, None, args.p, args.t, args.method, args.trials, args.seed, args.exact_cap)
    if args.format == "json":
        return {"mtype.json": dumps({"p": rep.p, "one_step": rep.one_step, "rows": [vars(r) for r in rep.rows]})}
    return {"mtype.csv": rep.csv()}


def cmd_enflo(args) -> dict[str, str]:
    rows = []
    for n in args.dims:
        if args.euclidean:
            res = chains.enflo_ratio(chains.cube_coordinates(n), args.p)
        else:
            cube = spaces.generate("hypercube", (n,))
            res = chains.enflo_ratio(np.arange(cube.n), args.p, cube)
        rows.append({"n": n, "p": args.p, "diagonal_sum": res.diagonal_sum, "edge_sum": res.edge_sum, "ratio": res.ratio})
    name = "enflo.json" if args.format == "json" else "enflo.csv"
    return {name: _table(rows, args.format)}


def cmd_mgverify(args) -> dict[str, str]:
    space = load_space_arg(args.space, args.seed)
    ch = load_chain_arg(args, space)
    tau = args.tau if args.tau is not None else space.diam / 4
    F = embeddings.build_threshold_map(space, tau, args.m, args.seed).coords
    fwd, bwd = martingales.increment_defects(ch, F)
    defect = float(max(np.abs(fwd).max(), np.abs(bwd).max()))
    if defect > martingales.MARTINGALE_TOL:
        raise InvariantViolation("martingale property", f"conditional mean {defect:.3e}")
    rows, out = [], {}
    for t in args.t:
        traj = chains.sample_trajectories(ch, t, args.trials, args.seed)
        tr = martingales.decompose(ch, F, traj)
        a, b = martingales.dominating_sequences(tr, ch, args.p, D=space.dist, check=True)
        stepA = np.linalg.norm(np.diff(tr.A, axis=1), axis=-1)
        slack = float((a - stepA).min())
        rows.append({"t": t, "identity_error": tr.identity_error, "martingale_defect": defect, "domination_slack": slack, "mean_sum_alpha_p": float(np.mean(np.sum(a**args.p, axis=1)))})
        out[f"trace_t{t}.jsonl"] = tr.with_domination(a, b).jsonl(0)
    name = "mgverify.json" if args.format == "json" else "mgverify.csv"
    out[name] = _table(rows, args.format)
    return out


def cmd_tailverify(args) -> dict[str, str]:
    space = load_space_arg(args.space, args.seed)
    ch = load_chain_arg(args, space)
    out, summary = {}, []
    for t in args.t:
        exp = tailcheck.run_family_experiment(space, ch, args.scales, t, args.trials, args.p, args.seed, args.m)
        entry = {"t": t, "scales": list(exp.scales), "K_threshold": list(exp.K_threshold), "domination_slack": exp.domination_slack}
        for side in "AB":
            rep = tailcheck.tail_report(exp, side=side, beta=args.beta, delta=args.delta)
            out[f"tail_t{t}_{side}.csv"] = rep.csv()
            budget = tailcheck.stationarity_budget(exp, side)
            entry[side] = rep.summary() | {"budget": vars(budget)}
            if not budget.ok:
                raise InvariantViolation("stationarity budget", f"t={t} side {side}: {budget.mean:.6g} > {budget.budget:.6g}")
            out[f"triples_t{t}_{side}.csv"] = tailcheck.osekowski_triple_check(exp, None, args.beta, args.delta, side).csv()
        e2e = tailcheck.end_to_end(exp, exact=space.n <= args.exact_cap)
        entry["end_to_end"] = e2e.to_json()
        if not e2e.holds:
            raise InvariantViolation("end-to-end bound", f"t={t}: {e2e.moment_emp:.6g} vs {e2e.bound:.6g}")
        summary.append(entry)
    out["tail_summary.json"] = dumps(summary)
    return out


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


# ---------------------------------------------------------------------------
# entry point


def _versions() -> dict:
    def ver(name):
        try:
            return metadata.version(name)
        except metadata.PackageNotFoundError:
            return None

    return {"artifact": ver("artifact"), "numpy": np.__version__, "scipy": ver("scipy"), "python": platform.python_version()}


def run(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    start = time.perf_counter()
    try:
        args = parse_config(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = config_dict(args)
    out_dir = Path(args.out)
    status, error, files = EXIT_OK, None, {}
    try:
        files = HANDLERS[args.command](args)
    except InvariantViolation as exc:
        status, error = EXIT_INVARIANT, {"invariant": exc.invariant, "instance": exc.instance}
        print(f"invariant violated: {exc.invariant}: {exc.instance}", file=sys.stderr)
    except (ConfigError, ValueError, OSError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name, text in sorted(files.items()):
        write_atomic(out_dir / name, text)
    blob = json.dumps(cfg, sort_keys=True, default=str)
    manifest = {
        "command": args.command,
        "config": cfg,
        "config_sha256": hashlib.sha256(blob.encode()).hexdigest(),
        "versions": _versions(),
        "files": sorted(files),
        "wall_time_s": round(time.perf_counter() - start, 3),
        "exit_status": status,
        "error": error,
    }
    write_atomic(out_dir / "manifest.json", dumps(manifest))
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
