"""Command-line orchestration: experiment configs, seed sweeps, CSV/JSON
output.

Subcommands: ``classify``, ``escape-rate``, ``frontier``, ``gamma-cdf``,
``abelian-check``.  Every output file embeds the fully resolved config and
the package version as ``#``-prefixed metadata lines, and reruns with the
same config and seeds are byte-identical regardless of ``--jobs``.

Exit codes: 0 success, 2 validation error, 3 flagged non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .gw_tree import OffspringDistribution, ValidationError
from .rotor_config import RotorMatrix, classify, good_children_law, make_arena, parse_number
from .rotor_walk import adaptive_escape_count, escape_count, run_legal_sequence
from .frontier import build_frontier, complete_sink, extend_frontier
from .srw_gamma import cdf_fixed_point, gamma_bounds, k_constant, solve_hitting

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NOT_CONVERGED = 3

#: Node budget for full depth-H truncations built for audits.
AUDIT_NODE_BUDGET = 2_000_000


# -- config parsing ---------------------------------------------------------


def parse_xi(spec: str) -> OffspringDistribution:
    """Parse ``p2=1`` or ``p1=1/2,p3=0.5`` into an offspring law."""
    entries: dict[int, Fraction | float] = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part or not part.startswith("p"):
            raise ValidationError(f"bad offspring term {part!r}; expected pK=VALUE")
        key, value = part.split("=", 1)
        try:
            k = int(key[1:])
        except ValueError as exc:
            raise ValidationError(f"bad offspring index in {part!r}") from exc
        entries[k] = parse_number(value)
    return OffspringDistribution.from_dict(entries)


def parse_q(spec: str, kmax: int) -> RotorMatrix:
    """Parse ``uniform``, ``rows:1/2,1/2;1/3,1/3,1/3``, or ``file:PATH``."""
    spec = spec.strip()
    if spec.lower() == "uniform":
        return RotorMatrix.uniform(kmax)
    if spec.startswith("rows:"):
        rows = [[parse_number(x) for x in row.split(",")]
                for row in spec[len("rows:"):].split(";")]
        return RotorMatrix(rows)
    if spec.startswith("file:"):
        return RotorMatrix.from_config(spec[len("file:"):], kmax=kmax)
    raise ValidationError(f"bad rotor matrix spec {spec!r}")


def parse_seeds(spec: str) -> list[int]:
    """``20`` means seeds 0..19; ``5:8`` a range; ``1,4,9`` a list."""
    spec = spec.strip()
    if ":" in spec:
        lo, hi = spec.split(":", 1)
        return list(range(int(lo), int(hi)))
    if "," in spec:
        return [int(s) for s in spec.split(",") if s.strip()]
    return list(range(int(spec)))


def parse_depth(spec: str) -> tuple[str, int | None]:
    spec = spec.strip()
    if spec == "adaptive":
        return ("adaptive", None)
    if spec.startswith("fixed:"):
        h = int(spec[len("fixed:"):])
        if h < 1:
            raise ValidationError("fixed depth must be >= 1")
        return ("fixed", h)
    raise ValidationError(f"bad depth policy {spec!r}; use fixed:<H> or adaptive")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment parameters; serializable for workers and headers."""

    cmd: str
    xi: str
    q: str
    n: int
    depth: str
    seeds: tuple[int, ...]
    jobs: int
    out: str | None
    grid: int
    tol: float
    max_iter: int
    trials: int
    max_nodes: int
    max_particles: int

    def as_json(self) -> str:
        # jobs is deliberately excluded: parallelism must not change output
        payload = {
            "cmd": self.cmd, "xi": self.xi, "q": self.q, "n": self.n,
            "depth": self.depth, "seeds": list(self.seeds),
            "out": self.out, "grid": self.grid, "tol": self.tol,
            "max_iter": self.max_iter, "trials": self.trials,
            "max_nodes": self.max_nodes, "max_particles": self.max_particles,
            "version": __version__,
        }
        return json.dumps(payload, sort_keys=True)


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = json.loads(Path(args.config).read_text())

    def pick(name, default):
        v = getattr(args, name, None)
        if v is not None:
            return v
        if name in file_cfg:
            return file_cfg[name]
        return default

    return ExperimentConfig(
        cmd=args.cmd,
        xi=str(pick("xi", "p2=1")),
        q=str(pick("q", "uniform")),
        n=int(pick("n", 10_000)),
        depth=str(pick("depth", "adaptive")),
        seeds=tuple(parse_seeds(str(pick("seeds", "1")))),
        jobs=int(pick("jobs", 1)),
        out=pick("out", None),
        grid=int(pick("grid", 4096)),
        tol=float(pick("tol", 1e-6)),
        max_iter=int(pick("max_iter", 200)),
        trials=int(pick("trials", 100)),
        max_nodes=int(pick("max_nodes", 200)),
        max_particles=int(pick("max_particles", 50)),
    )


# -- output helpers ---------------------------------------------------------


def _write_output(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _header_lines(config: ExperimentConfig) -> str:
    return (f"# rotorwalk {__version__}\n"
            f"# config: {config.as_json()}\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def audit_depth(xi: OffspringDistribution, h_final: int,
                budget: int = AUDIT_NODE_BUDGET) -> int:
    """Deepest full truncation whose expected size fits the node budget.

    Full depth-H truncations cost ~ m^H nodes, so audits run on the deepest
    affordable prefix of the walk's truncation; shrinking H only widens the
    already-covered tolerance.
    """
    m = float(xi.mean)
    h = 1
    total = 1.0
    level = 1.0
    while h < h_final:
        level *= m
        total += level
        if total > budget:
            break
        h += 1
    return h


# -- per-seed workers -------------------------------------------------------


def _escape_worker(payload) -> dict:
    cfg_json, seed = payload
    cfg = json.loads(cfg_json)
    xi = parse_xi(cfg["xi"])
    q = parse_q(cfg["q"], xi.kmax)
    n = cfg["n"]
    policy, fixed_h = parse_depth(cfg["depth"])
    arena = make_arena(xi, q, seed)
    if policy == "fixed":
        stats = escape_count(arena, n, fixed_h)
        h_final = fixed_h
        history = [(fixed_h, stats.escapes)]
        converged = True
    else:
        result = adaptive_escape_count(arena, n)
        stats, h_final = result.stats, result.H
        history = list(result.history)
        converged = result.converged
    h_audit = audit_depth(xi, h_final)
    bounds = gamma_bounds(arena, h_audit)
    _, boundary = arena.truncate_view(h_audit)
    sol = solve_hitting(arena, boundary)
    checkpoints = sorted({1 << k for k in range(10, 63) if (1 << k) < n} | {n})
    rows = [(seed, cp, h_final, stats.escapes_before(cp),
             stats.escapes_before(cp) / cp) for cp in checkpoints]
    return {
        "seed": seed,
        "rows": rows,
        "H": h_final,
        "history": history,
        "converged": converged,
        "E_n": stats.escapes,
        "ratio": stats.ratio,
        "gamma_lower": bounds.lower,
        "gamma_upper": bounds.upper,
        "audit_H": h_audit,
        "h_root": sol.root_value,
    }


def _frontier_worker(payload) -> dict:
    cfg_json, seed = payload
    cfg = json.loads(cfg_json)
    xi = parse_xi(cfg["xi"])
    q = parse_q(cfg["q"], xi.kmax)
    n = cfg["n"]
    checkpoints = sorted({1 << k for k in range(10, 63) if (1 << k) < n} | {n})
    checkpoints = [c for c in checkpoints if c >= 1]
    arena = make_arena(xi, q, seed)
    state = build_frontier(arena, checkpoints[0])
    rows = []
    for cp in checkpoints:
        state = extend_frontier(arena, state, cp)
        sink_set = complete_sink(arena, state)
        sol = solve_hitting(arena, sink_set)
        k_const = k_constant(sol)
        gap = abs(sol.root_value - state.sink_count / cp)
        rows.append({
            "seed": seed, "n": cp,
            "frontier_size": state.frontier_size,
            "sink_count": state.sink_count,
            "realized_height": state.realized_height,
            "h_root": sol.root_value,
            "K": k_const,
            "audit_ok": bool(gap <= k_const / cp),
        })
    return {"seed": seed, "rows": rows}


def _abelian_trial(payload) -> dict:
    cfg_json, seed = payload
    cfg = json.loads(cfg_json)
    xi = parse_xi(cfg["xi"])
    q = parse_q(cfg["q"], xi.kmax)
    rng = np.random.default_rng([seed, 0xAB])
    arena = make_arena(xi, q, seed)
    # grow a random finite tree within the node limit; absorbing set = fringe
    limit = cfg["max_nodes"]
    frontier = [0]
    while frontier and arena.size < limit:
        x = frontier.pop(0)
        arena.ensure_children(x)
        kids = arena.children(x)
        frontier.extend(kids)
    fringe = [i for i in range(arena.size) if arena._child_count[i] < 0]
    interior = [i for i in range(arena.size) if arena._child_count[i] >= 0]
    if not fringe or not interior:
        return {"seed": seed, "ok": True, "skipped": True}
    for i in interior:
        arena.set_rotor(i, int(rng.integers(0, arena._child_count[i] + 1)))
    n_particles = int(rng.integers(1, cfg["max_particles"] + 1))
    snap = arena.rotor_snapshot()
    s1, s2 = int(rng.integers(0, 2**31)), int(rng.integers(0, 2**31))
    r1 = run_legal_sequence(arena, fringe, {0: n_particles}, scheduler=f"random:{s1}")
    rot1 = arena.rotor_snapshot()
    arena.restore_rotors(snap)
    r2 = run_legal_sequence(arena, fringe, {0: n_particles}, scheduler=f"random:{s2}")
    rot2 = arena.rotor_snapshot()
    ok = (r1.absorbed == r2.absorbed and r1.sink_count == r2.sink_count
          and np.array_equal(rot1, rot2))
    return {"seed": seed, "ok": bool(ok), "skipped": False}


def _run_pool(worker, payloads, jobs: int) -> list:
    if jobs <= 1 or len(payloads) <= 1:
        return [worker(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, payloads))


# -- subcommands ------------------------------------------------------------


def cmd_classify(config: ExperimentConfig) -> int:
    xi = parse_xi(config.xi)
    q = parse_q(config.q, xi.kmax)
    law = good_children_law(xi, q)
    verdict = classify(xi, q)
    payload = {
        "E_nu": float(law.mean),
        "verdict": verdict.value,
        "exact": law.is_exact,
        "config": json.loads(config.as_json()),
    }
    text = json.dumps(payload, sort_keys=True) + "\n"
    _write_output(config.out, text)
    return EXIT_OK


def cmd_escape_rate(config: ExperimentConfig) -> int:
    payloads = [(config.as_json(), s) for s in config.seeds]
    results = sorted(_run_pool(_escape_worker, payloads, config.jobs),
                     key=lambda r: r["seed"])
    lines = [_header_lines(config), "seed,n,H,E_n,ratio\n"]
    for r in results:
        for seed, cp, h, e, ratio in r["rows"]:
            lines.append(f"{seed},{cp},{h},{e},{_fmt(ratio)}\n")
    _write_output(config.out, "".join(lines))
    summary = {
        "mean_ratio": float(np.mean([r["ratio"] for r in results])),
        "seeds": [
            {
                "seed": r["seed"], "H": r["H"], "E_n": r["E_n"],
                "ratio": r["ratio"], "gamma_lower": r["gamma_lower"],
                "gamma_upper": r["gamma_upper"], "audit_H": r["audit_H"],
                "h_root": r["h_root"],
                "h_audit_ok": bool(abs(r["ratio"] - (1 - r["h_root"])) <= 0.03),
                "adaptive_history": r["history"],
                "converged": r["converged"],
            }
            for r in results
        ],
        "config": json.loads(config.as_json()),
    }
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    if not all(r["converged"] for r in results):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_frontier(config: ExperimentConfig) -> int:
    payloads = [(config.as_json(), s) for s in config.seeds]
    results = sorted(_run_pool(_frontier_worker, payloads, config.jobs),
                     key=lambda r: r["seed"])
    lines = [_header_lines(config),
             "seed,n,frontier_size,sink_count,realized_height,h_root,K,audit_ok\n"]
    all_ok = True
    growth = []
    for r in results:
        for row in r["rows"]:
            all_ok = all_ok and row["audit_ok"]
            growth.append(row["frontier_size"] / row["n"])
            lines.append(
                f"{row['seed']},{row['n']},{row['frontier_size']},"
                f"{row['sink_count']},{row['realized_height']},"
                f"{_fmt(row['h_root'])},{_fmt(row['K'])},{row['audit_ok']}\n")
    _write_output(config.out, "".join(lines))
    summary = {
        "audit_all_ok": bool(all_ok),
        "min_growth_ratio": float(min(growth)),
        "config": json.loads(config.as_json()),
    }
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_gamma_cdf(config: ExperimentConfig) -> int:
    xi = parse_xi(config.xi)
    result = cdf_fixed_point(xi, grid=config.grid, tol=config.tol,
                             max_iter=config.max_iter)
    lines = [_header_lines(config),
             f"# iterations: {result.iterations}\n",
             f"# final_delta: {_fmt(result.final_delta)}\n",
             f"# converged: {str(result.converged).lower()}\n",
             result.cdf.to_csv()]
    _write_output(config.out, "".join(lines))
    summary = {
        "iterations": result.iterations,
        "final_delta": result.final_delta,
        "converged": result.converged,
        "median": result.cdf.quantile(0.5),
        "mean": result.cdf.mean(),
        "config": json.loads(config.as_json()),
    }
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_abelian_check(config: ExperimentConfig) -> int:
    payloads = [(config.as_json(), s) for s in range(config.trials)]
    results = sorted(_run_pool(_abelian_trial, payloads, config.jobs),
                     key=lambda r: r["seed"])
    mismatches = [r["seed"] for r in results if not r["ok"]]
    summary = {
        "trials": config.trials,
        "mismatches": mismatches,
        "config": json.loads(config.as_json()),
    }
    text = json.dumps(summary, sort_keys=True) + "\n"
    _write_output(config.out, text)
    return EXIT_OK if not mismatches else 1


# -- entry point ------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotorwalk",
        description="Rotor-router walks on Galton-Watson trees: classification, "
                    "escape rates, frontier growth, and the escape-law fixed point.")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p, n_default=None):
        p.add_argument("--xi", help="offspring law, e.g. p3=1 or p1=1/2,p2=1/2")
        p.add_argument("--q", help="rotor rows: uniform | rows:... | file:PATH")
        p.add_argument("--config", help="JSON config file; flags win")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--jobs", type=int, help="parallel trials (default 1)")
        p.add_argument("--seeds", help="seed spec: COUNT, LO:HI, or CSV list")
        p.add_argument("--n", type=int, help="walks or injections per seed")
        p.add_argument("--depth", help="fixed:<H> or adaptive")

    p = sub.add_parser("classify", help="recurrence/transience verdict")
    common(p)

    p = sub.add_parser("escape-rate", help="escape counts over chained walks")
    common(p)

    p = sub.add_parser("frontier", help="frontier growth and proportion audit")
    common(p)

    p = sub.add_parser("gamma-cdf", help="fixed point of the escape-law operator")
    common(p)
    p.add_argument("--grid", type=int, help="CDF grid resolution (default 4096)")
    p.add_argument("--tol", type=float, help="sup-norm stopping tolerance")
    p.add_argument("--max-iter", dest="max_iter", type=int, help="iteration cap")

    p = sub.add_parser("abelian-check", help="scheduler-independence trials")
    common(p)
    p.add_argument("--trials", type=int, help="number of randomized trials")
    p.add_argument("--max-nodes", dest="max_nodes", type=int,
                   help="tree size cap per trial")
    p.add_argument("--max-particles", dest="max_particles", type=int,
                   help="particle cap per trial")
    return parser


_COMMANDS = {
    "classify": cmd_classify,
    "escape-rate": cmd_escape_rate,
    "frontier": cmd_frontier,
    "gamma-cdf": cmd_gamma_cdf,
    "abelian-check": cmd_abelian_check,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve_config(args)
        return _COMMANDS[args.cmd](config)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
