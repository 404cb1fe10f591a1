"""Command-line front end: ``dfacoop <subcommand> [flags]``.

Every subcommand writes its outputs plus ``manifest.json`` into ``--out``.
The manifest lists the arguments and SHA-256 digests of inputs and outputs;
its timestamp is the only field that changes between identical runs.
Failures print ``error: <code>: <message>`` on one line and exit with 2.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from . import assignment as assign_mod
from . import solvers
from .dfa import Dfa, DfaVector, minimize, progress
from .env import Layout, read_trace
from .errors import DfaCoopError, InvalidConfigError
from .fixtures import load_fixtures, layout_dir, load_tasks, Fixture
from .product import RandomPolicy, replay_trace, rollout, telescoping_gap, write_product_trace
from .sampling import SAMPLERS, SamplerConfig, sample_batch, sample_multi_agent, sample_vector_batch

WORKERS_ENV = "DFACOOP_WORKERS"
OOD_MAX_STATES = 10


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _resolve_layout(spec: str) -> Path:
    p = Path(spec)
    if p.exists():
        return p
    shipped = layout_dir() / f"{spec}.txt"
    if shipped.exists():
        return shipped
    raise InvalidConfigError(f"no layout file or shipped layout named {spec!r}")


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise InvalidConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


class Run:
    """Collects inputs and outputs of one invocation and writes the manifest."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: dict = {}
        self.outputs: list = []

    def input(self, path) -> Path:
        path = Path(path)
        self.inputs[str(path)] = _sha(path)
        return path

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text, encoding="utf-8")
        self.outputs.append(path)
        return path

    def record(self, path: Path) -> None:
        self.outputs.append(path)

    def finish(self) -> None:
        args = {k: v for k, v in vars(self.args).items() if k != "func"}
        doc = {
            "command": self.args.command,
            "version": __version__,
            "arguments": args,
            "inputs": self.inputs,
            "outputs": {p.name: _sha(p) for p in self.outputs},
            "workers": _workers(),
            "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        (self.out / "manifest.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _jsonl(records) -> str:
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in records)


def _sampler_config(args, alphabet=None) -> SamplerConfig:
    base = "{}"
    if getattr(args, "config", None):
        base = Path(args.config).read_text(encoding="utf-8")
    overrides = {"max_states": args.max_states, "rng_seed": args.seed, "alphabet_size": alphabet}
    if getattr(args, "alphabet", None):
        overrides["alphabet_size"] = args.alphabet
    return SamplerConfig.from_json(base, **overrides)


def _layout(run: Run, args) -> Layout:
    return Layout.load(run.input(_resolve_layout(args.layout)))


def _tasks(run: Run, args, layout: Layout) -> DfaVector:
    return load_tasks(run.input(args.tasks), layout.alphabet_size)


# -- subcommands ---------------------------------------------------------------


def cmd_sample(args) -> None:
    run = Run(args)
    cfg = _sampler_config(args)
    inner = SAMPLERS[args.dist]
    if args.agents:
        vectors = sample_vector_batch(cfg, args.agents, inner, args.count)
        records = [
            {"draw": d, "agent": i, "dfa": a.to_dict()} for d, v in enumerate(vectors) for i, a in enumerate(v)
        ]
    else:
        records = [{"draw": d, "agent": 0, "dfa": a.to_dict()} for d, a in enumerate(sample_batch(cfg, inner, args.count))]
    run.write("dfas.jsonl", _jsonl(records))
    run.write("sampler.json", cfg.to_json() + "\n")
    run.finish()
    print(f"wrote {len(records)} DFAs to {run.out / 'dfas.jsonl'}")


def _read_dfas(run: Run, args) -> list:
    text = run.input(args.tasks).read_text(encoding="utf-8")
    out = []
    try:
        doc = json.loads(text)
        docs = doc if isinstance(doc, list) else [doc]
    except json.JSONDecodeError:
        docs = [json.loads(line) for line in text.splitlines() if line.strip()]
    for d in docs:
        out.append(Dfa.from_dict(d.get("dfa", d)))
    return out


def cmd_minimize(args) -> None:
    run = Run(args)
    dfas = [minimize(a) for a in _read_dfas(run, args)]
    run.write("dfas.jsonl", _jsonl({"index": i, "dfa": a.to_dict()} for i, a in enumerate(dfas)))
    run.finish()
    for a in dfas:
        print(a.to_hex())


def _parse_word(text: str) -> list:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(s) for s in text.split(",")]
    except ValueError as exc:
        raise InvalidConfigError(f"word must be comma-separated symbols, got {text!r}") from exc


def cmd_progress(args) -> None:
    run = Run(args)
    word = _parse_word(args.word)
    dfas = [progress(a, word) for a in _read_dfas(run, args)]
    run.write("dfas.jsonl", _jsonl({"index": i, "dfa": a.to_dict()} for i, a in enumerate(dfas)))
    run.finish()
    for a in dfas:
        print(a.to_hex())


def _policy(run: Run, args, layout: Layout):
    if args.tables:
        base = Path(args.tables).with_suffix("")
        run.input(base.with_suffix(".npz"))
        run.input(base.with_suffix(".json"))
        tables, _ = solvers.load_qtables(base, _expect(layout, args))
        return solvers.QPolicy(layout, tables)
    return RandomPolicy(layout.n_agents)


def _expect(layout: Layout, args) -> dict:
    return {"layout": layout.digest, "gamma": args.gamma, "n_agents": layout.n_agents}


def cmd_simulate(args) -> None:
    run = Run(args)
    layout = _layout(run, args)
    tasks = _tasks(run, args, layout)
    r = rollout(layout, tasks, _policy(run, args, layout), args.gamma, args.seed)
    path = run.out / "trace.jsonl"
    write_product_trace(r.trace, path)
    run.record(path)
    summary = {
        "success": r.success,
        "steps": r.steps,
        "team_return": r.team_return,
        "shaped_returns": r.shaped_returns,
        "telescoping_gap": telescoping_gap(r, args.gamma),
    }
    run.write("summary.json", json.dumps(summary, sort_keys=True) + "\n")
    run.finish()
    print(json.dumps(summary, sort_keys=True))


def _task_prior(run: Run, args, layout: Layout, max_states=None):
    """Fixed tasks from ``--tasks`` or a multi-agent sampler over ``--dist``."""
    if args.tasks:
        tasks = _tasks(run, args, layout)
        return tasks, {"tasks": [a.to_hex() for a in tasks]}
    cfg = _sampler_config(args, layout.alphabet_size)
    if max_states is not None:
        cfg = SamplerConfig.from_json(cfg.to_json(), max_states=max_states)
    inner = SAMPLERS[args.dist]
    return (lambda rng: sample_multi_agent(cfg, layout.n_agents, inner, rng)), {"sampler": json.loads(cfg.to_json()), "dist": args.dist}


def cmd_train(args) -> None:
    run = Run(args)
    layout = _layout(run, args)
    prior, task_info = _task_prior(run, args, layout)
    config = solvers.QConfig(steps=args.steps, gamma=args.gamma, reward=args.reward, seed=args.seed, alpha=args.alpha)
    result = solvers.q_learning(layout, prior, config)
    manifest = dict(_expect(layout, args), seed=args.seed, **task_info)
    solvers.save_qtables(run.out / "tables", result, manifest)
    run.record(run.out / "tables.npz")
    run.record(run.out / "tables.json")
    stats = {"episodes": result.episodes, "training_successes": result.successes, "keys": [len(t) for t in result.tables]}
    run.write("train.json", json.dumps(stats, sort_keys=True) + "\n")
    run.finish()
    print(json.dumps(stats, sort_keys=True))


def cmd_eval(args) -> None:
    if args.episodes < 1:
        raise InvalidConfigError("episodes must be positive")
    run = Run(args)
    layout = _layout(run, args)
    policy = _policy(run, args, layout)
    prior, task_info = _task_prior(run, args, layout, OOD_MAX_STATES if args.ood else None)
    mean, se = solvers.estimate_success(layout, prior, policy, args.episodes, args.seed)
    metrics = {"success": mean, "stderr": se, "episodes": args.episodes, "ood": args.ood, **task_info}
    run.write("metrics.json", json.dumps(metrics, sort_keys=True) + "\n")
    run.finish()
    print(f"success {mean:.4f} +/- {se:.4f} over {args.episodes} episodes")


def cmd_assign(args) -> None:
    run = Run(args)
    layout = _layout(run, args)
    tasks = _tasks(run, args, layout)
    if args.tables:
        value_fn = assign_mod.MonteCarloValue(_policy(run, args, layout), args.episodes, args.gamma)
    else:
        value_fn = assign_mod.ExactValue(args.gamma)
    a = assign_mod.assign_optimal(layout, tasks, value_fn, args.seed)
    records = a.records()
    run.write("assignment.jsonl", _jsonl(records))
    run.finish()
    for rec in records:
        mark = "*" if rec["chosen"] else " "
        se = "" if rec["stderr"] is None else f" +/- {rec['stderr']:.4f}"
        print(f"{mark} {rec['permutation']}  {rec['proxy_value']:.6f}{se}")
    if a.tied:
        print("note: the chosen permutation is tied with another within the value uncertainty")


def _verify_fixture(f: Fixture, gamma: float) -> dict:
    game = solvers.enumerate_product(f.layout, f.tasks, gamma)
    greedy = solvers.greedy_success(game, solvers.value_iteration(game))
    shaped = [solvers.greedy_success(game, solvers.value_iteration(game, reward=i)) for i in range(f.layout.n_agents)]
    brute = solvers.brute_force_history_optimum(f.layout, f.tasks)
    problems = []
    if greedy != brute:
        problems.append(f"greedy {greedy} != brute force {brute}")
    if any(s != greedy for s in shaped):
        problems.append(f"shaped greedy {shaped} != sparse greedy {greedy}")
    if brute != f.expected_optimum:
        problems.append(f"optimum {brute} != recorded {f.expected_optimum}")
    return {
        "fixture": f.name,
        "states": game.n_states,
        "greedy_success": greedy,
        "shaped_success": shaped,
        "brute_force": brute,
        "expected": f.expected_optimum,
        "ok": not problems,
        "problems": problems,
    }


def cmd_verify(args) -> int:
    run = Run(args)
    if args.trace:
        layout = _layout(run, args)
        problems = replay_trace(layout, read_trace(run.input(args.trace)))
        run.write("verify.jsonl", _jsonl([{"trace": args.trace, "ok": not problems, "problems": problems}]))
        run.finish()
        for p in problems:
            print(f"FAIL {p}")
        print("PASS trace replay" if not problems else "FAIL trace replay")
        return 0 if not problems else 1
    directory = Path(args.fixtures) if args.fixtures else None
    if directory is not None:
        for p in sorted(directory.glob("*.json")):
            run.input(p)
    reports = []
    for f in load_fixtures(directory):
        reports.append(_verify_fixture(f, args.gamma))
    run.write("verify.jsonl", _jsonl(reports))
    run.finish()
    for r in reports:
        status = "PASS" if r["ok"] else "FAIL"
        print(f"{status} {r['fixture']}: greedy={r['greedy_success']} brute={r['brute_force']} {'; '.join(r['problems'])}")
    return 0 if all(r["ok"] for r in reports) else 1


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dfacoop", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, layout=False, tasks=False):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="out")
        if layout:
            sp.add_argument("--layout", required=True, help="layout file or shipped layout name")
            sp.add_argument("--gamma", type=float, default=0.99)
        if tasks:
            sp.add_argument("--tasks", help="JSON list of task specs or DFA documents")

    def sampler(sp):
        sp.add_argument("--dist", choices=sorted(SAMPLERS), default="rad")
        sp.add_argument("--max-states", type=int, default=None)
        sp.add_argument("--config", help="sampler config JSON")

    sp = sub.add_parser("sample", help="draw DFAs from a sampler")
    common(sp)
    sampler(sp)
    sp.add_argument("--agents", type=int, default=0, help="draw task vectors for this many agents")
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--alphabet", type=int, default=None)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("minimize", help="minimize DFA files")
    common(sp, tasks=True)
    sp.set_defaults(func=cmd_minimize)

    sp = sub.add_parser("progress", help="progress DFAs by a word")
    common(sp, tasks=True)
    sp.add_argument("--word", default="", help="comma-separated symbols")
    sp.set_defaults(func=cmd_progress)

    sp = sub.add_parser("simulate", help="roll out one episode and write its trace")
    common(sp, layout=True, tasks=True)
    sp.add_argument("--tables", help="trained tables (default: random policy)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("train", help="independent tabular Q-learning")
    common(sp, layout=True, tasks=True)
    sampler(sp)
    sp.add_argument("--steps", type=int, default=50_000)
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--reward", choices=["shaped", "sparse"], default="shaped")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="Monte Carlo success estimate")
    common(sp, layout=True, tasks=True)
    sampler(sp)
    sp.add_argument("--tables", help="trained tables (default: random policy)")
    sp.add_argument("--episodes", type=int, default=1000)
    sp.add_argument("--ood", action="store_true", help=f"sample DFAs with up to {OOD_MAX_STATES} states")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("assign", help="optimal task assignment")
    common(sp, layout=True, tasks=True)
    sp.add_argument("--tables", help="use Monte Carlo values under trained tables (default: exact values)")
    sp.add_argument("--episodes", type=int, default=200)
    sp.set_defaults(func=cmd_assign)

    sp = sub.add_parser("verify", help="check fixtures against both optimality oracles, or replay a trace")
    common(sp)
    sp.add_argument("--fixtures", help="fixture directory (default: shipped fixtures)")
    sp.add_argument("--gamma", type=float, default=0.999)
    sp.add_argument("--trace", help="trace file to replay instead")
    sp.add_argument("--layout", help="layout of the trace")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("simulate", "assign") and not args.tasks:
            raise InvalidConfigError("--tasks is required")
        if args.command == "verify" and args.trace and not args.layout:
            raise InvalidConfigError("--trace needs --layout")
        code = args.func(args)
    except DfaCoopError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 2
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
