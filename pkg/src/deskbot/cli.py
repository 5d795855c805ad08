"""Command-line front end: run episodes, sweep matrices, rebuild reports."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .errors import DeskbotError, ScenarioError
from .harness import (
    MATRIX_BUILDERS,
    EpisodeConfig,
    EpisodeTrace,
    build_matrix,
    compute_metrics,
    derive_seed,
    report_from_traces,
    run_episode,
    run_experiment,
)
from .harness.tasks import TASKS
from .scenario import load_scenario, validate_scenario_data


def _parse_camera(value: str) -> str:
    if value == "active":
        return value
    if value.startswith("fixed:"):
        try:
            float(value.split(":", 1)[1])
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"camera pitch in {value!r} is not a number")
        return value
    raise argparse.ArgumentTypeError(
        f"camera must be 'active' or 'fixed:<pitch>', got {value!r}")


def _write_trace(trace: EpisodeTrace, out_dir: Path, stem: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{stem}.jsonl"
    path.write_text(trace.to_jsonl(), encoding="utf-8")
    return path


def _config_from_args(args: argparse.Namespace) -> EpisodeConfig:
    return EpisodeConfig(
        task=args.task,
        connector_enabled=not args.no_connector,
        adjustment_enabled=not args.no_adjustment,
        camera_mode=args.camera,
        backend=args.backend,
        endpoint=args.endpoint,
        auth_token_env=args.token_env,
        scenario_path=args.scenario,
        label=args.label,
    )


def _cmd_run(args: argparse.Namespace) -> int:
    base = _config_from_args(args)
    successes = 0
    for index in range(args.episodes):
        seed = derive_seed(args.seed, base.task, base.signature(), index)
        cfg = dataclasses.replace(base, seed=seed)
        trace = run_episode(cfg.task, cfg)
        m = compute_metrics(trace)
        successes += int(m.success)
        speed = "NA" if m.avg_speed_cm_s is None else f"{m.avg_speed_cm_s:.1f}"
        print(f"episode {index:3d}  seed={seed}  outcome={m.outcome:<9s}"
              f"  steps={m.steps:3d}  fm_queries={m.fm_queries:3d}"
              f"  sim_s={m.sim_seconds:8.1f}  cm/s={speed}")
        if args.out:
            stem = f"{cfg.task}__{cfg.describe()}__{index:03d}"
            _write_trace(trace, Path(args.out), stem)
    print(f"success {successes}/{args.episodes} = {successes / args.episodes:.2f}")
    return 0


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(EpisodeConfig)}


def _cells_from_config(data) -> tuple[list[EpisodeConfig], dict]:
    """(cells, defaults) from a matrix config JSON document."""
    if isinstance(data, dict):
        defaults = {k: data[k] for k in ("episodes_per_cell", "master_seed")
                    if k in data}
        raw_cells = data.get("cells")
        if not isinstance(raw_cells, list):
            raise DeskbotError("matrix config object needs a 'cells' list")
    elif isinstance(data, list):
        defaults, raw_cells = {}, data
    else:
        raise DeskbotError("matrix config must be a JSON list or object")
    cells = []
    for i, raw in enumerate(raw_cells):
        if not isinstance(raw, dict):
            raise DeskbotError(f"cell {i} is not an object")
        unknown = set(raw) - _CONFIG_FIELDS
        if unknown:
            raise DeskbotError(
                f"cell {i} has unknown fields {sorted(unknown)}; "
                f"valid fields: {sorted(_CONFIG_FIELDS)}")
        if "task" not in raw:
            raise DeskbotError(f"cell {i} is missing 'task'")
        cells.append(EpisodeConfig(**raw))
    if not cells:
        raise DeskbotError("matrix config has no cells")
    return cells, defaults


def _cmd_matrix(args: argparse.Namespace) -> int:
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text("utf-8"))
        except OSError as exc:
            raise DeskbotError(f"cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DeskbotError(f"{args.config} is not valid JSON: {exc}") from exc
        cells, defaults = _cells_from_config(data)
        episodes = args.episodes or defaults.get("episodes_per_cell", 20)
        master_seed = args.seed if args.seed is not None else defaults.get("master_seed", 0)
    else:
        cells = build_matrix(args.table)
        episodes = args.episodes or 20
        master_seed = args.seed if args.seed is not None else 0

    sink = None
    if args.out:
        out_dir = Path(args.out)
        counter = {"n": 0}

        def sink(cfg: EpisodeConfig, index: int, trace: EpisodeTrace) -> None:
            stem = f"{cfg.task}__{cfg.describe()}__{counter['n']:04d}"
            counter["n"] += 1
            _write_trace(trace, out_dir, stem)

    report = run_experiment(cells, episodes_per_cell=episodes,
                            master_seed=master_seed, trace_sink=sink)
    print(report.render_text())
    if args.json:
        Path(args.json).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    traces_dir = Path(args.traces)
    paths = sorted(traces_dir.glob("*.jsonl"))
    if not paths:
        raise DeskbotError(f"no .jsonl traces under {traces_dir}")
    traces = [EpisodeTrace.from_jsonl(p.read_text("utf-8")) for p in paths]
    report = report_from_traces(traces, episodes_per_cell=args.episodes,
                                master_seed=args.seed)
    print(report.render_text())
    if args.json:
        Path(args.json).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
    return 0


def _skill_dicts(scenario) -> list[dict]:
    out = []
    for spec in scenario.skills:
        d = dataclasses.asdict(spec)
        d["pitch_range"] = list(d["pitch_range"])
        out.append({k: v for k, v in d.items() if v is not None})
    return out


def _cmd_dump_skills(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    print(json.dumps(_skill_dicts(scenario), indent=2))
    return 0


def _cmd_validate_scenario(args: argparse.Namespace) -> int:
    path = Path(args.path)
    try:
        data = json.loads(path.read_text("utf-8"))
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path} is not valid JSON: {exc}") from exc
    problems = validate_scenario_data(data)
    if problems:
        for problem in problems:
            print(f"problem: {problem}")
        return 1
    print(f"{path}: OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deskbot",
        description="Deterministic desk-scale humanoid-agent experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one or more episodes of a task")
    run.add_argument("--task", required=True, choices=sorted(TASKS))
    run.add_argument("--seed", type=int, default=0,
                     help="master seed; per-episode seeds derive from it")
    run.add_argument("--episodes", type=int, default=1)
    run.add_argument("--no-connector", action="store_true",
                     help="plain model loop without the grounding layer")
    run.add_argument("--no-adjustment", action="store_true",
                     help="disable the fine approach module")
    run.add_argument("--camera", type=_parse_camera, default="active",
                     metavar="active|fixed:PITCH")
    run.add_argument("--backend", choices=("oracle", "remote"), default="oracle")
    run.add_argument("--endpoint", default=None,
                     help="model service URL (remote backend)")
    run.add_argument("--token-env", default=None,
                     help="env var holding the remote bearer token")
    run.add_argument("--scenario", default=None, help="scenario JSON path")
    run.add_argument("--label", default="", help="cell label recorded in traces")
    run.add_argument("--out", default=None, help="directory for JSONL traces")
    run.set_defaults(func=_cmd_run)

    matrix = sub.add_parser("matrix", help="run an ablation matrix")
    group = matrix.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", default=None,
                       help="matrix config JSON (list of cells, or object "
                            "with cells/episodes_per_cell/master_seed)")
    group.add_argument("--table", choices=sorted(MATRIX_BUILDERS) + ["all"],
                       help="built-in matrix by name")
    matrix.add_argument("--episodes", type=int, default=None,
                        help="episodes per cell (default 20)")
    matrix.add_argument("--seed", type=int, default=None,
                        help="master seed (default 0)")
    matrix.add_argument("--out", default=None, help="directory for JSONL traces")
    matrix.add_argument("--json", default=None, help="write report JSON here")
    matrix.set_defaults(func=_cmd_matrix)

    report = sub.add_parser("report", help="rebuild a report from stored traces")
    report.add_argument("--traces", required=True, help="directory of .jsonl traces")
    report.add_argument("--episodes", type=int, default=20,
                        help="episodes per cell the sweep was run with")
    report.add_argument("--seed", type=int, default=0,
                        help="master seed the sweep was run with")
    report.add_argument("--json", default=None, help="write report JSON here")
    report.set_defaults(func=_cmd_report)

    dump = sub.add_parser("dump-skills",
                          help="print the scenario's manipulation skills as JSON")
    dump.add_argument("--scenario", default=None, help="scenario JSON path")
    dump.set_defaults(func=_cmd_dump_skills)

    validate = sub.add_parser("validate-scenario", help="check a scenario file")
    validate.add_argument("path")
    validate.set_defaults(func=_cmd_validate_scenario)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DeskbotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
