from __future__ import annotations

import argparse
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from src.config import Config
from src.decompose import PipelineOptions, decompose_pipeline, verify_decomposition
from src.errors import (
    ConfigError,
    DecompositionError,
    NotECTSError,
    SizeCapExceeded,
    StateMachineError,
    TSFormatError,
    TSValidationError,
)
from src.regions import check_ects, minimal_regions, minimal_regions_oracle
from src.report import failed_row, stats_row, track_rows, write_stats_csv
from src.sm import SmSet, parse_sm, reachability_graph, serialize_sm, sm_to_dot
from src.ts import parse_ts, serialize_ts, sync_product, to_dot

# Exit codes
OK = 0
FAILED = 1
NOT_ECTS = 2
ERROR = 3


@dataclass(frozen=True)
class RunConfig:
    """
    Settings for one command: Config overlaid with command-line flags.
    """
    command: str
    inputs: tuple[Path, ...]
    out: Path | None
    merge: str
    exact: bool
    region_budget: int
    solver_budget: int
    jobs: int
    dot: bool = False
    oracle: bool = False
    as_json: bool = False
    track: bool = False

    @classmethod
    def from_args(cls, args: argparse.Namespace, cfg: Config) -> "RunConfig":
        values = {
            "region_budget": args.region_budget or cfg.region_budget,
            "solver_budget": args.solver_budget or cfg.solver_budget,
            "jobs": getattr(args, "jobs", None) or cfg.jobs,
        }
        for name, value in values.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        inputs = [args.path] if hasattr(args, "path") else []
        inputs += getattr(args, "paths", None) or []
        return cls(
            command=args.command,
            inputs=tuple(Path(p) for p in inputs),
            out=Path(args.out) if getattr(args, "out", None) else None,
            merge=getattr(args, "merge", None) or cfg.merge_mode,
            exact=getattr(args, "exact", False),
            dot=getattr(args, "dot", False),
            oracle=getattr(args, "oracle", False),
            as_json=getattr(args, "json", False),
            track=getattr(args, "track", False),
            **values,
        )

    def pipeline_options(self) -> PipelineOptions:
        return PipelineOptions(
            merge=self.merge,
            exact=self.exact,
            region_budget=self.region_budget,
            solver_budget=self.solver_budget,
        )


def _read(path: Path) -> str | None:
    if not path.exists():
        print(f"ERROR: missing {path}")
        print("Fix: check the path (inputs are .ts / .sm text files)")
        return None
    return path.read_text()


# ---------------------------------------------------------------------------
# Commands


def cmd_validate(run: RunConfig) -> int:
    path = run.inputs[0]
    text = _read(path)
    if text is None:
        return ERROR
    try:
        ts = parse_ts(text)
    except (TSFormatError, TSValidationError) as e:
        print(f"INVALID {path}: {e}")
        return FAILED
    print(f"OK {path}: {len(ts.states)} states, {len(ts.transitions)} transitions, {len(ts.events)} events")
    return OK


def cmd_regions(run: RunConfig) -> int:
    path = run.inputs[0]
    text = _read(path)
    if text is None:
        return ERROR
    ts = parse_ts(text)
    regions = minimal_regions(ts, run.region_budget)
    report = check_ects(ts, regions)

    if run.as_json:
        print(json.dumps(report.to_dict(ts), indent=2))
    else:
        for k, r in enumerate(regions):
            print(f"r{k} = {{{', '.join(r.names(ts))}}}")
        print(f"ECTS: {report.ok} (ec={report.ec_ok}, effectiveness={report.effectiveness_ok})")

    status = OK
    if run.oracle:
        try:
            oracle = minimal_regions_oracle(ts)
        except SizeCapExceeded as e:
            print(f"oracle skipped: {e}")
        else:
            if oracle != regions:
                print(f"MISMATCH: search found {len(regions)} regions, oracle found {len(oracle)}")
                status = FAILED
            else:
                print(f"oracle agrees ({len(oracle)} regions)")

    if not report.ok:
        print(f"not excitation-closed, failing events: {', '.join(report.failing_events)}")
        return NOT_ECTS
    return status


def cmd_decompose(run: RunConfig) -> int:
    path = run.inputs[0]
    text = _read(path)
    if text is None:
        return ERROR
    ts = parse_ts(text)
    report = decompose_pipeline(ts, run.pipeline_options())

    out_dir = run.out or Path("out") / path.stem
    out_dir.mkdir(parents=True, exist_ok=True)
    # machines from an earlier run would mix with this one
    for stale in [*out_dir.glob("sm_*.sm"), *out_dir.glob("sm_*.dot")]:
        stale.unlink()

    machines = report.final.machines
    for i, sm in enumerate(machines, start=1):
        (out_dir / f"sm_{i}.sm").write_text(serialize_sm(sm))
        if run.dot:
            (out_dir / f"sm_{i}.dot").write_text(sm_to_dot(sm))
    if run.dot:
        (out_dir / "ts.dot").write_text(to_dot(ts))

    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report.to_dict(path.name), indent=2) + "\n")

    for stage in report.stages:
        print(f"{stage.name:12s} machines={stage.machines} places={stage.places} transitions={stage.transitions}")
    print(f"verified: {report.verification.verified}")
    print("\nDONE ✅")
    print(f"Saved {len(machines)} machines + report: {out_dir}")
    return OK if report.verification.verified else FAILED


def cmd_verify(run: RunConfig) -> int:
    ts_path, *sm_paths = run.inputs
    text = _read(ts_path)
    if text is None:
        return ERROR
    ts = parse_ts(text)

    machines = []
    for p in sm_paths:
        sm_text = _read(p)
        if sm_text is None:
            return ERROR
        machines.append(parse_sm(sm_text, ts))

    result = verify_decomposition(ts, SmSet(tuple(machines)))
    if result.verified:
        print(f"bisimilar: product has {result.product_states} states")
        return OK
    print("NOT bisimilar")
    print("witness: " + " ".join(result.witness or ()))
    return FAILED


def _load_component(path: Path):
    text = _read(path)
    if text is None:
        return None
    if path.suffix == ".sm":
        return reachability_graph(parse_sm(text))
    return parse_ts(text, composite_names=True)


def cmd_product(run: RunConfig) -> int:
    components = []
    for path in run.inputs:
        comp = _load_component(path)
        if comp is None:
            return ERROR
        components.append(comp)

    product = sync_product(components)
    text = serialize_ts(product)
    if run.out:
        run.out.parent.mkdir(parents=True, exist_ok=True)
        run.out.write_text(text)
        print(f"Saved product ({len(product.states)} states): {run.out}")
    else:
        print(text, end="")
    return OK


def _bench_one(path: Path, options: PipelineOptions) -> dict:
    """
    One bench row. Never raises: failures become marked rows.
    """
    try:
        ts = parse_ts(path.read_text())
        return stats_row(path.name, decompose_pipeline(ts, options))
    except NotECTSError as e:
        return failed_row(path.name, "not_ects", str(e))
    except (DecompositionError, OSError) as e:
        return failed_row(path.name, "failed", f"{type(e).__name__}: {e}")


def cmd_bench(run: RunConfig, cfg: Config) -> int:
    directory = run.inputs[0]
    if not directory.is_dir():
        print(f"ERROR: missing {directory}")
        print("Fix: pass a directory of .ts files")
        return ERROR

    paths = sorted(directory.glob("*.ts"))
    options = run.pipeline_options()
    print(f"Benchmarking {len(paths)} inputs (jobs={run.jobs})...")

    if run.jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=run.jobs) as pool:
            rows = list(pool.map(_bench_one, paths, [options] * len(paths)))
    else:
        rows = [_bench_one(p, options) for p in paths]

    out = run.out or Path("artefacts/bench.csv")
    write_stats_csv(rows, out)

    if run.track:
        track_rows(rows, out, options, cfg)
        print("MLflow saved runs to:", cfg.mlflow_tracking_uri)

    failed = [r["input"] for r in rows if r["status"] != "ok"]
    print("\nDONE ✅")
    print(f"Saved stats: {out}")
    if failed:
        print(f"failed rows: {', '.join(failed)}")
        return FAILED
    return OK


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsdecomp",
        description="Decompose a transition system into interacting state machines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def budgets(p: argparse.ArgumentParser) -> None:
        p.add_argument("--region-budget", type=int, default=None)
        p.add_argument("--solver-budget", type=int, default=None)

    def pipeline(p: argparse.ArgumentParser) -> None:
        p.add_argument("--merge", choices=["sat", "none"], default=None)
        p.add_argument("--exact", action="store_true")
        budgets(p)

    p = sub.add_parser("validate", help="parse and validate a .ts file")
    p.add_argument("path")
    budgets(p)

    p = sub.add_parser("regions", help="print minimal regions and the ECTS verdict")
    p.add_argument("path")
    p.add_argument("--json", action="store_true")
    p.add_argument("--oracle", action="store_true", help="cross-check by brute force")
    budgets(p)

    p = sub.add_parser("decompose", help="run the full pipeline")
    p.add_argument("path")
    p.add_argument("--out", default=None)
    p.add_argument("--dot", action="store_true")
    pipeline(p)

    p = sub.add_parser("verify", help="check a set of .sm files against a .ts")
    p.add_argument("path")
    p.add_argument("paths", nargs="+")
    budgets(p)

    p = sub.add_parser("product", help="synchronous product of .ts/.sm files")
    p.add_argument("paths", nargs="+")
    p.add_argument("--out", default=None)
    budgets(p)

    p = sub.add_parser("bench", help="run the pipeline on every .ts in a directory")
    p.add_argument("path")
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--track", action="store_true", help="log runs to MLflow")
    pipeline(p)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = Config()
        run = RunConfig.from_args(args, cfg)
    except ConfigError as e:
        print(f"ERROR: {e}")
        return ERROR

    commands = {
        "validate": cmd_validate,
        "regions": cmd_regions,
        "decompose": cmd_decompose,
        "verify": cmd_verify,
        "product": cmd_product,
        "bench": lambda r: cmd_bench(r, cfg),
    }
    try:
        return commands[run.command](run)
    except NotECTSError as e:
        print(f"ERROR: {e}")
        return NOT_ECTS
    except (TSFormatError, TSValidationError, StateMachineError) as e:
        print(f"INVALID: {e}")
        return FAILED
    except DecompositionError as e:
        print(f"ERROR: {e}")
        return ERROR
    except OSError as e:
        print(f"ERROR: {e}")
        return ERROR


if __name__ == "__main__":
    raise SystemExit(main())
