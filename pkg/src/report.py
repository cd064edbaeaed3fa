from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable

import mlflow
import pandas as pd

from src.config import Config
from src.decompose import DecompositionReport, PipelineOptions

# Fixed column order of the bench CSV. Wall times come last.
STATS_COLUMNS = [
    "input",
    "status",
    "ts_states",
    "ts_transitions",
    "regions",
    "sm_count",
    "total_places",
    "total_transitions",
    "avg_places",
    "avg_alphabet",
    "largest_places",
    "largest_alphabet",
    "generate_places",
    "generate_transitions",
    "irredundant_places",
    "irredundant_transitions",
    "merge_places",
    "merge_transitions",
    "verified",
    "error",
    "generate_ms",
    "irredundant_ms",
    "merge_ms",
]

STAGES = ("generate", "irredundant", "merge")


def average(total: int, count: int) -> str:
    """
    total / count with two decimals, rounding half up ("2.50", "0.67").
    """
    if count == 0:
        return "0.00"
    value = Decimal(total) / Decimal(count)
    return str(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def stats_row(name: str, report: DecompositionReport) -> dict:
    final = report.final
    machines = final.machines
    row = {c: None for c in STATS_COLUMNS}
    row.update(
        {
            "input": name,
            "status": "ok" if report.verification.verified else "unverified",
            "ts_states": len(report.ts.states),
            "ts_transitions": len(report.ts.transitions),
            "regions": len(report.regions),
            "sm_count": len(machines),
            "total_places": final.total_places,
            "total_transitions": final.total_transitions,
            "avg_places": average(final.total_places, len(machines)),
            "avg_alphabet": average(sum(len(sm.alphabet) for sm in machines), len(machines)),
            "largest_places": 0,
            "largest_alphabet": 0,
            "verified": report.verification.verified,
        }
    )

    if machines:
        # most places, lowest index on ties
        largest = max(range(len(machines)), key=lambda i: (machines[i].num_places, -i))
        row["largest_places"] = machines[largest].num_places
        row["largest_alphabet"] = len(machines[largest].alphabet)

    for stage in report.stages:
        row[f"{stage.name}_places"] = stage.places
        row[f"{stage.name}_transitions"] = stage.transitions
        row[f"{stage.name}_ms"] = round(stage.wall_ms, 3)
    return row


def failed_row(name: str, status: str, error: str) -> dict:
    row = {c: None for c in STATS_COLUMNS}
    row.update({"input": name, "status": status, "verified": False, "error": error})
    return row


def write_stats_csv(rows: Iterable[dict], path: Path) -> Path:
    """
    Write the rows with pandas, fixed columns (an empty list gives just
    the header line).
    """
    df = pd.DataFrame(list(rows), columns=STATS_COLUMNS, dtype=object)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False)
    return path


def track_rows(rows: Iterable[dict], csv_path: Path, options: PipelineOptions, cfg: Config) -> None:
    """
    One MLflow run per bench input: options as params, numeric columns as
    metrics, the CSV as artifact.
    """
    mlflow.set_tracking_uri(cfg.mlflow_tracking_uri)
    mlflow.set_experiment(cfg.mlflow_experiment)

    for row in rows:
        with mlflow.start_run(run_name=str(row["input"])):
            # Params
            mlflow.log_param("merge", options.merge)
            mlflow.log_param("exact", options.exact)
            mlflow.log_param("region_budget", options.region_budget)
            mlflow.log_param("solver_budget", options.solver_budget)
            mlflow.log_param("status", row["status"])

            # Metrics
            for column in STATS_COLUMNS:
                value = row.get(column)
                if isinstance(value, (bool, int, float)):
                    mlflow.log_metric(column, float(value))
                elif column.startswith("avg_") and value is not None:
                    mlflow.log_metric(column, float(value))

            # Artefacts
            mlflow.log_artifact(str(csv_path))
