"""Round metrics, output files and run comparison.

Each executed round yields one RoundMetrics record; the harness persists
them as one metrics.csv row per round (columns documented in
docs/metrics_schema.md) plus an events.jsonl stream. Floats are written
with repr so the CSV round-trips losslessly and byte-identically.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

EVENT_SPLIT = "split"
EVENT_STOP = "stop"
EVENT_CLOUD_AGG = "cloud_agg"
EVENT_DEADLINE_DROP = "deadline_drop"
EVENT_BUDGET_HALT = "budget_halt"

_BASE_COLUMNS = [
    "round", "t_round", "e_round", "t_cum", "e_cum",
    "n_selected", "n_dropped", "n_splits", "n_stops",
    "sel_fair", "sel_greedy", "sel_round_robin", "sel_random",
    "cloud_agg", "n_clusters", "n_stopped_clusters",
    "spec_acc_min", "spec_acc_mean", "spec_acc_max",
    "glob_acc_min", "glob_acc_mean", "glob_acc_max",
    "delta_norm_mean", "delta_norm_max",
    "wmd_norm_min", "wmd_norm_max",
    "global_model_hash",
]


@dataclass
class RoundMetrics:
    """Everything recorded about one executed global round."""

    round: int
    t_round: float
    e_round: float
    t_cum: float
    e_cum: float
    n_selected: int
    n_dropped: int
    provenance_counts: dict[str, int]
    cloud_agg: bool
    clusters_per_edge: dict[int, int]
    stopped_per_edge: dict[int, int]
    cluster_accuracy: dict[int, tuple[float, float, float]]
    cluster_mean_delta_norm: dict[int, float]
    client_delta_norms: dict[int, float]
    client_spec_accuracy: dict[int, float]
    client_global_accuracy: dict[int, float]
    global_model_hash: str
    events: list[dict] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return sum(self.clusters_per_edge.values())

    @property
    def n_stopped_clusters(self) -> int:
        return sum(self.stopped_per_edge.values())


def csv_columns(edge_ids: Sequence[int]) -> list[str]:
    return _BASE_COLUMNS + [f"clusters_e{k}" for k in sorted(edge_ids)]


def _stats(values: Sequence[float]) -> tuple[str, str, str]:
    if not values:
        return "", "", ""
    vals = list(values)
    return (repr(min(vals)), repr(sum(vals) / len(vals)), repr(max(vals)))


def _row(m: RoundMetrics, edge_ids: Sequence[int]) -> list[str]:
    spec = _stats(list(m.client_spec_accuracy.values()))
    glob = _stats(list(m.client_global_accuracy.values()))
    dn = _stats(list(m.client_delta_norms.values()))
    wmd = _stats(list(m.cluster_mean_delta_norm.values()))
    n_splits = sum(1 for e in m.events if e["event"] == EVENT_SPLIT)
    n_stops = sum(1 for e in m.events if e["event"] == EVENT_STOP)
    row = [
        str(m.round), repr(m.t_round), repr(m.e_round), repr(m.t_cum),
        repr(m.e_cum), str(m.n_selected), str(m.n_dropped),
        str(n_splits), str(n_stops),
        str(m.provenance_counts.get("fair", 0)),
        str(m.provenance_counts.get("greedy", 0)),
        str(m.provenance_counts.get("round_robin", 0)),
        str(m.provenance_counts.get("random", 0)),
        str(int(m.cloud_agg)), str(m.n_clusters), str(m.n_stopped_clusters),
        spec[0], spec[1], spec[2], glob[0], glob[1], glob[2],
        dn[1], dn[2], wmd[0], wmd[2], m.global_model_hash,
    ]
    row += [str(m.clusters_per_edge.get(k, 0)) for k in sorted(edge_ids)]
    return row


def write_metrics_csv(path: Path, rows: Sequence[RoundMetrics],
                      edge_ids: Sequence[int]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_columns(edge_ids))
        for m in rows:
            writer.writerow(_row(m, edge_ids))


def write_events_jsonl(path: Path, rows: Sequence[RoundMetrics]) -> None:
    with open(path, "w") as fh:
        for m in rows:
            for event in m.events:
                fh.write(json.dumps(event, sort_keys=True) + "\n")


def read_metrics_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_events_jsonl(path: Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


SUMMARY_COLUMNS = [
    "scheme", "seed", "rounds_run", "final_acc_mean", "final_acc_gap",
    "rounds_to_stable_partition", "all_stopped_round", "total_energy_j",
    "total_time_s", "cloud_agg_events", "energy_savings_vs_baseline_pct",
    "population_hash",
]


def _acc_fields(scheme: str) -> tuple[str, str, str]:
    # the hfl comparison point is the single global model; clustered
    # schemes report the specialized model each client is assigned
    if scheme == "hfl":
        return "glob_acc_min", "glob_acc_mean", "glob_acc_max"
    return "spec_acc_min", "spec_acc_mean", "spec_acc_max"


def summarize(run_dirs: Sequence[Path]) -> list[dict]:
    """Comparison table across completed runs over one population snapshot.

    Refuses to compare runs whose population hashes differ.
    """
    if len(run_dirs) < 2:
        raise ValueError("summarize needs at least two run directories")
    runs = []
    for d in run_dirs:
        d = Path(d)
        resolved = json.loads((d / "config-resolved.json").read_text())
        runs.append((d, resolved, read_metrics_csv(d / "metrics.csv"),
                     read_events_jsonl(d / "events.jsonl")))
    hashes = {r[1]["population_hash"] for r in runs}
    if len(hashes) != 1:
        raise ValueError(f"population hashes differ across runs: {sorted(hashes)}")

    table = []
    for d, resolved, rows, events in runs:
        scheme = resolved["scheme"]
        last = rows[-1]
        lo, mean, hi = _acc_fields(scheme)
        split_rounds = [e["round"] for e in events if e["event"] == EVENT_SPLIT]
        all_stopped = ""
        for row in rows:
            if row["n_clusters"] == row["n_stopped_clusters"]:
                if all_stopped == "":
                    all_stopped = row["round"]
            else:
                all_stopped = ""
        table.append({
            "scheme": scheme,
            "seed": str(resolved["seed"]),
            "rounds_run": str(len(rows)),
            "final_acc_mean": last[mean],
            "final_acc_gap": repr(float(last[hi]) - float(last[lo])),
            "rounds_to_stable_partition": str(max(split_rounds) if split_rounds else 0),
            "all_stopped_round": all_stopped,
            "total_energy_j": last["e_cum"],
            "total_time_s": last["t_cum"],
            "cloud_agg_events": str(sum(int(r["cloud_agg"]) for r in rows)),
            "population_hash": resolved["population_hash"],
        })
    baseline = next((r for r in table if r["scheme"] == "baseline"), None)
    for row in table:
        if baseline is None:
            row["energy_savings_vs_baseline_pct"] = ""
        else:
            e_b = float(baseline["total_energy_j"])
            e = float(row["total_energy_j"])
            row["energy_savings_vs_baseline_pct"] = repr(100.0 * (e_b - e) / e_b)
    return table


def write_summary_csv(path: Path, table: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for row in table:
            writer.writerow(row)
