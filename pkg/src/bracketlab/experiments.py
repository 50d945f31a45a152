"""Run logs, suite orchestration, and report aggregation.

Run logs are line-delimited JSON, one record per line, written with sorted
keys so identical configs reproduce byte-identical files. Summaries are
always recomputed from the raw records; nothing here caches derived numbers.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .training import (
    BIAS_OFF,
    BIAS_ON,
    BINARY,
    SCHEMA_VERSION,
    STATUS_OK,
    TERNARY,
    RunRecord,
    TrainConfig,
    train_run,
)

MANIFEST_SCHEMA_VERSION = 1

#: histogram conventions: 30 uniform bins placed so the targets -1 (a/b) and
#: 1 (u) sit centrally, plus explicit under/overflow bins
AB_RATIO_EDGES = tuple(np.linspace(-3.0, 1.0, 31))
U_VALUE_EDGES = tuple(np.linspace(-0.5, 1.5, 31))

DEFAULT_TRAIN_LENGTHS = (2, 4, 8)


class SchemaMismatch(ValueError):
    def __init__(self, path, version):
        super().__init__(f"{path}: unknown run-record schema_version {version!r}")
        self.path = path
        self.version = version


def record_to_line(record: RunRecord) -> str:
    return json.dumps(record.to_dict(), sort_keys=True) + "\n"


def write_run_log(path, records) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for record in records:
            fh.write(record_to_line(record))
            fh.flush()


def read_run_log(path) -> list[RunRecord]:
    records = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            if d.get("schema_version") != SCHEMA_VERSION:
                raise SchemaMismatch(path, d.get("schema_version"))
            records.append(RunRecord.from_dict(d))
    return records


def config_log_name(config: TrainConfig) -> str:
    return f"runs_{config.task}_bias-{config.bias_mode}_len{config.train_length}.jsonl"


def run_config(config: TrainConfig, log_path) -> list[RunRecord]:
    """Execute all runs of one config, appending each record as it finishes."""
    records = []
    with open(log_path, "w", encoding="ascii") as fh:
        for run_index in range(config.n_runs):
            record = train_run(config, run_index)
            fh.write(record_to_line(record))
            fh.flush()
            records.append(record)
    return records


def derive_config_seed(master_seed: int, index: int) -> int:
    # distinct per config and stable across runs of the same suite
    return master_seed * 1000 + index


def default_suite(
    master_seed: int = 0,
    train_lengths=DEFAULT_TRAIN_LENGTHS,
    **overrides,
) -> list[TrainConfig]:
    """Cross product bias x task x length in report row order, one derived
    seed per config."""
    configs = []
    index = 0
    for bias_mode in (BIAS_OFF, BIAS_ON):
        for task in (BINARY, TERNARY):
            for length in train_lengths:
                configs.append(
                    TrainConfig(
                        task=task,
                        bias_mode=bias_mode,
                        train_length=length,
                        seed=derive_config_seed(master_seed, index),
                        **overrides,
                    )
                )
                index += 1
    return configs


def write_suite_manifest(path, master_seed: int, configs) -> dict:
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "master_seed": master_seed,
        "configs": [c.to_dict() for c in configs],
        "log_names": [config_log_name(c) for c in configs],
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def run_suite(configs, out_dir, master_seed: int = 0):
    """Write the manifest, then run every config into its own log file."""
    os.makedirs(out_dir, exist_ok=True)
    manifest_path = os.path.join(out_dir, "suite.json")
    write_suite_manifest(manifest_path, master_seed, configs)
    results = []
    for config in configs:
        log_path = os.path.join(out_dir, config_log_name(config))
        records = run_config(config, log_path)
        results.append((config, log_path, records))
    return manifest_path, results


# ---------------------------------------------------------------------------
# aggregation


def experiment_label(task: str, bias_mode: str) -> str:
    kind = "Binary" if task == BINARY else "Ternary"
    bias = "without bias" if bias_mode == BIAS_OFF else "with bias"
    return f"{kind} ({bias})"


def format_accuracy(value: float) -> str:
    # table style: one decimal, except a clean 100
    return "100" if value == 100.0 else f"{value:.1f}"


def format_cell(avg: float, mn: float, mx: float) -> str:
    return f"{format_accuracy(avg)} ({format_accuracy(mn)}/{format_accuracy(mx)})"


@dataclass
class SummaryRow:
    task: str
    bias_mode: str
    train_length: int
    n_runs: int
    n_diverged: int
    train: tuple[float, float, float]  # (avg, min, max) of final train accuracy
    evals: dict[str, tuple[float, float, float]]  # eval length -> (avg, min, max)

    @property
    def label(self) -> str:
        return experiment_label(self.task, self.bias_mode)

    def to_dict(self) -> dict:
        return {
            "experiment": self.label,
            "task": self.task,
            "bias_mode": self.bias_mode,
            "train_length": self.train_length,
            "n_runs": self.n_runs,
            "n_diverged": self.n_diverged,
            "train": list(self.train),
            "evals": {k: list(v) for k, v in self.evals.items()},
        }


def _agg(values) -> tuple[float, float, float]:
    return (float(np.mean(values)), float(min(values)), float(max(values)))


def group_key(record: RunRecord) -> tuple[str, str, int]:
    c = record.config
    return (c["task"], c["bias_mode"], c["train_length"])


def row_order_key(key: tuple[str, str, int]):
    task, bias_mode, length = key
    return ((BIAS_OFF, BIAS_ON).index(bias_mode), (BINARY, TERNARY).index(task), length)


def summarize_records(records) -> list[SummaryRow]:
    """One row per (task, bias, length), recomputed from raw records and
    sorted in report row order. Diverged runs are counted but excluded from
    the accuracy aggregates."""
    groups: dict[tuple[str, str, int], list[RunRecord]] = {}
    for record in records:
        groups.setdefault(group_key(record), []).append(record)
    rows = []
    for key in sorted(groups, key=row_order_key):
        task, bias_mode, length = key
        group = groups[key]
        ok = [r for r in group if r.status == STATUS_OK]
        evals: dict[str, tuple[float, float, float]] = {}
        if ok:
            train = _agg([r.final_train_accuracy for r in ok])
            for eval_len in sorted({k for r in ok for k in r.eval_accuracy}, key=int):
                vals = [r.eval_accuracy[eval_len] for r in ok if eval_len in r.eval_accuracy]
                evals[eval_len] = _agg(vals)
        else:
            train = (float("nan"),) * 3
        rows.append(
            SummaryRow(
                task=task,
                bias_mode=bias_mode,
                train_length=length,
                n_runs=len(group),
                n_diverged=len(group) - len(ok),
                train=train,
                evals=evals,
            )
        )
    return rows


def summary_line(row: SummaryRow) -> str:
    parts = [
        f"{row.label} | length {row.train_length}",
        f"train {format_cell(*row.train)}",
    ]
    for eval_len in sorted(row.evals, key=int):
        parts.append(f"{eval_len} tokens {format_cell(*row.evals[eval_len])}")
    if row.n_diverged:
        parts.append(f"diverged {row.n_diverged}/{row.n_runs}")
    return " | ".join(parts)


def accuracy_table_csv(rows) -> str:
    eval_lens = sorted({k for row in rows for k in row.evals}, key=int)
    header = ["Experiment", "Train Length", "Train"] + [f"{k} Tokens" for k in eval_lens]
    lines = [",".join(header)]
    for row in rows:
        cells = [row.label, str(row.train_length), format_cell(*row.train)]
        for k in eval_lens:
            cells.append(format_cell(*row.evals[k]) if k in row.evals else "")
        lines.append(",".join(f'"{c}"' if "," in c else c for c in cells))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# indicator histograms


@dataclass
class Histogram:
    """Binned indicator values for one config group. `counts` has one slot per
    interior bin; out-of-range values land in underflow/overflow; undefined
    ratios (degenerate b) are counted separately, never dropped."""

    indicator: str
    edges: tuple[float, ...]
    counts: list[int]
    underflow: int
    overflow: int
    undefined: int

    @property
    def total(self) -> int:
        return sum(self.counts) + self.underflow + self.overflow + self.undefined

    def to_dict(self) -> dict:
        return {
            "indicator": self.indicator,
            "edges": list(self.edges),
            "counts": list(self.counts),
            "underflow": self.underflow,
            "overflow": self.overflow,
            "undefined": self.undefined,
        }


def bin_values(values, edges, n_undefined: int, indicator: str) -> Histogram:
    edges_arr = np.asarray(edges)
    counts = [0] * (len(edges) - 1)
    underflow = overflow = 0
    for v in values:
        if v < edges_arr[0]:
            underflow += 1
        elif v >= edges_arr[-1]:
            overflow += 1
        else:
            counts[int(np.searchsorted(edges_arr, v, side="right")) - 1] += 1
    return Histogram(indicator, tuple(edges), counts, underflow, overflow, n_undefined)


def indicator_histograms(records) -> list[dict]:
    """Per config group: a/b-ratio and u-value histograms over the final
    weights of all runs (diverged runs included; their weights are real)."""
    groups: dict[tuple[str, str, int], list[RunRecord]] = {}
    for record in records:
        groups.setdefault(group_key(record), []).append(record)
    out = []
    for key in sorted(groups, key=row_order_key):
        task, bias_mode, length = key
        group = groups[key]
        ratios = [r.indicators["ab_ratio"] for r in group]
        defined = [v for v in ratios if v is not None]
        n_undefined = len(ratios) - len(defined)
        u_values = [r.indicators["u_value"] for r in group]
        out.append(
            {
                "task": task,
                "bias_mode": bias_mode,
                "train_length": length,
                "runs": len(group),
                "ab_ratio": bin_values(defined, AB_RATIO_EDGES, n_undefined, "ab_ratio").to_dict(),
                "u_value": bin_values(u_values, U_VALUE_EDGES, 0, "u_value").to_dict(),
            }
        )
    return out


def histograms_csv(groups) -> str:
    header = (
        "task,bias_mode,train_length,indicator,bin_kind,bin_index,"
        "bin_lo,bin_hi,count,undefined_count"
    )
    lines = [header]
    for g in groups:
        for indicator in ("ab_ratio", "u_value"):
            h = g[indicator]
            base = f"{g['task']},{g['bias_mode']},{g['train_length']},{indicator}"
            undefined = h["undefined"]
            edges = h["edges"]
            lines.append(f"{base},underflow,,,{edges[0]},{h['underflow']},{undefined}")
            for i, count in enumerate(h["counts"]):
                lines.append(f"{base},bin,{i},{edges[i]},{edges[i + 1]},{count},{undefined}")
            lines.append(f"{base},overflow,,{edges[-1]},,{h['overflow']},{undefined}")
    return "\n".join(lines) + "\n"


def write_report(out_dir, records) -> dict:
    """Emit the accuracy table (CSV) and histogram data (JSON + CSV)."""
    os.makedirs(out_dir, exist_ok=True)
    rows = summarize_records(records)
    table = accuracy_table_csv(rows)
    groups = indicator_histograms(records)
    paths = {
        "table": os.path.join(out_dir, "accuracy_table.csv"),
        "histograms_json": os.path.join(out_dir, "histograms.json"),
        "histograms_csv": os.path.join(out_dir, "histograms.csv"),
    }
    with open(paths["table"], "w", encoding="ascii") as fh:
        fh.write(table)
    with open(paths["histograms_json"], "w", encoding="ascii") as fh:
        json.dump({"groups": groups}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(paths["histograms_csv"], "w", encoding="ascii") as fh:
        fh.write(histograms_csv(groups))
    return {"rows": rows, "table": table, "histograms": groups, "paths": paths}
