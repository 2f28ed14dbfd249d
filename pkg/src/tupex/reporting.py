"""Report assembly: JSON, delimited CSV, an aligned text table, and figures."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import CorpusStats, EntityType, TYPE_ORDER
from .metrics import MatchCounts, MetricTriple
from . import figures


@dataclass(frozen=True)
class EvalRow:
    dataset: str
    config: str
    per_type: dict[EntityType, MetricTriple]
    per_type_counts: dict[EntityType, MatchCounts]
    tuple_metrics: MetricTriple
    tuple_counts: MatchCounts

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "config": self.config,
            "per_type": {t.value: self.per_type[t].to_dict() for t in TYPE_ORDER},
            "tuple": self.tuple_metrics.to_dict(),
            "counts": self.tuple_counts.to_dict(),
        }


def report_doc(rows: list[EvalRow], config_echo: dict) -> dict:
    return {"results": [r.to_dict() for r in rows], "meta": {"config": config_echo}}


def report_csv(rows: list[EvalRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "config", "scope", "precision", "recall", "f1", "correct", "predicted", "gold"])
    for r in rows:
        for etype in TYPE_ORDER:
            m, c = r.per_type[etype], r.per_type_counts[etype]
            writer.writerow(
                [r.dataset, r.config, etype.value,
                 f"{m.precision:.6f}", f"{m.recall:.6f}", f"{m.f1:.6f}",
                 c.correct, c.predicted, c.gold]
            )
        m, c = r.tuple_metrics, r.tuple_counts
        writer.writerow(
            [r.dataset, r.config, "tuple",
             f"{m.precision:.6f}", f"{m.recall:.6f}", f"{m.f1:.6f}",
             c.correct, c.predicted, c.gold]
        )
    return buf.getvalue()


def report_table(rows: list[EvalRow]) -> str:
    header = ["dataset", "config", "scope", "P", "R", "F1"]
    body: list[list[str]] = []
    for r in rows:
        for etype in TYPE_ORDER:
            m = r.per_type[etype]
            body.append([r.dataset, r.config, etype.value, f"{m.precision:.3f}", f"{m.recall:.3f}", f"{m.f1:.3f}"])
        m = r.tuple_metrics
        body.append([r.dataset, r.config, "tuple", f"{m.precision:.3f}", f"{m.recall:.3f}", f"{m.f1:.3f}"])
    widths = [max(len(header[i]), *(len(row[i]) for row in body)) if body else len(header[i]) for i in range(6)]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(header)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in body:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"


def write_eval_report(rows: list[EvalRow], out_dir: str | Path, config_echo: dict) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "report.json",
        "csv": out / "report.csv",
        "table": out / "report.txt",
        "figure": out / "report_f1.png",
    }
    paths["json"].write_text(
        json.dumps(report_doc(rows, config_echo), sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    paths["csv"].write_text(report_csv(rows), encoding="utf-8")
    paths["table"].write_text(report_table(rows), encoding="utf-8")
    figures.save_f1_bars([r.to_dict() for r in rows], paths["figure"])
    return paths


def stats_csv(stats: CorpusStats) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "sentences", "tuples", "proportion"])
    for s in stats.per_k:
        writer.writerow([s.k, s.sentences, s.tuples, f"{s.proportion:.6f}"])
    writer.writerow(["total", stats.total_sentences, stats.total_tuples, "1.000000"])
    return buf.getvalue()


def write_stats_report(stats: CorpusStats, out_dir: str | Path, config_echo: dict) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "stats.json",
        "csv": out / "stats.csv",
        "figure": out / "stats_distribution.png",
    }
    doc = {"stats": stats.to_dict(), "meta": {"config": config_echo}}
    paths["json"].write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    paths["csv"].write_text(stats_csv(stats), encoding="utf-8")
    figures.save_distribution_pie(stats, paths["figure"])
    return paths
