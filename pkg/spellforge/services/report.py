"""Human-readable rendering of ``report.json`` behind ``spellforge report``."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import pandas as pd
from pydantic import ValidationError

from spellforge.errors import ConfigError, DataError, SchemaError
from spellforge.models import LadderRow, TrainReport
from spellforge.services.manifest import MANIFEST_FILE, ManifestRecorder

logger = logging.getLogger(__name__)

TABLE_FILE = "report.txt"
HISTOGRAM_FILE = "histogram.csv"
HEADERS = ("Model", "Predictors", "MSE", "CI", "R2")


def read_report(path: Path) -> TrainReport:
    path = Path(path)
    try:
        report = TrainReport.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except FileNotFoundError as e:
        raise SchemaError(f"report not found: {path}", path=str(path)) from e
    except (json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"invalid report {path}: {e}") from e
    if not report.rows:
        raise DataError(f"report {path} has no rows")
    return report


def _cells(row: LadderRow) -> List[str]:
    holdout = row.holdout
    ci = "" if holdout.ci_low is None else f"[{holdout.ci_low:.4f}, {holdout.ci_high:.4f}]"
    r2 = "n/a" if holdout.r_squared is None else f"{100.0 * holdout.r_squared:.1f}%"
    name = row.name if not row.label else f"{row.name} {row.label}"
    return [name, str(row.n_predictors), f"{holdout.mse:.4f}", ci, r2]


def render_table(report: TrainReport) -> str:
    """Fixed-width table of holdout results, one line per ladder row."""
    body = [_cells(row) for row in report.rows]
    widths = [max(len(h), *(len(r[j]) for r in body)) for j, h in enumerate(HEADERS)]
    left = {0, 3}

    def line(cells):
        return "  ".join(c.ljust(w) if j in left else c.rjust(w) for j, (c, w) in enumerate(zip(cells, widths))).rstrip()

    rule = "  ".join("-" * w for w in widths)
    title = f"Outcome: {report.outcome}; train {report.n_train}, holdout {report.n_holdout}"
    return "\n".join([title, line(HEADERS), rule, *(line(r) for r in body)]) + "\n"


def histogram_frame(report: TrainReport) -> pd.DataFrame:
    rows = [
        {
            "bin": "0" if h.high == 0.0 else ("1" if h.low == 1.0 else f"{h.low:.2f}-{h.high:.2f}"),
            "low": h.low,
            "high": h.high,
            "count": h.count,
            "share": h.share,
            "density": h.density,
        }
        for h in report.histogram
    ]
    return pd.DataFrame(rows, columns=["bin", "low", "high", "count", "share", "density"])


@dataclass
class ReportResult:
    table: str
    table_path: Path
    histogram_path: Path


class ReportService:
    def __init__(self, out_dir: Optional[Path] = None):
        self.out_dir = Path(out_dir) if out_dir is not None else None

    def run(self, report_path: Path) -> ReportResult:
        out_dir = self.out_dir or Path(report_path).parent
        recorder = ManifestRecorder("report", inputs=[report_path])
        report = read_report(report_path)
        table = render_table(report)
        out_dir.mkdir(parents=True, exist_ok=True)
        table_path = out_dir / TABLE_FILE
        table_path.write_text(table, encoding="utf-8")
        histogram_path = out_dir / HISTOGRAM_FILE
        histogram_frame(report).to_csv(histogram_path, index=False, float_format="%.6g", lineterminator="\n")
        # report.json sits beside the train manifest; do not overwrite it
        name = "report_manifest.json" if out_dir == Path(report_path).parent else MANIFEST_FILE
        recorder.finish(out_dir, [table_path, histogram_path], name=name)
        return ReportResult(table=table, table_path=table_path, histogram_path=histogram_path)
