"""Re-scoring saved models behind ``spellforge evaluate``."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from spellforge.config import settings
from spellforge.dependencies import derive_seed
from spellforge.errors import ConfigError, DataError
from spellforge.features.matrix import read_features, read_outcomes, with_interactions
from spellforge.learners.base import predict
from spellforge.learners.codec import load_model
from spellforge.models import EvaluateReport, EvaluateRow, TrainReport
from spellforge.selection.ladder import OUTCOME_COLUMNS, always_on_mask, align_outcomes
from spellforge.selection.metrics import evaluate_predictions
from spellforge.selection.split import split_train_holdout
from spellforge.services.manifest import ManifestRecorder
from spellforge.services.training import outcomes_beside

logger = logging.getLogger(__name__)

EVALUATION_FILE = "evaluation.json"


@dataclass
class ScoringTarget:
    path: Path
    label: Optional[str]
    outcome: str
    sample_filter: Optional[str]


def scoring_targets(
    sources: Sequence[Path],
    outcome: Optional[str] = None,
    exclude_always_on: Optional[str] = None,
) -> List[ScoringTarget]:
    """Model files to score; a ``report.json`` contributes every row it lists."""
    targets: List[ScoringTarget] = []
    for source in map(Path, sources):
        if source.is_dir():
            for path in sorted(source.glob("*.json")):
                targets.append(ScoringTarget(path, path.stem, outcome or "any-is", exclude_always_on))
            continue
        if source.name.endswith("report.json"):
            report = TrainReport.model_validate_json(source.read_text(encoding="utf-8"))
            for row in report.rows:
                if row.model_file is None:
                    continue
                targets.append(
                    ScoringTarget(
                        source.parent / row.model_file,
                        row.name,
                        outcome or row.outcome,
                        exclude_always_on or row.sample_filter,
                    )
                )
            continue
        targets.append(ScoringTarget(source, source.stem, outcome or "any-is", exclude_always_on))
    if not targets:
        raise ConfigError("no model files to evaluate")
    return targets


class EvaluationService:
    """Scores saved models on the holdout split a seed implies, or on every row."""

    def __init__(self, out_dir: Path, threads: Optional[int] = None):
        self.out_dir = Path(out_dir)
        self.threads = threads

    def run(
        self,
        features: Path,
        models: Sequence[Path],
        outcomes: Optional[Path] = None,
        outcome: Optional[str] = None,
        exclude_always_on: Optional[str] = None,
        all_rows: bool = False,
        seed: Optional[int] = None,
    ) -> Tuple[EvaluateReport, Path]:
        seed = settings.seed if seed is None else seed
        if outcome is not None and outcome not in OUTCOME_COLUMNS:
            raise ConfigError(f"unknown outcome {outcome!r}; expected any-is or unemployment")
        outcomes_path = outcomes_beside(features, outcomes)
        targets = scoring_targets(models, outcome, exclude_always_on)
        recorder = ManifestRecorder(
            "evaluate",
            config={"outcome": outcome, "exclude_always_on": exclude_always_on, "all_rows": all_rows},
            seeds={"seed": seed},
            inputs=[features, outcomes_path, *[t.path for t in targets]],
        )
        X = read_features(features)
        table = align_outcomes(read_outcomes(outcomes_path), X.person_ids)
        plan = split_train_holdout(X.n, seed=seed)
        sample = "all" if all_rows else "holdout"

        rows = []
        for index, target in enumerate(targets):
            model = load_model(target.path)
            design = with_interactions(X, model.columns)
            y = table[OUTCOME_COLUMNS[target.outcome]].to_numpy(dtype=float)
            keep = always_on_mask(table, target.sample_filter)
            scored = plan.restrict(keep) if keep is not None else plan
            positions = np.arange(X.n) if all_rows else scored.holdout
            if keep is not None and all_rows:
                positions = positions[keep]
            if positions.size == 0:
                raise DataError(f"no rows left to score {target.path.name}")
            yhat = predict(model, design.rows(positions))
            report = evaluate_predictions(
                y[positions], yhat, sample, seed=derive_seed(seed, index, 3)
            )
            logger.info("%s on %s rows: MSE %.5f", target.label, sample, report.mse)
            rows.append(
                EvaluateRow(
                    model_file=str(target.path),
                    label=target.label,
                    kind=model.kind.value,
                    outcome=target.outcome,
                    report=report,
                )
            )

        document = EvaluateReport(manifest_id=recorder.manifest_id, seed=seed, sample=sample, rows=rows)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / EVALUATION_FILE
        path.write_text(document.model_dump_json(indent=2), encoding="utf-8")
        recorder.finish(self.out_dir, [path])
        return document, path
