"""Model-ladder workflow behind ``spellforge train``."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

from spellforge.config import settings
from spellforge.features.matrix import FeatureMatrix, read_features, read_outcomes
from spellforge.learners.base import TrainedModel
from spellforge.learners.codec import save_model
from spellforge.models import TrainReport
from spellforge.selection.ladder import (
    OUTCOME_COLUMNS,
    PACKAGED_LADDERS,
    LadderResult,
    align_outcomes,
    load_ladder,
    run_model_ladder,
)
from spellforge.selection.metrics import outcome_histogram
from spellforge.selection.split import split_train_holdout
from spellforge.services.manifest import ManifestRecorder

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
MODELS_DIR = "models"


def outcomes_beside(features: Path, outcomes: Optional[Path] = None) -> Path:
    """``outcomes.csv`` next to ``features.csv`` unless given explicitly."""
    return Path(outcomes) if outcomes is not None else Path(features).with_name("outcomes.csv")


@dataclass
class TrainResult:
    report: TrainReport
    models: Dict[str, TrainedModel]
    files: Dict[str, Path]
    manifest: Path


class TrainingService:
    """Runs a ladder on a feature matrix, saves every model and writes ``report.json``."""

    def __init__(self, out_dir: Path, threads: Optional[int] = None):
        self.out_dir = Path(out_dir)
        self.threads = threads

    def run(
        self,
        features: Path,
        outcomes: Optional[Path] = None,
        ladder: Optional[str] = None,
        outcome: Optional[str] = None,
        exclude_always_on: Optional[str] = None,
        seed: Optional[int] = None,
    ) -> TrainResult:
        seed = settings.seed if seed is None else seed
        outcomes_path = outcomes_beside(features, outcomes)
        ladder_inputs = [] if ladder is None or str(ladder) in PACKAGED_LADDERS else [ladder]
        recorder = ManifestRecorder(
            "train",
            config={
                "ladder": Path(str(ladder)).name if ladder else "ladder",
                "outcome": outcome,
                "exclude_always_on": exclude_always_on,
                "train_ratio": settings.train_ratio,
                "n_folds": settings.n_folds,
                "n_bootstrap": settings.n_bootstrap,
                "ci_level": settings.ci_level,
            },
            seeds={"seed": seed},
            inputs=[features, outcomes_path, *ladder_inputs],
        )
        document = load_ladder(ladder)
        X = read_features(features)
        table = align_outcomes(read_outcomes(outcomes_path), X.person_ids)
        plan = split_train_holdout(X.n, seed=seed)
        result = run_model_ladder(
            X,
            table,
            document,
            plan=plan,
            seed=seed,
            outcome=outcome,
            exclude_always_on=exclude_always_on,
            threads=self.threads,
        )

        files = self._save_models(result, recorder.manifest_id, seed)
        report = self._report(result, X, table, recorder.manifest_id, seed)
        path = self.out_dir / REPORT_FILE
        path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
        files[REPORT_FILE] = path
        manifest = recorder.finish(self.out_dir, files.values(), extra={"rows": len(report.rows)})
        return TrainResult(report=report, models=result.models, files=files, manifest=manifest)

    def _save_models(self, result: LadderResult, manifest_id: str, seed: int) -> Dict[str, Path]:
        directory = self.out_dir / MODELS_DIR
        directory.mkdir(parents=True, exist_ok=True)
        files = {}
        for row in result.rows:
            path = directory / f"{row.name}.json"
            save_model(result.models[row.name], path, seed=seed, label=row.name, manifest_id=manifest_id)
            row.model_file = f"{MODELS_DIR}/{row.name}.json"
            files[row.model_file] = path
        return files

    @staticmethod
    def _report(result: LadderResult, X: FeatureMatrix, table, manifest_id: str, seed: int) -> TrainReport:
        outcomes: List[str] = list(dict.fromkeys(row.outcome for row in result.rows))
        column = OUTCOME_COLUMNS[outcomes[0]]
        return TrainReport(
            manifest_id=manifest_id,
            seed=seed,
            outcome=outcomes[0] if len(outcomes) == 1 else "mixed",
            n_persons=X.n,
            n_train=int(result.plan.train.size),
            n_holdout=int(result.plan.holdout.size),
            rows=result.rows,
            histogram=outcome_histogram(table[column].to_numpy(dtype=float)),
        )
