"""Feature-matrix workflow behind ``spellforge features``."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence

import pandas as pd

from spellforge.core.history import ObservationWindow
from spellforge.core.io import load_cohort
from spellforge.features.catalog import FeatureCatalog
from spellforge.features.matrix import (
    FeatureMatrix,
    build_matrix,
    build_outcomes,
    write_columns,
    write_features,
    write_outcomes,
)
from spellforge.services.manifest import ManifestRecorder

logger = logging.getLogger(__name__)


@dataclass
class FeatureResult:
    matrix: FeatureMatrix
    outcomes: pd.DataFrame
    files: Dict[str, Path]
    manifest: Path


class FeatureService:
    """Reads a cohort, derives the catalog's columns and writes them with the outcomes."""

    def __init__(self, out_dir: Path, threads: Optional[int] = None):
        self.out_dir = Path(out_dir)
        self.threads = threads

    def run(
        self,
        spells: Path,
        persons: Path,
        catalog: Optional[Path] = None,
        jobs: Optional[Path] = None,
        events: Optional[Path] = None,
        parent_links: Optional[Path] = None,
        always_on_windows: Sequence[str] = ("2011-2014",),
    ) -> FeatureResult:
        windows = [ObservationWindow.parse(w) for w in always_on_windows]
        recorder = ManifestRecorder(
            "features",
            config={"always_on_windows": [w.label() for w in windows]},
            inputs=[spells, persons, catalog, jobs, events, parent_links],
        )
        feature_catalog = FeatureCatalog.load(catalog)
        cohort = load_cohort(spells, persons, jobs, events, parent_links)
        matrix = build_matrix(cohort.persons, feature_catalog, cohort, threads=self.threads)
        outcomes = build_outcomes(cohort.persons, windows)

        self.out_dir.mkdir(parents=True, exist_ok=True)
        files = {
            "features.csv": write_features(matrix, self.out_dir / "features.csv"),
            "columns.json": write_columns(matrix, self.out_dir / "columns.json", recorder.manifest_id),
            "outcomes.csv": write_outcomes(outcomes, self.out_dir / "outcomes.csv"),
        }
        manifest = recorder.finish(
            self.out_dir,
            files.values(),
            extra={"n_persons": matrix.n, "n_columns": matrix.k, "declared_columns": feature_catalog.declared_column_count()},
        )
        return FeatureResult(matrix=matrix, outcomes=outcomes, files=files, manifest=manifest)
