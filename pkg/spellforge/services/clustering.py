"""At-risk grouping workflow behind ``spellforge cluster``."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from spellforge.clustering.hierarchy import agglomerate, cut, rescale_unit
from spellforge.clustering.indices import KSelection, select_k
from spellforge.clustering.profile import (
    GroupProfile,
    assign_nearest,
    centroids,
    group_summary,
    summarize_rows,
)
from spellforge.config import settings
from spellforge.dependencies import derive_rng
from spellforge.errors import ConfigError
from spellforge.features.matrix import FeatureMatrix, read_features, with_interactions
from spellforge.learners.base import TrainedModel, predict
from spellforge.learners.codec import load_model
from spellforge.learners.ranking import top_predictors
from spellforge.learners.stacking import StackedModel
from spellforge.models import (
    ClusterConfig,
    ClusterReport,
    DudaHartRow,
    GroupSummary,
    PseudoFRow,
    encode_unbounded,
)
from spellforge.selection.ladder import resolve_inputs
from spellforge.services.manifest import ManifestRecorder

logger = logging.getLogger(__name__)

CLUSTERS_FILE = "clusters.json"
SUMMARY_FILE = "clusters_summary.csv"
COMPARISON = "no-benefit"


def load_cluster_config(path: Optional[Path] = None) -> ClusterConfig:
    if path is None:
        return ClusterConfig()
    try:
        return ClusterConfig.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))
    except FileNotFoundError as e:
        raise ConfigError(f"cluster config not found: {path}") from e
    except (json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"invalid cluster config {path}: {e}") from e


def _ranked_model(model: TrainedModel) -> Optional[TrainedModel]:
    """The model itself, or the first stacked component that ranks its predictors."""
    candidates = model.components if isinstance(model, StackedModel) else [model]
    for candidate in candidates:
        try:
            top_predictors(candidate, 1)
        except ConfigError:
            continue
        return candidate
    return None


def cluster_variables(tokens: Sequence[str], X: FeatureMatrix, model: TrainedModel) -> List[str]:
    """Ordered union of groups, columns and ``top:<k>`` predictors of ``model``."""
    out: List[str] = []
    for token in tokens:
        if token.startswith("top:"):
            try:
                k = int(token.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"malformed variable token {token!r}; expected top:<k>") from None
            ranked = _ranked_model(model)
            if ranked is None:
                logger.warning("model ranks no predictors; ignoring %s", token)
                continue
            names = [c for c in top_predictors(ranked, k) if c in X.columns]
        else:
            names = resolve_inputs([token], X, {})
        out.extend(c for c in names if c not in out)
    if not out:
        raise ConfigError("no clustering variables resolved")
    return out


def _summary(profile: GroupProfile, label) -> GroupSummary:
    return GroupSummary(
        group=label,
        size=profile.size,
        suppressed=profile.suppressed,
        mean=profile.mean,
        sd=profile.sd,
    )


def summary_table(report: ClusterReport) -> pd.DataFrame:
    """One row per variable with mean and sd columns per group, plus an observations row."""
    groups = [*report.groups, *([report.comparison] if report.comparison else [])]
    table: Dict[str, list] = {"variable": [*report.variables, "observations"]}
    for g in groups:
        name = f"group{g.group}" if isinstance(g.group, int) else str(g.group)
        table[f"{name}_mean"] = [None if g.suppressed else g.mean.get(v) for v in report.variables] + [g.size]
        table[f"{name}_sd"] = [None if g.suppressed else g.sd.get(v) for v in report.variables] + [None]
    return pd.DataFrame(table)


@dataclass
class ClusterResult:
    report: ClusterReport
    files: Dict[str, Path]
    manifest: Path


class ClusterService:
    """Groups the persons a model predicts to be at risk and profiles the groups."""

    def __init__(self, out_dir: Path, threads: Optional[int] = None):
        self.out_dir = Path(out_dir)
        self.threads = threads

    def run(
        self,
        model_path: Path,
        features: Path,
        config_path: Optional[Path] = None,
        config: Optional[ClusterConfig] = None,
        seed: Optional[int] = None,
    ) -> ClusterResult:
        seed = settings.seed if seed is None else seed
        config = config if config is not None else load_cluster_config(config_path)
        threshold = settings.at_risk_threshold if config.threshold is None else config.threshold
        comparison_at = settings.no_receipt_threshold if config.no_receipt_threshold is None else config.no_receipt_threshold
        linkage = config.linkage or settings.cluster_linkage
        k_max = config.k_max or settings.cluster_k_max
        limit = config.sample_limit or settings.cluster_sample_limit
        min_size = config.min_group_size or settings.min_group_size

        recorder = ManifestRecorder(
            "cluster",
            config=config.model_dump(),
            seeds={"seed": seed},
            inputs=[model_path, features, config_path],
        )
        model = load_model(model_path)
        X = read_features(features)
        scores = predict(model, with_interactions(X, model.columns))
        at_risk = np.flatnonzero(scores > threshold)
        comparison = np.flatnonzero(scores <= comparison_at)
        logger.info(
            "%d of %d persons predicted above %.3f; %d at or below %.3f",
            at_risk.size, X.n, threshold, comparison.size, comparison_at,
        )

        report = ClusterReport(
            manifest_id=recorder.manifest_id,
            threshold=threshold,
            linkage=linkage,
            n_persons=X.n,
            n_at_risk=int(at_risk.size),
            n_clustered=0,
        )
        if at_risk.size:
            variables = cluster_variables(config.variables, X, model)
            report.variables = variables
            values = X.select(variables).values
            # column ranges from the at-risk rows only
            risk_rows, constant = rescale_unit(values[at_risk])
            comparison_rows, _ = rescale_unit(values[comparison], reference=values[at_risk])
            report.constant_variables = [variables[j] for j in constant]
            labels, selection, n_clustered = self._group(risk_rows, linkage, k_max, config.k, limit, seed)
            report.n_clustered = n_clustered
            profile = group_summary(risk_rows, labels, variables, min_group_size=min_size)
            report.k = profile.k
            report.groups = [_summary(g, g.group) for g in profile.groups]
            report.labels = {X.person_ids[int(r)]: int(g) for r, g in zip(at_risk, labels)}
            if selection is not None:
                self._fill_indices(report, selection)
            if comparison.size:
                summary = summarize_rows(comparison_rows, variables, 0)
                if summary.size < min_size:
                    summary = GroupProfile(group=0, size=summary.size, suppressed=True)
                report.comparison = _summary(summary, COMPARISON)
        else:
            logger.warning("no person is predicted above %.3f; writing an empty report", threshold)

        self.out_dir.mkdir(parents=True, exist_ok=True)
        clusters = self.out_dir / CLUSTERS_FILE
        clusters.write_text(report.model_dump_json(indent=2), encoding="utf-8")
        summary_path = self.out_dir / SUMMARY_FILE
        summary_table(report).to_csv(summary_path, index=False, float_format="%.6g", lineterminator="\n")
        files = {CLUSTERS_FILE: clusters, SUMMARY_FILE: summary_path}
        manifest = recorder.finish(self.out_dir, files.values(), extra={"k": report.k})
        return ClusterResult(report=report, files=files, manifest=manifest)

    @staticmethod
    def _group(
        rows: np.ndarray, linkage: str, k_max: int, forced: Optional[int], limit: int, seed: int
    ) -> Tuple[np.ndarray, Optional[KSelection], int]:
        n = rows.shape[0]
        if n < 3:
            logger.warning("only %d at-risk person(s); keeping a single group", n)
            return np.ones(n, dtype=np.int64), None, n
        sample = np.arange(n)
        if n > limit:
            rng = derive_rng(seed, 4)
            sample = np.sort(rng.choice(n, size=limit, replace=False))
            logger.info("clustering a seeded subsample of %d of %d rows", limit, n)
        d = agglomerate(rows[sample], linkage)
        selection = select_k(d, rows[sample], min(k_max, sample.size - 1))
        k = selection.k if forced is None else forced
        if k > sample.size:
            raise ConfigError(f"cannot form {k} groups from {sample.size} rows")
        sample_labels = cut(d, k)
        if sample.size == n:
            return sample_labels, selection, n
        labels = assign_nearest(rows, centroids(rows[sample], sample_labels, k))
        labels[sample] = sample_labels
        return labels, selection, int(sample.size)

    @staticmethod
    def _fill_indices(report: ClusterReport, selection: KSelection) -> None:
        report.k_max = selection.k_max
        report.low_confidence = selection.low_confidence
        report.reasons = list(selection.reasons)
        report.pseudo_f = [
            PseudoFRow(k=k, pseudo_f=encode_unbounded(v)) for k, v in enumerate(selection.pseudo_f, start=2)
        ]
        report.duda_hart = [
            DudaHartRow(
                k=s.k,
                parent_size=s.parent_size,
                je1=s.je1,
                je2=s.je2,
                ratio=s.ratio,
                pseudo_t2=encode_unbounded(s.pseudo_t2),
                critical=s.critical,
            )
            for s in selection.duda_hart
        ]
