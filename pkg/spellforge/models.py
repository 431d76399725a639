"""Pydantic models for the JSON documents spellforge reads and writes."""

from datetime import datetime, timezone
from itertools import product
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class ErrorReport(BaseModel):
    """Error document printed on stderr when a command fails."""

    error: str = Field(description="Error type")
    message: str = Field(description="Error message")
    detail: Optional[Dict[str, Any]] = Field(
        default=None, description="Additional error details"
    )
    timestamp: datetime = Field(default_factory=_utcnow, description="Error timestamp")


class ColumnInfo(BaseModel):
    """Metadata for one feature-matrix column (``columns.json``)."""

    name: str = Field(description="Column name")
    entry: str = Field(description="Catalog entry that produced the column")
    family: str = Field(description="Derivation family, or missing-indicator/interaction")
    role: str = Field(default="value", description="value | missing-indicator | interaction")
    groups: List[str] = Field(default_factory=list, description="Catalog groups of the entry")
    note: Optional[str] = Field(default=None, description="Convention used, if any")


class ColumnsDocument(BaseModel):
    manifest_id: Optional[str] = Field(default=None, description="Run manifest identifier")
    columns: List[ColumnInfo] = Field(description="Columns in matrix order")


class ModelArtifact(BaseModel):
    """Serialized trained model (``model.json``)."""

    format_version: str = Field(default="1", description="Artifact format version")
    kind: str = Field(description="Model kind tag")
    hyperparameters: Dict[str, Any] = Field(default_factory=dict, description="Fitting hyperparameters")
    columns: List[str] = Field(default_factory=list, description="Training columns in model order")
    payload: Dict[str, Any] = Field(description="Coefficients, trees or support vectors")
    seed: Optional[int] = Field(default=None, description="Seed used while fitting")
    label: Optional[str] = Field(default=None, description="Ladder entry or learner name")
    manifest_id: Optional[str] = Field(default=None, description="Run manifest identifier")


class ParamGrid(BaseModel):
    """Values of one hyperparameter: an explicit list or ``count`` points on [min, max]."""

    min: Optional[float] = Field(default=None, description="Smallest value")
    max: Optional[float] = Field(default=None, description="Largest value")
    count: Optional[int] = Field(default=None, ge=1, description="Number of values")
    spacing: Literal["linear", "geometric"] = Field(default="geometric", description="Point spacing")
    values: Optional[List[float]] = Field(default=None, description="Explicit values")
    relative_to: Optional[Literal["lambda_max"]] = Field(
        default=None, description="Bounds are multiples of this data-dependent scale"
    )

    @model_validator(mode="after")
    def _check(self) -> "ParamGrid":
        if self.values is not None:
            if not self.values:
                raise ValueError("explicit grid values must not be empty")
            return self
        if self.min is None or self.max is None or self.count is None:
            raise ValueError("grid needs either values or min, max and count")
        if self.min > self.max:
            raise ValueError(f"grid min {self.min} exceeds max {self.max}")
        if self.spacing == "geometric" and self.min <= 0:
            raise ValueError("geometric grid needs a positive min")
        return self

    def points(self, scale: float = 1.0) -> List[float]:
        if self.values is not None:
            return [float(v) * scale for v in self.values]
        if self.count == 1:
            return [float(self.min) * scale]
        if self.spacing == "geometric":
            raw = np.geomspace(self.min, self.max, self.count)
        else:
            raw = np.linspace(self.min, self.max, self.count)
        return [float(v) * scale for v in raw]


class GridSpec(BaseModel):
    """Cartesian grid over named hyperparameters."""

    params: Dict[str, ParamGrid] = Field(default_factory=dict, description="Grid per hyperparameter")

    def cells(self, scales: Optional[Dict[str, float]] = None) -> List[Dict[str, float]]:
        """Every combination; the first parameter varies slowest."""
        scales = scales or {}
        names = list(self.params)
        axes = []
        for name in names:
            grid = self.params[name]
            scale = scales.get(grid.relative_to, 1.0) if grid.relative_to else 1.0
            axes.append(grid.points(scale))
        return [dict(zip(names, combo)) for combo in product(*axes)]


class EvalReport(BaseModel):
    """Prediction quality of one model on one sample."""

    sample: Literal["train", "cv", "holdout", "all"] = Field(description="Evaluated sample")
    n: int = Field(description="Rows evaluated")
    mse: float = Field(description="Mean squared error")
    r_squared: Optional[float] = Field(
        default=None, description="Squared correlation of prediction and outcome"
    )
    r_squared_defined: bool = Field(
        default=True, description="False when either vector has zero variance"
    )
    ci_low: Optional[float] = Field(default=None, description="Bootstrap lower bound of MSE")
    ci_high: Optional[float] = Field(default=None, description="Bootstrap upper bound of MSE")
    ci_level: Optional[float] = Field(default=None, description="Interval level")
    n_bootstrap: int = Field(default=0, description="Bootstrap replications")


class CvPoint(BaseModel):
    params: Dict[str, float] = Field(description="Grid cell")
    mse: Optional[float] = Field(default=None, description="Mean held-fold MSE; null if failed")
    failed: bool = Field(default=False)


class InteractionSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    source: str = Field(alias="from", description="Ladder entry whose top predictors interact")
    top: int = Field(default=20, ge=2, description="Number of top predictors")


class LadderEntry(BaseModel):
    """One row of a model ladder (``ladder.json``)."""

    name: str = Field(description="Row name, unique within the ladder")
    label: Optional[str] = Field(default=None, description="Human-readable predictor set")
    learner: str = Field(description="ols | lasso | svr | boosting | probit | ensemble")
    inputs: List[str] = Field(
        default_factory=list,
        description="Groups, column names, 'all', or 'top:<entry>:<k>'; combined as a union",
    )
    interactions: Optional[InteractionSpec] = Field(default=None)
    components: List[str] = Field(default_factory=list, description="Entries stacked by an ensemble")
    grid: Optional[GridSpec] = Field(default=None, description="Overrides the learner's default grid")
    outcome: Optional[Literal["any-is", "unemployment"]] = Field(default=None)
    exclude_always_on: Optional[str] = Field(
        default=None, description="Drop persons on IS for the whole window, e.g. '2011-2014'"
    )


class LadderDocument(BaseModel):
    version: str = Field(default="1")
    entries: List[LadderEntry] = Field(description="Rows in report order")


class LadderRow(BaseModel):
    """Report row for one fitted ladder entry."""

    name: str
    label: Optional[str] = None
    learner: str
    outcome: str
    sample_filter: Optional[str] = None
    n_inputs: int = Field(description="Candidate input columns")
    n_predictors: int = Field(description="Columns with a nonzero effect in the final model")
    selected: Dict[str, float] = Field(default_factory=dict, description="Selected hyperparameters")
    train: EvalReport
    cv: Optional[EvalReport] = None
    holdout: EvalReport
    cv_curve: List[CvPoint] = Field(default_factory=list)
    top_predictors: List[Dict[str, Any]] = Field(default_factory=list)
    model_file: Optional[str] = None


class HistogramRow(BaseModel):
    low: float
    high: float
    count: int
    share: float = Field(description="Fraction of all persons")
    density: Optional[float] = Field(default=None, description="Share per unit width; null for point masses")


class TrainReport(BaseModel):
    """``report.json`` written by ``train``."""

    manifest_id: Optional[str] = None
    seed: int
    outcome: str
    n_persons: int
    n_train: int
    n_holdout: int
    rows: List[LadderRow]
    histogram: List[HistogramRow] = Field(default_factory=list)


# run manifests

INF_SENTINEL = "+inf"
Unbounded = Union[float, Literal["+inf"]]


def encode_unbounded(value: Optional[float]) -> Optional[Unbounded]:
    """JSON-safe value: positive infinity becomes the ``"+inf"`` sentinel."""
    if value is None:
        return None
    return INF_SENTINEL if value == float("inf") else float(value)


class OutputRecord(BaseModel):
    path: str = Field(description="Path relative to the output directory")
    sha256: str = Field(description="Hex digest of the file contents")
    bytes: int = Field(description="File size")


class RunManifest(BaseModel):
    """``manifest.json``: what produced the files next to it."""

    manifest_id: str = Field(description="Hash of command, config, seeds and input digests")
    command: str = Field(description="Subcommand name")
    tool: str = Field(description="Tool name")
    tool_version: str = Field(description="Tool version")
    config_hash: str = Field(description="Hash of the effective options")
    config: Dict[str, Any] = Field(default_factory=dict, description="Effective options")
    seeds: Dict[str, int] = Field(default_factory=dict, description="Master and derived seeds")
    inputs: Dict[str, str] = Field(default_factory=dict, description="Input file SHA-256 by path")
    outputs: List[OutputRecord] = Field(default_factory=list)
    extra: Dict[str, Any] = Field(default_factory=dict, description="Command-specific results")
    started_at: datetime = Field(default_factory=_utcnow)
    finished_at: Optional[datetime] = None
    elapsed_seconds: Optional[float] = None


# clustering


class ClusterConfig(BaseModel):
    """Options of the ``cluster`` command; unset fields fall back to settings."""

    threshold: Optional[float] = Field(default=None, description="Prediction above which a person is at risk")
    no_receipt_threshold: Optional[float] = Field(
        default=None, description="Prediction at or below which a person joins the comparison group"
    )
    linkage: Optional[Literal["ward", "average", "complete"]] = Field(default=None)
    k_max: Optional[int] = Field(default=None, ge=2, description="Largest group count considered")
    k: Optional[int] = Field(default=None, ge=1, description="Force this group count")
    variables: List[str] = Field(
        default_factory=lambda: ["top:10", "heuristic", "is-history"],
        description="Groups, columns, or 'top:<k>' predictors of the model",
    )
    sample_limit: Optional[int] = Field(default=None, ge=2, description="Rows clustered before assignment")
    min_group_size: Optional[int] = Field(default=None, ge=1, description="Smaller groups are suppressed")


class PseudoFRow(BaseModel):
    k: int
    pseudo_f: Unbounded


class DudaHartRow(BaseModel):
    k: int = Field(description="Groups before the split")
    parent_size: int
    je1: float
    je2: float
    ratio: Optional[float] = Field(default=None, description="Je(2)/Je(1); null when Je(1) is 0")
    pseudo_t2: Optional[Unbounded] = None
    critical: Optional[float] = None


class GroupSummary(BaseModel):
    group: Union[int, str] = Field(description="Group number, or 'no-benefit' for the comparison group")
    size: int
    suppressed: bool = False
    mean: Dict[str, float] = Field(default_factory=dict)
    sd: Dict[str, Optional[float]] = Field(default_factory=dict)


class ClusterReport(BaseModel):
    """``clusters.json``."""

    manifest_id: Optional[str] = None
    threshold: float
    linkage: str
    n_persons: int = Field(description="Rows scored by the model")
    n_at_risk: int
    n_clustered: int = Field(description="Rows in the agglomeration; the rest were assigned")
    variables: List[str] = Field(default_factory=list)
    constant_variables: List[str] = Field(default_factory=list)
    k: Optional[int] = Field(default=None, description="Chosen group count; null when nothing was clustered")
    k_max: Optional[int] = None
    low_confidence: bool = False
    reasons: List[str] = Field(default_factory=list)
    pseudo_f: List[PseudoFRow] = Field(default_factory=list)
    duda_hart: List[DudaHartRow] = Field(default_factory=list)
    groups: List[GroupSummary] = Field(default_factory=list)
    comparison: Optional[GroupSummary] = None
    labels: Dict[str, int] = Field(default_factory=dict, description="Group of each at-risk person")


# evaluation


class EvaluateRow(BaseModel):
    model_file: str
    label: Optional[str] = None
    kind: str
    outcome: str
    report: EvalReport


class EvaluateReport(BaseModel):
    """``evaluation.json`` written by ``evaluate``."""

    manifest_id: Optional[str] = None
    seed: int
    sample: Literal["holdout", "all"]
    rows: List[EvaluateRow]
