"""Design-matrix assembly, interaction expansion and the feature/outcome files."""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from joblib import delayed

from spellforge.core.history import OUTCOME_WINDOW, ObservationWindow, PersonHistory, outcome_proportion
from spellforge.core.io import Cohort
from spellforge.core.taxonomy import ANY_IS, UNEMPLOYMENT
from spellforge.dependencies import chunked, get_parallel, resolve_threads
from spellforge.errors import DataError, MissingColumnError, SchemaError
from spellforge.features.catalog import CatalogEntry, Family, FeatureCatalog
from spellforge.features.derive import PARENT_ROLES, PersonFrame, evaluate, top_code_column
from spellforge.models import ColumnInfo, ColumnsDocument

logger = logging.getLogger(__name__)

ALWAYS_ON_WINDOW = ObservationWindow.parse("2011-2014")
_ROLE_LINKS = {"father": "father", "mother": "mother", "parent": "any"}

_NOTES = {
    Family.FLUCTUATION: "sample sd (n-1) of 14-day bins anchored at window start",
    Family.AMOUNT_TOTAL: "fortnightly amounts apportioned pro rata by day",
    Family.AGE_BAND: "age on 2014-01-01",
}


@dataclass
class FeatureMatrix:
    """``values`` is n x k with one row per person and no missing cells."""

    values: np.ndarray
    columns: List[str]
    person_ids: List[str]
    info: List[ColumnInfo] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.person_ids), len(self.columns))
        if len(set(self.columns)) != len(self.columns):
            raise DataError("feature matrix has duplicate column names")
        if np.isnan(self.values).any():
            raise DataError("feature matrix contains missing cells")
        if not self.info:
            self.info = [ColumnInfo(name=c, entry=c, family="unknown") for c in self.columns]
        self._index = {name: i for i, name in enumerate(self.columns)}

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise MissingColumnError([name]) from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        missing = [n for n in names if n not in self._index]
        if missing:
            raise MissingColumnError(missing)
        idx = [self._index[n] for n in names]
        return FeatureMatrix(
            self.values[:, idx], list(names), list(self.person_ids), [self.info[i] for i in idx]
        )

    def rows(self, positions) -> "FeatureMatrix":
        positions = np.asarray(positions, dtype=int)
        return FeatureMatrix(
            self.values[positions],
            list(self.columns),
            [self.person_ids[i] for i in positions],
            list(self.info),
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=self.columns)
        frame.insert(0, "person_id", self.person_ids)
        return frame


@dataclass
class OutcomeVector:
    """Outcome values in [0, 1], aligned to feature rows."""

    values: np.ndarray
    person_ids: List[str]
    name: str = "isprop"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.person_ids),):
            raise DataError("outcome vector does not match its person ids")
        if np.isnan(self.values).any() or (self.values < 0).any() or (self.values > 1).any():
            raise DataError(f"outcome {self.name} has values outside [0, 1]")

    def rows(self, positions) -> "OutcomeVector":
        positions = np.asarray(positions, dtype=int)
        return OutcomeVector(self.values[positions], [self.person_ids[i] for i in positions], self.name)


def _parent_map(person: PersonHistory, cohort: Optional[Cohort]) -> Dict[str, Optional[list]]:
    if cohort is None:
        return {}
    return {
        role: cohort.parents_of(person.person_id, _ROLE_LINKS[role]) for role in PARENT_ROLES
    }


def _derive_block(
    persons: Sequence[PersonHistory],
    parents: Sequence[Mapping[str, Optional[list]]],
    entries: Sequence[CatalogEntry],
    width: int,
) -> np.ndarray:
    block = np.full((len(persons), width), np.nan)
    for row, (person, links) in enumerate(zip(persons, parents)):
        frame = PersonFrame(person, links)
        col = 0
        for entry in entries:
            span = len(entry.column_names())
            values = evaluate(entry, frame)
            if values is not None:
                block[row, col : col + span] = values
            col += span
    return block


def apply_catalog(
    raw: Dict[str, np.ndarray],
    missing: Dict[str, np.ndarray],
    catalog: FeatureCatalog,
    n: int,
) -> Dict[str, np.ndarray]:
    """Second pass: imputation, indicators and column-level entries, in column order."""
    indicators: Dict[str, np.ndarray] = {}
    for entry in catalog:
        name = entry.indicator_name()
        if name is not None:
            mask = missing.get(entry.name, np.zeros(n, dtype=bool))
            indicators[name] = indicators.get(name, np.zeros(n, dtype=bool)) | mask
    observed = {c: ~missing[e.name] for e in catalog if e.name in missing for c in e.column_names()}

    out: Dict[str, np.ndarray] = {}
    for entry in catalog:
        if entry.family is Family.TOP_CODE_FLAG:
            base = entry.params["base"]
            out[entry.name] = top_code_column(
                out[base],
                entry.params["rule"],
                observed.get(base),
                cap=float(entry.params.get("cap", 5200.0)),
            )
        elif entry.family is Family.INTERACTION:
            out[entry.name] = out[entry.params["left"]] * out[entry.params["right"]]
        else:
            for column in entry.column_names():
                out[column] = np.nan_to_num(raw[column], nan=0.0)
        name = entry.indicator_name()
        if name is not None and name not in out:
            out[name] = indicators[name].astype(float)
    return out


def _column_info(catalog: FeatureCatalog) -> List[ColumnInfo]:
    info: List[ColumnInfo] = []
    emitted = set()
    for entry in catalog:
        for column in entry.column_names():
            info.append(
                ColumnInfo(
                    name=column,
                    entry=entry.name,
                    family=entry.family.value,
                    role="interaction" if entry.family is Family.INTERACTION else "value",
                    groups=list(entry.groups),
                    note=_NOTES.get(entry.family),
                )
            )
        indicator = entry.indicator_name()
        if indicator is not None and indicator not in emitted:
            emitted.add(indicator)
            info.append(
                ColumnInfo(
                    name=indicator,
                    entry=entry.name,
                    family="missing-flag",
                    role="missing-indicator",
                    groups=list(entry.groups),
                    note="1 where the base value was imputed as 0",
                )
            )
    return info


def build_matrix(
    persons: Sequence[PersonHistory],
    catalog: Union[FeatureCatalog, Iterable[CatalogEntry]],
    cohort: Optional[Cohort] = None,
    threads: Optional[int] = None,
) -> FeatureMatrix:
    """Derive every catalog column for every person, rows in input order."""
    if not isinstance(catalog, FeatureCatalog):
        catalog = FeatureCatalog(catalog)
    persons = list(persons)
    entries = [e for e in catalog if not e.column_level]
    width = sum(len(e.column_names()) for e in entries)
    uses_parents = any(e.params.get("person", "self") != "self" for e in entries)
    links = [_parent_map(p, cohort if uses_parents else None) for p in persons]

    n_jobs = resolve_threads(threads)
    if persons:
        blocks = get_parallel(n_jobs)(
            delayed(_derive_block)(chunk, links[i : i + len(chunk)], entries, width)
            for i, chunk in _offsets(chunked(persons, n_jobs * 4))
        )
        stacked = np.vstack(blocks)
    else:
        stacked = np.zeros((0, width))

    raw: Dict[str, np.ndarray] = {}
    missing: Dict[str, np.ndarray] = {}
    col = 0
    for entry in entries:
        span = len(entry.column_names())
        block = stacked[:, col : col + span]
        for j, column in enumerate(entry.column_names()):
            raw[column] = block[:, j]
        missing[entry.name] = np.isnan(block).any(axis=1)
        if not entry.missing_prone and missing[entry.name].any():
            raise DataError(
                f"{entry.name} is missing for some persons but declares no missing indicator",
                {"entry": entry.name, "rows": int(missing[entry.name].sum())},
            )
        col += span

    columns = catalog.columns()
    out = apply_catalog(raw, missing, catalog, len(persons))
    values = np.column_stack([out[c] for c in columns]) if persons else np.zeros((0, len(columns)))
    logger.info("Built feature matrix %d x %d", len(persons), len(columns))
    return FeatureMatrix(values, columns, [p.person_id for p in persons], _column_info(catalog))


def _offsets(chunks):
    start = 0
    for chunk in chunks:
        yield start, chunk
        start += len(chunk)


def expand_interactions(m: FeatureMatrix, base: Sequence[str]) -> FeatureMatrix:
    """Append all pairwise products of ``base`` columns, named ``a,b``."""
    base = list(base)
    missing = [b for b in base if b not in m.columns]
    if missing:
        raise MissingColumnError(missing)
    pairs = list(combinations(base, 2))
    if not pairs:
        return m
    products = np.column_stack([m.column(a) * m.column(b) for a, b in pairs])
    names = [f"{a},{b}" for a, b in pairs]
    info = [
        ColumnInfo(name=name, entry=name, family="interaction", role="interaction")
        for name in names
    ]
    return FeatureMatrix(
        np.hstack([m.values, products]), m.columns + names, list(m.person_ids), m.info + info
    )


def with_interactions(m: FeatureMatrix, columns: Sequence[str]) -> FeatureMatrix:
    """Add the ``a,b`` product columns among ``columns`` that ``m`` lacks."""
    wanted = [c for c in columns if c not in m._index and "," in c]
    if not wanted:
        return m
    pairs = [tuple(c.split(",", 1)) for c in wanted]
    missing = sorted({part for pair in pairs for part in pair if part not in m._index})
    if missing:
        raise MissingColumnError(missing)
    products = np.column_stack([m.column(a) * m.column(b) for a, b in pairs])
    info = [ColumnInfo(name=c, entry=c, family="interaction", role="interaction") for c in wanted]
    return FeatureMatrix(np.hstack([m.values, products]), m.columns + wanted, list(m.person_ids), m.info + info)


# files


def write_features(m: FeatureMatrix, path: Path) -> Path:
    path = Path(path)
    m.to_frame().to_csv(path, index=False, float_format="%.10g")
    return path


def write_columns(m: FeatureMatrix, path: Path, manifest_id: Optional[str] = None) -> Path:
    path = Path(path)
    document = ColumnsDocument(manifest_id=manifest_id, columns=m.info)
    path.write_text(document.model_dump_json(indent=2), encoding="utf-8")
    return path


def read_features(path: Path, columns_path: Optional[Path] = None) -> FeatureMatrix:
    """Read ``features.csv``; column metadata comes from ``columns.json`` beside it."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"features file not found: {path}", path=str(path))
    frame = pd.read_csv(path, dtype={"person_id": str}, keep_default_na=False, na_values=[""])
    if frame.columns.empty or frame.columns[0] != "person_id":
        raise SchemaError(f"{path.name}: first column must be person_id", row=1, column="person_id", path=str(path))
    data = frame.iloc[:, 1:].apply(pd.to_numeric, errors="coerce")
    bad = data.isna().to_numpy()
    if bad.any():
        row, col = (int(x[0]) for x in np.nonzero(bad))
        raise SchemaError(
            f"{path.name}: non-numeric or empty cell",
            row=row + 2,
            column=str(data.columns[col]),
            path=str(path),
        )
    info: List[ColumnInfo] = []
    columns_path = Path(columns_path) if columns_path else path.with_name("columns.json")
    if columns_path.exists():
        document = ColumnsDocument.model_validate_json(columns_path.read_text(encoding="utf-8"))
        if [c.name for c in document.columns] == list(data.columns):
            info = document.columns
        else:
            logger.warning("%s does not match %s; ignoring column metadata", columns_path.name, path.name)
    return FeatureMatrix(data.to_numpy(dtype=float), list(data.columns), list(frame["person_id"]), info)


def build_outcomes(
    persons: Sequence[PersonHistory],
    always_on_windows: Sequence[ObservationWindow] = (ALWAYS_ON_WINDOW,),
) -> pd.DataFrame:
    """``isprop`` (any IS), ``ubprop`` (unemployment) and ``isprop_<a>_<b>`` columns."""
    table = {
        "person_id": [p.person_id for p in persons],
        "isprop": [outcome_proportion(p, OUTCOME_WINDOW, ANY_IS) for p in persons],
        "ubprop": [outcome_proportion(p, OUTCOME_WINDOW, UNEMPLOYMENT) for p in persons],
    }
    for w in always_on_windows:
        table[f"isprop_{w.label()}"] = [outcome_proportion(p, w, ANY_IS) for p in persons]
    return pd.DataFrame(table)


def write_outcomes(outcomes: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    outcomes.to_csv(path, index=False, float_format="%.10g")
    return path


def read_outcomes(path: Path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"outcomes file not found: {path}", path=str(path))
    frame = pd.read_csv(path, dtype={"person_id": str})
    if "person_id" not in frame.columns:
        raise SchemaError(f"{path.name} lacks person_id", row=1, column="person_id", path=str(path))
    return frame


def outcome_vector(outcomes: pd.DataFrame, name: str, person_ids: Sequence[str]) -> OutcomeVector:
    """Outcome column aligned to feature rows; ids must match one-to-one."""
    if name not in outcomes.columns:
        raise MissingColumnError([name])
    indexed = outcomes.set_index("person_id")[name]
    absent = [pid for pid in person_ids if pid not in indexed.index]
    if absent:
        raise DataError(
            f"{len(absent)} feature rows have no outcome", {"first": absent[0]}
        )
    return OutcomeVector(indexed.loc[list(person_ids)].to_numpy(dtype=float), list(person_ids), name)

