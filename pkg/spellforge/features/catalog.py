"""Feature catalog: the declarative list of predictors and their derivation rules."""

import json
import logging
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from pydantic import BaseModel, Field, ValidationError, model_validator

from spellforge.errors import ConfigError

logger = logging.getLogger(__name__)


class Family(str, Enum):
    EVER_INDICATOR = "ever-indicator"
    DURATION = "duration"
    COUNT = "count"
    AMOUNT_TOTAL = "amount-total"
    FLUCTUATION = "fluctuation"
    SEASONALITY = "seasonality"
    AGE_BAND = "age-band"
    CATEGORY_ONE_HOT = "category-one-hot"
    DERIVED_RATIO = "derived-ratio"
    TOP_CODE_FLAG = "top-code-flag"
    MISSING_FLAG = "missing-flag"
    INTERACTION = "interaction"


# Families computed from finished columns rather than from one person's history
COLUMN_FAMILIES = frozenset({Family.TOP_CODE_FLAG, Family.INTERACTION})


class CatalogEntry(BaseModel):
    """One named predictor (or, with ``levels``, a block of one-hot predictors)."""

    name: str = Field(..., min_length=1, description="Variable name, e.g. p_sdpy")
    family: Family = Field(..., description="Derivation family")
    label: str = Field(default="", description="Human-readable description")
    params: Dict[str, Any] = Field(default_factory=dict, description="Derivation parameters")
    groups: List[str] = Field(default_factory=list, description="Tags used by ladder inputs")
    missing_prone: bool = Field(
        default=False, description="Whether a paired missing indicator column is emitted"
    )
    missing_indicator: Optional[str] = Field(
        default=None, description="Indicator column name; shared by entries that repeat it"
    )
    levels: Optional[List[str]] = Field(
        default=None, description="One-hot levels; one column per level named <name><level>"
    )

    @model_validator(mode="after")
    def _check(self):
        if self.levels is not None:
            if self.family is not Family.CATEGORY_ONE_HOT:
                raise ValueError(f"{self.name}: only category-one-hot entries may expand levels")
            if not self.levels:
                raise ValueError(f"{self.name}: levels must not be empty")
        if self.missing_indicator and not self.missing_prone:
            raise ValueError(f"{self.name}: missing_indicator set on an entry that is not missing-prone")
        if self.family in COLUMN_FAMILIES and self.missing_prone:
            raise ValueError(f"{self.name}: column-level entries are never missing")
        return self

    @property
    def column_level(self) -> bool:
        return self.family in COLUMN_FAMILIES

    def column_names(self) -> List[str]:
        if self.levels is not None:
            return [f"{self.name}{level}" for level in self.levels]
        return [self.name]

    def indicator_name(self) -> Optional[str]:
        if not self.missing_prone:
            return None
        return self.missing_indicator or f"{self.name}miss"

    def references(self) -> List[str]:
        """Columns a column-level entry reads."""
        if self.family is Family.TOP_CODE_FLAG:
            return [self.params["base"]]
        if self.family is Family.INTERACTION:
            return [self.params["left"], self.params["right"]]
        return []


class CatalogDocument(BaseModel):
    version: str = Field(default="1", description="Catalog format version")
    entries: List[CatalogEntry] = Field(..., description="Entries in column order")


class FeatureCatalog:
    """Validated, ordered catalog with group and column lookups."""

    def __init__(self, entries: Iterable[Union[CatalogEntry, Dict[str, Any]]]):
        self.entries: List[CatalogEntry] = [
            e if isinstance(e, CatalogEntry) else CatalogEntry.model_validate(e) for e in entries
        ]
        if not self.entries:
            raise ConfigError("feature catalog is empty")
        self._by_name = {}
        seen_columns: Dict[str, str] = {}
        indicators: Dict[str, str] = {}
        for entry in self.entries:
            if entry.name in self._by_name:
                raise ConfigError(f"duplicate catalog entry {entry.name!r}")
            self._by_name[entry.name] = entry
            for ref in entry.references():
                if ref not in seen_columns:
                    raise ConfigError(
                        f"{entry.name} refers to {ref!r}, which is not an earlier column"
                    )
            for column in entry.column_names():
                if column in seen_columns or column in indicators:
                    raise ConfigError(f"duplicate column name {column!r} (from {entry.name})")
                seen_columns[column] = entry.name
            indicator = entry.indicator_name()
            if indicator is not None:
                if indicator in seen_columns:
                    raise ConfigError(f"indicator {indicator!r} clashes with a value column")
                indicators.setdefault(indicator, entry.name)
        self._column_owner = seen_columns
        self._indicator_owner = indicators

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def entry(self, name: str) -> CatalogEntry:
        try:
            return self._by_name[name]
        except KeyError:
            raise ConfigError(f"no catalog entry named {name!r}") from None

    def columns(self) -> List[str]:
        """Matrix column order: catalog order, each indicator after its first user."""
        out: List[str] = []
        emitted = set()
        for entry in self.entries:
            out.extend(entry.column_names())
            indicator = entry.indicator_name()
            if indicator is not None and indicator not in emitted:
                emitted.add(indicator)
                out.append(indicator)
        return out

    def declared_column_count(self) -> int:
        return len(self.columns())

    def groups(self) -> List[str]:
        seen: Dict[str, None] = {}
        for entry in self.entries:
            for tag in entry.groups:
                seen.setdefault(tag, None)
        return list(seen)

    def group_entries(self, group: str) -> List[CatalogEntry]:
        chosen = [e for e in self.entries if group in e.groups]
        if not chosen:
            raise ConfigError(f"catalog has no group {group!r}")
        return chosen

    def entry_columns(self, entries: Iterable[CatalogEntry]) -> List[str]:
        """Value and indicator columns of the given entries, in matrix order."""
        wanted = set()
        for entry in entries:
            wanted.update(entry.column_names())
            indicator = entry.indicator_name()
            if indicator is not None:
                wanted.add(indicator)
        return [c for c in self.columns() if c in wanted]

    def group_columns(self, group: str) -> List[str]:
        return self.entry_columns(self.group_entries(group))

    def owner(self, column: str) -> Optional[str]:
        """Entry that produced a column (first user, for shared indicators)."""
        return self._column_owner.get(column) or self._indicator_owner.get(column)

    def to_document(self) -> CatalogDocument:
        return CatalogDocument(entries=self.entries)

    @classmethod
    def from_json(cls, text: str) -> "FeatureCatalog":
        try:
            raw = json.loads(text)
            if isinstance(raw, list):
                raw = {"entries": raw}
            document = CatalogDocument.model_validate(raw)
        except (json.JSONDecodeError, ValidationError) as exc:
            raise ConfigError(f"invalid feature catalog: {exc}") from exc
        return cls(document.entries)

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "FeatureCatalog":
        """Load a catalog file, or the packaged default when ``path`` is None."""
        if path is None:
            text = resources.files("spellforge.features").joinpath("data/catalog.json").read_text(
                encoding="utf-8"
            )
            source = "packaged default"
        else:
            path = Path(path)
            if not path.exists():
                raise ConfigError(f"catalog file not found: {path}")
            text = path.read_text(encoding="utf-8")
            source = str(path)
        catalog = cls.from_json(text)
        logger.info("Loaded feature catalog (%d entries) from %s", len(catalog), source)
        return catalog


def declared_column_count(catalog: FeatureCatalog) -> int:
    return catalog.declared_column_count()
