"""Data-generating process configuration for synthetic cohorts."""

import json
import logging
from importlib import resources
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, model_validator

from spellforge.core.taxonomy import TAXONOMY
from spellforge.errors import ConfigError

logger = logging.getLogger(__name__)

PACKAGED_CONFIGS = ("paperlike-v1",)


class Archetype(BaseModel):
    """One recipient profile; each synthetic person draws exactly one."""

    name: str = Field(..., min_length=1)
    weight: float = Field(..., ge=0.0, description="Relative mixing weight")
    payment_code: str = Field(..., description="Main 2014 income-support payment")
    outcome_code: Optional[str] = Field(default=None, description="Payment used for 2015-2018 receipt")
    age_low: int = Field(default=16, ge=15, le=80)
    age_high: int = Field(default=64, ge=15, le=80)
    female_share: float = Field(default=0.5, ge=0.0, le=1.0)
    overseas_share: float = Field(default=0.25, ge=0.0, le=1.0)
    indigenous_share: float = Field(default=0.03, ge=0.0, le=1.0)
    parent_share: float = Field(default=0.2, ge=0.0, le=1.0)
    is_share: float = Field(default=0.6, ge=0.0, le=1.0, description="Chance of any IS day in 2014")
    always_on_share: float = Field(default=0.0, ge=0.0, le=1.0, description="Chance of IS on every day 2011-2014")
    coverage_a: float = Field(default=2.0, gt=0.0, description="Beta shape of 2014 coverage")
    coverage_b: float = Field(default=2.0, gt=0.0)
    base_amount: float = Field(default=550.0, gt=0.0, description="Fortnightly payment")
    amount_spread: float = Field(default=0.15, ge=0.0, description="Relative sd of spell amounts")
    job_rate: float = Field(default=0.8, ge=0.0, description="Poisson mean of 2014 jobs")
    move_rate: float = Field(default=0.4, ge=0.0)
    suspension_rate: float = Field(default=0.3, ge=0.0)
    parent_is_share: float = Field(default=0.3, ge=0.0, le=1.0, description="Chance a linked parent had IS")
    linked_parents_share: float = Field(default=0.3, ge=0.0, le=1.0)
    shift: float = Field(default=0.0, description="Additive shift of the latent score")

    @model_validator(mode="after")
    def _check(self):
        if self.age_high < self.age_low:
            raise ValueError(f"{self.name}: age_high below age_low")
        for code in (self.payment_code, self.outcome_code or self.payment_code):
            category = TAXONOMY.get(code)
            if category is None or not category.is_income_support:
                raise ValueError(f"{self.name}: {code!r} is not an income-support payment")
        return self

    @property
    def receipt_code(self) -> str:
        return self.outcome_code or self.payment_code


class FeatureLink(BaseModel):
    """``coef * (feature - center) / scale`` added to the latent score."""

    feature: str = Field(..., description="Single-column catalog entry derived from own history")
    center: float = 0.0
    scale: float = Field(default=1.0, gt=0.0)
    coef: float = 0.0


class InteractionTerm(BaseModel):
    a: str
    b: str
    coef: float = 0.0


class NonlinearTerm(BaseModel):
    feature: str
    kind: Literal["square", "abs", "step"] = "square"
    threshold: float = Field(default=0.0, description="Step location, on the standardized scale")
    coef: float = 0.0


class DgpConfig(BaseModel):
    """Synthetic cohort definition; ``dgp.json`` on disk."""

    name: str = Field(default="custom")
    version: str = Field(default="1")
    n_persons: int = Field(default=1000, ge=1)
    seed: int = Field(default=20150101, ge=0)
    p0: float = Field(default=0.323, ge=0.0, le=1.0, description="Mass at outcome 0")
    p1: float = Field(default=0.367, ge=0.0, le=1.0, description="Mass at outcome 1")
    shape_a: float = Field(default=1.0, gt=0.0, description="Beta shape of the interior")
    shape_b: float = Field(default=1.0, gt=0.0)
    noise: float = Field(default=0.5, ge=0.0, description="Latent noise scale")
    archetypes: List[Archetype] = Field(..., min_length=1)
    links: List[FeatureLink] = Field(default_factory=list)
    interactions: List[InteractionTerm] = Field(default_factory=list)
    nonlinear: List[NonlinearTerm] = Field(default_factory=list)
    oracle_r2: Optional[float] = Field(default=None, description="Attainable R-squared, when computed")

    @model_validator(mode="after")
    def _check(self):
        if self.p0 + self.p1 > 1.0 + 1e-12:
            raise ValueError(f"point masses p0={self.p0} and p1={self.p1} sum above 1")
        if sum(a.weight for a in self.archetypes) <= 0:
            raise ValueError("archetype weights sum to zero")
        names = [a.name for a in self.archetypes]
        if len(set(names)) != len(names):
            raise ValueError("archetype names must be unique")
        linked = {link.feature for link in self.links}
        for term in self.interactions:
            for feature in (term.a, term.b):
                if feature not in linked:
                    raise ValueError(f"interaction uses {feature!r}, which has no link entry")
        for term in self.nonlinear:
            if term.feature not in linked:
                raise ValueError(f"nonlinear term uses {term.feature!r}, which has no link entry")
        return self

    def link_features(self) -> List[str]:
        return list(dict.fromkeys(link.feature for link in self.links))

    def archetype_weights(self) -> List[float]:
        total = sum(a.weight for a in self.archetypes)
        return [a.weight / total for a in self.archetypes]


def load_dgp(source: Union[str, Path, None] = None) -> DgpConfig:
    """Read ``dgp.json``, or a packaged config by name (default ``paperlike-v1``)."""
    try:
        if source is None or str(source) in PACKAGED_CONFIGS:
            name = f"{source or PACKAGED_CONFIGS[0]}.json"
            text = resources.files("spellforge.synth").joinpath("data", name).read_text(encoding="utf-8")
        else:
            text = Path(source).read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ConfigError(f"dgp config not found: {source}") from e
    try:
        config = DgpConfig.model_validate(json.loads(text))
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed dgp config: {e}", {"line": e.lineno, "column": e.colno}) from e
    except ValidationError as e:
        raise ConfigError(f"invalid dgp config: {e}") from e
    logger.info("Loaded dgp %s v%s (%d persons)", config.name, config.version, config.n_persons)
    return config
