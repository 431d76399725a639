"""Attainable R-squared for a data-generating process."""

import logging
from typing import Optional

import numpy as np

from spellforge.features.catalog import FeatureCatalog
from spellforge.synth.dgp import DgpConfig
from spellforge.synth.generate import draw_persons, latent_outcomes

logger = logging.getLogger(__name__)


def oracle_r2(
    config: DgpConfig,
    draws: Optional[int] = None,
    catalog: Optional[FeatureCatalog] = None,
    threads: Optional[int] = None,
) -> float:
    """``var(E[y | x]) / var(y)`` over ``draws`` simulated persons.

    No learner of the generated features beats this on average. A constant
    outcome is perfectly predictable and gives 1.
    """
    draws = config.n_persons if draws is None else draws
    draw = latent_outcomes(config, draw_persons(config, n=draws, catalog=catalog, threads=threads))
    total = float(np.var(draw.outcome))
    if total == 0.0:
        return 1.0
    if config.noise == 0:
        return 1.0
    value = float(np.var(draw.truth)) / total
    logger.info("oracle R2 for dgp %s over %d draws: %.4f", config.name, draws, value)
    return value
