"""Synthetic cohort workflow behind ``spellforge synth``."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

from spellforge.services.manifest import ManifestRecorder
from spellforge.synth.dgp import PACKAGED_CONFIGS, DgpConfig, load_dgp
from spellforge.synth.generate import SynthCohort, generate, write_cohort
from spellforge.synth.oracle import oracle_r2

logger = logging.getLogger(__name__)


@dataclass
class SynthResult:
    config: DgpConfig
    cohort: SynthCohort
    files: Dict[str, Path]
    manifest: Path


class SynthService:
    """Generates a cohort from a dgp config and writes it with its manifest."""

    def __init__(self, out_dir: Path, threads: Optional[int] = None):
        self.out_dir = Path(out_dir)
        self.threads = threads

    def run(
        self,
        source: Optional[str] = None,
        seed: Optional[int] = None,
        n_persons: Optional[int] = None,
        oracle_draws: Optional[int] = None,
    ) -> SynthResult:
        config = load_dgp(source)
        updates = {}
        if seed is not None:
            updates["seed"] = seed
        if n_persons is not None:
            updates["n_persons"] = n_persons
        if updates:
            config = DgpConfig.model_validate({**config.model_dump(), **updates})

        inputs = [] if source is None or str(source) in PACKAGED_CONFIGS else [source]
        recorder = ManifestRecorder(
            "synth",
            config=config.model_dump(exclude={"oracle_r2"}),
            seeds={"seed": config.seed},
            inputs=inputs,
        )
        cohort = generate(config, threads=self.threads)
        files = write_cohort(cohort, self.out_dir)

        extra = {}
        if oracle_draws:
            value = oracle_r2(config, draws=oracle_draws, threads=self.threads)
            config = config.model_copy(update={"oracle_r2": value})
            extra["oracle_r2"] = value
            extra["oracle_draws"] = oracle_draws
        dgp_path = self.out_dir / "dgp.json"
        dgp_path.write_text(config.model_dump_json(indent=2), encoding="utf-8")
        files["dgp.json"] = dgp_path

        manifest = recorder.finish(self.out_dir, files.values(), extra=extra)
        return SynthResult(config=config, cohort=cohort, files=files, manifest=manifest)
