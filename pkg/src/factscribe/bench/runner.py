"""Benchmark runner: five pipeline variants per encounter, cached, parallel.

Variants:
  baseline  — note generated straight from the transcript
  facts     — note generated from the extracted fact set
  filtered  — facts after simulated clinician filtering
  augmented — filtered facts plus simulated clinician additions
  gold      — the reference note scored against itself and the transcript

Per generated variant the report carries raw completeness, adjusted
completeness (divided by the reference note's own groundedness), conciseness
and groundedness; the gold row reports raw self-completeness/conciseness
(1.0 by calibration) and its transcript groundedness. A variant failure
marks that row and the run continues; an encounter whose reference note
fails calibration is excluded from aggregates.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from ..align import (
    MetricResult,
    MetricUndefinedError,
    adjusted_completeness,
    calibrate,
    completeness_detail,
    conciseness_detail,
    groundedness_detail,
)
from ..backends.base import Backends, TransportError
from ..notes import ClinicalNote, NoteKind, NoteTemplate, render_from_facts, render_from_transcript
from ..refine import RefinementConfig, RefinementTrace, run_incremental
from ..review import simulate_augmentation, simulate_filtering
from ..windowing import WindowConfig
from .corpus import Encounter

ALL_VARIANTS = ("baseline", "facts", "filtered", "augmented", "gold")
GENERATED_VARIANTS = ("baseline", "facts", "filtered", "augmented")
METRIC_KEYS = ("completeness", "adjusted_completeness", "conciseness", "groundedness")


@dataclass
class VariantRow:
    variant: str
    completeness: float | None = None
    adjusted_completeness: float | None = None
    conciseness: float | None = None
    groundedness: float | None = None
    counts: dict = field(default_factory=dict)
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "completeness": self.completeness,
            "adjusted_completeness": self.adjusted_completeness,
            "conciseness": self.conciseness,
            "groundedness": self.groundedness,
            "counts": self.counts,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VariantRow":
        return cls(**data)


@dataclass
class EncounterResult:
    encounter_id: str
    calibration: dict
    variants: dict = field(default_factory=dict)  # variant -> VariantRow dict
    removed: int = 0
    added: int = 0
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error and all(not v.get("error") for v in self.variants.values())

    def to_dict(self) -> dict:
        return {
            "encounter_id": self.encounter_id,
            "calibration": self.calibration,
            "variants": self.variants,
            "removed": self.removed,
            "added": self.added,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EncounterResult":
        return cls(**data)


@dataclass
class BenchReport:
    encounters: list[EncounterResult]
    summary: dict          # variant -> metric -> mean over encounters
    pooled: dict           # variant -> metric -> pooled segment ratio
    edit_stats: dict       # mean removed / added per encounter
    config: dict
    warnings: list[str] = field(default_factory=list)

    @property
    def failures(self) -> list[str]:
        return [e.encounter_id for e in self.encounters if not e.ok]

    def to_dict(self) -> dict:
        return {
            "encounters": [e.to_dict() for e in self.encounters],
            "summary": self.summary,
            "pooled": self.pooled,
            "edit_stats": self.edit_stats,
            "config": self.config,
            "warnings": self.warnings,
            "failures": self.failures,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True,
                          indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "BenchReport":
        return cls(
            encounters=[EncounterResult.from_dict(e) for e in data["encounters"]],
            summary=data["summary"],
            pooled=data["pooled"],
            edit_stats=data["edit_stats"],
            config=data.get("config", {}),
            warnings=data.get("warnings", []),
        )


def _metric_counts(result: MetricResult) -> list[int]:
    return [result.covered, result.total]


def _generated_row(variant: str, note: ClinicalNote, encounter: Encounter,
                   backends: Backends, gold_groundedness: float) -> VariantRow:
    comp = completeness_detail(note, encounter.gold, backends.aligner)
    conc = conciseness_detail(note, encounter.gold, backends.aligner)
    ground = groundedness_detail(note, encounter.buffer, backends.aligner)
    return VariantRow(
        variant=variant,
        completeness=comp.value,
        adjusted_completeness=adjusted_completeness(comp.value, gold_groundedness),
        conciseness=conc.value,
        groundedness=ground.value,
        counts={
            "completeness": _metric_counts(comp),
            "conciseness": _metric_counts(conc),
            "groundedness": _metric_counts(ground),
        },
    )


def run_encounter(encounter: Encounter, window_cfg: WindowConfig,
                  refine_cfg: RefinementConfig, backends: Backends,
                  template: NoteTemplate,
                  variants: Sequence[str] = ALL_VARIANTS,
                  trace_sink: Callable[[RefinementTrace], None] | None = None) -> EncounterResult:
    calibration = calibrate(encounter.gold, backends.aligner)
    result = EncounterResult(encounter_id=encounter.id,
                             calibration=calibration.to_dict())
    if not calibration.passed:
        result.error = "calibration failed"
        return result

    gold_ground = groundedness_detail(encounter.gold, encounter.buffer,
                                      backends.aligner)

    def attempt(variant: str, compute: Callable[[], VariantRow]) -> None:
        if variant not in variants:
            return
        try:
            result.variants[variant] = compute().to_dict()
        except (MetricUndefinedError, TransportError, ValueError) as exc:
            result.variants[variant] = VariantRow(
                variant=variant, error=f"{type(exc).__name__}: {exc}"
            ).to_dict()

    attempt("baseline", lambda: _generated_row(
        "baseline",
        render_from_transcript(encounter.buffer, template, backends.note_generator,
                               kind=NoteKind.BASELINE),
        encounter, backends, gold_ground.value,
    ))

    need_facts = any(v in variants for v in ("facts", "filtered", "augmented"))
    facts = None
    if need_facts:
        try:
            facts = run_incremental(encounter.buffer, window_cfg, refine_cfg,
                                    backends, trace_sink=trace_sink)
        except (TransportError, ValueError) as exc:
            for variant in ("facts", "filtered", "augmented"):
                if variant in variants:
                    result.variants[variant] = VariantRow(
                        variant=variant,
                        error=f"fact extraction failed: {exc}",
                    ).to_dict()
            need_facts = False

    if need_facts:
        attempt("facts", lambda: _generated_row(
            "facts",
            render_from_facts(facts, template, backends.note_generator,
                              kind=NoteKind.FROM_FACTS),
            encounter, backends, gold_ground.value,
        ))

        filtered = None
        if any(v in variants for v in ("filtered", "augmented")):
            filtered, removed_events = simulate_filtering(
                facts, encounter.gold, backends.aligner, session_id=encounter.id
            )
            result.removed = len(removed_events)
        attempt("filtered", lambda: _generated_row(
            "filtered",
            render_from_facts(filtered, template, backends.note_generator,
                              kind=NoteKind.FILTERED),
            encounter, backends, gold_ground.value,
        ))

        if "augmented" in variants and filtered is not None:
            augmented, added_events = simulate_augmentation(
                filtered, encounter.gold, backends.aligner, session_id=encounter.id
            )
            result.added = len(added_events)
            attempt("augmented", lambda: _generated_row(
                "augmented",
                render_from_facts(augmented, template, backends.note_generator,
                                  kind=NoteKind.AUGMENTED),
                encounter, backends, gold_ground.value,
            ))

    attempt("gold", lambda: VariantRow(
        variant="gold",
        completeness=calibration.completeness,
        adjusted_completeness=None,  # the reference row reports raw values
        conciseness=calibration.conciseness,
        groundedness=gold_ground.value,
        counts={"groundedness": _metric_counts(gold_ground)},
    ))

    return result


def _cache_key(encounter: Encounter, config_echo: dict) -> str:
    digest = hashlib.sha256()
    digest.update(encounter.buffer.tokens.__len__().to_bytes(8, "big"))
    digest.update("\x00".join(encounter.buffer.utterance_texts()).encode())
    digest.update(encounter.gold.to_json().encode())
    digest.update(json.dumps(config_echo, sort_keys=True).encode())
    return digest.hexdigest()


def _aggregate(results: list[EncounterResult], variants: Sequence[str]) -> tuple[dict, dict]:
    summary: dict = {}
    pooled: dict = {}
    usable = [r for r in results if not r.error]
    for variant in variants:
        rows = [r.variants.get(variant) for r in usable]
        rows = [row for row in rows if row and not row.get("error")]
        if not rows:
            continue
        summary[variant] = {}
        for key in METRIC_KEYS:
            values = [row[key] for row in rows if row.get(key) is not None]
            if values:
                summary[variant][key] = sum(values) / len(values)
        pooled[variant] = {}
        for metric in ("completeness", "conciseness", "groundedness"):
            counts = [row["counts"].get(metric) for row in rows]
            counts = [c for c in counts if c]
            if counts:
                covered = sum(c[0] for c in counts)
                total = sum(c[1] for c in counts)
                pooled[variant][metric] = covered / total if total else None
    return summary, pooled


def run_benchmark(encounters: Sequence[Encounter], window_cfg: WindowConfig,
                  refine_cfg: RefinementConfig, backends: Backends,
                  template: NoteTemplate,
                  variants: Sequence[str] = ALL_VARIANTS,
                  cache_dir: str | Path | None = None,
                  parallel: int = 1,
                  warnings: Sequence[str] = (),
                  trace_sink: Callable[[RefinementTrace], None] | None = None,
                  cache_salt: str = "") -> BenchReport:
    config_echo = {
        "window": window_cfg.to_dict(),
        "refine": refine_cfg.to_dict(),
        "template": template.prompt_text(),
        "variants": sorted(variants),
        "salt": cache_salt,
    }
    cache_path = Path(cache_dir) if cache_dir else None
    if cache_path:
        cache_path.mkdir(parents=True, exist_ok=True)

    def run_one(encounter: Encounter) -> EncounterResult:
        key = _cache_key(encounter, config_echo) if cache_path else None
        if cache_path:
            hit = cache_path / f"{key}.json"
            if hit.exists():
                cached = EncounterResult.from_dict(json.loads(hit.read_text()))
                if cached.ok:
                    return cached
        result = run_encounter(encounter, window_cfg, refine_cfg, backends,
                               template, variants, trace_sink=trace_sink)
        if cache_path and result.ok:
            (cache_path / f"{key}.json").write_text(
                json.dumps(result.to_dict(), ensure_ascii=False, sort_keys=True)
            )
        return result

    ordered = sorted(encounters, key=lambda e: e.id)
    if parallel > 1 and len(ordered) > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(run_one, ordered))
    else:
        results = [run_one(e) for e in ordered]

    summary, pooled = _aggregate(results, variants)
    usable = [r for r in results if not r.error]
    edit_stats = {
        "mean_removed": (sum(r.removed for r in usable) / len(usable)) if usable else None,
        "mean_added": (sum(r.added for r in usable) / len(usable)) if usable else None,
    }
    config_out = dict(config_echo)
    config_out.pop("salt", None)
    return BenchReport(
        encounters=results,
        summary=summary,
        pooled=pooled,
        edit_stats=edit_stats,
        config=config_out,
        warnings=list(warnings),
    )
