"""Deterministic rule-table backend for all five model roles.

Every behavior is driven by the committed ``mock_rules.json`` so the
expected values asserted in tests can be audited against one file. The
backend is a pure function of its inputs: identical calls always produce
identical outputs, which the streaming-equivalence and report-determinism
suites rely on.

Rule summary:
  draft      — one candidate fact per utterance line in the window matching
               ``SYMPTOM: <capture>``; comma-separated parts of the capture
               become info units; the abstraction table may rewrite a unit
               into clinical vocabulary absent from the transcript (which is
               what later trips the groundedness criterion).
  evaluator  — four criteria: well_formed, atomic (1..4 units),
               grounded_in_window (every unit appears as a whole-word
               sequence in the window), not_duplicate (against the supplied
               fact set, excluding the fact itself).
  refiner    — fixes the first failed criterion only, per call: truncate to
               4 units / drop ungrounded units / rebuild text from units.
               Duplicates have no deterministic fix and pass through
               unchanged until the engine discards them.
  note       — one bullet per fact (or per transcript capture on the
               baseline path) under the first section whose keyword table
               entry matches; unknown content falls into the first section.
  alignment  — synonym-normalized content-word coverage of the query in the
               candidate at a fixed threshold; identical normalized text is
               always aligned (reflexivity); a negation-marker mismatch
               forces label 0.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

from ..facts import (
    CriterionVerdict,
    Fact,
    FactSet,
    FactStatus,
    normalize_text,
)
from ..notes import NoteTemplate
from ..windowing import TranscriptBuffer, Window
from .base import ContractViolation

CRITERION_WELL_FORMED = "well_formed"
CRITERION_ATOMIC = "atomic"
CRITERION_GROUNDED = "grounded_in_window"
CRITERION_NOT_DUPLICATE = "not_duplicate"


def _words(text: str) -> list[str]:
    """Casefolded words with punctuation stripped from their edges."""
    out = []
    for piece in text.casefold().split():
        word = piece.strip(".,;:!?()[]{}\"'`")
        if word:
            out.append(word)
    return out


def _contains_sequence(haystack: list[str], needle: list[str]) -> bool:
    if not needle:
        return True
    if len(needle) > len(haystack):
        return False
    for i in range(len(haystack) - len(needle) + 1):
        if haystack[i : i + len(needle)] == needle:
            return True
    return False


@dataclass(frozen=True)
class MockRules:
    fact_marker: str
    unit_separator: str
    abstractions: dict
    negation_prefixes: tuple[str, ...]
    max_units: int
    section_keywords: dict
    align_threshold: float
    synonyms: dict
    stopwords: frozenset
    negation_markers: frozenset

    @classmethod
    def from_dict(cls, data: dict) -> "MockRules":
        draft = data["draft"]
        align = data["alignment"]
        return cls(
            fact_marker=draft["fact_marker"],
            unit_separator=draft.get("unit_separator", ","),
            abstractions={
                normalize_text(k): v for k, v in draft.get("abstractions", {}).items()
            },
            negation_prefixes=tuple(draft.get("negation_prefixes", ())),
            max_units=int(data.get("evaluator", {}).get("max_units", 4)),
            section_keywords=data.get("note", {}).get("section_keywords", {}),
            align_threshold=float(align.get("threshold", 0.6)),
            synonyms={k.casefold(): v.casefold() for k, v in align.get("synonyms", {}).items()},
            stopwords=frozenset(align.get("stopwords", ())),
            negation_markers=frozenset(align.get("negation_markers", ())),
        )


@lru_cache(maxsize=1)
def default_rules() -> MockRules:
    text = resources.files("factscribe.backends").joinpath("mock_rules.json").read_text(
        encoding="utf-8"
    )
    return MockRules.from_dict(json.loads(text))


class MockModel:
    """All five model roles, answered from the committed rule tables."""

    def __init__(self, rules: MockRules | None = None):
        self.rules = rules or default_rules()
        self._synonyms_ordered = sorted(
            self.rules.synonyms.items(), key=lambda kv: len(kv[0]), reverse=True
        )

    # -- draft ------------------------------------------------------------

    def _captures(self, utterances: Sequence[str]) -> list[tuple[str, tuple[str, ...]]]:
        rules = self.rules
        out = []
        for utt in utterances:
            idx = utt.find(rules.fact_marker)
            if idx < 0:
                continue
            capture = utt[idx + len(rules.fact_marker):].strip()
            raw_units = [u.strip() for u in capture.split(rules.unit_separator) if u.strip()]
            if not raw_units:
                continue
            units = tuple(
                rules.abstractions.get(normalize_text(u), u) for u in raw_units
            )
            out.append((", ".join(units), units))
        return out

    def _strip_negation(self, normalized: str) -> str:
        for prefix in self.rules.negation_prefixes:
            p = normalize_text(prefix)
            if p and normalized.startswith(p + " "):
                return normalized[len(p) + 1:]
        return normalized

    @staticmethod
    def _extends(shorter: str, longer: str) -> bool:
        """Word-boundary prefix relation between normalized texts."""
        if not longer.startswith(shorter):
            return False
        return len(longer) == len(shorter) or not longer[len(shorter)].isalnum()

    def draft_facts(self, window: Window, existing: FactSet) -> list[Fact]:
        by_text = {f.normalized_text: f for f in existing.active}
        by_base = {}
        for f in existing.active:
            by_base.setdefault(self._strip_negation(f.normalized_text), f)

        batch: list[Fact] = []
        claimed_texts: set[str] = set()
        claimed_ids: set[str] = set()
        for text, units in self._captures(window.utterance_texts()):
            key = normalize_text(text)
            if key in claimed_texts:
                continue
            match = by_text.get(key)
            if match is None:
                base = self._strip_negation(key)
                candidate = by_base.get(base)
                if candidate is not None and candidate.normalized_text != key:
                    match = candidate
            if match is None:
                # a window boundary may have truncated this capture before
                # (or truncates it now); treat either direction as the same
                # fact and keep the longer text
                for f in existing.active:
                    other = f.normalized_text
                    if self._extends(other, key):
                        match = f
                        break
                    if self._extends(key, other):
                        match, text, units = f, f.text, f.info_units
                        key = other
                        break
            if match is not None and match.id in claimed_ids:
                continue
            if key in claimed_texts:
                continue
            fact_id = match.id if match is not None else ""
            batch.append(
                Fact(id=fact_id, text=text, info_units=tuple(units),
                     status=FactStatus.DRAFT)
            )
            claimed_texts.add(key)
            if fact_id:
                claimed_ids.add(fact_id)
        return batch

    # -- evaluate ---------------------------------------------------------

    def _grounded(self, unit: str, window_words: list[str]) -> bool:
        return _contains_sequence(window_words, _words(unit))

    def evaluate_fact(self, fact: Fact, window: Window,
                      existing: FactSet | None = None) -> list[CriterionVerdict]:
        window_words = _words(window.text)

        well_formed = bool(fact.text.strip()) and all(u.strip() for u in fact.info_units)
        atomic = 1 <= len(fact.info_units) <= self.rules.max_units

        ungrounded = [u for u in fact.info_units if not self._grounded(u, window_words)]
        grounded = not ungrounded

        duplicate_of = None
        if existing is not None:
            for other in existing.active:
                if other.id != fact.id and other.normalized_text == fact.normalized_text:
                    duplicate_of = other.id
                    break

        return [
            CriterionVerdict(
                CRITERION_WELL_FORMED, well_formed,
                "" if well_formed else "empty text or blank info unit",
            ),
            CriterionVerdict(
                CRITERION_ATOMIC, atomic,
                "" if atomic else f"{len(fact.info_units)} info units, expected 1..{self.rules.max_units}",
            ),
            CriterionVerdict(
                CRITERION_GROUNDED, grounded,
                "" if grounded else "unsupported: " + "; ".join(ungrounded),
            ),
            CriterionVerdict(
                CRITERION_NOT_DUPLICATE, duplicate_of is None,
                "" if duplicate_of is None else f"duplicates fact {duplicate_of}",
            ),
        ]

    # -- refine -----------------------------------------------------------

    def refine_fact(self, fact: Fact, verdicts: Sequence[CriterionVerdict],
                    window: Window) -> Fact:
        failed = [v.criterion for v in verdicts if not v.passed]
        if not failed:
            raise ContractViolation(
                f"refine_fact called on fact {fact.id!r} with all criteria passing"
            )

        units = list(fact.info_units)
        text = fact.text
        # One fix per call, first failed criterion in fixed precedence order.
        if CRITERION_ATOMIC in failed and len(units) > self.rules.max_units:
            units = units[: self.rules.max_units]
            text = ", ".join(units)
        elif CRITERION_GROUNDED in failed:
            window_words = _words(window.text)
            units = [u for u in units if self._grounded(u, window_words)]
            text = ", ".join(units)
        elif CRITERION_WELL_FORMED in failed and units:
            units = [u for u in units if u.strip()]
            text = ", ".join(units)
        # Duplicates (and empty-unit dead ends) have no deterministic fix.

        return Fact(
            id=fact.id,
            text=text,
            info_units=tuple(units),
            origin=fact.origin,
            status=FactStatus.DRAFT,
            window_span=fact.window_span,
            refinement_count=fact.refinement_count + 1,
            criteria_log=tuple(verdicts),
        )

    # -- note generation ----------------------------------------------------

    def _section_for(self, item: str, template: NoteTemplate) -> str:
        item_words = _words(item)
        template_keys = {k.casefold(): k for k in template.keys}
        for key, terms in self.rules.section_keywords.items():
            actual = template_keys.get(key.casefold())
            if actual is None:
                continue
            for term in terms:
                if _contains_sequence(item_words, _words(term)):
                    return actual
        return template.sections[0].key

    def generate_note(self, source: FactSet | TranscriptBuffer,
                      template: NoteTemplate) -> str:
        if isinstance(source, FactSet):
            items = [f.text for f in source.active]
        else:
            items = [text for text, _ in self._captures(source.utterance_texts())]

        by_section: dict[str, list[str]] = {k: [] for k in template.keys}
        for item in items:
            by_section[self._section_for(item, template)].append(item)

        lines: list[str] = []
        for key in template.keys:
            lines.append(f"{key}:")
            lines.extend(f"- {item}" for item in by_section[key])
        return "\n".join(lines)

    # -- alignment ----------------------------------------------------------

    def _normalize_phrase(self, text: str) -> str:
        norm = " ".join(_words(text))
        for phrase, canon in self._synonyms_ordered:
            norm = re.sub(rf"(?<!\w){re.escape(phrase)}(?!\w)", canon, norm)
        return norm

    def _content_words(self, normalized: str) -> set[str]:
        # negation markers are handled by the parity check, not the overlap
        return {
            w for w in normalized.split()
            if w not in self.rules.stopwords and w not in self.rules.negation_markers
        }

    def _has_negation(self, normalized: str) -> bool:
        return any(w in self.rules.negation_markers for w in normalized.split())

    def align(self, query: str, candidates: Sequence[str]) -> list[bool]:
        qn = self._normalize_phrase(query)
        q_content = self._content_words(qn)
        q_neg = self._has_negation(qn)

        labels = []
        for cand in candidates:
            cn = self._normalize_phrase(cand)
            if qn == cn:
                labels.append(True)
                continue
            if self._has_negation(cn) != q_neg:
                labels.append(False)
                continue
            q_bag = q_content or set(qn.split())
            c_bag = self._content_words(cn) or set(cn.split())
            if not q_bag:
                labels.append(False)
                continue
            overlap = len(q_bag & c_bag) / len(q_bag)
            labels.append(overlap >= self.rules.align_threshold)
        return labels
