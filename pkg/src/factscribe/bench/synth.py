"""Synthetic transcripts and corpora with engineered, known noise.

Encounters are built from four disjoint pools of findings so the expected
metric movements are known by construction:

  core     — marker lines in the transcript and restated in the gold note;
             extracted as facts and aligned.
  noise    — marker lines only; extracted as facts but irrelevant to the
             gold note (content words disjoint from it), so filtering
             rejects them and conciseness rises.
  missed   — plain transcript lines (no marker) restated verbatim in the
             gold note; grounded but never extracted, so augmentation adds
             them and completeness rises.
  withheld — gold-note lines absent from the transcript entirely; they cap
             the gold note's own groundedness and, once augmentation copies
             them in, drag the augmented note's groundedness down.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

CORE_FINDINGS = [
    "headache, mild",
    "fever, since yesterday",
    "cough, dry",
    "nausea, after meals",
    "dizziness, on standing",
    "rash, left arm",
    "fatigue, two weeks",
    "sore throat",
    "chills, overnight",
    "vomiting, twice today",
]

NOISE_FINDINGS = [
    "paperwork delay",
    "parking trouble",
    "weather complaint",
    "holiday plans",
    "insurance question",
    "waiting room noise",
]

MISSED_FINDINGS = [
    "knee pain when climbing stairs",
    "poor appetite lately",
    "blurred vision at night",
    "stiff shoulder most mornings",
]

WITHHELD_FINDINGS = [
    "bp 128/82 recorded previously",
    "cholesterol panel pending per chart",
    "prior penicillin reaction documented",
    "immunisations current per record",
]

FILLER_LINES = [
    ("DOCTOR:", "okay tell me more about that"),
    ("PATIENT:", "well it started a while ago"),
    ("DOCTOR:", "i see thank you"),
    ("PATIENT:", "yes exactly"),
    ("DOCTOR:", "how long would you say"),
    ("PATIENT:", "hard to remember honestly"),
]

# Lines exercising specific refinement behavior in the pipeline tests.
OVERLOADED_FINDING = "headache, throbbing, left side, since monday, worse at night"
ABSTRACTED_FINDING = "hearing problems"
NEGATED_PAIRS = [("fever", "no fever"), ("rash, left arm", "no rash, left arm")]


def synth_transcript(rng: random.Random, target_tokens: int) -> str:
    """A randomized consultation transcript of roughly target_tokens words.

    Mixes filler chatter with marker lines (plain, overloaded past the unit
    cap, abstraction triggers, negation flips) so every refinement branch
    gets exercised.
    """
    lines: list[str] = []
    tokens = 0
    stated: list[str] = []
    while tokens < target_tokens:
        roll = rng.random()
        if roll < 0.45:
            speaker, text = FILLER_LINES[rng.randrange(len(FILLER_LINES))]
            line = f"{speaker}\t{text}"
        elif roll < 0.75:
            finding = CORE_FINDINGS[rng.randrange(len(CORE_FINDINGS))]
            stated.append(finding)
            line = f"PATIENT:\tSYMPTOM: {finding}"
        elif roll < 0.83:
            line = f"PATIENT:\tSYMPTOM: {OVERLOADED_FINDING}"
        elif roll < 0.9:
            line = f"PATIENT:\tSYMPTOM: {ABSTRACTED_FINDING}"
        elif roll < 0.95 and stated:
            line = f"PATIENT:\tSYMPTOM: no {stated[rng.randrange(len(stated))]}"
        else:
            plain, negated = NEGATED_PAIRS[rng.randrange(len(NEGATED_PAIRS))]
            line = f"PATIENT:\tSYMPTOM: {negated if rng.random() < 0.5 else plain}"
        lines.append(line)
        tokens += len(line.split())
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SynthEncounter:
    encounter_id: str
    transcript: str
    gold_note: str
    core: tuple[str, ...]
    noise: tuple[str, ...]
    missed: tuple[str, ...]
    withheld: tuple[str, ...]


def synth_encounter(rng: random.Random, encounter_id: str,
                    n_core: int = 4, n_noise: int = 2,
                    n_missed: int = 1, n_withheld: int = 1) -> SynthEncounter:
    """One encounter with controlled amounts of each noise class."""
    core = tuple(rng.sample(CORE_FINDINGS, n_core))
    noise = tuple(rng.sample(NOISE_FINDINGS, n_noise))
    missed = tuple(rng.sample(MISSED_FINDINGS, n_missed))
    withheld = tuple(rng.sample(WITHHELD_FINDINGS, n_withheld))

    lines: list[str] = []

    def chatter() -> None:
        speaker, text = FILLER_LINES[rng.randrange(len(FILLER_LINES))]
        lines.append(f"{speaker}\t{text}")

    chatter()
    for finding in core:
        lines.append(f"PATIENT:\tSYMPTOM: {finding}")
        chatter()
    for finding in noise:
        lines.append(f"PATIENT:\tSYMPTOM: {finding}")
    for finding in missed:
        lines.append(f"PATIENT:\t{finding}")
        chatter()

    gold_lines = list(core) + list(missed) + list(withheld)
    rng.shuffle(gold_lines)

    return SynthEncounter(
        encounter_id=encounter_id,
        transcript="\n".join(lines) + "\n",
        gold_note="\n".join(gold_lines) + "\n",
        core=core,
        noise=noise,
        missed=missed,
        withheld=withheld,
    )


def generate_corpus(directory: str | Path, encounters: int = 10, seed: int = 7,
                    **noise_counts) -> list[SynthEncounter]:
    """Write a synthetic corpus in the standard layout (transcripts/, notes/)."""
    rng = random.Random(seed)
    directory = Path(directory)
    (directory / "transcripts").mkdir(parents=True, exist_ok=True)
    (directory / "notes").mkdir(parents=True, exist_ok=True)

    out = []
    for i in range(encounters):
        enc = synth_encounter(rng, f"enc{i:02d}", **noise_counts)
        (directory / "transcripts" / f"{enc.encounter_id}.txt").write_text(
            enc.transcript, encoding="utf-8"
        )
        (directory / "notes" / f"{enc.encounter_id}.txt").write_text(
            enc.gold_note, encoding="utf-8"
        )
        out.append(enc)
    return out
