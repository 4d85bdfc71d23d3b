"""Corpus loading: matched transcript/reference-note pairs.

Layout: ``<corpus>/transcripts/`` and ``<corpus>/notes/`` with matching file
stems. Transcripts are either plain text (one utterance per line, optional
``SPEAKER:<tab>`` prefix) or Praat TextGrid interval tiers; per-speaker
grids named ``<stem>_doctor.*`` / ``<stem>_patient.*`` are merged by
interval start time. Reference notes are free text; their sections are
deliberately concatenated in file order into a single-section note.

Unmatched or unparseable files are reported as warnings and the rest of the
corpus loads normally.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from ..notes import ClinicalNote, NoteKind
from ..windowing import TranscriptBuffer


class EmptyCorpusError(Exception):
    pass


_SPEAKER_SUFFIX = re.compile(r"_(doctor|patient|clinician|other)$", re.IGNORECASE)
_INTERVAL_RE = re.compile(
    r"xmin\s*=\s*([0-9.eE+-]+)\s*\n\s*xmax\s*=\s*[0-9.eE+-]+\s*\n\s*text\s*=\s*\"((?:[^\"]|\"\")*)\"",
    re.MULTILINE,
)


def parse_textgrid(text: str) -> list[tuple[float, str]]:
    """(start time, utterance text) pairs from one TextGrid's interval tiers."""
    intervals = []
    for match in _INTERVAL_RE.finditer(text):
        start = float(match.group(1))
        content = match.group(2).replace('""', '"').strip()
        if content:
            intervals.append((start, content))
    return intervals


def merge_textgrids(parts: dict[str, str]) -> str:
    """Merge per-speaker TextGrids into line-per-utterance transcript text.

    ``parts`` maps a speaker label (from the filename suffix) to grid text;
    utterances interleave by interval start time.
    """
    timeline: list[tuple[float, str, str]] = []
    for speaker, grid_text in sorted(parts.items()):
        for start, content in parse_textgrid(grid_text):
            timeline.append((start, speaker, content))
    timeline.sort(key=lambda item: (item[0], item[1]))
    return "".join(
        f"{speaker.capitalize()}:\t{content}\n" for _, speaker, content in timeline
    )


@dataclass(frozen=True)
class Encounter:
    id: str
    transcript_path: Path
    note_path: Path
    buffer: TranscriptBuffer
    gold: ClinicalNote


@dataclass
class CorpusLoad:
    encounters: list[Encounter]
    warnings: list[str]


def _collect_transcripts(directory: Path) -> tuple[dict[str, dict], list[str]]:
    """Group transcript files by encounter stem.

    Returns stem -> {"txt": path} or {"grids": {speaker: path}}.
    """
    grouped: dict[str, dict] = {}
    warnings: list[str] = []
    for path in sorted(directory.iterdir()):
        if path.suffix.lower() == ".txt":
            grouped.setdefault(path.stem, {})["txt"] = path
        elif path.suffix.lower() == ".textgrid":
            m = _SPEAKER_SUFFIX.search(path.stem)
            stem = path.stem[: m.start()] if m else path.stem
            speaker = m.group(1).lower() if m else "other"
            grouped.setdefault(stem, {}).setdefault("grids", {})[speaker] = path
        elif path.is_file():
            warnings.append(f"ignored transcript file: {path.name}")
    return grouped, warnings


def load_corpus(directory: str | Path) -> CorpusLoad:
    directory = Path(directory)
    transcripts_dir = directory / "transcripts"
    notes_dir = directory / "notes"
    if not transcripts_dir.is_dir() or not notes_dir.is_dir():
        raise EmptyCorpusError(
            f"{directory} must contain transcripts/ and notes/ directories"
        )

    transcripts, warnings = _collect_transcripts(transcripts_dir)
    notes = {p.stem: p for p in sorted(notes_dir.glob("*.txt"))}

    for stem in sorted(set(transcripts) - set(notes)):
        warnings.append(f"transcript without note: {stem}")
    for stem in sorted(set(notes) - set(transcripts)):
        warnings.append(f"note without transcript: {stem}")

    encounters: list[Encounter] = []
    for stem in sorted(set(transcripts) & set(notes)):
        sources = transcripts[stem]
        try:
            if "txt" in sources:
                transcript_path = sources["txt"]
                text = transcript_path.read_text(encoding="utf-8")
            else:
                grids = sources["grids"]
                transcript_path = next(iter(sorted(grids.values())))
                text = merge_textgrids(
                    {speaker: p.read_text(encoding="utf-8") for speaker, p in grids.items()}
                )
            buffer = TranscriptBuffer.from_text(text)
            gold_text = notes[stem].read_text(encoding="utf-8")
            gold = ClinicalNote.from_plain_text(gold_text, kind=NoteKind.GOLD)
            if buffer.n == 0:
                warnings.append(f"{stem}: empty transcript, skipped")
                continue
            if gold.is_empty():
                warnings.append(f"{stem}: empty reference note, skipped")
                continue
            encounters.append(
                Encounter(
                    id=stem,
                    transcript_path=transcript_path,
                    note_path=notes[stem],
                    buffer=buffer,
                    gold=gold,
                )
            )
        except (OSError, ValueError) as exc:
            warnings.append(f"{stem}: failed to parse ({exc})")

    if not encounters:
        raise EmptyCorpusError(f"no loadable encounters under {directory}")
    return CorpusLoad(encounters=encounters, warnings=warnings)
