"""Shared test utilities: fixture backends, chunked feeding, transcript builders."""

from __future__ import annotations

from typing import Sequence

from factscribe import Backends, MockModel, PipelineSession, TranscriptBuffer


class FixtureAligner:
    """Alignment judge answering from an explicit (query, candidate) pair set.

    Reflexive on identical text, like any sane judge; everything else comes
    from the provided edge set, which the brute-force oracles count directly.
    """

    def __init__(self, pairs: Sequence[tuple[str, str]] = ()):
        self.pairs = set(pairs)

    def align(self, query: str, candidates: Sequence[str]) -> list[bool]:
        return [(query, c) in self.pairs or query == c for c in candidates]


class NonReflexiveAligner:
    """Broken judge that never aligns anything; calibration must catch it."""

    def align(self, query: str, candidates: Sequence[str]) -> list[bool]:
        return [False for _ in candidates]


class CountingModel(MockModel):
    """Mock with call counters, for asserting evaluation/refinement budgets."""

    def __init__(self, rules=None):
        super().__init__(rules)
        self.draft_calls = 0
        self.evaluate_calls = 0
        self.refine_calls = 0

    def draft_facts(self, window, existing):
        self.draft_calls += 1
        return super().draft_facts(window, existing)

    def evaluate_fact(self, fact, window, existing=None):
        self.evaluate_calls += 1
        return super().evaluate_fact(fact, window, existing)

    def refine_fact(self, fact, verdicts, window):
        self.refine_calls += 1
        return super().refine_fact(fact, verdicts, window)


def mock_backends() -> Backends:
    return Backends.all_mock()


def buffer_from_lines(*lines: str) -> TranscriptBuffer:
    return TranscriptBuffer.from_text("\n".join(lines) + "\n")


def atomize_transcript(text: str) -> list[str]:
    """Split transcript text into single-token feed atoms.

    Each atom is one token plus its trailing whitespace; a speaker prefix
    stays glued to its line's first token so chunked feeding never splits
    the prefix from its tab.
    """
    atoms: list[str] = []
    for line in text.splitlines():
        prefix = ""
        if "\t" in line:
            head, rest = line.split("\t", 1)
            if head.strip().endswith(":"):
                prefix = head + "\t"
                line = rest
        words = line.split()
        if not words:
            atoms.append(prefix + "\n")
            continue
        for i, word in enumerate(words):
            lead = prefix if i == 0 else ""
            tail = "\n" if i == len(words) - 1 else " "
            atoms.append(lead + word + tail)
    return atoms


def feed_in_chunks(session: PipelineSession, text: str, chunk_tokens: int) -> None:
    atoms = atomize_transcript(text)
    for i in range(0, len(atoms), chunk_tokens):
        session.feed("".join(atoms[i : i + chunk_tokens]))
