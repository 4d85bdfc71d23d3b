"""Transcript buffering and overlapping sliding-window enumeration.

Tokens are whitespace-delimited words of the consultation transcript,
1-indexed and append-only. Windows of fixed length ``w`` slide over the
token sequence; processing is triggered every ``x`` received tokens, so a
window is due whenever the token count crosses a multiple of ``x``. All
window arithmetic is a pure function of (n, w, x), which is what makes
chunked streaming and one-shot delivery produce identical window sequences.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

DEFAULT_WINDOW_TOKENS = 320
DEFAULT_UPDATE_EVERY = 160


class Speaker(str, Enum):
    CLINICIAN = "clinician"
    PATIENT = "patient"
    OTHER = "other"


_CLINICIAN_LABELS = ("doctor", "clinician", "dr", "gp", "nurse", "physician")
_PATIENT_LABELS = ("patient", "pt")


def speaker_from_label(label: str) -> Speaker:
    folded = label.casefold().strip().rstrip(":")
    if any(name in folded for name in _CLINICIAN_LABELS):
        return Speaker.CLINICIAN
    if any(name in folded for name in _PATIENT_LABELS):
        return Speaker.PATIENT
    return Speaker.OTHER


@dataclass(frozen=True)
class Token:
    text: str
    index: int  # 1-based position in the transcript
    speaker: Speaker | None = None
    utterance: int = 0  # 0-based line number the token came from


@dataclass(frozen=True)
class WindowConfig:
    """Window length and update frequency, both in tokens; x <= w keeps
    consecutive processed windows overlapping."""

    w: int = DEFAULT_WINDOW_TOKENS
    x: int = DEFAULT_UPDATE_EVERY

    def __post_init__(self) -> None:
        if self.w < 1:
            raise ValueError(f"window length must be >= 1, got {self.w}")
        if self.x < 1:
            raise ValueError(f"update frequency must be >= 1, got {self.x}")
        if self.x > self.w:
            raise ValueError(
                f"update frequency {self.x} must not exceed window length {self.w}"
            )

    def to_dict(self) -> dict:
        return {"w": self.w, "x": self.x}

    @classmethod
    def from_dict(cls, data: dict) -> "WindowConfig":
        return cls(w=int(data.get("w", DEFAULT_WINDOW_TOKENS)),
                   x=int(data.get("x", DEFAULT_UPDATE_EVERY)))


@dataclass(frozen=True)
class Window:
    """A contiguous token slice t_start .. t_end (inclusive, 1-based)."""

    start: int
    tokens: tuple[Token, ...]
    is_final: bool = False

    @property
    def end(self) -> int:
        return self.start + len(self.tokens) - 1

    @property
    def text(self) -> str:
        return " ".join(t.text for t in self.tokens)

    def utterance_texts(self) -> list[str]:
        """Texts of the utterance fragments visible in this window, grouped by
        contiguous runs of the same source line."""
        groups: list[str] = []
        current: list[str] = []
        current_line: int | None = None
        for tok in self.tokens:
            if tok.utterance != current_line and current:
                groups.append(" ".join(current))
                current = []
            current_line = tok.utterance
            current.append(tok.text)
        if current:
            groups.append(" ".join(current))
        return groups


class TranscriptBuffer:
    """Append-only token time-series with incremental text parsing.

    Accepts raw text in arbitrary chunks: one utterance per line, with an
    optional ``SPEAKER:<tab>`` prefix. A chunk that does not end in a newline
    leaves the current utterance open, so the next chunk continues it with
    the same speaker and line number. Chunk boundaries must fall on token
    (whitespace) boundaries.
    """

    def __init__(self) -> None:
        self._tokens: list[Token] = []
        self._line_no = 0  # index of the line currently being appended to
        self._line_speaker: Speaker | None = None
        self._line_has_content = False
        self._chunks: list[str] = []

    def __len__(self) -> int:
        return len(self._tokens)

    @property
    def n(self) -> int:
        return len(self._tokens)

    @property
    def tokens(self) -> tuple[Token, ...]:
        return tuple(self._tokens)

    @property
    def chunks(self) -> tuple[str, ...]:
        """Raw chunks as fed, for persistence replay."""
        return tuple(self._chunks)

    def feed(self, text: str) -> tuple[int, int]:
        """Append a chunk of transcript text.

        Returns the (first, last) 1-based indices of the tokens appended, or
        (0, 0) if the chunk contained no tokens.
        """
        first = self.n + 1
        self._chunks.append(text)
        pieces = text.split("\n")
        for i, piece in enumerate(pieces):
            if not self._line_has_content and "\t" in piece:
                head, rest = piece.split("\t", 1)
                head = head.strip()
                if head.endswith(":") and head[:-1].strip():
                    self._line_speaker = speaker_from_label(head)
                    piece = rest
            words = piece.split()
            if piece:
                self._line_has_content = True
            for word in words:
                self._tokens.append(
                    Token(
                        text=word,
                        index=len(self._tokens) + 1,
                        speaker=self._line_speaker,
                        utterance=self._line_no,
                    )
                )
            if i < len(pieces) - 1:  # a newline followed this piece
                self._line_no += 1
                self._line_speaker = None
                self._line_has_content = False
        last = self.n
        if last < first:
            return (0, 0)
        return (first, last)

    def append_utterance(self, text: str, speaker: Speaker | None = None) -> tuple[int, int]:
        """Append one whole utterance (convenience for line-based sources)."""
        prefix = ""
        if speaker is not None:
            prefix = f"{speaker.value}:\t"
        return self.feed(f"{prefix}{text}\n")

    def utterance_texts(self) -> list[str]:
        """All complete-or-open utterances, as plain joined token text."""
        return Window(1, tuple(self._tokens)).utterance_texts() if self._tokens else []

    def slice(self, start: int, end: int, is_final: bool = False) -> Window:
        """Window over tokens start..end inclusive (1-based)."""
        if not 1 <= start <= end <= self.n:
            raise IndexError(f"token range {start}..{end} outside 1..{self.n}")
        return Window(start, tuple(self._tokens[start - 1 : end]), is_final=is_final)

    @classmethod
    def from_text(cls, text: str) -> "TranscriptBuffer":
        buf = cls()
        buf.feed(text)
        return buf


def enumerate_windows(n: int, w: int) -> list[int]:
    """All window start indices for a transcript of n tokens.

    For n >= w these are exactly 1..n-w+1; a transcript shorter than one
    window yields the single truncated window starting at 1; n = 0 yields
    nothing.
    """
    if n < 1:
        return []
    if w < 1:
        raise ValueError(f"window length must be >= 1, got {w}")
    if n < w:
        return [1]
    return list(range(1, n - w + 2))


def due_window_ends(n: int, x: int, last_processed_end: int) -> list[int]:
    """End positions that became due: the multiples of x in (last_processed_end, n]."""
    if last_processed_end > n:
        raise ValueError(
            f"last_processed_end {last_processed_end} exceeds token count {n}"
        )
    first_multiple = (last_processed_end // x + 1) * x
    return list(range(first_multiple, n + 1, x))


def window_ending_at(buffer: TranscriptBuffer, end: int, w: int,
                     is_final: bool = False) -> Window:
    """The length-w window ending at ``end``, left-truncated at token 1."""
    start = max(1, end - w + 1)
    return buffer.slice(start, end, is_final=is_final)


def due_windows(buffer: TranscriptBuffer, cfg: WindowConfig,
                last_processed_end: int) -> list[Window]:
    """Windows newly due since ``last_processed_end``, in processing order."""
    return [
        window_ending_at(buffer, end, cfg.w)
        for end in due_window_ends(buffer.n, cfg.x, last_processed_end)
    ]


def final_window(buffer: TranscriptBuffer, cfg: WindowConfig,
                 last_processed_end: int) -> Window | None:
    """The closing window ending at token n, if not already processed.

    Guarantees the final fact set corresponds to the last full-length
    window of the transcript; returns None for an empty session or when the
    stream already ended on a processed boundary.
    """
    n = buffer.n
    if n == 0 or last_processed_end >= n:
        return None
    return window_ending_at(buffer, n, cfg.w, is_final=True)
