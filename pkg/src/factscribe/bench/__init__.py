from .corpus import CorpusLoad, EmptyCorpusError, Encounter, load_corpus
from .runner import ALL_VARIANTS, BenchReport, EncounterResult, run_benchmark, run_encounter
from .report import REFERENCE_EDIT_STATS, REFERENCE_ROWS, format_report
from .synth import generate_corpus, synth_encounter, synth_transcript

__all__ = [
    "ALL_VARIANTS",
    "BenchReport",
    "CorpusLoad",
    "EmptyCorpusError",
    "Encounter",
    "EncounterResult",
    "REFERENCE_EDIT_STATS",
    "REFERENCE_ROWS",
    "format_report",
    "generate_corpus",
    "load_corpus",
    "run_benchmark",
    "run_encounter",
    "synth_encounter",
    "synth_transcript",
]
