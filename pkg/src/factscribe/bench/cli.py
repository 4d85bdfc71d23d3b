"""Benchmark CLI.

    factscribe calibrate      --corpus DIR [--backend-config FILE]
    factscribe run            --corpus DIR [options] [--out report.json]
    factscribe report         --report report.json
    factscribe session-replay --log session.log

Exit codes: 0 success, 2 calibration failure, 3 partial failures.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from ..align import calibrate
from ..backends.base import Backends
from ..config import AppConfig, build_backends
from ..notes import resolve_template
from ..refine import RefinementConfig
from ..windowing import WindowConfig
from .corpus import EmptyCorpusError, load_corpus
from .report import format_calibration, format_report
from .runner import ALL_VARIANTS, BenchReport, run_benchmark

EXIT_OK = 0
EXIT_CALIBRATION = 2
EXIT_PARTIAL = 3


def _backends_from(backend_config: str | None) -> tuple[Backends, str]:
    if backend_config:
        config = AppConfig.from_file(backend_config)
        salt = json.dumps(config.to_dict()["backends"], sort_keys=True)
        return build_backends(config), salt
    return Backends.all_mock(), "mock"


def _load(corpus: str):
    try:
        return load_corpus(corpus)
    except EmptyCorpusError as exc:
        raise click.ClickException(str(exc)) from exc


@click.group()
def main() -> None:
    """Batch pipeline benchmark over transcript/note corpora."""


@main.command("calibrate")
@click.option("--corpus", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--backend-config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False))
def calibrate_cmd(corpus: str, backend_config: str | None, out: str | None) -> None:
    """Check that every reference note aligns with itself at 100%."""
    load = _load(corpus)
    backends, _ = _backends_from(backend_config)
    results = []
    for encounter in load.encounters:
        results.append((encounter.id, calibrate(encounter.gold, backends.aligner).to_dict()))
    text = format_calibration(results)
    click.echo(text, nl=False)
    if out:
        Path(out).write_text(
            json.dumps(dict(results), ensure_ascii=False, sort_keys=True, indent=2)
        )
    for warning in load.warnings:
        click.echo(f"warning: {warning}", err=True)
    if any(not calibration["passed"] for _, calibration in results):
        sys.exit(EXIT_CALIBRATION)


@main.command("run")
@click.option("--corpus", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--template", default="general", show_default=True,
              help="builtin template name or a template file path")
@click.option("--backend-config", type=click.Path(exists=True, dir_okay=False))
@click.option("--w", type=int, default=None, help="window length in tokens")
@click.option("--x", type=int, default=None, help="update frequency in tokens")
@click.option("--n-max", type=int, default=None, help="max refinement steps per fact")
@click.option("--variants", default=",".join(ALL_VARIANTS), show_default=True,
              help="comma-separated subset of variants to run")
@click.option("--trace", type=click.Path(dir_okay=False),
              help="write refinement traces as JSON lines")
@click.option("--out", type=click.Path(dir_okay=False), help="write the report JSON")
@click.option("--cache-dir", type=click.Path(file_okay=False),
              help="cache per-encounter results keyed by content hash")
@click.option("--parallel", type=int, default=1, show_default=True)
def run_cmd(corpus: str, template: str, backend_config: str | None,
            w: int | None, x: int | None, n_max: int | None, variants: str,
            trace: str | None, out: str | None, cache_dir: str | None,
            parallel: int) -> None:
    """Run the benchmark variants and print the metrics table."""
    load = _load(corpus)
    backends, salt = _backends_from(backend_config)
    app_defaults = AppConfig()
    window_cfg = WindowConfig(
        w=w if w is not None else app_defaults.window.w,
        x=x if x is not None else app_defaults.window.x,
    )
    refine_cfg = RefinementConfig(
        n_max=n_max if n_max is not None else app_defaults.refine.n_max,
        parallelism_limit=app_defaults.refine.parallelism_limit,
    )
    chosen = tuple(v.strip() for v in variants.split(",") if v.strip())
    unknown = set(chosen) - set(ALL_VARIANTS)
    if unknown:
        raise click.ClickException(f"unknown variants: {sorted(unknown)}")

    trace_sink = None
    trace_file = None
    if trace:
        trace_file = open(trace, "w", encoding="utf-8")

        def trace_sink(record):  # noqa: F811
            trace_file.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")

    try:
        report = run_benchmark(
            load.encounters, window_cfg, refine_cfg, backends,
            resolve_template(template), variants=chosen,
            cache_dir=cache_dir, parallel=parallel, warnings=load.warnings,
            trace_sink=trace_sink, cache_salt=salt,
        )
    finally:
        if trace_file:
            trace_file.close()

    click.echo(format_report(report), nl=False)
    if out:
        Path(out).write_text(report.to_json(), encoding="utf-8")

    if any(e.error == "calibration failed" for e in report.encounters):
        sys.exit(EXIT_CALIBRATION)
    if report.failures:
        sys.exit(EXIT_PARTIAL)


@main.command("report")
@click.option("--report", "report_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False))
def report_cmd(report_path: str, out: str | None) -> None:
    """Re-render the table from a stored report JSON."""
    report = BenchReport.from_dict(json.loads(Path(report_path).read_text()))
    text = format_report(report)
    click.echo(text, nl=False)
    if out:
        Path(out).write_text(text, encoding="utf-8")


@main.command("session-replay")
@click.option("--log", "log_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False))
def session_replay_cmd(log_path: str, out: str | None) -> None:
    """Replay a persisted session event log and print its final state."""
    from ..service.sessions import Session

    path = Path(log_path)
    session = Session.restore(path.stem, Backends.all_mock(), path)
    state = session.state()
    payload = {
        "state": state,
        "facts": session.facts.to_dict(),
        "edits": [e.to_dict() for e in session.edits],
        "note": session.final_note.to_dict() if session.final_note else None,
    }
    text = json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2)
    click.echo(text)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
