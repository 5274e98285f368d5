"""Headless driver for scripting, CI, and corpus runs.

Exit codes: 0 success, 1 domain error, 2 usage error. `--json` switches
stdout to a single machine-parseable document per command.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from caseforge import analysis, export, pipeline
from caseforge.clock import Clock, SystemClock, parse_fixed_clock
from caseforge.client import LlmClient, backend_from_env, model_from_env
from caseforge.errors import CaseforgeError
from caseforge.figures import render_report_figures
from caseforge.prompting import GenerationParams
from caseforge.service import create_app, latency_samples
from caseforge.store import (
    Workspace,
    import_stories,
    with_imported_stories,
    with_requirement,
)


@dataclass
class CliState:
    root: Path
    as_json: bool
    clock: Clock

    def workspace(self) -> Workspace:
        ws = Workspace(self.root)
        ws.require_initialized()
        return ws


def domain_guard(fn):
    """Map domain failures to exit code 1; click owns usage errors (2)."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except CaseforgeError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def emit(state: CliState, lines: list[str], payload: dict) -> None:
    if state.as_json:
        click.echo(json.dumps(payload, ensure_ascii=False, indent=2))
    else:
        for line in lines:
            click.echo(line)


def build_client(mock_dir: str | None) -> LlmClient:
    backend = backend_from_env(os.environ, mock_dir=Path(mock_dir) if mock_dir else None)
    return LlmClient(backend)


def default_params(temperature: float | None, count: int | None) -> GenerationParams:
    base = GenerationParams(model=model_from_env(os.environ))
    overrides = base.to_dict()
    if temperature is not None:
        overrides["temperature"] = temperature
    if count is not None:
        overrides["target_case_count"] = count
    return GenerationParams.from_dict(overrides)


def report_failure(outcome: pipeline.GenerationOutcome) -> None:
    click.echo(
        f"error: generation {outcome.session.outcome.value}"
        f" after {len(outcome.exchanges)} exchange(s)",
        err=True,
    )
    if outcome.result is not None:
        for diag in outcome.result.diagnostics:
            click.echo(f"  {diag.stage}: {diag.message}", err=True)


@click.group()
@click.option(
    "--workspace",
    "-w",
    "workspace_dir",
    envvar="CASEFORGE_WORKSPACE",
    default=".",
    show_default=True,
    help="Workspace directory (also CASEFORGE_WORKSPACE).",
)
@click.option("--json", "as_json", is_flag=True, help="Machine-parseable output.")
@click.option(
    "--fixed-clock",
    default=None,
    envvar="CASEFORGE_FIXED_CLOCK",
    help="ISO-8601 instant for reproducible timestamps.",
)
@click.pass_context
def main(ctx: click.Context, workspace_dir: str, as_json: bool, fixed_clock: str | None):
    """Requirements to user stories to test-case scenarios, via an LLM."""
    clock: Clock = parse_fixed_clock(fixed_clock) if fixed_clock else SystemClock()
    ctx.obj = CliState(root=Path(workspace_dir), as_json=as_json, clock=clock)


@main.command()
@click.argument("directory", type=click.Path(file_okay=False))
@click.pass_obj
@domain_guard
def init(state: CliState, directory: str):
    """Create a workspace at DIRECTORY."""
    ws = Workspace(directory)
    ws.init()
    emit(state, [f"initialized workspace at {ws.root}"], {"workspace": str(ws.root)})


@main.command("new-project")
@click.option("--name", required=True, help="Human-readable project name.")
@click.pass_obj
@domain_guard
def new_project(state: CliState, name: str):
    """Create an empty project."""
    project = state.workspace().create_project(name)
    emit(state, [f"created {project.id} ({project.name})"], project.to_dict())


@main.command("add-req")
@click.option("--project", "-p", "project_ref", required=True)
@click.argument("text")
@click.pass_obj
@domain_guard
def add_req(state: CliState, project_ref: str, text: str):
    """Append one requirement to a project."""
    ws = state.workspace()
    project = ws.find_project(project_ref)
    with ws.project_lock(project.id):
        project = ws.load_project(project.id)
        updated, requirement = with_requirement(project, text, clock=state.clock)
        ws.save_project_unlocked(updated)
    emit(
        state,
        [f"added {requirement.id} to {project.id}"],
        {"project_id": project.id, "requirement": requirement.to_dict()},
    )


@main.command("import")
@click.option("--project", "-p", "project_ref", required=True)
@click.option("--stories", "stories_file", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--requirements", "requirements_file", type=click.Path(exists=True, dir_okay=False),
    help="Plain text, one requirement per line.",
)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.pass_obj
@domain_guard
def import_(state: CliState, project_ref: str, stories_file: str | None,
            requirements_file: str | None, fmt: str | None):
    """Import upstream user stories and/or plain-text requirements."""
    if not stories_file and not requirements_file:
        raise click.UsageError("pass --stories and/or --requirements")
    ws = state.workspace()
    project = ws.find_project(project_ref)
    diagnostics: list[str] = []
    imported_stories = 0
    imported_requirements = 0
    with ws.project_lock(project.id):
        project = ws.load_project(project.id)
        if stories_file:
            chosen = fmt or ("csv" if stories_file.endswith(".csv") else "json")
            result = import_stories(stories_file, chosen, project.existing_ids())
            project = with_imported_stories(project, result.stories)
            imported_stories = len(result.stories)
            diagnostics.extend(result.diagnostics)
        if requirements_file:
            for line in Path(requirements_file).read_text(encoding="utf-8").splitlines():
                if line.strip():
                    project, _ = with_requirement(project, line, clock=state.clock)
                    imported_requirements += 1
        ws.save_project_unlocked(project)
    for diag in diagnostics:
        click.echo(f"skipped: {diag}", err=True)
    emit(
        state,
        [
            f"imported {imported_stories} stories,"
            f" {imported_requirements} requirements into {project.id}"
        ],
        {
            "project_id": project.id,
            "imported_stories": imported_stories,
            "imported_requirements": imported_requirements,
            "diagnostics": diagnostics,
        },
    )


@main.command("gen-stories")
@click.option("--project", "-p", "project_ref", required=True)
@click.option("--temperature", type=float, default=None)
@click.option("--mock", "mock_dir", type=click.Path(exists=True, file_okay=False),
              help="Strict replay fixtures directory; no live calls.")
@click.pass_obj
@domain_guard
def gen_stories(state: CliState, project_ref: str, temperature: float | None,
                mock_dir: str | None):
    """Generate epics and user stories from the project's requirements."""
    ws = state.workspace()
    project = ws.find_project(project_ref)
    client = build_client(mock_dir)
    params = default_params(temperature, None)
    with ws.project_lock(project.id):
        project = ws.load_project(project.id)
        outcome = pipeline.generate_stories(project, client, params)
        ws.save_session(project.id, outcome.session, outcome.exchanges)
        ws.save_project_unlocked(outcome.project)
    if not outcome.ok:
        report_failure(outcome)
        sys.exit(1)
    lines = [f"created {len(outcome.created_stories)} stories in {project.id}"]
    lines += [f"  {s.id}: {s.narrative()}" for s in outcome.created_stories]
    emit(
        state,
        lines,
        {
            "project_id": project.id,
            "session": outcome.summary(),
            "stories": [s.to_dict() for s in outcome.created_stories],
        },
    )


@main.command("gen-tests")
@click.option("--project", "-p", "project_ref", required=True)
@click.option("--story", "story_id", default=None)
@click.option("--all", "all_stories", is_flag=True)
@click.option("--count", type=int, default=None, help="Target cases per story.")
@click.option("--temperature", type=float, default=None)
@click.option("--mock", "mock_dir", type=click.Path(exists=True, file_okay=False))
@click.pass_obj
@domain_guard
def gen_tests(state: CliState, project_ref: str, story_id: str | None,
              all_stories: bool, count: int | None, temperature: float | None,
              mock_dir: str | None):
    """Generate test-case scenarios for one story or every story."""
    if bool(story_id) == all_stories:
        raise click.UsageError("pass exactly one of --story or --all")
    ws = state.workspace()
    project = ws.find_project(project_ref)
    client = build_client(mock_dir)
    params = default_params(temperature, count)

    with ws.project_lock(project.id):
        project = ws.load_project(project.id)
        if story_id:
            outcome = pipeline.generate_testcases(project, story_id, client, params)
            outcomes = [outcome]
            final = outcome.project
        else:
            bulk = pipeline.generate_testcases_bulk(project, client, params)
            outcomes = list(bulk.outcomes)
            final = bulk.project
        for outcome in outcomes:
            ws.save_session(project.id, outcome.session, outcome.exchanges)
        ws.save_project_unlocked(final)

    failures = [o for o in outcomes if not o.ok]
    for failure in failures:
        report_failure(failure)
    if failures:
        sys.exit(1)
    created = [c for o in outcomes for c in o.created_cases]
    lines = [f"created {len(created)} test cases in {project.id}"]
    lines += [f"  {c.id} [{c.story_id}] {c.title}" for c in created]
    emit(
        state,
        lines,
        {
            "project_id": project.id,
            "sessions": [o.summary() for o in outcomes],
            "cases": [c.to_dict() for c in created],
        },
    )


@main.command("export")
@click.option("--project", "-p", "project_ref", required=True)
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.option("--columns", default=None,
              help="Header renames as old=new[,old=new...], CSV only.")
@click.pass_obj
@domain_guard
def export_(state: CliState, project_ref: str, out_file: str, fmt: str | None,
            columns: str | None):
    """Write the project's test cases to a CSV or JSON file."""
    ws = state.workspace()
    project = ws.find_project(project_ref)
    chosen = fmt or ("json" if out_file.endswith(".json") else "csv")
    column_map = None
    if columns:
        if chosen != "csv":
            raise click.UsageError("--columns applies to CSV export only")
        column_map = {}
        for pair in columns.split(","):
            old, sep, new = pair.partition("=")
            if not sep or not old.strip() or not new.strip():
                raise click.UsageError(f"bad --columns entry {pair!r}, expected old=new")
            column_map[old.strip()] = new.strip()
    if chosen == "csv":
        export.write_csv(project, out_file, columns=column_map)
    else:
        Path(out_file).write_text(export.export_json(project), encoding="utf-8")
    emit(
        state,
        [f"wrote {chosen} export of {project.id} to {out_file}"],
        {"project_id": project.id, "out": out_file, "format": chosen,
         "records": len(project.test_cases)},
    )


@main.command()
@click.option("--project", "-p", "project_ref", required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Report directory (default: workspace reports/<project>).")
@click.pass_obj
@domain_guard
def analyze(state: CliState, project_ref: str, out_dir: str | None):
    """Write the analysis report, its figures, and the delimited export."""
    ws = state.workspace()
    project = ws.find_project(project_ref)
    sessions = ws.load_sessions(project.id)
    report = analysis.full_report(
        project, [s for s, _ in sessions], latency_samples(sessions)
    )
    target = Path(out_dir) if out_dir else ws.reports_dir / project.id
    target.mkdir(parents=True, exist_ok=True)
    report_path = target / "report.json"
    report_path.write_text(
        json.dumps(report, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    figures = render_report_figures(report, target)
    csv_path = target / "cases.csv"
    export.write_csv(project, csv_path)

    cov = report["coverage"]
    lat = report["latency"]
    lines = [
        f"analysis of {project.id} written to {target}",
        f"  stories: {len(project.stories)}, cases: {len(project.test_cases)}",
        f"  stories below {cov['min_cases']} cases: {len(cov['stories_below_min'])}",
        f"  duplicate groups: {len(report['duplicates']['groups'])}",
    ]
    if lat["n"]:
        lines.append(
            f"  latency mean {lat['mean']:.0f} ms over {lat['n']} calls"
            f" (SLO {lat['slo_millis']} ms: {'pass' if lat['slo_pass'] else 'fail'})"
        )
    payload = dict(report)
    payload["artifacts"] = {
        "report": str(report_path),
        "figures": [str(p) for p in figures],
        "csv": str(csv_path),
    }
    emit(state, lines, payload)


@main.command()
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--mock", "mock_dir", type=click.Path(exists=True, file_okay=False))
@click.pass_obj
@domain_guard
def serve(state: CliState, port: int, host: str, mock_dir: str | None):
    """Run the HTTP API for the web UI."""
    import uvicorn

    ws = state.workspace()
    try:
        client = build_client(mock_dir)
    except CaseforgeError as exc:
        click.echo(f"warning: {exc}; generation endpoints disabled", err=True)
        client = None
    app = create_app(ws, client)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
