"""HTTP interface over the pipeline.

Every non-2xx body is an ApiError JSON object. Response bodies for export and
analysis are byte-equal to the owning module's output; the API layer adds no
transformation of its own.
"""

from __future__ import annotations

from typing import Any, Mapping, Sequence

from fastapi import Body, FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from caseforge import analysis, export, pipeline
from caseforge.client import ChatExchange, LlmClient
from caseforge.errors import (
    BackendNotConfiguredError,
    CaseforgeError,
    ExportError,
    InvalidProjectError,
    LockError,
    MissingFixtureError,
    NotFoundError,
    PipelineError,
    StoreError,
    StoryImportError,
    TemplateError,
)
from caseforge.model import GenerationSession, Priority, Project
from caseforge.prompting import GenerationParams
from caseforge.store import (
    Workspace,
    import_stories_text,
    with_case_priority,
    with_imported_stories,
    with_requirement,
)


def api_error(
    status: int, code: str, message: str, details: Any = None
) -> JSONResponse:
    body = {"status": status, "code": code, "message": message, "details": details}
    return JSONResponse(status_code=status, content=body)


def _diagnostics(outcome: pipeline.GenerationOutcome) -> list[dict[str, str]]:
    if outcome.result is None:
        return []
    return [d.to_dict() for d in outcome.result.diagnostics]


def latency_samples(
    sessions: Sequence[tuple[GenerationSession, list[ChatExchange]]]
) -> list[int]:
    """Latencies of successful exchanges, the analysis module's SLO input."""
    return [e.latency_ms for _, exchanges in sessions for e in exchanges if e.ok]


def create_app(
    workspace: Workspace,
    client: LlmClient | None = None,
    cors_origins: Sequence[str] = ("*",),
) -> FastAPI:
    """Build the application around an opened workspace and optional client.

    Without a client every generation endpoint answers 502; reads, edits and
    exports still work, so a UI can browse an existing workspace offline.
    """
    app = FastAPI(title="caseforge", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def require_client() -> LlmClient:
        if client is None:
            raise BackendNotConfiguredError(
                "backend not configured: start the server with credentials or a fixtures directory"
            )
        return client

    def find_story_project(story_id: str) -> Project:
        for project_id in workspace.list_project_ids():
            project = workspace.load_project(project_id)
            if project.story_by_id(story_id) is not None:
                return project
        raise NotFoundError("story", story_id)

    def find_case_project(case_id: str) -> Project:
        for project_id in workspace.list_project_ids():
            project = workspace.load_project(project_id)
            if any(case.id == case_id for case in project.test_cases):
                return project
        raise NotFoundError("test_case", case_id)

    def params_from(body: Mapping[str, Any]) -> GenerationParams:
        overrides = body.get("params") or {}
        if not isinstance(overrides, Mapping):
            raise ValueError("params must be an object")
        return GenerationParams.from_dict(overrides)

    def generation_response(
        outcome: pipeline.GenerationOutcome, payload_key: str, created: list[dict]
    ) -> Any:
        summary = outcome.summary()
        if outcome.ok:
            return {payload_key: created, "session": summary}
        # raw_text gives the UI the failing model output for diagnostics-first
        # display; empty when the backend never produced a body.
        details = {
            "session": summary,
            "diagnostics": _diagnostics(outcome),
            "raw_text": outcome.exchanges[-1].raw_text if outcome.exchanges else "",
        }
        if outcome.session.outcome.value == "backend_error":
            return api_error(502, "backend_error", "LLM backend request failed", details)
        return api_error(
            409, "generation_failed", "no structured records could be extracted", details
        )

    # -- error mapping -------------------------------------------------------

    @app.exception_handler(CaseforgeError)
    async def on_domain_error(request: Request, exc: CaseforgeError):
        if isinstance(exc, NotFoundError):
            return api_error(404, "not_found", str(exc))
        if isinstance(exc, (BackendNotConfiguredError, MissingFixtureError)):
            return api_error(502, "backend_error", str(exc))
        if isinstance(exc, PipelineError):
            return api_error(400, "invalid_request", str(exc))
        if isinstance(exc, StoryImportError):
            return api_error(400, "invalid_request", str(exc))
        if isinstance(exc, InvalidProjectError):
            return api_error(
                409,
                "invalid_project",
                str(exc),
                {"violations": [v.__dict__ for v in exc.violations]},
            )
        if isinstance(exc, ExportError):
            return api_error(409, "export_failed", str(exc))
        if isinstance(exc, LockError):
            return api_error(503, "locked", str(exc))
        if isinstance(exc, (StoreError, TemplateError)):
            return api_error(500, "internal_error", str(exc))
        return api_error(500, "internal_error", str(exc))

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return api_error(400, "invalid_request", "request body is not valid JSON")

    # -- projects ------------------------------------------------------------

    @app.get("/api/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.get("/api/projects")
    def list_projects() -> list[dict[str, str]]:
        out = []
        for project_id in workspace.list_project_ids():
            project = workspace.load_project(project_id)
            out.append({"id": project.id, "name": project.name})
        return out

    @app.post("/api/projects", status_code=201)
    def create_project(body: dict = Body(default={})):
        name = body.get("name", "")
        if not isinstance(name, str) or not name.strip():
            return api_error(400, "invalid_request", "name must be a non-empty string")
        project = workspace.create_project(name.strip())
        return JSONResponse(status_code=201, content=project.to_dict())

    @app.get("/api/projects/{project_id}")
    def get_project(project_id: str):
        return workspace.load_project(project_id).to_dict()

    @app.post("/api/projects/{project_id}/requirements", status_code=201)
    def add_requirement(project_id: str, body: dict = Body(default={})):
        text = body.get("text", "")
        if not isinstance(text, str) or not text.strip():
            return api_error(400, "invalid_request", "text must be a non-empty string")
        with workspace.project_lock(project_id):
            project = workspace.load_project(project_id)
            updated, requirement = with_requirement(project, text)
            workspace.save_project_unlocked(updated)
        return JSONResponse(status_code=201, content=requirement.to_dict())

    @app.post("/api/projects/{project_id}/stories:import", status_code=201)
    def import_project_stories(project_id: str, body: dict = Body(default={})):
        text = body.get("text", "")
        fmt = body.get("format", "json")
        if not isinstance(text, str) or not text.strip():
            return api_error(400, "invalid_request", "text must be a non-empty document")
        with workspace.project_lock(project_id):
            project = workspace.load_project(project_id)
            result = import_stories_text(text, fmt, project.existing_ids())
            workspace.save_project_unlocked(
                with_imported_stories(project, result.stories)
            )
        return JSONResponse(
            status_code=201,
            content={
                "stories": [s.to_dict() for s in result.stories],
                "diagnostics": result.diagnostics,
            },
        )

    # -- generation ----------------------------------------------------------

    @app.post("/api/projects/{project_id}/stories:generate")
    def gen_stories(project_id: str, body: dict = Body(default={})):
        llm = require_client()
        try:
            params = params_from(body)
        except ValueError as exc:
            return api_error(400, "invalid_request", str(exc))
        requirement_ids = body.get("requirement_ids")
        with workspace.project_lock(project_id):
            project = workspace.load_project(project_id)
            outcome = pipeline.generate_stories(
                project, llm, params, requirement_ids=requirement_ids
            )
            workspace.save_session(project_id, outcome.session, outcome.exchanges)
            workspace.save_project_unlocked(outcome.project)
        return generation_response(
            outcome, "stories", [s.to_dict() for s in outcome.created_stories]
        )

    @app.post("/api/stories/{story_id}/testcases:generate")
    def gen_testcases(story_id: str, body: dict = Body(default={})):
        llm = require_client()
        try:
            params = params_from(body)
        except ValueError as exc:
            return api_error(400, "invalid_request", str(exc))
        project = find_story_project(story_id)
        with workspace.project_lock(project.id):
            project = workspace.load_project(project.id)
            outcome = pipeline.generate_testcases(project, story_id, llm, params)
            workspace.save_session(project.id, outcome.session, outcome.exchanges)
            workspace.save_project_unlocked(outcome.project)
        return generation_response(
            outcome, "cases", [c.to_dict() for c in outcome.created_cases]
        )

    # -- edits ---------------------------------------------------------------

    @app.patch("/api/testcases/{case_id}")
    def patch_testcase(case_id: str, body: dict = Body(default={})):
        raw = body.get("priority", "")
        try:
            priority = Priority.parse(raw if isinstance(raw, str) else "")
        except ValueError as exc:
            return api_error(400, "invalid_request", str(exc))
        project = find_case_project(case_id)
        with workspace.project_lock(project.id):
            project = workspace.load_project(project.id)
            updated = with_case_priority(project, case_id, priority)
            workspace.save_project_unlocked(updated)
        case = next(c for c in updated.test_cases if c.id == case_id)
        return case.to_dict()

    # -- export and analysis ---------------------------------------------------

    @app.get("/api/projects/{project_id}/export.csv")
    def export_csv(project_id: str):
        project = workspace.load_project(project_id)
        text = export.export_csv(project)
        return Response(
            content=text,
            media_type="text/csv; charset=utf-8",
            headers={
                "Content-Disposition": f'attachment; filename="{project_id}.csv"'
            },
        )

    @app.get("/api/projects/{project_id}/export.json")
    def export_json(project_id: str):
        project = workspace.load_project(project_id)
        return Response(
            content=export.export_json(project), media_type="application/json"
        )

    @app.get("/api/projects/{project_id}/analysis")
    def get_analysis(project_id: str):
        project = workspace.load_project(project_id)
        sessions = workspace.load_sessions(project_id)
        return analysis.full_report(
            project,
            [s for s, _ in sessions],
            latency_samples(sessions),
        )

    return app
