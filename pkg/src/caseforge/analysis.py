"""Traceability coverage, duplicate detection, conformance and latency reports.

Every report is a pure function of its inputs, so recomputation is idempotent
and callers may parallelize across projects freely.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from caseforge.errors import InvalidProjectError
from caseforge.model import GenerationSession, Project, SessionOutcome, TestCase, validate_project

DEFAULT_MIN_CASES = 3
DEFAULT_CRITERION_THRESHOLD = 0.4
DEFAULT_SLO_MILLIS = 2000
DEFAULT_DUPLICATE_THRESHOLD = 0.9

# Lexical-overlap stopwords: words that carry no traceability signal.
STOPWORDS = frozenset(
    """
    a an the and or but if then else not no nor of to in on at by for with as
    is are was were be been being am it its this that these those i you he she
    we they them their there do does did doing can could should would will
    shall may might must have has had having from into over under when where
    why how all any both each such only own same than too very about against
    between through during before after above below up down out off once here
    so s t
    """.split()
)

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> set[str]:
    """Case-folded content-word token set."""
    return {t for t in _TOKEN_RE.findall(text.casefold()) if t not in STOPWORDS}


@dataclass(frozen=True)
class CoverageReport:
    case_counts: Mapping[str, int]
    stories_below_min: tuple[str, ...]
    orphan_cases: tuple[str, ...]
    criteria_coverage: Mapping[str, float]
    stories_without_criteria: tuple[str, ...]
    min_cases: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "case_counts": dict(self.case_counts),
            "stories_below_min": list(self.stories_below_min),
            "orphan_cases": list(self.orphan_cases),
            "criteria_coverage": dict(self.criteria_coverage),
            "stories_without_criteria": list(self.stories_without_criteria),
            "min_cases": self.min_cases,
        }


@dataclass(frozen=True)
class LatencyStats:
    n: int
    mean: float | None
    median: float | None
    p95: float | None
    min: float | None
    max: float | None
    slo_millis: int
    slo_pass: bool | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "mean": self.mean,
            "median": self.median,
            "p95": self.p95,
            "min": self.min,
            "max": self.max,
            "slo_millis": self.slo_millis,
            "slo_pass": self.slo_pass,
        }


@dataclass(frozen=True)
class DuplicateReport:
    groups: tuple[tuple[str, ...], ...]
    threshold: float

    def to_dict(self) -> dict[str, Any]:
        return {"groups": [list(g) for g in self.groups], "threshold": self.threshold}


@dataclass(frozen=True)
class ConformanceReport:
    sessions_total: int
    parse_success_rate: float
    method_counts: Mapping[str, int]
    outcome_counts: Mapping[str, int]
    retry_total: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "sessions_total": self.sessions_total,
            "parse_success_rate": self.parse_success_rate,
            "method_counts": dict(self.method_counts),
            "outcome_counts": dict(self.outcome_counts),
            "retry_total": self.retry_total,
        }


def coverage(
    project: Project,
    min_cases: int = DEFAULT_MIN_CASES,
    criterion_threshold: float = DEFAULT_CRITERION_THRESHOLD,
) -> CoverageReport:
    """Per-story traceability: case counts plus lexical acceptance-criterion hits.

    A criterion counts as referenced when at least `criterion_threshold` of
    its content words occur in a single case's title, steps, or expected
    result.
    """
    violations = validate_project(project)
    if violations:
        raise InvalidProjectError(violations)

    story_ids = [s.id for s in project.stories]
    counts: dict[str, int] = {sid: 0 for sid in story_ids}
    orphans: list[str] = []
    cases_by_story: dict[str, list[TestCase]] = {sid: [] for sid in story_ids}
    for case in project.test_cases:
        if case.story_id in counts:
            counts[case.story_id] += 1
            cases_by_story[case.story_id].append(case)
        else:
            orphans.append(case.id)

    below_min = tuple(sid for sid in story_ids if counts[sid] < min_cases)

    criteria_coverage: dict[str, float] = {}
    without_criteria: list[str] = []
    for story in project.stories:
        if not story.acceptance_criteria:
            without_criteria.append(story.id)
            continue
        case_token_sets = [
            tokenize(" ".join((case.title, *case.steps, case.expected_result)))
            for case in cases_by_story[story.id]
        ]
        referenced = 0
        for criterion in story.acceptance_criteria:
            words = tokenize(criterion)
            if not words:
                referenced += 1
                continue
            for tokens in case_token_sets:
                if len(words & tokens) / len(words) >= criterion_threshold:
                    referenced += 1
                    break
        criteria_coverage[story.id] = referenced / len(story.acceptance_criteria)

    return CoverageReport(
        case_counts=counts,
        stories_below_min=below_min,
        orphan_cases=tuple(orphans),
        criteria_coverage=criteria_coverage,
        stories_without_criteria=tuple(without_criteria),
        min_cases=min_cases,
    )


def nearest_rank(sorted_samples: Sequence[float], p: float) -> float:
    """Value at 1-based index ceil(p * n) of an already-sorted sample."""
    n = len(sorted_samples)
    index = max(1, math.ceil(p * n))
    return sorted_samples[index - 1]


def latency_stats(
    samples: Sequence[float], slo_millis: int = DEFAULT_SLO_MILLIS
) -> LatencyStats:
    """Mean/median/p95/max over millisecond durations; nearest-rank percentiles."""
    n = len(samples)
    if n == 0:
        return LatencyStats(
            n=0, mean=None, median=None, p95=None, min=None, max=None,
            slo_millis=slo_millis, slo_pass=None,
        )
    ordered = sorted(samples)
    mean = sum(ordered) / n
    return LatencyStats(
        n=n,
        mean=mean,
        median=nearest_rank(ordered, 0.5),
        p95=nearest_rank(ordered, 0.95),
        min=ordered[0],
        max=ordered[-1],
        slo_millis=slo_millis,
        slo_pass=mean <= slo_millis,
    )


def jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 1.0
    union = a | b
    return len(a & b) / len(union)


def duplicates(
    cases: Sequence[TestCase], threshold: float = DEFAULT_DUPLICATE_THRESHOLD
) -> DuplicateReport:
    """Connected components of the pairwise title-similarity relation."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside (0, 1]")
    token_sets = {case.id: tokenize_title(case.title) for case in cases}
    ids = [case.id for case in cases]

    parent = {cid: cid for cid in ids}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x: str, y: str) -> None:
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[ry] = rx

    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            if jaccard(token_sets[ids[i]], token_sets[ids[j]]) >= threshold:
                union(ids[i], ids[j])

    components: dict[str, list[str]] = {}
    for cid in ids:
        components.setdefault(find(cid), []).append(cid)
    groups = tuple(
        tuple(sorted(members)) for members in components.values() if len(members) >= 2
    )
    return DuplicateReport(groups=tuple(sorted(groups)), threshold=threshold)


def tokenize_title(title: str) -> set[str]:
    """Duplicate detection folds case but keeps stopwords: titles are short."""
    return set(_TOKEN_RE.findall(title.casefold()))


def conformance(sessions: Iterable[GenerationSession]) -> ConformanceReport:
    """Parse-success rate and extraction-method histogram over sessions."""
    items = list(sessions)
    total = len(items)
    successes = sum(1 for s in items if s.outcome == SessionOutcome.SUCCESS)
    method_counts: dict[str, int] = {}
    outcome_counts: dict[str, int] = {}
    retry_total = 0
    for session in items:
        outcome_counts[session.outcome.value] = outcome_counts.get(session.outcome.value, 0) + 1
        if session.method:
            method_counts[session.method] = method_counts.get(session.method, 0) + 1
        retry_total += session.retries
    return ConformanceReport(
        sessions_total=total,
        parse_success_rate=(successes / total) if total else 0.0,
        method_counts=dict(sorted(method_counts.items())),
        outcome_counts=dict(sorted(outcome_counts.items())),
        retry_total=retry_total,
    )


def full_report(
    project: Project,
    sessions: Sequence[GenerationSession],
    latencies_ms: Sequence[float],
    min_cases: int = DEFAULT_MIN_CASES,
    slo_millis: int = DEFAULT_SLO_MILLIS,
    duplicate_threshold: float = DEFAULT_DUPLICATE_THRESHOLD,
) -> dict[str, Any]:
    """The combined analysis document served by the API and written to reports/."""
    return {
        "project_id": project.id,
        "coverage": coverage(project, min_cases=min_cases).to_dict(),
        "latency": latency_stats(latencies_ms, slo_millis=slo_millis).to_dict(),
        "duplicates": duplicates(project.test_cases, threshold=duplicate_threshold).to_dict(),
        "conformance": conformance(sessions).to_dict(),
    }
