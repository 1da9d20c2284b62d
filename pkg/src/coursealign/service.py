"""Reviewer-facing HTTP service over expansion candidates.

Each scenario pairs one source course with its top-k most similar courses at
one receiving institution; reviewers accept one candidate or reject them all
(choice NONE).  Decisions are appended to an NDJSON log and fsynced before
the request is acknowledged, so an acknowledged decision survives a crash:
restarting over the same log file replays to identical statistics.

Endpoints:
  GET  /healthz                         liveness probe
  GET  /queue?reviewer=<id>&limit=<n>   undecided scenarios for a reviewer
  POST /decision                        record one reviewer decision
  GET  /stats                           per-role and overall adoption rates
  GET  /projection?rate=<r>             catalog growth at an adoption rate
"""
from __future__ import annotations

import json
import logging
import mimetypes
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Sequence
from urllib.parse import parse_qs, urlparse

from .catalog import Catalog, institution_of
from .embed import EmbeddingTable
from .errors import (
    ChoiceNotInScenarioError,
    CourseAlignError,
    DecisionExistsError,
    UnknownScenarioError,
)
from .predict import rank_candidates
from .threshold import project_adoption

logger = logging.getLogger(__name__)

ROLES = ("staff", "faculty")
NONE_CHOICE = "NONE"
DEFAULT_CANDIDATES_PER_SCENARIO = 7


@dataclass(frozen=True)
class Candidate:
    course_id: str
    title: str
    description: str
    cosine: float


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    source_course_id: str
    source_title: str
    source_description: str
    receiving_institution_id: str
    candidates: tuple[Candidate, ...]

    def to_payload(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "source_course": {
                "id": self.source_course_id,
                "title": self.source_title,
                "description": self.source_description,
                "institution_id": institution_of(self.source_course_id),
            },
            "receiving_institution_id": self.receiving_institution_id,
            "candidates": [
                {
                    "course_id": c.course_id,
                    "title": c.title,
                    "description": c.description,
                    "cosine": c.cosine,
                }
                for c in self.candidates
            ],
        }


@dataclass(frozen=True)
class Decision:
    scenario_id: str
    reviewer_id: str
    role: str
    choice: str
    ts: str

    def to_record(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "reviewer_id": self.reviewer_id,
            "role": self.role,
            "choice": self.choice,
            "ts": self.ts,
        }


class DecisionLog:
    """Append-only NDJSON decision journal with fsync-before-acknowledge."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, decision: Decision) -> None:
        line = json.dumps(decision.to_record()) + "\n"
        with self._lock:
            self._fh.write(line)
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        with self._lock:
            self._fh.close()

    @staticmethod
    def replay(path: str | Path) -> list[Decision]:
        """Read back all complete records; a partial final line is dropped."""
        path = Path(path)
        if not path.exists():
            return []
        decisions: list[Decision] = []
        raw = path.read_text(encoding="utf-8")
        lines = raw.split("\n")
        for idx, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                if idx == len(lines) - 1:
                    logger.warning("dropping partial trailing record in %s", path)
                    continue
                raise ValueError(f"{path}: corrupt decision record at line {idx + 1}")
            decisions.append(
                Decision(
                    scenario_id=record["scenario_id"],
                    reviewer_id=record["reviewer_id"],
                    role=record["role"],
                    choice=record["choice"],
                    ts=record["ts"],
                )
            )
        return decisions


def build_scenarios(
    shared_table: EmbeddingTable,
    catalog: Catalog,
    expansion_pairs: Sequence[tuple[str, str]],
    k: int = DEFAULT_CANDIDATES_PER_SCENARIO,
) -> list[Scenario]:
    """One scenario per distinct (source course, receiving institution).

    Candidates are the top-k courses by cosine at the receiving institution
    regardless of any threshold, so reviewers always see min(k, pool size)
    options.  Scenario order is canonical (sorted key), independent of the
    expansion file's row order.
    """
    keys: set[tuple[str, str]] = set()
    for source, target in expansion_pairs:
        keys.add((source, institution_of(target)))
    scenarios: list[Scenario] = []
    for source, inst in sorted(keys):
        ranked = rank_candidates(shared_table, catalog, source, inst, k)
        course = catalog.course(source)
        candidates = tuple(
            Candidate(
                course_id=cid,
                title=catalog.course(cid).title,
                description=catalog.course(cid).description,
                cosine=cos,
            )
            for cid, cos in ranked.entries
        )
        scenarios.append(
            Scenario(
                scenario_id=f"{source}::{inst}",
                source_course_id=source,
                source_title=course.title,
                source_description=course.description,
                receiving_institution_id=inst,
                candidates=candidates,
            )
        )
    return scenarios


class ReviewState:
    """In-memory view of scenarios and decisions, backed by the journal."""

    def __init__(
        self,
        scenarios: Sequence[Scenario] | None,
        log: DecisionLog,
        n_existing: int | None = None,
        n_candidates: int | None = None,
    ):
        self.scenarios: dict[str, Scenario] | None = (
            {s.scenario_id: s for s in scenarios} if scenarios is not None else None
        )
        self._order = [s.scenario_id for s in scenarios] if scenarios is not None else []
        self.log = log
        self.n_existing = n_existing
        self.n_candidates = n_candidates
        self._lock = threading.Lock()
        self.decisions: dict[tuple[str, str], Decision] = {}
        for decision in DecisionLog.replay(log.path):
            self.decisions[(decision.scenario_id, decision.reviewer_id)] = decision

    @property
    def loaded(self) -> bool:
        return self.scenarios is not None

    def queue_for(self, reviewer_id: str, limit: int) -> list[Scenario]:
        assert self.scenarios is not None
        with self._lock:
            decided = {sid for sid, rid in self.decisions if rid == reviewer_id}
        out = []
        for sid in self._order:
            if sid not in decided:
                out.append(self.scenarios[sid])
                if len(out) >= limit:
                    break
        return out

    def record(self, scenario_id: str, reviewer_id: str, role: str, choice: str) -> Decision:
        if self.scenarios is None or scenario_id not in self.scenarios:
            raise UnknownScenarioError(f"unknown scenario: {scenario_id!r}")
        scenario = self.scenarios[scenario_id]
        valid = {c.course_id for c in scenario.candidates} | {NONE_CHOICE}
        if choice not in valid:
            raise ChoiceNotInScenarioError(
                f"choice {choice!r} is not a candidate of scenario {scenario_id!r}"
            )
        decision = Decision(
            scenario_id=scenario_id,
            reviewer_id=reviewer_id,
            role=role,
            choice=choice,
            ts=datetime.now(timezone.utc).isoformat(),
        )
        with self._lock:
            key = (scenario_id, reviewer_id)
            if key in self.decisions:
                raise DecisionExistsError(
                    f"reviewer {reviewer_id!r} already decided scenario {scenario_id!r}"
                )
            # Durable before visible: fsync the record, then admit it.
            self.log.append(decision)
            self.decisions[key] = decision
        return decision

    def stats(self) -> dict:
        with self._lock:
            decisions = list(self.decisions.values())
        by_role = {}
        role_rates = []
        for role in ROLES:
            mine = [d for d in decisions if d.role == role]
            decided = len(mine)
            accepted = sum(1 for d in mine if d.choice != NONE_CHOICE)
            rate = accepted / decided if decided else None
            if rate is not None:
                role_rates.append(rate)
            by_role[role] = {"decided": decided, "accepted": accepted, "rate": rate}
        total = len(decisions)
        accepted_total = sum(1 for d in decisions if d.choice != NONE_CHOICE)
        return {
            "total_decisions": total,
            "by_role": by_role,
            # unweighted mean of the per-role rates, matching how a panel of
            # role-level results is usually averaged
            "overall_rate": sum(role_rates) / len(role_rates) if role_rates else None,
            "overall_rate_weighted": accepted_total / total if total else None,
        }

    def projection(self, rate_override: float | None) -> dict:
        rate_source = "override"
        rate = rate_override
        if rate is None:
            rate = self.stats()["overall_rate"]
            rate_source = "observed"
        if rate is None:
            raise CourseAlignError("no adoption rate observed and no override given")
        assert self.scenarios is not None
        n_candidates = self.n_candidates if self.n_candidates is not None else len(self.scenarios)
        expected, fold = project_adoption(n_candidates, rate, self.n_existing or 1)
        return {
            "candidates": n_candidates,
            "rate": rate,
            "rate_source": rate_source,
            "existing": self.n_existing,
            "expected_accepted": expected,
            "fold_increase": fold,
        }


class _Handler(BaseHTTPRequestHandler):
    server_version = "coursealign-review"

    @property
    def state(self) -> ReviewState:
        return self.server.state  # type: ignore[attr-defined]

    @property
    def ui_dir(self) -> Path | None:
        return self.server.ui_dir  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # route through logging, not stderr
        logger.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, code: int, payload) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, code: int, error: str, detail: str) -> None:
        self._send_json(code, {"error": error, "detail": detail})

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/healthz":
            body = b"ok"
            self.send_response(200)
            self.send_header("Content-Type", "text/plain")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
            return
        if url.path == "/queue":
            return self._get_queue(url)
        if url.path == "/stats":
            return self._send_json(200, self.state.stats())
        if url.path == "/projection":
            return self._get_projection(url)
        return self._get_static(url.path)

    def _get_queue(self, url) -> None:
        if not self.state.loaded:
            return self._error(503, "NoExpansionLoaded", "no expansion candidates are loaded")
        params = parse_qs(url.query)
        reviewer = params.get("reviewer", [""])[0]
        if not reviewer:
            return self._error(400, "MalformedRequest", "missing reviewer parameter")
        try:
            limit = int(params.get("limit", ["10"])[0])
        except ValueError:
            return self._error(400, "MalformedRequest", "limit must be an integer")
        limit = max(1, min(limit, 100))
        scenarios = self.state.queue_for(reviewer, limit)
        return self._send_json(200, [s.to_payload() for s in scenarios])

    def _get_projection(self, url) -> None:
        if not self.state.loaded:
            return self._error(503, "NoExpansionLoaded", "no expansion candidates are loaded")
        params = parse_qs(url.query)
        rate = None
        if "rate" in params:
            try:
                rate = float(params["rate"][0])
            except ValueError:
                return self._error(400, "MalformedRequest", "rate must be a number")
            if not 0.0 <= rate <= 1.0:
                return self._error(400, "MalformedRequest", "rate must be in [0, 1]")
        try:
            return self._send_json(200, self.state.projection(rate))
        except CourseAlignError as exc:
            return self._error(409, "NoRateAvailable", exc.detail)

    def _get_static(self, path: str) -> None:
        if self.ui_dir is None:
            return self._error(404, "NotFound", f"no handler for {path}")
        rel = path.lstrip("/") or "index.html"
        target = (self.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            return self._error(404, "NotFound", f"no file for {path}")
        body = target.read_bytes()
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        url = urlparse(self.path)
        if url.path != "/decision":
            return self._error(404, "NotFound", f"no handler for {url.path}")
        if not self.state.loaded:
            return self._error(503, "NoExpansionLoaded", "no expansion candidates are loaded")
        try:
            length = int(self.headers.get("Content-Length", "0"))
            record = json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, json.JSONDecodeError):
            return self._error(400, "MalformedRequest", "body must be a JSON object")
        if not isinstance(record, dict):
            return self._error(400, "MalformedRequest", "body must be a JSON object")
        missing = [k for k in ("scenario_id", "reviewer_id", "role", "choice") if not record.get(k)]
        if missing:
            return self._error(400, "MalformedRequest", f"missing fields: {', '.join(missing)}")
        if record["role"] not in ROLES:
            return self._error(400, "MalformedRequest", f"role must be one of {'|'.join(ROLES)}")
        try:
            decision = self.state.record(
                record["scenario_id"], record["reviewer_id"], record["role"], record["choice"]
            )
        except DecisionExistsError as exc:
            return self._error(409, exc.code, exc.detail)
        except ChoiceNotInScenarioError as exc:
            return self._error(422, exc.code, exc.detail)
        except UnknownScenarioError as exc:
            return self._error(404, exc.code, exc.detail)
        return self._send_json(201, decision.to_record())


def make_server(
    state: ReviewState, port: int = 0, ui_dir: str | Path | None = None
) -> ThreadingHTTPServer:
    """Bind the review service; port 0 picks a free port."""
    server = ThreadingHTTPServer(("127.0.0.1", port), _Handler)
    server.state = state  # type: ignore[attr-defined]
    server.ui_dir = Path(ui_dir) if ui_dir else None  # type: ignore[attr-defined]
    return server
