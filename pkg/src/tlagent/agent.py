"""Rule-driven tool invocation with delay windows and ordering edges.

Rule file::

    {"tools": [{"id": str, "kind": "log" | "webhook" | "command",
                "target": str, "args_schema": [{"name": str, "type": str}]}],
     "rules": [{"id": str, "spec": str, "tool": str, "args": {str: str},
                "delay": [dmin, dmax], "after": [rule ids]}]}

Timing is in frames.  A match ending at frame ``e`` schedules the rule's tool
for frame ``e + dmin`` with deadline ``e + dmax``; it runs at the first frame
in that window where every rule in ``after`` has a successful record, and is
recorded as ``expired`` if the window closes first.
"""

from __future__ import annotations

import json
import logging
import os
import re
import subprocess
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence
from urllib.parse import urlparse

import requests

from .automaton import Dfa, compile_dfa
from .errors import FormulaSyntaxError, RuleError, TLAgentError
from .parser import parse_formula
from .search import MatchEvent, Monitor
from .traces import FrameTrace

__all__ = [
    "ToolSpec", "TriggerRule", "RuleSet", "ScheduledInvocation", "InvocationRecord",
    "DryRunExecutor", "LiveExecutor", "AgentEngine", "load_rules", "rules_from_dict",
    "execute", "replay", "write_log", "read_log", "SUCCESS",
]

log = logging.getLogger(__name__)

TOOL_KINDS = ("log", "webhook", "command")
ARG_TYPES = ("string", "int", "float", "frame", "span")
PLACEHOLDERS = frozenset({"video_id", "span.start", "span.end", "frame", "time"})
SUCCESS = frozenset({"ok", "dry-run"})

_PLACEHOLDER_RE = re.compile(r"\{([^{}]*)\}")


@dataclass(frozen=True)
class ToolSpec:
    id: str
    kind: str
    target: str = ""
    args_schema: tuple = ()  # ((name, type), ...)


@dataclass(frozen=True, eq=False)
class TriggerRule:
    id: str
    spec: str
    tool: str
    args: Mapping
    delay: tuple = (0, 0)
    after: tuple = ()
    dfa: Dfa | None = None


@dataclass
class RuleSet:
    tools: dict
    rules: dict
    rank: dict = field(default_factory=dict)

    def ordered(self) -> list:
        """Rules with prerequisites first, ties by id."""
        return sorted(self.rules.values(), key=lambda r: (self.rank[r.id], r.id))


def _check_url(url: str) -> bool:
    try:
        parts = urlparse(url)
    except ValueError:
        return False
    return parts.scheme in ("http", "https") and bool(parts.netloc)


def commands_allowed(flag: bool | None = None) -> bool:
    return bool(flag) or os.environ.get("AGENT_ALLOW_COMMANDS", "") == "1"


def _parse_tool(doc: Mapping, allow_commands: bool) -> ToolSpec:
    try:
        tid, kind = doc["id"], doc["kind"]
    except (KeyError, TypeError):
        raise RuleError(f"tool entry {doc!r} needs 'id' and 'kind'") from None
    if not isinstance(tid, str) or not tid:
        raise RuleError("tool ids must be nonempty strings")
    if kind not in TOOL_KINDS:
        raise RuleError(f"tool {tid}: unknown kind {kind!r}")
    target = doc.get("target", "") or ""
    if kind == "webhook" and not _check_url(target):
        raise RuleError(f"tool {tid}: webhook target {target!r} is not a valid http(s) URL")
    if kind == "command":
        if not target:
            raise RuleError(f"tool {tid}: command tools need an executable target")
        if not allow_commands:
            raise RuleError(f"tool {tid}: command tools are disabled "
                            "(set AGENT_ALLOW_COMMANDS=1 or pass allow_commands)")
    schema = []
    for entry in doc.get("args_schema", []):
        if isinstance(entry, Mapping):
            name, typ = entry.get("name"), entry.get("type", "string")
        else:
            name, typ = entry
        if typ not in ARG_TYPES:
            raise RuleError(f"tool {tid}: argument {name!r} has unknown type {typ!r}")
        schema.append((str(name), typ))
    return ToolSpec(tid, kind, target, tuple(schema))


def _check_template(rule_id: str, value: str):
    for m in _PLACEHOLDER_RE.finditer(value):
        if m.group(1) not in PLACEHOLDERS:
            raise RuleError(f"rule {rule_id}: bad placeholder {{{m.group(1)}}}")


def _find_cycle(rules: Mapping) -> list | None:
    color: dict = {}
    path: list = []

    def visit(r):
        color[r] = 1
        path.append(r)
        for b in rules[r].after:
            if color.get(b) == 1:
                return path[path.index(b):] + [b]
            if b not in color:
                found = visit(b)
                if found:
                    return found
        path.pop()
        color[r] = 2
        return None

    for r in sorted(rules):
        if r not in color:
            found = visit(r)
            if found:
                return found
    return None


def rules_from_dict(doc: Mapping, tools: Sequence[ToolSpec] = (),
                    allow_commands: bool | None = None) -> RuleSet:
    allowed = commands_allowed(allow_commands)
    tool_map: dict = {t.id: t for t in tools}
    for entry in doc.get("tools", []):
        t = _parse_tool(entry, allowed)
        if t.id in tool_map:
            raise RuleError(f"duplicate tool id {t.id}")
        tool_map[t.id] = t

    rules: dict = {}
    for entry in doc.get("rules", []):
        try:
            rid, spec, tool = entry["id"], entry["spec"], entry["tool"]
        except (KeyError, TypeError):
            raise RuleError(f"rule entry {entry!r} needs 'id', 'spec' and 'tool'") from None
        if rid in rules:
            raise RuleError(f"duplicate rule id {rid}")
        if tool not in tool_map:
            raise RuleError(f"rule {rid}: unknown tool {tool!r}")
        args = {str(k): str(v) for k, v in entry.get("args", {}).items()}
        for v in args.values():
            _check_template(rid, v)
        schema = tool_map[tool].args_schema
        if schema:
            names = {n for n, _ in schema}
            extra = set(args) - names
            missing = names - set(args)
            if extra:
                raise RuleError(f"rule {rid}: arguments {sorted(extra)} not in the schema of {tool}")
            if missing:
                raise RuleError(f"rule {rid}: missing arguments {sorted(missing)} for {tool}")
        delay = tuple(entry.get("delay", (0, 0)))
        if (len(delay) != 2 or not all(isinstance(d, int) and not isinstance(d, bool) for d in delay)
                or not 0 <= delay[0] <= delay[1]):
            raise RuleError(f"rule {rid}: delay must be [dmin, dmax] with 0 <= dmin <= dmax")
        try:
            dfa = compile_dfa(parse_formula(spec))
        except TLAgentError as exc:
            raise RuleError(f"rule {rid}: spec error: {exc}") from None
        rules[rid] = TriggerRule(rid, spec, tool, args, delay, tuple(entry.get("after", ())), dfa)

    for r in rules.values():
        for b in r.after:
            if b not in rules:
                raise RuleError(f"rule {r.id}: ordering refers to unknown rule {b!r}")
    cycle = _find_cycle(rules)
    if cycle:
        raise RuleError("ordering cycle " + "→".join(cycle))

    rank: dict = {}

    def depth(rid):
        if rid not in rank:
            rank[rid] = 1 + max((depth(b) for b in rules[rid].after), default=-1)
        return rank[rid]

    for rid in rules:
        depth(rid)
    return RuleSet(tool_map, rules, rank)


def load_rules(path, tools: Sequence[ToolSpec] = (), allow_commands: bool | None = None) -> RuleSet:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise RuleError(f"rule file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise RuleError(f"{path}: invalid JSON ({exc})") from None
    return rules_from_dict(doc, tools, allow_commands)


@dataclass(frozen=True)
class ScheduledInvocation:
    seq: int
    rule: str
    tool: str
    args: Mapping
    span: tuple
    earliest: int
    deadline: int


@dataclass(frozen=True)
class InvocationRecord:
    rule: str
    tool: str
    args: Mapping
    span: tuple
    frame: int
    window: tuple
    status: str
    reason: str = ""
    timestamp: str = ""

    @property
    def executed(self) -> bool:
        return self.status in SUCCESS

    def to_record(self) -> dict:
        rec = {"rule": self.rule, "tool": self.tool, "args": dict(self.args),
               "span": list(self.span), "frame": self.frame, "window": list(self.window),
               "status": self.status}
        if self.reason:
            rec["reason"] = self.reason
        rec["timestamp"] = self.timestamp
        return rec

    @classmethod
    def from_record(cls, rec: Mapping) -> "InvocationRecord":
        window = rec.get("window", (rec["frame"], rec["frame"]))
        return cls(rec["rule"], rec["tool"], {str(k): str(v) for k, v in rec.get("args", {}).items()},
                   tuple(rec.get("span", ())), int(rec["frame"]), tuple(window), rec["status"],
                   rec.get("reason", ""), rec.get("timestamp", ""))


def _resolve(template: str, values: Mapping) -> str:
    return _PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], template)


def _check_arg(typ: str, value: str) -> bool:
    try:
        if typ == "int":
            int(value)
        elif typ == "float":
            float(value)
        elif typ == "frame":
            return int(value) >= 0
        elif typ == "span":
            return re.fullmatch(r"\d+-\d+", value) is not None
    except ValueError:
        return False
    return True


class DryRunExecutor:
    """Records what would run without side effects."""

    dry_run = True

    def run(self, tool: ToolSpec, payload: dict) -> tuple[str, str]:
        return "dry-run", ""


class LiveExecutor:
    """Executes tools: ``log`` writes a log line, ``webhook`` POSTs JSON with
    one retry, ``command`` feeds the JSON payload to the target's stdin."""

    dry_run = False

    def __init__(self, allow_commands: bool | None = None, timeout: float = 10.0, session=None):
        self.allow_commands = commands_allowed(allow_commands)
        self.timeout = timeout
        self.session = session or requests.Session()

    def run(self, tool: ToolSpec, payload: dict) -> tuple[str, str]:
        if tool.kind == "log":
            log.info("tool %s: %s", tool.id, json.dumps(payload, sort_keys=True))
            return "ok", ""
        if tool.kind == "webhook":
            return self._post(tool.target, payload)
        if not self.allow_commands:
            return "failed", "command tools are disabled"
        try:
            proc = subprocess.run([tool.target], input=json.dumps(payload), text=True,
                                  capture_output=True, timeout=self.timeout)
        except (OSError, subprocess.SubprocessError) as exc:
            return "failed", f"spawn failed: {exc}"
        return ("ok", "") if proc.returncode == 0 else ("failed", f"exit {proc.returncode}")

    def _post(self, url: str, payload: dict) -> tuple[str, str]:
        reason = ""
        for _ in range(2):
            try:
                resp = self.session.post(url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                reason = type(exc).__name__
                continue
            if 200 <= resp.status_code < 300:
                return "ok", ""
            reason = str(resp.status_code)
        return "failed", reason


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def execute(inv: ScheduledInvocation, executor, tool: ToolSpec, frame: int | None = None
            ) -> InvocationRecord:
    """Run one scheduled invocation and return its log record."""
    at = inv.earliest if frame is None else frame
    window = (inv.earliest, inv.deadline)
    for name, typ in tool.args_schema:
        if not _check_arg(typ, inv.args.get(name, "")):
            return InvocationRecord(inv.rule, inv.tool, inv.args, inv.span, at, window, "failed",
                                    f"argument {name} is not a valid {typ}", _now())
    payload = {"rule": inv.rule, "tool": inv.tool, "args": dict(inv.args), "span": list(inv.span)}
    status, reason = executor.run(tool, payload)
    return InvocationRecord(inv.rule, inv.tool, inv.args, inv.span, at, window, status, reason,
                            _now())


class AgentEngine:
    """Turns match events into an ordered, append-only invocation log.

    ``advance(frame)`` must be called once per frame after that frame's
    events have been delivered; ``finish()`` drains whatever is still pending
    by advancing a virtual clock past the remaining deadlines.
    """

    def __init__(self, rules: RuleSet, executor=None, video_id: str = "", fps: float = 1):
        self.rules = rules
        self.executor = executor if executor is not None else DryRunExecutor()
        self.video_id = video_id
        self.fps = fps
        self.pending: list = []
        self.log: list = []
        self.frame = -1
        self._seq = 0

    def on_match(self, ev: MatchEvent) -> list[ScheduledInvocation]:
        rule = self.rules.rules.get(ev.spec_id)
        if rule is None:
            raise RuleError(f"match event for unknown rule {ev.spec_id!r}")
        values = {"video_id": self.video_id, "span.start": str(ev.start),
                  "span.end": str(ev.end), "frame": str(ev.end),
                  "time": f"{ev.end / self.fps:g}"}
        args = {k: _resolve(v, values) for k, v in rule.args.items()}
        inv = ScheduledInvocation(self._seq, rule.id, rule.tool, args, (ev.start, ev.end),
                                  ev.end + rule.delay[0], ev.end + rule.delay[1])
        self._seq += 1
        self.pending.append(inv)
        return [inv]

    def _prerequisites(self, rule_id: str) -> str:
        state = "met"
        for b in self.rules.rules[rule_id].after:
            records = [r for r in self.log if r.rule == b]
            if any(r.executed for r in records):
                continue
            if records and not any(p.rule == b for p in self.pending):
                state = "failed"
            else:
                return "waiting"
        return state

    def _key(self, inv):
        return (inv.earliest, self.rules.rank[inv.rule], inv.rule, inv.seq)

    def _record(self, inv, frame, status, reason):
        rec = InvocationRecord(inv.rule, inv.tool, inv.args, inv.span, frame,
                               (inv.earliest, inv.deadline), status, reason, _now())
        self.log.append(rec)
        return rec

    def advance(self, frame: int) -> list[InvocationRecord]:
        self.frame = frame
        start = len(self.log)
        changed = True
        while changed:
            changed = False
            for inv in sorted(self.pending, key=self._key):
                if inv.earliest > frame:
                    break
                if frame > inv.deadline:
                    self.pending.remove(inv)
                    self._record(inv, frame, "expired", "deadline missed")
                    changed = True
                    break
                state = self._prerequisites(inv.rule)
                if state == "waiting":
                    continue
                self.pending.remove(inv)
                if state == "failed":
                    self._record(inv, frame, "skipped", "ordering unmet")
                else:
                    rec = execute(inv, self.executor, self.rules.tools[inv.tool], frame)
                    self.log.append(rec)
                changed = True
                break
        return self.log[start:]

    def finish(self) -> list[InvocationRecord]:
        start = len(self.log)
        frame = self.frame + 1
        while self.pending:
            self.advance(frame)
            if not self.pending:
                break
            frame = max(frame + 1, min(p.earliest if p.earliest > frame else p.deadline + 1
                                       for p in self.pending))
        return self.log[start:]


def replay(rules: RuleSet, trace: FrameTrace, executor=None, tau: float = 0.5,
           max_window: int = 600) -> list[InvocationRecord]:
    """Stream a recorded trace through one monitor per rule and the engine."""
    monitors = [Monitor(r.dfa, tau=tau, max_window=max_window, suppression="span",
                        spec_id=r.id) for r in rules.ordered()]
    engine = AgentEngine(rules, executor, trace.video_id, trace.fps)
    for t in range(len(trace)):
        fc = trace.frame(t)
        for m in monitors:
            for ev in m.step(fc):
                engine.on_match(ev)
        engine.advance(t)
    engine.finish()
    return engine.log


def write_log(records: Iterable[InvocationRecord], fh) -> None:
    for r in records:
        fh.write(json.dumps(r.to_record()) + "\n")


def read_log(path) -> list[InvocationRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(InvocationRecord.from_record(json.loads(line)))
    return out
