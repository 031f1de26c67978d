"""Control rules for OWASP-class web attacks over access-log events.

Five built-in rules (XSS, session handling, CSRF, SQL injection, malicious
file execution) plus a small DSL: a pack entry's predicate is either
``native:<rule>`` or a boolean expression in the query language's where
syntax, evaluated over the access-event fields. URIs are URL-decoded once
before native pattern matching, since attack vectors arrive encoded in real
traffic.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import unquote

from .ingest import Event

SEVERITIES = ("low", "medium", "high")

DEFAULT_SEVERITY = {
    "xss": "high",
    "sqli": "high",
    "session_fixation": "medium",
    "csrf": "medium",
    "file_exec": "high",
}


class RulePackError(Exception):
    pass


@dataclass
class AccessEvent:
    """View over an Event that exposes the fields the rules need."""

    uri: str
    method: str
    client_ip: str
    referer: str
    status: int
    target_host: str
    event_id: int = 0
    timestamp: int = 0

    @classmethod
    def from_event(cls, ev: Event) -> "AccessEvent | None":
        uri = ev.fields.get("uri")
        status_text = ev.fields.get("status", "")
        if not uri:
            return None
        try:
            status = int(status_text)
        except ValueError:
            return None
        if not 100 <= status <= 599:
            return None
        return cls(
            uri=uri,
            method=ev.fields.get("method", "GET"),
            client_ip=ev.fields.get("client_ip", ""),
            referer=ev.fields.get("referer", "-"),
            status=status,
            target_host=ev.fields.get("target_host") or ev.host,
            event_id=ev.id,
            timestamp=ev.timestamp,
        )

    def get(self, name: str):
        return getattr(self, name, None)


@dataclass
class Finding:
    rule_id: str
    owasp: str
    severity: str
    event_id: int
    excerpt: str
    detected_at: int  # event timestamp, microseconds
    uri: str = ""

    def to_dict(self) -> dict:
        return {
            "rule": self.rule_id,
            "owasp": self.owasp,
            "severity": self.severity,
            "event_id": self.event_id,
            "excerpt": self.excerpt,
            "detected_at": self.detected_at,
            "uri": self.uri,
        }


@dataclass
class DetectionRule:
    id: str
    owasp: str
    predicate: str  # "native:<name>" or a where-language expression
    severity: str = "medium"
    description: str = ""

    _condition: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.severity not in SEVERITIES:
            raise RulePackError(f"rule {self.id}: bad severity {self.severity!r}")
        if self.predicate.startswith("native:"):
            name = self.predicate.split(":", 1)[1]
            if name not in NATIVE_RULES:
                raise RulePackError(f"rule {self.id}: unknown native rule {name!r}")
        else:
            from .query.parser import ParseError, parse_condition

            try:
                self._condition = parse_condition(self.predicate)
            except ParseError as exc:
                raise RulePackError(f"rule {self.id}: bad predicate: {exc}") from exc


class RefererLookup:
    """Static domain -> IP table standing in for DNS."""

    def __init__(self, entries: dict[str, str] | None = None):
        self.entries = {k.lower(): v for k, v in (entries or {}).items()}
        self.unresolved = 0

    @classmethod
    def from_csv(cls, path: str | Path) -> "RefererLookup":
        entries = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#") or line.lower().startswith("domain,"):
                continue
            domain, _, ip = line.partition(",")
            if domain and ip:
                entries[domain.strip().lower()] = ip.strip()
        return cls(entries)

    @staticmethod
    def domain_of(text: str) -> str:
        """Domain part of a URL or host string: lowercase, no scheme/port/path."""
        text = text.strip().lower()
        text = re.sub(r"^[a-z][a-z0-9+.-]*://", "", text)
        text = text.split("/", 1)[0].split("?", 1)[0]
        return text.split(":", 1)[0]

    def resolve(self, domain_or_url: str) -> str | None:
        domain = self.domain_of(domain_or_url)
        ip = self.entries.get(domain)
        if ip is None:
            self.unresolved += 1
        return ip


def _decoded(uri: str) -> str:
    return unquote(uri)


def _excerpt(matched: str, e: AccessEvent) -> str:
    # Findings carry a substring of the stored uri/referer; when the match was
    # made on decoded text, fall back to the full uri.
    if matched and matched in e.uri:
        return matched
    if matched and matched in e.referer:
        return matched
    return e.uri


_XSS_TAGPAIR = re.compile(r".*<.*>.*</.*>.*", re.DOTALL)
_XSS_KEYWORDS = ("javascript", "vbscript", "applet", "script", "frame")


def rule_xss(e: AccessEvent) -> Finding | None:
    decoded = _decoded(e.uri)
    if _XSS_TAGPAIR.fullmatch(decoded):
        m = re.search(r"<.*?>.*?</.*?>", decoded, re.DOTALL)
        return _finding("xss", e, m.group(0) if m else decoded)
    low = decoded.lower()
    for word in _XSS_KEYWORDS:
        if word in low:
            at = low.index(word)
            return _finding("xss", e, decoded[at:at + len(word)])
    return None


_SESSION_LOGIN = re.compile(r"login\.jsp.*\?.*(userId|password)=", re.IGNORECASE)


def rule_session(e: AccessEvent) -> Finding | None:
    low = e.uri.lower()
    if ";jsessionid=" in low:
        at = low.index(";jsessionid=")
        return _finding("session_fixation", e, e.uri[at:at + len(";jsessionid=")])
    m = _SESSION_LOGIN.search(e.uri)
    if m:
        return _finding("session_fixation", e, m.group(0))
    return None


def _state_changing(e: AccessEvent) -> bool:
    if e.method.upper() != "GET":
        return True
    query = e.uri.partition("?")[2]
    return "=" in query


def rule_csrf(e: AccessEvent, lookup: RefererLookup) -> Finding | None:
    if not e.referer or e.referer == "-":
        return None
    referer_domain = lookup.domain_of(e.referer)
    target_domain = lookup.domain_of(e.target_host)
    if referer_domain == target_domain:
        return None
    referer_ip = lookup.resolve(referer_domain)
    target_ip = lookup.resolve(target_domain)
    if referer_ip is None or target_ip is None:
        return None
    if referer_ip != target_ip and _state_changing(e):
        return _finding("csrf", e, e.referer)
    return None


_SQLI_APEX_OR = re.compile(r"'\s*or\b", re.IGNORECASE)


def rule_sqli(e: AccessEvent) -> Finding | None:
    decoded = _decoded(e.uri)
    low = decoded.lower()
    m = _SQLI_APEX_OR.search(decoded)
    if m:
        return _finding("sqli", e, m.group(0))
    if "'1'='1" in low:
        at = low.index("'1'='1")
        return _finding("sqli", e, decoded[at:at + len("'1'='1")])
    query = decoded.partition("?")[2]
    for marker in ("--", "#"):
        if marker in query:
            return _finding("sqli", e, marker)
    return None


_ABS_URL = re.compile(r"^https?://", re.IGNORECASE)


def rule_file_exec(e: AccessEvent) -> Finding | None:
    query = e.uri.partition("?")[2]
    if not query:
        return None
    for pair in query.split("&"):
        _, _, value = pair.partition("=")
        decoded = _decoded(value)
        low = decoded.lower()
        if ".jsp" in low or ".xml" in low or "../" in decoded or _ABS_URL.match(decoded):
            return _finding("file_exec", e, decoded)
    return None


def _finding(rule_id: str, e: AccessEvent, matched: str) -> Finding:
    return Finding(
        rule_id=rule_id,
        owasp=OWASP_CATEGORIES[rule_id],
        severity=DEFAULT_SEVERITY[rule_id],
        event_id=e.event_id,
        excerpt=_excerpt(matched, e),
        detected_at=e.timestamp,
        uri=e.uri,
    )


OWASP_CATEGORIES = {
    "xss": "Cross-Site Scripting (XSS)",
    "session_fixation": "Broken Authentication and Session Management",
    "csrf": "Cross-Site Request Forgery (CSRF)",
    "sqli": "SQL Injection",
    "file_exec": "Malicious File Execution",
}

NATIVE_RULES = {
    "xss": rule_xss,
    "session_fixation": rule_session,
    "csrf": rule_csrf,
    "sqli": rule_sqli,
    "file_exec": rule_file_exec,
}


def builtin_pack() -> list[DetectionRule]:
    return [
        DetectionRule(rule_id, OWASP_CATEGORIES[rule_id], f"native:{rule_id}",
                      DEFAULT_SEVERITY[rule_id], NATIVE_RULES[rule_id].__doc__ or "")
        for rule_id in ("xss", "session_fixation", "csrf", "sqli", "file_exec")
    ]


def load_pack(path: str | Path) -> list[DetectionRule]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RulePackError(f"cannot load rule pack {path}: {exc}") from exc
    entries = data["rules"] if isinstance(data, dict) else data
    rules = []
    seen = set()
    for entry in entries:
        rule = DetectionRule(
            id=entry["id"],
            owasp=entry.get("owasp", ""),
            predicate=entry["predicate"],
            severity=entry.get("severity", "medium"),
            description=entry.get("description", ""),
        )
        if rule.id in seen:
            raise RulePackError(f"duplicate rule id {rule.id!r}")
        seen.add(rule.id)
        rules.append(rule)
    return rules


def apply_rule(rule: DetectionRule, e: AccessEvent,
               lookup: RefererLookup) -> Finding | None:
    if rule.predicate.startswith("native:"):
        native = NATIVE_RULES[rule.predicate.split(":", 1)[1]]
        return native(e, lookup) if native is rule_csrf else native(e)
    from .query.executor import eval_bool

    if eval_bool(rule._condition, e.get):
        finding = Finding(
            rule_id=rule.id,
            owasp=rule.owasp,
            severity=rule.severity,
            event_id=e.event_id,
            excerpt=e.uri,
            detected_at=e.timestamp,
            uri=e.uri,
        )
        return finding
    return None


def run_pack(events, pack: list[DetectionRule],
             lookup: RefererLookup | None = None) -> tuple[list[Finding], dict]:
    """Apply every rule to every access event; deterministic output order."""
    lookup = lookup or RefererLookup()
    findings: list[Finding] = []
    skipped = 0
    for ev in events:
        access = AccessEvent.from_event(ev)
        if access is None:
            skipped += 1
            continue
        for rule in pack:
            hit = apply_rule(rule, access, lookup)
            if hit is not None:
                if rule.predicate.startswith("native:"):
                    hit.severity = rule.severity  # pack overrides the default
                    hit.rule_id = rule.id
                    if rule.owasp:
                        hit.owasp = rule.owasp
                findings.append(hit)
    findings.sort(key=lambda f: (f.event_id, f.rule_id))
    by_rule: dict[str, int] = {}
    by_hour: dict[int, int] = {}
    for f in findings:
        by_rule[f.rule_id] = by_rule.get(f.rule_id, 0) + 1
        hour = f.detected_at - f.detected_at % 3_600_000_000
        by_hour[hour] = by_hour.get(hour, 0) + 1
    summary = {
        "total": len(findings),
        "by_rule": by_rule,
        "by_hour": {str(k): v for k, v in sorted(by_hour.items())},
        "skipped_events": skipped,
        "unresolved_referers": lookup.unresolved,
    }
    return findings, summary


def write_findings_jsonl(findings, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in findings:
            fh.write(json.dumps(f.to_dict(), ensure_ascii=False) + "\n")


def findings_to_events(findings) -> list[Event]:
    """Findings as indexable events (sourcetype "findings", kv-shaped raw)."""
    events = []
    for f in findings:
        excerpt = f.excerpt.replace('"', "'")
        raw = (f'finding rule={f.rule_id} severity={f.severity} '
               f'event_id={f.event_id} excerpt="{excerpt}"')
        events.append(Event(raw=raw, timestamp=f.detected_at, host="detector",
                            source="security-rules", sourcetype="findings"))
    return events
