"""Grammar-driven random query generation for the oracle equivalence check.

Generated pipelines stay inside the stage set the equivalence property
quantifies over: search, where, stats, top, head, sort. Stage composition is
phased (row filters, then at most one aggregation, then row slicing) so every
generated query is semantically valid.
"""

import random

BARE_TOKENS = ["error", "info", "director", "build", "login", "logout",
               "procedure", "query", "cube", "finished", "sessionmanager"]
KV_TERMS = [("level", "INFO"), ("level", "ERROR"), ("method", "GET"),
            ("status", "404"), ("status", "200"),
            ("service", "CubeService.buildCube"),
            ("component", "Director"), ("username", "rossi")]
EXISTS_FIELDS = ["ms", "session", "uri", "protocol", "service"]
SOURCETYPES = ["applog", "accesslog"]

EVENT_FIELDS = ["level", "component", "service", "username", "ms", "status",
                "method", "uri", "client_ip", "session", "protocol"]
NUMERIC_FIELDS = ["ms", "status", "bytes"]
AGG_FUNCS = ["count", "sum", "avg", "max", "min", "dc"]
LIKE_PATTERNS = [("uri", "%login%"), ("uri", "/item%"), ("component", "Dir%"),
                 ("service", "%Service%"), ("level", "INF%"),
                 ("username", "%oss%"), ("uri", "*jsp*")]


def _search_part(rng: random.Random) -> str:
    terms = []
    if rng.random() < 0.75:
        terms.append(f"sourcetype={rng.choice(SOURCETYPES)}")
    n_extra = rng.randint(0, 2)
    for _ in range(n_extra):
        kind = rng.random()
        if kind < 0.45:
            terms.append(rng.choice(BARE_TOKENS))
        elif kind < 0.8:
            key, value = rng.choice(KV_TERMS)
            terms.append(f"{key}={value}")
        else:
            terms.append(f"{rng.choice(EXISTS_FIELDS)}=*")
    if not terms:
        terms.append("*")
    return " ".join(terms)


def _where_part(rng: random.Random) -> str:
    clauses = []
    for _ in range(rng.randint(1, 2)):
        kind = rng.random()
        if kind < 0.4:
            field, pattern = rng.choice(LIKE_PATTERNS)
            clauses.append(f'like({field},"{pattern}")')
        elif kind < 0.75:
            field = rng.choice(NUMERIC_FIELDS)
            op = rng.choice([">", ">=", "<", "<=", "!="])
            clauses.append(f"{field} {op} {rng.choice([10, 100, 200, 400, 404])}")
        else:
            field = rng.choice(["level", "method", "username"])
            value = {"level": "INFO", "method": "GET", "username": "rossi"}[field]
            clauses.append(f"{field}={value}")
    joiner = rng.choice([" AND ", " OR ", " "])
    return "where " + joiner.join(clauses)


def _stats_part(rng: random.Random) -> str:
    aggs = []
    for _ in range(rng.randint(1, 2)):
        func = rng.choice(AGG_FUNCS)
        if func == "count" and rng.random() < 0.5:
            aggs.append("count")
        else:
            field = rng.choice(EVENT_FIELDS)
            aggs.append(f"{func}({field})")
    by = ""
    if rng.random() < 0.6:
        by_fields = rng.sample(["level", "component", "service", "method", "status"],
                               k=rng.randint(1, 2))
        by = " by " + ", ".join(by_fields)
    return "stats " + ", ".join(dict.fromkeys(aggs)) + by


def random_query(rng: random.Random) -> str:
    parts = [_search_part(rng)]
    if rng.random() < 0.5:
        parts.append(_where_part(rng))
    if rng.random() < 0.35:
        field = rng.choice(EVENT_FIELDS)
        desc = "-" if rng.random() < 0.5 else ""
        parts.append(f"sort {desc}{field}")
    aggregated = rng.random()
    if aggregated < 0.45:
        parts.append(_stats_part(rng))
    elif aggregated < 0.7:
        parts.append(f"top {rng.choice([1, 3, 5, 10])} "
                     f"{rng.choice(['level', 'service', 'method', 'status', 'ms'])}")
    if rng.random() < 0.4:
        parts.append(f"head {rng.choice([1, 5, 20, 100])}")
    return " | ".join(parts)


def generate_queries(seed: int, count: int) -> list[str]:
    rng = random.Random(seed)
    return [random_query(rng) for _ in range(count)]
