"""Query execution: search resolution through the index, then table transforms.

The search stage pulls candidate events from the index store (bloom and term
pruning happen there), extracts fields, and applies field/metadata filters.
Every later stage maps a ResultTable to a ResultTable. Execution is
instrumented: per-component costs land in a SearchProfile.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field

from ..index_store import ScanStats, tokenize
from ..ingest import Event, extract_kv, extract_regex
from .parser import (
    Agg,
    And,
    Arith,
    Cmp,
    FieldRef,
    IfExpr,
    Like,
    Literal,
    Not,
    Or,
    Query,
    SearchStage,
    like_to_regex,
    parse,
)
from .profile import Profiler, SearchProfile

EVENT_COLUMNS = ["_time", "_raw", "host", "source", "sourcetype"]

_TOKEN_RE = re.compile(r"[0-9a-z]+")


class QueryError(Exception):
    pass


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[list]
    provenance: list[int | None] | None = None

    def col(self, name: str) -> int | None:
        try:
            return self.columns.index(name)
        except ValueError:
            return None

    def cell_getter(self, name: str):
        idx = self.col(name)
        if idx is None:
            return lambda row: None
        return lambda row: row[idx]

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": [list(r) for r in self.rows]}


@dataclass
class TransactionGroup:
    key: object
    events: list = field(default_factory=list)
    complete: bool = False
    duration_us: int = 0

    @property
    def first_timestamp(self) -> int:
        return self.events[0].timestamp if self.events else 0


# --- value helpers ----------------------------------------------------------


def to_number(value):
    """Numeric view of a cell, or None when it has none."""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, str):
        text = value.strip()
        try:
            return int(text)
        except ValueError:
            try:
                return float(text)
            except ValueError:
                return None
    return None


def compare(op: str, left, right) -> bool:
    """Comparison used by where/if: numeric when both sides parse, else string."""
    if left is None or right is None:
        return False
    ln, rn = to_number(left), to_number(right)
    if ln is not None and rn is not None:
        a, b = ln, rn
    else:
        a, b = str(left), str(right)
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise QueryError(f"unknown comparison {op}")


def eval_bool(expr, get) -> bool:
    if isinstance(expr, Or):
        return any(eval_bool(e, get) for e in expr.items)
    if isinstance(expr, And):
        return all(eval_bool(e, get) for e in expr.items)
    if isinstance(expr, Not):
        return not eval_bool(expr.item, get)
    if isinstance(expr, Cmp):
        return compare(expr.op, eval_operand(expr.left, get), eval_operand(expr.right, get))
    if isinstance(expr, Like):
        value = eval_operand(expr.operand, get)
        if value is None:
            return False
        return like_to_regex(expr.pattern).fullmatch(str(value)) is not None
    if isinstance(expr, FieldRef):
        value = get(expr.name)
        return value is not None and value != ""
    if isinstance(expr, Literal):
        return bool(expr.value)
    raise QueryError(f"cannot evaluate {expr!r} as a condition")


def eval_operand(expr, get):
    if isinstance(expr, FieldRef):
        return get(expr.name)
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, (Arith, IfExpr)):
        return eval_arith(expr, get)
    raise QueryError(f"cannot evaluate operand {expr!r}")


class EvalSkip(Exception):
    """Type error inside eval: the row is skipped and counted."""


def eval_arith(expr, get):
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, FieldRef):
        return get(expr.name)
    if isinstance(expr, IfExpr):
        if eval_bool(expr.cond, get):
            return eval_arith(expr.then, get)
        return eval_arith(expr.otherwise, get)
    if isinstance(expr, Arith):
        left = eval_arith(expr.left, get)
        right = eval_arith(expr.right, get)
        ln, rn = to_number(left), to_number(right)
        if ln is None or rn is None:
            raise EvalSkip(f"non-numeric operand for {expr.op!r}")
        try:
            if expr.op == "+":
                return ln + rn
            if expr.op == "-":
                return ln - rn
            if expr.op == "*":
                return ln * rn
            if expr.op == "/":
                return ln / rn
        except ZeroDivisionError:
            raise EvalSkip("division by zero") from None
    raise QueryError(f"cannot evaluate expression {expr!r}")


# --- search stage -----------------------------------------------------------


def bare_tokens(value: str) -> list[str]:
    return _TOKEN_RE.findall(value.lower())


def _partition_terms(stage: SearchStage):
    tokens: list[str] = []
    kv: list[tuple[str, str]] = []
    exists: list[str] = []
    selectors: dict[str, str] = {}
    for term in stage.terms:
        if term.kind == "wildcard":
            continue
        if term.kind == "bare":
            tokens.extend(bare_tokens(term.value))
        elif term.kind == "kv":
            kv.append((term.key, term.value))
        elif term.kind == "kv-exists":
            exists.append(term.key)
        elif term.kind == "selector":
            selectors[term.key] = term.value
    return tokens, kv, exists, selectors


def run_search(stage: SearchStage, engine, earliest, latest, prof: Profiler):
    tokens, kv, exists, selectors = _partition_terms(stage)
    index_name = selectors.pop("index", None) or engine.default_index
    handle = engine.resolve_index(index_name)
    if handle is None:
        return [], ScanStats()
    events_iter, stats = handle.candidate_events(
        tokens, earliest, latest, use_bloom=engine.use_bloom, timer=prof
    )
    rules = engine.rules
    regex_by_st: dict[str, list] = {}
    kv_on: dict[str, bool] = {}
    matched: list[Event] = []
    for ev in events_iter:
        ok = True
        for key, value in selectors.items():
            if str(getattr(ev, key, "")).lower() != value.lower():
                ok = False
                break
        if not ok:
            continue
        st = ev.sourcetype
        if st not in regex_by_st:
            regex_by_st[st] = [r for r in rules.rules_for(st) if r.kind == "regex-named-groups"]
            kv_on[st] = rules.kv_mode(st) != "none"
        _extract(ev, regex_by_st[st], kv_on[st], prof)
        for key, value in kv:
            got = ev.fields.get(key)
            if got is None or got.lower() != value.lower():
                ok = False
                break
        if ok:
            for key in exists:
                if not ev.fields.get(key):
                    ok = False
                    break
        if ok:
            matched.append(ev)
    matched.sort(key=lambda e: e.id)
    return matched, stats


def _extract(ev: Event, regex_rules, kv_enabled: bool, prof: Profiler) -> None:
    if regex_rules:
        with prof.time("command.search.rex"):
            extract_regex(ev, regex_rules)
    if kv_enabled:
        with prof.time("command.search.kv"):
            extract_kv(ev)


def events_to_table(events: list[Event]) -> ResultTable:
    columns = list(EVENT_COLUMNS)
    index = {c: i for i, c in enumerate(columns)}
    rows = []
    for ev in events:
        row = [ev.timestamp, ev.raw, ev.host, ev.source, ev.sourcetype]
        row += [None] * (len(columns) - len(EVENT_COLUMNS))
        for name, value in ev.fields.items():
            if name not in index:
                index[name] = len(columns)
                columns.append(name)
                for existing in rows:
                    existing.append(None)
                row.append(value)
            else:
                row[index[name]] = value
        rows.append(row)
    return ResultTable(columns=columns, rows=rows, provenance=[ev.id for ev in events])


# --- standalone query operations ---------------------------------------------


def _pattern_matches(pattern: str | None, raw: str) -> bool:
    if pattern is None:
        return False
    if "*" in pattern or "%" in pattern:
        return like_to_regex(pattern).fullmatch(raw) is not None
    return pattern in raw


def run_transaction(events, key_field: str, startswith: str | None = None,
                    endswith: str | None = None,
                    maxpause_us: int | None = None) -> list[TransactionGroup]:
    """Group time-ordered events by a shared key field value.

    A group closes on an endswith match, when maxpause is exceeded, or at
    stream end; groups missing their start/end pattern are kept but flagged
    incomplete.
    """
    open_groups: dict[object, dict] = {}
    done: list[TransactionGroup] = []

    def close(state: dict):
        evs = state["events"]
        complete = True
        if startswith is not None:
            complete = complete and _pattern_matches(startswith, evs[0].raw)
        if endswith is not None:
            complete = complete and _pattern_matches(endswith, evs[-1].raw)
        done.append(TransactionGroup(
            key=state["key"],
            events=evs,
            complete=complete,
            duration_us=evs[-1].timestamp - evs[0].timestamp,
        ))

    for ev in events:
        key = ev.fields.get(key_field)
        if key_field in ("host", "source", "sourcetype"):
            key = getattr(ev, key_field)
        if key is None or key == "":
            continue
        state = open_groups.get(key)
        if state is not None and maxpause_us is not None and \
                ev.timestamp - state["events"][-1].timestamp > maxpause_us:
            close(state)
            del open_groups[key]
            state = None
        if state is None:
            state = {"key": key, "events": []}
            open_groups[key] = state
        state["events"].append(ev)
        if endswith is not None and _pattern_matches(endswith, ev.raw):
            close(state)
            del open_groups[key]
    for state in open_groups.values():  # insertion order keeps determinism
        close(state)
    done.sort(key=lambda g: (g.first_timestamp, g.events[0].id))
    return done


def _timestamps(events) -> list[int]:
    out = []
    for item in events:
        out.append(item.timestamp if hasattr(item, "timestamp") else int(item))
    return out


def pauses(events, threshold_us: int) -> list[tuple[int, int]]:
    """(gap start time, gap length) for every consecutive gap over the threshold."""
    ts = _timestamps(events)
    out = []
    for prev, nxt in zip(ts, ts[1:]):
        gap = nxt - prev
        if gap > threshold_us:
            out.append((prev, gap))
    return out


def interarrival_histogram(events, bin_us: int) -> list[tuple[int, int]]:
    """Histogram of consecutive timestamp deltas; bins are left-closed."""
    if bin_us <= 0:
        raise QueryError("bin width must be positive")
    ts = _timestamps(events)
    counts: dict[int, int] = {}
    for prev, nxt in zip(ts, ts[1:]):
        bucket = ((nxt - prev) // bin_us) * bin_us
        counts[bucket] = counts.get(bucket, 0) + 1
    return sorted(counts.items())


# --- table stages -------------------------------------------------------------


def _stage_where(stage, table: ResultTable, ctx) -> ResultTable:
    cache: dict[str, object] = {}

    def getter_for(row):
        return lambda name: row[cache[name]] if cache.get(name, -1) >= 0 else None

    for name in _expr_fields(stage.expr):
        idx = table.col(name)
        cache[name] = idx if idx is not None else -1
    rows, prov = [], []
    for i, row in enumerate(table.rows):
        if eval_bool(stage.expr, getter_for(row)):
            rows.append(row)
            prov.append(table.provenance[i] if table.provenance else None)
    return ResultTable(table.columns, rows, prov if table.provenance else None)


def _expr_fields(expr) -> set[str]:
    out = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, FieldRef):
            out.add(node.name)
        elif isinstance(node, (And, Or)):
            stack.extend(node.items)
        elif isinstance(node, Not):
            stack.append(node.item)
        elif isinstance(node, Cmp):
            stack.extend([node.left, node.right])
        elif isinstance(node, Like):
            stack.append(node.operand)
        elif isinstance(node, Arith):
            stack.extend([node.left, node.right])
        elif isinstance(node, IfExpr):
            stack.extend([node.cond, node.then, node.otherwise])
    return out


def _stage_search(stage: SearchStage, table: ResultTable, ctx) -> ResultTable:
    """Mid-pipeline search: re-filter rows by terms, fields and metadata."""
    tokens, kv, exists, selectors = _partition_terms(stage)
    raw_at = table.col("_raw")
    rows, prov = [], []
    for i, row in enumerate(table.rows):
        raw = str(row[raw_at]) if raw_at is not None and row[raw_at] is not None else ""
        terms = tokenize(raw)
        ok = all(t in terms for t in tokens)
        for key, value in kv + list(selectors.items()):
            if not ok:
                break
            got = table.cell_getter(key)(row)
            ok = got is not None and str(got).lower() == value.lower()
        for key in exists:
            if not ok:
                break
            got = table.cell_getter(key)(row)
            ok = got not in (None, "")
        if ok:
            rows.append(row)
            prov.append(table.provenance[i] if table.provenance else None)
    return ResultTable(table.columns, rows, prov if table.provenance else None)


def _agg_value(agg: Agg, rows: list[list], col_idx: int | None) -> object:
    if agg.func == "count":
        if agg.field is None:
            return len(rows)
        if col_idx is None:
            return 0
        return sum(1 for r in rows if r[col_idx] is not None)
    values = [r[col_idx] for r in rows if col_idx is not None and r[col_idx] is not None]
    if agg.func == "dc":
        return len({str(v) for v in values})
    if not values:
        return None
    if agg.func in ("sum", "avg"):
        nums = [n for n in (to_number(v) for v in values) if n is not None]
        if not nums:
            return None
        total = 0
        for n in nums:
            total = total + n
        return total if agg.func == "sum" else total / len(nums)
    # max/min: numeric ordering when every value is numeric, else lexicographic
    nums = [to_number(v) for v in values]
    if all(n is not None for n in nums):
        return max(nums) if agg.func == "max" else min(nums)
    strs = [str(v) for v in values]
    return max(strs) if agg.func == "max" else min(strs)


def _stage_stats(stage, table: ResultTable, ctx) -> ResultTable:
    by_idx = [table.col(name) for name in stage.by]
    agg_idx = [table.col(a.field) if a.field else None for a in stage.aggs]
    columns = list(stage.by) + [a.name for a in stage.aggs]
    if not stage.by:
        row = [_agg_value(a, table.rows, idx) for a, idx in zip(stage.aggs, agg_idx)]
        return ResultTable(columns, [row])
    groups: dict[tuple, list] = {}
    for row in table.rows:
        key = tuple(row[i] if i is not None else None for i in by_idx)
        groups.setdefault(key, []).append(row)
    rows = []
    for key, members in groups.items():  # first-occurrence order
        rows.append(list(key) + [_agg_value(a, members, idx)
                                 for a, idx in zip(stage.aggs, agg_idx)])
    return ResultTable(columns, rows)


def _stage_top(stage, table: ResultTable, ctx) -> ResultTable:
    idx = table.col(stage.field)
    counts: dict[object, int] = {}
    total = 0
    if idx is not None:
        for row in table.rows:
            value = row[idx]
            if value is None:
                continue
            total += 1
            counts[value] = counts.get(value, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: -kv[1])  # stable: first seen wins ties
    rows = [
        [value, count, round(100 * count / total)]
        for value, count in ranked[: stage.limit]
    ]
    return ResultTable([stage.field, "count", "percent"], rows)


def _stage_timechart(stage, table: ResultTable, ctx) -> ResultTable:
    ts_idx = table.col("_time")
    agg_idx = table.col(stage.agg.field) if stage.agg.field else None
    bins: dict[int, list] = {}
    if ts_idx is not None:
        for row in table.rows:
            ts = to_number(row[ts_idx])
            if ts is None:
                continue
            bucket = int(ts) - int(ts) % stage.span_us
            bins.setdefault(bucket, []).append(row)
    rows = [
        [bucket, _agg_value(stage.agg, members, agg_idx)]
        for bucket, members in sorted(bins.items())
    ]
    return ResultTable(["_time", stage.agg.name], rows)


def _rows_to_shim_events(table: ResultTable, key_field: str) -> list[Event]:
    ts_idx, raw_idx, key_idx = table.col("_time"), table.col("_raw"), table.col(key_field)
    prov = table.provenance or [None] * len(table.rows)
    shims = []
    for i, row in enumerate(table.rows):
        ts = to_number(row[ts_idx]) if ts_idx is not None else None
        shim = Event(
            raw=str(row[raw_idx]) if raw_idx is not None and row[raw_idx] is not None else "",
            timestamp=int(ts) if ts is not None else 0,
            fields={key_field: row[key_idx]} if key_idx is not None and row[key_idx] is not None else {},
        )
        shim.id = prov[i] if prov[i] is not None else i + 1
        shims.append(shim)
    shims.sort(key=lambda e: (e.timestamp, e.id))
    return shims


def _stage_transaction(stage, table: ResultTable, ctx) -> ResultTable:
    shims = _rows_to_shim_events(table, stage.key)
    groups = run_transaction(shims, stage.key, stage.startswith, stage.endswith,
                             stage.maxpause_us)
    columns = [stage.key, "duration_us", "event_count", "complete", "_time"]
    rows = [
        [g.key, g.duration_us, len(g.events), 1 if g.complete else 0, g.first_timestamp]
        for g in groups
    ]
    prov = [g.events[0].id for g in groups]
    return ResultTable(columns, rows, prov)


def _stage_eval(stage, table: ResultTable, ctx) -> ResultTable:
    columns = list(table.columns)
    if stage.name in columns:
        target = columns.index(stage.name)
        new_col = False
    else:
        target = len(columns)
        columns.append(stage.name)
        new_col = True
    rows, prov = [], []
    getters = {name: table.cell_getter(name) for name in _expr_fields(stage.expr)}
    for i, row in enumerate(table.rows):
        get = lambda name, _row=row: getters[name](_row) if name in getters else None
        try:
            value = eval_arith(stage.expr, get)
        except EvalSkip:
            ctx.eval_skipped += 1
            continue
        new_row = list(row) + ([None] if new_col else [])
        new_row[target] = value
        rows.append(new_row)
        prov.append(table.provenance[i] if table.provenance else None)
    return ResultTable(columns, rows, prov if table.provenance else None)


def _stage_table(stage, table: ResultTable, ctx) -> ResultTable:
    idxs = [table.col(name) for name in stage.columns]
    rows = [[row[i] if i is not None else None for i in idxs] for row in table.rows]
    return ResultTable(list(stage.columns), rows, table.provenance)


def _stage_sort(stage, table: ResultTable, ctx) -> ResultTable:
    order = list(range(len(table.rows)))
    for name, desc in reversed(stage.keys):
        idx = table.col(name)
        if idx is None:
            continue
        nonnull = [i for i in order if table.rows[i][idx] is not None]
        nulls = [i for i in order if table.rows[i][idx] is None]

        def sort_key(i, _idx=idx):
            value = table.rows[i][_idx]
            num = to_number(value)
            if num is not None:
                return (0, num, "")
            return (1, 0, str(value))

        nonnull.sort(key=sort_key, reverse=desc)
        order = nonnull + nulls  # nulls sort last either way
    if stage.limit is not None:
        order = order[: stage.limit]
    rows = [table.rows[i] for i in order]
    prov = [table.provenance[i] for i in order] if table.provenance else None
    return ResultTable(table.columns, rows, prov)


def _stage_head(stage, table: ResultTable, ctx) -> ResultTable:
    prov = table.provenance[: stage.count] if table.provenance else None
    return ResultTable(table.columns, table.rows[: stage.count], prov)


def _stage_fields(stage, table: ResultTable, ctx) -> ResultTable:
    if stage.remove:
        keep = [c for c in table.columns if c not in stage.names]
    else:
        keep = [c for c in stage.names if c in table.columns]
    idxs = [table.columns.index(c) for c in keep]
    rows = [[row[i] for i in idxs] for row in table.rows]
    return ResultTable(keep, rows, table.provenance)


def _stage_pauses(stage, table: ResultTable, ctx) -> ResultTable:
    ts_idx = table.col("_time")
    ts = sorted(
        int(to_number(row[ts_idx]))
        for row in table.rows
        if ts_idx is not None and to_number(row[ts_idx]) is not None
    )
    rows = [[start, gap] for start, gap in pauses(ts, stage.threshold_us)]
    return ResultTable(["_time", "gap_us"], rows)


def _stage_interarrival(stage, table: ResultTable, ctx) -> ResultTable:
    ts_idx = table.col("_time")
    ts = sorted(
        int(to_number(row[ts_idx]))
        for row in table.rows
        if ts_idx is not None and to_number(row[ts_idx]) is not None
    )
    rows = [[bucket, count] for bucket, count in interarrival_histogram(ts, stage.bin_us)]
    return ResultTable(["delta_us", "count"], rows)


def _stage_anomalydetection(stage, table: ResultTable, ctx) -> ResultTable:
    from ..ml import anomaly_from_result_table

    return anomaly_from_result_table(table, stage.fields, stage.threshold)


def _stage_fit(stage, table: ResultTable, ctx) -> ResultTable:
    from ..ml import fit_from_result_table

    return fit_from_result_table(stage, table, ctx.engine.model_dir)


def _stage_apply(stage, table: ResultTable, ctx) -> ResultTable:
    from ..ml import apply_from_result_table

    return apply_from_result_table(stage.model_name, table, ctx.engine.model_dir)


def _stage_classificationstatistics(stage, table: ResultTable, ctx) -> ResultTable:
    from ..ml import class_stats_from_result_table

    return class_stats_from_result_table(table, stage.actual, stage.predicted)


def _stage_confusionmatrix(stage, table: ResultTable, ctx) -> ResultTable:
    from ..ml import confusion_from_result_table

    return confusion_from_result_table(table, stage.actual, stage.predicted)


_STAGE_IMPLS = {
    "search": _stage_search,
    "where": _stage_where,
    "stats": _stage_stats,
    "top": _stage_top,
    "timechart": _stage_timechart,
    "transaction": _stage_transaction,
    "eval": _stage_eval,
    "table": _stage_table,
    "sort": _stage_sort,
    "head": _stage_head,
    "fields": _stage_fields,
    "pauses": _stage_pauses,
    "interarrival": _stage_interarrival,
    "anomalydetection": _stage_anomalydetection,
    "fit": _stage_fit,
    "apply": _stage_apply,
    "classificationstatistics": _stage_classificationstatistics,
    "confusionmatrix": _stage_confusionmatrix,
}

_COMPONENT_NAMES = {"transaction": "command.pretransaction"}


@dataclass
class _Ctx:
    engine: object
    prof: Profiler
    eval_skipped: int = 0


def execute(query: Query | str, engine, earliest: int | None = None,
            latest: int | None = None) -> tuple[ResultTable, SearchProfile]:
    """Run a parsed (or textual) query against an engine's indexes."""
    if isinstance(query, str):
        query = parse(query)
    prof = Profiler()
    started = time.perf_counter()
    ctx = _Ctx(engine=engine, prof=prof)
    with prof.time("command.search"):
        events, scan = run_search(query.stages[0], engine, earliest, latest, prof)
        table = events_to_table(events)
    hits = len(events)
    prof.counts("command.search", output_count=hits)
    for stage in query.stages[1:]:
        name = _COMPONENT_NAMES.get(stage.kind, f"command.{stage.kind}")
        rows_in = len(table.rows)
        with prof.time(name):
            table = _STAGE_IMPLS[stage.kind](stage, table, ctx)
        prof.counts(name, input_count=rows_in, output_count=len(table.rows))
    with prof.time("command.fields"):
        width = len(table.columns)
        for row in table.rows:
            if len(row) != width:
                del row[width:]
                row.extend([None] * (width - len(row)))
    prof.counts("command.fields", input_count=len(table.rows), output_count=len(table.rows))
    total = time.perf_counter() - started
    return table, prof.build(total, hits=hits, scanned=scan.scanned)
