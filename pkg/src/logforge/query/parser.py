"""Parser for the pipeline query language.

Grammar: `pipeline := search-terms ('|' stage)*`. The first stage selects
events (bare terms, key=value filters and index/host/source/sourcetype
selectors); every later stage is a table-to-table transform. Syntax errors
carry a 1-based character offset plus the token set that would have been
accepted there.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

STAGE_KINDS = (
    "search", "where", "stats", "top", "timechart", "transaction", "eval",
    "table", "sort", "head", "fields", "pauses", "interarrival",
    "anomalydetection", "fit", "apply", "classificationstatistics",
    "confusionmatrix",
)

AGG_FUNCS = ("count", "sum", "avg", "max", "min", "dc")

METADATA_SELECTORS = ("host", "source", "sourcetype", "index")


class ParseError(Exception):
    def __init__(self, message: str, offset: int, expected: list[str] | None = None):
        super().__init__(message)
        self.offset = offset  # 1-based character position in the query text
        self.expected = expected or []

    def __str__(self):
        base = f"{self.args[0]} (at offset {self.offset})"
        if self.expected:
            base += "; expected one of: " + ", ".join(self.expected)
        return base


# --- AST ------------------------------------------------------------------


@dataclass
class Term:
    kind: str  # bare | kv | kv-exists | selector | wildcard
    key: str = ""
    value: str = ""


@dataclass
class FieldRef:
    name: str


@dataclass
class Literal:
    value: object


@dataclass
class Cmp:
    op: str
    left: object
    right: object


@dataclass
class Like:
    operand: object
    pattern: str


@dataclass
class And:
    items: list


@dataclass
class Or:
    items: list


@dataclass
class Not:
    item: object


@dataclass
class Arith:
    op: str
    left: object
    right: object


@dataclass
class IfExpr:
    cond: object
    then: object
    otherwise: object


@dataclass
class SearchStage:
    kind: str = "search"
    terms: list[Term] = field(default_factory=list)


@dataclass
class WhereStage:
    kind: str = "where"
    expr: object = None


@dataclass
class Agg:
    func: str
    field: str | None = None
    alias: str | None = None

    @property
    def name(self) -> str:
        if self.alias:
            return self.alias
        return self.func if self.field is None else f"{self.func}({self.field})"


@dataclass
class StatsStage:
    kind: str = "stats"
    aggs: list[Agg] = field(default_factory=list)
    by: list[str] = field(default_factory=list)


@dataclass
class TopStage:
    kind: str = "top"
    limit: int = 10
    field: str = ""


@dataclass
class TimechartStage:
    kind: str = "timechart"
    span_us: int = 60_000_000
    agg: Agg = None


@dataclass
class TransactionStage:
    kind: str = "transaction"
    key: str = ""
    startswith: str | None = None
    endswith: str | None = None
    maxpause_us: int | None = None


@dataclass
class EvalStage:
    kind: str = "eval"
    name: str = ""
    expr: object = None


@dataclass
class TableStage:
    kind: str = "table"
    columns: list[str] = field(default_factory=list)


@dataclass
class SortStage:
    kind: str = "sort"
    limit: int | None = None
    keys: list[tuple[str, bool]] = field(default_factory=list)  # (field, descending)


@dataclass
class HeadStage:
    kind: str = "head"
    count: int = 10


@dataclass
class FieldsStage:
    kind: str = "fields"
    remove: bool = False
    names: list[str] = field(default_factory=list)


@dataclass
class PausesStage:
    kind: str = "pauses"
    threshold_us: int = 2_000_000


@dataclass
class InterarrivalStage:
    kind: str = "interarrival"
    bin_us: int = 1_000_000


@dataclass
class AnomalyStage:
    kind: str = "anomalydetection"
    fields: list[str] = field(default_factory=list)
    threshold: float = 0.01


@dataclass
class FitStage:
    kind: str = "fit"
    algo: str = ""  # pca | logreg
    response: str | None = None
    predictors: list[str] = field(default_factory=list)
    fields: list[str] = field(default_factory=list)
    k: int = 2
    fit_intercept: bool = True
    train_fraction: float = 0.5
    seed: int = 0
    model_name: str = ""


@dataclass
class ApplyStage:
    kind: str = "apply"
    model_name: str = ""


@dataclass
class ClassStatsStage:
    kind: str = "classificationstatistics"
    actual: str = ""
    predicted: str = ""


@dataclass
class ConfusionStage:
    kind: str = "confusionmatrix"
    actual: str = ""
    predicted: str = ""


@dataclass
class Query:
    stages: list
    source_text: str


# --- lexer ------------------------------------------------------------------

_WORD = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.]*")
_NUMBER = re.compile(r"^\d+(\.\d+)?$")
_DURATION = re.compile(r"^(\d+(?:\.\d+)?)(us|ms|s|m|h)$")

_TWO_CHAR = {"!=": "NE", "<=": "LE", ">=": "GE", "==": "DEQ"}
_ONE_CHAR = {
    "|": "PIPE", "(": "LP", ")": "RP", ",": "COMMA", "=": "EQ", "<": "LT",
    ">": "GT", "+": "PLUS", "-": "MINUS", "*": "STAR", "/": "SLASH",
}

_UNIT_US = {"us": 1, "ms": 1_000, "s": 1_000_000, "m": 60_000_000, "h": 3_600_000_000}


@dataclass
class Token:
    kind: str  # WORD STRING PIPE LP RP COMMA EQ NE LT LE GT GE DEQ PLUS MINUS STAR SLASH EOF
    text: str
    pos: int  # 1-based offset of the first character


def lex(text: str) -> list[Token]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "\"'":
            j = i + 1
            while j < n and text[j] != ch:
                j += 1
            if j >= n:
                raise ParseError("unterminated string", i + 1, ["closing quote"])
            tokens.append(Token("STRING", text[i + 1:j], i + 1))
            i = j + 1
            continue
        if text[i:i + 2] in _TWO_CHAR:
            tokens.append(Token(_TWO_CHAR[text[i:i + 2]], text[i:i + 2], i + 1))
            i += 2
            continue
        if ch in _ONE_CHAR:
            tokens.append(Token(_ONE_CHAR[ch], ch, i + 1))
            i += 1
            continue
        m = _WORD.match(text, i)
        if m:
            tokens.append(Token("WORD", m.group(0), i + 1))
            i = m.end()
            continue
        raise ParseError(f"unexpected character {ch!r}", i + 1)
    tokens.append(Token("EOF", "", n + 1))
    return tokens


def parse_duration(text: str, pos: int = 1) -> int:
    """A duration literal like 2s / 500ms / 1m, or bare seconds, in microseconds."""
    m = _DURATION.match(text)
    if m:
        return int(float(m.group(1)) * _UNIT_US[m.group(2)])
    if _NUMBER.match(text):
        return int(float(text) * 1_000_000)
    raise ParseError(f"bad duration {text!r}", pos, ["<n>us|ms|s|m|h"])


def like_to_regex(pattern: str) -> re.Pattern:
    """Glob-ish like() pattern: % and * match any run, _ matches one char."""
    out = []
    for ch in pattern:
        if ch in "%*":
            out.append(".*")
        elif ch == "_":
            out.append(".")
        else:
            out.append(re.escape(ch))
    return re.compile("".join(out), re.DOTALL)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = lex(text)
        self.pos = 0

    # -- helpers --

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at_word(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "WORD" and tok.text.lower() in words

    def fail(self, expected: list[str]):
        tok = self.peek()
        what = repr(tok.text) if tok.text else "end of query"
        raise ParseError(f"unexpected {what}", tok.pos, expected)

    def expect(self, kind: str, what: str) -> Token:
        if self.peek().kind != kind:
            self.fail([what])
        return self.next()

    def field_name(self) -> str:
        tok = self.peek()
        if tok.kind in ("WORD", "STRING"):
            return self.next().text
        self.fail(["field name"])

    def int_literal(self, what: str) -> int:
        tok = self.peek()
        if tok.kind == "WORD" and tok.text.isdigit():
            return int(self.next().text)
        self.fail([what])

    # -- pipeline --

    def parse(self) -> Query:
        stages = [self.search_stage()]
        while self.peek().kind == "PIPE":
            self.next()
            stages.append(self.stage())
        if self.peek().kind != "EOF":
            self.fail(["'|'"])
        return Query(stages, self.text)

    def search_stage(self) -> SearchStage:
        if self.at_word("search"):
            self.next()
        terms = []
        while self.peek().kind in ("WORD", "STAR", "STRING"):
            terms.append(self.search_term())
        if not terms:
            self.fail(["search term", "'*'"])
        return SearchStage(terms=terms)

    def search_term(self) -> Term:
        tok = self.next()
        if tok.kind == "STAR":
            return Term("wildcard")
        if tok.kind == "STRING":
            return Term("bare", value=tok.text)
        if self.peek().kind == "EQ":
            self.next()
            val = self.peek()
            if val.kind in ("WORD", "STRING"):
                self.next()
                if tok.text.lower() in METADATA_SELECTORS:
                    return Term("selector", key=tok.text.lower(), value=val.text)
                return Term("kv", key=tok.text, value=val.text)
            if val.kind == "STAR":
                self.next()
                return Term("kv-exists", key=tok.text)
            self.fail(["value", "'*'"])
        return Term("bare", value=tok.text)

    def stage(self):
        tok = self.peek()
        if tok.kind != "WORD":
            self.fail(list(STAGE_KINDS))
        kind = tok.text.lower()
        if kind == "search":
            return self.search_stage()
        handler = getattr(self, f"stage_{kind}", None)
        if handler is None:
            self.fail(list(STAGE_KINDS))
        self.next()
        return handler()

    # -- stages --

    def stage_where(self) -> WhereStage:
        return WhereStage(expr=self.bool_or())

    def stage_stats(self) -> StatsStage:
        aggs = [self.agg()]
        while self.peek().kind == "COMMA":
            self.next()
            aggs.append(self.agg())
        by = []
        if self.at_word("by"):
            self.next()
            by.append(self.field_name())
            while self.peek().kind == "COMMA":
                self.next()
                by.append(self.field_name())
        return StatsStage(aggs=aggs, by=by)

    def agg(self) -> Agg:
        tok = self.peek()
        if tok.kind != "WORD" or tok.text.lower() not in AGG_FUNCS:
            self.fail(list(AGG_FUNCS))
        func = self.next().text.lower()
        fieldname = None
        if self.peek().kind == "LP":
            self.next()
            if self.peek().kind != "RP":
                fieldname = self.field_name()
            self.expect("RP", "')'")
        if func != "count" and fieldname is None:
            self.fail([f"({func} needs a field)"])
        alias = None
        if self.at_word("as"):
            self.next()
            alias = self.field_name()
        return Agg(func, fieldname, alias)

    def stage_top(self) -> TopStage:
        limit = 10
        tok = self.peek()
        if tok.kind == "WORD" and tok.text.isdigit():
            limit = int(self.next().text)
        return TopStage(limit=limit, field=self.field_name())

    def stage_timechart(self) -> TimechartStage:
        span = 60_000_000
        if self.at_word("span"):
            self.next()
            self.expect("EQ", "'='")
            tok = self.expect("WORD", "duration")
            span = parse_duration(tok.text, tok.pos)
        agg = self.agg()
        return TimechartStage(span_us=span, agg=agg)

    def stage_transaction(self) -> TransactionStage:
        stage = TransactionStage(key=self.field_name())
        while self.at_word("startswith", "endswith", "maxpause"):
            opt = self.next().text.lower()
            self.expect("EQ", "'='")
            tok = self.peek()
            if tok.kind not in ("WORD", "STRING"):
                self.fail(["pattern" if opt != "maxpause" else "duration"])
            self.next()
            if opt == "startswith":
                stage.startswith = tok.text
            elif opt == "endswith":
                stage.endswith = tok.text
            else:
                stage.maxpause_us = parse_duration(tok.text, tok.pos)
        return stage

    def stage_eval(self) -> EvalStage:
        name = self.field_name()
        self.expect("EQ", "'='")
        return EvalStage(name=name, expr=self.arith())

    def stage_table(self) -> TableStage:
        cols = [self.field_name()]
        while self.peek().kind in ("WORD", "STRING", "COMMA"):
            if self.peek().kind == "COMMA":
                self.next()
                continue
            cols.append(self.field_name())
        return TableStage(columns=cols)

    def stage_sort(self) -> SortStage:
        limit = None
        if self.peek().kind == "WORD" and self.peek().text.isdigit() and \
                self.peek(1).kind in ("WORD", "STRING", "MINUS", "PLUS"):
            limit = int(self.next().text)
        keys = [self.sort_key()]
        while self.peek().kind == "COMMA":
            self.next()
            keys.append(self.sort_key())
        return SortStage(limit=limit, keys=keys)

    def sort_key(self) -> tuple[str, bool]:
        desc = False
        if self.peek().kind in ("MINUS", "PLUS"):
            desc = self.next().kind == "MINUS"
        return (self.field_name(), desc)

    def stage_head(self) -> HeadStage:
        return HeadStage(count=self.int_literal("row count"))

    def stage_fields(self) -> FieldsStage:
        remove = False
        if self.peek().kind == "MINUS":
            self.next()
            remove = True
        names = [self.field_name()]
        while self.peek().kind in ("WORD", "STRING", "COMMA"):
            if self.peek().kind == "COMMA":
                self.next()
                continue
            names.append(self.field_name())
        return FieldsStage(remove=remove, names=names)

    def stage_pauses(self) -> PausesStage:
        threshold = 2_000_000
        if self.at_word("threshold"):
            self.next()
            self.expect("EQ", "'='")
            tok = self.expect("WORD", "duration")
            threshold = parse_duration(tok.text, tok.pos)
        return PausesStage(threshold_us=threshold)

    def stage_interarrival(self) -> InterarrivalStage:
        bin_us = 1_000_000
        if self.at_word("bin"):
            self.next()
            self.expect("EQ", "'='")
            tok = self.expect("WORD", "duration")
            bin_us = parse_duration(tok.text, tok.pos)
        return InterarrivalStage(bin_us=bin_us)

    def stage_anomalydetection(self) -> AnomalyStage:
        stage = AnomalyStage()
        while self.peek().kind in ("WORD", "STRING"):
            tok = self.peek()
            lower = tok.text.lower()
            if lower in ("action", "threshold") and self.peek(1).kind == "EQ":
                self.next()
                self.next()
                val = self.peek()
                if val.kind not in ("WORD", "STRING"):
                    self.fail(["option value"])
                self.next()
                if lower == "threshold":
                    try:
                        stage.threshold = float(val.text)
                    except ValueError:
                        raise ParseError("threshold must be numeric", val.pos) from None
                # action=annotate is the only supported action; accepted as a no-op
                continue
            stage.fields.append(self.field_name())
        if not stage.fields:
            self.fail(["field name"])
        return stage

    def stage_fit(self) -> FitStage:
        tok = self.expect("WORD", "algorithm name")
        algo = tok.text.lower()
        if algo in ("pca", "kernelpca"):
            return self.fit_pca()
        if algo in ("logisticregression", "logreg"):
            return self.fit_logreg()
        raise ParseError(f"unknown algorithm {tok.text!r}", tok.pos,
                         ["PCA", "LogisticRegression"])

    def _fit_option(self, stage: FitStage) -> bool:
        tok = self.peek()
        if tok.kind != "WORD" or self.peek(1).kind != "EQ":
            return False
        name = tok.text.lower()
        if name not in ("k", "fit_intercept", "train_fraction", "seed"):
            return False
        self.next()
        self.next()
        val = self.peek()
        if val.kind not in ("WORD", "STRING"):
            self.fail(["option value"])
        self.next()
        try:
            if name == "k":
                stage.k = int(val.text)
            elif name == "fit_intercept":
                stage.fit_intercept = val.text.lower() in ("true", "t", "1", "yes")
            elif name == "train_fraction":
                stage.train_fraction = float(val.text)
            else:
                stage.seed = int(val.text)
        except ValueError:
            raise ParseError(f"bad value for {name}", val.pos) from None
        return True

    def fit_pca(self) -> FitStage:
        stage = FitStage(algo="pca")
        while True:
            if self._fit_option(stage):
                continue
            if self.at_word("into"):
                break
            if self.peek().kind == "COMMA":
                self.next()
                continue
            if self.peek().kind in ("WORD", "STRING"):
                stage.fields.append(self.field_name())
                continue
            break
        if not stage.fields:
            self.fail(["field name"])
        self.expect_word("into")
        stage.model_name = self.field_name()
        return stage

    def fit_logreg(self) -> FitStage:
        stage = FitStage(algo="logreg")
        while self._fit_option(stage):
            pass
        stage.response = self.field_name()
        self.expect_word("from")
        while self.peek().kind in ("WORD", "STRING", "COMMA"):
            if self.peek().kind == "COMMA":
                self.next()
                continue
            if self.at_word("into"):
                break
            stage.predictors.append(self.field_name())
        if not stage.predictors:
            self.fail(["predictor field"])
        self.expect_word("into")
        stage.model_name = self.field_name()
        return stage

    def expect_word(self, word: str):
        if not self.at_word(word):
            self.fail([word])
        self.next()

    def stage_apply(self) -> ApplyStage:
        return ApplyStage(model_name=self.field_name())

    def _two_field_args(self) -> tuple[str, str]:
        self.expect("LP", "'('")
        a = self.field_name()
        self.expect("COMMA", "','")
        b = self.field_name()
        self.expect("RP", "')'")
        return a, b

    def stage_classificationstatistics(self) -> ClassStatsStage:
        a, b = self._two_field_args()
        return ClassStatsStage(actual=a, predicted=b)

    def stage_confusionmatrix(self) -> ConfusionStage:
        a, b = self._two_field_args()
        return ConfusionStage(actual=a, predicted=b)

    # -- boolean expressions (where) --

    def bool_or(self):
        items = [self.bool_and()]
        while self.at_word("or"):
            self.next()
            items.append(self.bool_and())
        return items[0] if len(items) == 1 else Or(items)

    def bool_and(self):
        items = [self.bool_not()]
        while True:
            if self.at_word("and"):
                self.next()
                items.append(self.bool_not())
            elif self.peek().kind in ("WORD", "STRING", "LP") and not self.at_word("or", "by"):
                # juxtaposition is an implicit AND
                items.append(self.bool_not())
            else:
                break
        return items[0] if len(items) == 1 else And(items)

    def bool_not(self):
        if self.at_word("not"):
            self.next()
            return Not(self.bool_not())
        return self.comparison()

    def comparison(self):
        left = self.bool_primary()
        tok = self.peek()
        ops = {"EQ": "=", "DEQ": "=", "NE": "!=", "LT": "<", "LE": "<=", "GT": ">", "GE": ">="}
        if tok.kind in ops:
            self.next()
            right = self.bool_primary()
            return Cmp(ops[tok.kind], left, right)
        return left

    def bool_primary(self):
        tok = self.peek()
        if tok.kind == "LP":
            self.next()
            inner = self.bool_or()
            self.expect("RP", "')'")
            return inner
        if tok.kind == "STRING":
            self.next()
            return Literal(tok.text)
        if tok.kind == "MINUS":
            self.next()
            num = self.expect("WORD", "number")
            if not _NUMBER.match(num.text):
                self.fail(["number"])
            return Literal(-_to_number(num.text))
        if tok.kind == "WORD":
            if tok.text.lower() == "like" and self.peek(1).kind == "LP":
                self.next()
                self.next()
                operand = self.bool_primary()
                self.expect("COMMA", "','")
                pat = self.peek()
                if pat.kind not in ("STRING", "WORD"):
                    self.fail(["pattern string"])
                self.next()
                self.expect("RP", "')'")
                return Like(operand=operand, pattern=pat.text)
            self.next()
            if _NUMBER.match(tok.text):
                return Literal(_to_number(tok.text))
            return FieldRef(tok.text)
        self.fail(["field", "literal", "like(...)", "'('"])

    # -- arithmetic expressions (eval) --

    def arith(self):
        left = self.arith_term()
        while self.peek().kind in ("PLUS", "MINUS"):
            op = self.next().text
            left = Arith(op, left, self.arith_term())
        return left

    def arith_term(self):
        left = self.arith_factor()
        while self.peek().kind in ("STAR", "SLASH"):
            op = self.next().text
            left = Arith(op, left, self.arith_factor())
        return left

    def arith_factor(self):
        tok = self.peek()
        if tok.kind == "MINUS":
            self.next()
            return Arith("-", Literal(0), self.arith_factor())
        if tok.kind == "LP":
            self.next()
            inner = self.arith()
            self.expect("RP", "')'")
            return inner
        if tok.kind == "STRING":
            self.next()
            return Literal(tok.text)
        if tok.kind == "WORD":
            if tok.text.lower() == "if" and self.peek(1).kind == "LP":
                self.next()
                self.next()
                cond = self.bool_or()
                self.expect("COMMA", "','")
                then = self.arith()
                self.expect("COMMA", "','")
                otherwise = self.arith()
                self.expect("RP", "')'")
                return IfExpr(cond, then, otherwise)
            self.next()
            if _NUMBER.match(tok.text):
                return Literal(_to_number(tok.text))
            return FieldRef(tok.text)
        self.fail(["expression"])


def _to_number(text: str):
    return float(text) if "." in text else int(text)


def parse(text: str) -> Query:
    """Parse a pipeline query; raises ParseError with offset and expectations."""
    return _Parser(text).parse()


def parse_condition(text: str):
    """Parse a standalone boolean expression in the where syntax."""
    parser = _Parser(text)
    expr = parser.bool_or()
    if parser.peek().kind != "EOF":
        parser.fail(["end of expression"])
    return expr
