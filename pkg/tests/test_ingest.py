import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logforge.ingest import (
    BLOCK_SIZE,
    BreakRule,
    Event,
    ExtractionRule,
    RuleConfigError,
    RuleSet,
    apply_timestamps,
    break_events,
    extract_fields,
    parse_timestamp,
    read_blocks,
)

META = ("hostA", "/var/log/app.log", "applog")

FIG_LINE_1 = "124243 [2018-01-17 15:30:39,359456]INFO (Director ) PROT. SOS20186717 build procedure for cube SOS_SEGNAZIONE is finished in 2 ms"
FIG_LINE_2 = "124244 [2018-01-17 15:30:39,359456]INFO (Director ) PROT. SOS20186717 start check procedure for elements SOS_SOGGETTO mapped on table SOGGETTO"
SQL_CONTINUATIONS = [
    "FROM T7701_VIOLET.STG_WORK_SOS_SOGGETTO",
    "WHERE PROTOCOLLO_SOS = ? AND NATURA_GIURIDICA = 'FF'",
    "GROUP BY CODICE_FISCALE",
    "HAVING count(CODICE_FISCALE) > 1",
]


def blocks_of(text: str):
    return read_blocks(io.BytesIO(text.encode("utf-8")), *META)


def break_text(text: str, rule=None):
    rule = rule or BreakRule("applog", "timestamp-prefix")
    return list(break_events(blocks_of(text), rule))


class TestReadBlocks:
    def test_70000_byte_file_splits_at_64k(self):
        data = b"a" * 70000
        blocks = list(read_blocks(io.BytesIO(data), *META))
        assert [len(b.data) for b in blocks] == [65536, 4464]
        assert b"".join(b.data for b in blocks) == data

    def test_empty_file_yields_no_blocks(self):
        assert list(read_blocks(io.BytesIO(b""), *META)) == []

    def test_multibyte_char_never_straddles_boundary(self):
        # A 3-byte char positioned to cross the 64K boundary.
        payload = b"x" * (BLOCK_SIZE - 1) + "€".encode("utf-8") + b"tail"
        blocks = list(read_blocks(io.BytesIO(payload), *META))
        assert b"".join(b.data for b in blocks) == payload
        for b in blocks:
            b.data.decode("utf-8")  # every block decodes on its own
        assert len(blocks[0].data) == BLOCK_SIZE - 1

    def test_block_meta_carried(self):
        (block,) = list(read_blocks(io.BytesIO(b"hello"), *META))
        assert (block.host, block.source, block.sourcetype) == META

    @given(st.binary(min_size=0, max_size=5 * BLOCK_SIZE))
    @settings(max_examples=25)
    def test_concatenation_reproduces_stream(self, data):
        blocks = list(read_blocks(io.BytesIO(data), *META))
        assert b"".join(b.data for b in blocks) == data
        assert all(len(b.data) <= BLOCK_SIZE for b in blocks)


class TestBreakEvents:
    def test_two_headed_lines_make_two_events(self):
        events = break_text(FIG_LINE_1 + "\n" + FIG_LINE_2 + "\n")
        assert len(events) == 2
        assert events[0].raw == FIG_LINE_1
        assert events[1].raw == FIG_LINE_2

    def test_sql_continuation_lines_join_previous_event(self):
        text = "\n".join([FIG_LINE_1] + SQL_CONTINUATIONS) + "\n"
        events = break_text(text)
        assert len(events) == 1
        assert events[0].raw.count("\n") == 4
        assert "GROUP BY CODICE_FISCALE" in events[0].raw

    def test_line_mode_one_event_per_line(self):
        events = break_text("one\ntwo\nthree\n", BreakRule("applog", "line"))
        assert [e.raw for e in events] == ["one", "two", "three"]

    def test_unbreakable_residue_is_one_trailing_event(self):
        events = break_text("no timestamps\nanywhere here\n")
        assert len(events) == 1
        assert events[0].raw == "no timestamps\nanywhere here"

    def test_event_spanning_block_boundary(self):
        filler = "x" * 200
        lines = [f"[2018-01-17 15:30:{i % 60:02d},000]INFO {filler}" for i in range(400)]
        text = "\n".join(lines) + "\n"
        assert len(text) > BLOCK_SIZE
        events = break_text(text)
        assert len(events) == 400
        assert all(e.raw in lines for e in events)

    def test_regex_boundary_mode(self):
        rule = BreakRule("applog", "regex-boundary", r"^--- entry")
        events = break_text("--- entry 1\ndetail a\n--- entry 2\ndetail b\n", rule)
        assert [e.raw for e in events] == ["--- entry 1\ndetail a", "--- entry 2\ndetail b"]

    def test_bad_boundary_pattern_fails_at_rule_load(self):
        with pytest.raises(RuleConfigError):
            BreakRule("applog", "regex-boundary", "(unclosed")

    @given(
        st.lists(
            st.tuples(
                st.booleans(),
                st.text(
                    alphabet=st.characters(blacklist_characters="\n", blacklist_categories=("Cs",)),
                    max_size=30,
                ),
            ),
            min_size=1,
            max_size=40,
        )
    )
    @settings(max_examples=50)
    def test_breaking_is_lossless(self, spec):
        lines = []
        for headed, tail in spec:
            if headed:
                lines.append("[2018-01-17 15:30:39,123456]" + tail)
            else:
                lines.append(tail.replace("[", " "))
        text = "\n".join(lines) + "\n"
        events = break_text(text)
        if any(e for e in events):
            rebuilt = "\n".join(e.raw for e in events)
            # Blank leading/trailing lines are the only bytes breaking may drop.
            assert rebuilt.strip("\n") == text.strip("\n").strip("\n")

    def test_monotone_order_matches_byte_order(self):
        lines = [f"[2018-01-17 15:30:39,{i:06d}]INFO line {i}" for i in range(50)]
        events = break_text("\n".join(lines) + "\n")
        positions = [int(e.raw.rsplit(" ", 1)[1]) for e in events]
        assert positions == sorted(positions)


class TestParseTimestamp:
    def test_figure_style_microseconds(self):
        assert parse_timestamp("[2018-01-17 15:30:39,359455]INFO") == 1516203039359455

    def test_milliseconds_scale_to_micros(self):
        assert parse_timestamp("[2018-01-17 15:30:39,359]x") == 1516203039359000

    def test_epoch_boundary_maps_to_one(self):
        assert parse_timestamp("[1970-01-01 00:00:00,000000]") == 1

    def test_no_match_is_unparsed(self):
        assert parse_timestamp("no timestamp here") == 0

    def test_leading_line_number_tolerated(self):
        assert parse_timestamp(FIG_LINE_1) == 1516203039359456

    def test_access_log_timestamp(self):
        raw = '1.2.3.4 - - [17/Jan/2018:15:30:39 +0100] "GET / HTTP/1.1" 200 10'
        assert parse_timestamp(raw) == 1516199439000000

    def test_unparsed_inherits_previous(self):
        events = [
            Event(raw="[2018-01-17 15:30:39,000001]a", source="s"),
            Event(raw="bare continuationless line", source="s"),
        ]
        counters = {}
        out = list(apply_timestamps(iter(events), counters))
        assert out[1].timestamp == out[0].timestamp
        assert counters == {"s": 1}


class TestExtractFields:
    def test_kv_auto(self):
        ev = Event(raw="code=42 user=bob", sourcetype="applog")
        extract_fields(ev, [ExtractionRule("applog", "kv-auto")])
        assert ev.fields == {"code": "42", "user": "bob"}

    def test_regex_named_groups(self):
        rule = ExtractionRule(
            "applog", "regex-named-groups",
            r"\](?P<level>[A-Z]+)\s*\((?P<component>[^)]*?)\s*\)\s*(?P<message>.*)",
        )
        ev = Event(raw=FIG_LINE_1, sourcetype="applog")
        extract_fields(ev, [rule])
        assert ev.fields["level"] == "INFO"
        assert ev.fields["component"] == "Director"
        assert ev.fields["message"].startswith("PROT. SOS20186717")

    def test_kv_mode_none_disables_kv(self):
        ev = Event(raw="a=1", sourcetype="applog")
        extract_fields(ev, [ExtractionRule("applog", "kv-auto", kv_mode="none")])
        assert ev.fields == {}

    def test_metadata_names_never_shadowed(self):
        ev = Event(raw="host=evil source=fake", sourcetype="applog", host="real")
        extract_fields(ev, [ExtractionRule("applog", "kv-auto")])
        assert ev.fields == {"host_1": "evil", "source_1": "fake"}
        assert ev.host == "real"

    def test_earlier_writers_win(self):
        rule = ExtractionRule("applog", "regex-named-groups", r"code=(?P<code>\d+)")
        ev = Event(raw="code=1 code=2", sourcetype="applog")
        extract_fields(ev, [rule, ExtractionRule("applog", "kv-auto")])
        assert ev.fields["code"] == "1"

    def test_quoted_values(self):
        ev = Event(raw='msg="hello world" n=3', sourcetype="applog")
        extract_fields(ev, [ExtractionRule("applog", "kv-auto")])
        assert ev.fields == {"msg": "hello world", "n": "3"}

    def test_bad_pattern_fails_at_load_not_event_time(self):
        with pytest.raises(RuleConfigError):
            ExtractionRule("applog", "regex-named-groups", "(?P<broken")

    def test_rules_for_other_sourcetypes_ignored(self):
        ev = Event(raw="a=1", sourcetype="accesslog")
        extract_fields(ev, [ExtractionRule("applog", "kv-auto", kv_mode="none")])
        assert ev.fields == {"a": "1"}


class TestRuleSet:
    def test_load_json(self, tmp_path):
        path = tmp_path / "rules.json"
        path.write_text(
            '{"sourcetypes": {"applog": {"break": {"mode": "timestamp-prefix"},'
            ' "extract": [{"kind": "kv-auto"}]}}}'
        )
        rs = RuleSet.load(path)
        assert rs.break_rule("applog").mode == "timestamp-prefix"
        assert rs.kv_mode("applog") == "auto"

    def test_load_toml(self, tmp_path):
        path = tmp_path / "rules.toml"
        path.write_text(
            '[sourcetypes.applog]\nbreak = {mode = "line"}\n'
            'extract = [{kind = "kv-auto", kv_mode = "none"}]\n'
        )
        rs = RuleSet.load(path)
        assert rs.break_rule("applog").mode == "line"
        assert rs.kv_mode("applog") == "none"

    def test_fallback_break_rule_is_timestamp_prefix(self):
        assert RuleSet().break_rule("whatever").mode == "timestamp-prefix"

    def test_set_kv_mode_round_trip(self):
        rs = RuleSet()
        rs.set_kv_mode("applog", "none")
        assert rs.kv_mode("applog") == "none"
        rs.set_kv_mode("applog", "auto")
        assert rs.kv_mode("applog") == "auto"


def test_determinism_same_bytes_same_rules():
    text = "\n".join([FIG_LINE_1, *SQL_CONTINUATIONS, FIG_LINE_2]) + "\n"
    a = [(e.raw, e.timestamp) for e in apply_timestamps(iter(break_text(text)))]
    b = [(e.raw, e.timestamp) for e in apply_timestamps(iter(break_text(text)))]
    assert a == b
