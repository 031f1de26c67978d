"""Command line entry points: ingest, search, serve, forward, receive,
detect, fit/apply/anomaly, gen."""

from __future__ import annotations

import argparse
import json
import signal
import sys
import time
from pathlib import Path

from .engine import Engine
from .ingest import IngestError
from .query.parser import ParseError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2


def _engine_from_args(args) -> Engine:
    from .service.config import Config

    config = Config.load(getattr(args, "config", None))
    if getattr(args, "data_dir", None):
        config.data_dir = args.data_dir
    return config.build_engine()


def _host_port(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"{text!r} is not host:port")
    return host, int(port)


def _print_table(table) -> None:
    widths = [len(c) for c in table.columns]
    rendered = [[("" if v is None else str(v)) for v in row] for row in table.rows]
    for row in rendered:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    line = "  ".join(c.ljust(w) for c, w in zip(table.columns, widths))
    print(line)
    print("  ".join("-" * w for w in widths))
    for row in rendered:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)))


def cmd_ingest(args) -> int:
    engine = _engine_from_args(args)
    total = 0
    for path in args.paths:
        try:
            total += engine.ingest_path(path, index=args.index,
                                        sourcetype=args.sourcetype, host=args.host)
        except (OSError, IngestError) as exc:
            print(f"ingest failed for {path}: {exc}", file=sys.stderr)
            return EXIT_ERROR
    engine.flush()
    print(f"indexed {total} events into {args.index or engine.default_index}")
    return EXIT_OK


def cmd_search(args) -> int:
    engine = _engine_from_args(args)
    try:
        table, profile = engine.search(args.query, args.earliest, args.latest)
    except ParseError as exc:
        print(f"query error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.output == "json":
        body = table.to_dict()
        if args.profile:
            body["profile"] = profile.to_dict()
        print(json.dumps(body, indent=2))
    else:
        _print_table(table)
        if args.profile:
            print(f"\n{profile.hits} hits / {profile.scanned} scanned "
                  f"({profile.density}) in {profile.total_seconds:.3f}s")
            for comp in profile.components:
                print(f"  {comp.duration_s:8.4f}s  {comp.name}  calls={comp.calls}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import threading

    import uvicorn

    from .service.alerts import AlertStore, run_alerts
    from .service.api import create_app
    from .service.config import Config

    config = Config.load(args.config)
    if args.data_dir:
        config.data_dir = args.data_dir
    if args.port:
        config.port = args.port
    engine = config.build_engine()
    app = create_app(engine, config, ui_dir=args.ui_dir)

    stop = threading.Event()

    def alert_loop():
        store = AlertStore(engine.state_dir)
        while not stop.wait(args.alert_tick):
            try:
                run_alerts(engine, store)
            except Exception as exc:  # the scheduler must survive bad alerts
                print(f"alert run failed: {exc}", file=sys.stderr)

    threading.Thread(target=alert_loop, daemon=True).start()
    try:
        uvicorn.run(app, host=args.host, port=config.port, log_level="warning")
    finally:
        stop.set()
    return EXIT_OK


def cmd_forward(args) -> int:
    from .net.forwarder import Forwarder

    engine_rules = None
    if args.rules:
        from .ingest import RuleSet

        engine_rules = RuleSet.load(args.rules)
    else:
        from .engine import default_ruleset

        engine_rules = default_ruleset()
    fwd = Forwarder(args.paths, args.dest, args.state_dir, rules=engine_rules,
                    host=args.host, sourcetype=args.sourcetype,
                    poll_interval=args.poll_interval)
    stopping = []

    def handle_signal(signum, frame):
        stopping.append(signum)

    signal.signal(signal.SIGINT, handle_signal)
    signal.signal(signal.SIGTERM, handle_signal)
    try:
        fwd.start()
        while not stopping:
            time.sleep(0.2)
    finally:
        fwd.stop(flush=True)
    print(f"forwarded {fwd.sent_events} events", file=sys.stderr)
    return EXIT_OK


def cmd_receive(args) -> int:
    from .net.receiver import Receiver

    engine = _engine_from_args(args)
    receiver = Receiver(args.listen, engine.index(args.index), rules=engine.rules)
    stopping = []
    signal.signal(signal.SIGINT, lambda *a: stopping.append(1))
    signal.signal(signal.SIGTERM, lambda *a: stopping.append(1))
    receiver.start()
    print(f"listening on {receiver.address[0]}:{receiver.address[1]}", file=sys.stderr)
    try:
        while not stopping:
            time.sleep(0.2)
    finally:
        receiver.stop()
        engine.flush()
    print(f"indexed {receiver.indexed} events", file=sys.stderr)
    return EXIT_OK


def cmd_detect(args) -> int:
    from . import security
    from .engine import default_ruleset
    from .ingest import extract_fields, ingest_file

    rules = default_ruleset()
    if args.pack and args.pack != "builtin":
        pack = security.load_pack(args.pack)
    else:
        pack = security.builtin_pack()
    lookup = security.RefererLookup.from_csv(args.lookup) if args.lookup \
        else security.RefererLookup()
    events = []
    next_id = 1
    for path in args.paths:
        try:
            for ev in ingest_file(path, rules, args.host, args.sourcetype):
                ev.id = next_id
                next_id += 1
                extract_fields(ev, rules.rules_for(ev.sourcetype))
                events.append(ev)
        except (OSError, IngestError) as exc:
            print(f"cannot read {path}: {exc}", file=sys.stderr)
            return EXIT_ERROR
    findings, summary = security.run_pack(events, pack, lookup)
    out_path = Path(args.out)
    security.write_findings_jsonl(findings, out_path)
    if args.index_findings:
        engine = _engine_from_args(args)
        engine.index(args.findings_index).index_events(
            security.findings_to_events(findings))
        engine.flush()
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _load_table(path: str):
    from .ml import DataTable

    return DataTable.from_csv(path)


def cmd_fit(args) -> int:
    from .ml import MLError, fit_logreg, fit_pca, save_model

    table = _load_table(args.input)
    try:
        if args.algo == "pca":
            model, out = fit_pca(table, args.fields.split(","), args.k)
            save_model(model, args.model_dir, args.into)
        else:
            model, stats = fit_logreg(
                table, args.response, args.predictors.split(","),
                train_fraction=args.train_fraction, seed=args.seed,
            )
            save_model(model, args.model_dir, args.into, extra={"holdout": {
                "precision": stats.precision, "recall": stats.recall,
                "accuracy": stats.accuracy, "f1": stats.f1}})
            out = model.apply(table)
            print(f"held-out accuracy={stats.accuracy:.4f} precision={stats.precision:.4f} "
                  f"recall={stats.recall:.4f} f1={stats.f1:.4f}", file=sys.stderr)
    except MLError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.output:
        out.to_csv(args.output)
    print(f"model saved as {args.into}")
    return EXIT_OK


def cmd_apply(args) -> int:
    from .ml import MLError, load_model

    table = _load_table(args.input)
    try:
        model = load_model(args.model_dir, args.model)
        out = model.apply(table)
    except MLError as exc:
        print(f"apply failed: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out.to_csv(args.output)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_anomaly(args) -> int:
    from .ml import DataTable, MLError, anomaly_detect

    table = _load_table(args.input)
    try:
        rows = anomaly_detect(table, args.fields.split(","), args.threshold)
    except MLError as exc:
        print(f"anomaly detection failed: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = DataTable(
        columns=list(table.columns) + ["probability", "probable_cause", "isOutlier"],
        rows=[r.cells + [r.probability, r.probable_cause, r.is_outlier] for r in rows],
    )
    out.to_csv(args.output)
    outliers = sum(r.is_outlier for r in rows)
    print(f"wrote {args.output} ({outliers} outliers / {len(rows)} rows)")
    return EXIT_OK


def cmd_gen(args) -> int:
    from .service.generator import GenProfile, generate_corpus

    profile = GenProfile(seed=args.seed, events=args.events,
                         attack_rate=args.attack_rate, error_rate=args.error_rate)
    corpus = generate_corpus(profile, args.out_dir)
    print(json.dumps({
        "applog": str(corpus.applog),
        "accesslog": str(corpus.accesslog),
        "lookup": str(corpus.lookup),
        "manifest": str(corpus.manifest_path),
        "attacks": len(corpus.manifest.get("attacks", [])),
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logforge",
                                     description="miniature log analytics engine")
    parser.add_argument("--config", help="logforge.toml or .json")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="index log files")
    p.add_argument("paths", nargs="+")
    p.add_argument("--index", default=None)
    p.add_argument("--sourcetype", default="applog")
    p.add_argument("--host", default="localhost")
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("search", help="run a query")
    p.add_argument("query")
    p.add_argument("--profile", action="store_true")
    p.add_argument("--output", choices=("json", "table"), default="table")
    p.add_argument("--earliest", type=int, default=None)
    p.add_argument("--latest", type=int, default=None)
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", default=None)
    p.add_argument("--ui-dir", default=None)
    p.add_argument("--alert-tick", type=float, default=30.0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("forward", help="tail files and ship them to a receiver")
    p.add_argument("paths", nargs="+")
    p.add_argument("--dest", type=_host_port, required=True)
    p.add_argument("--state-dir", default="./forwarder-state")
    p.add_argument("--sourcetype", default="applog")
    p.add_argument("--host", default=None)
    p.add_argument("--rules", default=None)
    p.add_argument("--poll-interval", type=float, default=0.5)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("receive", help="accept forwarded events and index them")
    p.add_argument("--listen", type=_host_port, default=("0.0.0.0", 9997))
    p.add_argument("--index", default=None)
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=cmd_receive)

    p = sub.add_parser("detect", help="run the attack rule pack over access logs")
    p.add_argument("paths", nargs="+")
    p.add_argument("--pack", default="builtin")
    p.add_argument("--lookup", default=None)
    p.add_argument("--sourcetype", default="accesslog")
    p.add_argument("--host", default="www.example.com")
    p.add_argument("--out", default="findings.jsonl")
    p.add_argument("--index-findings", action="store_true")
    p.add_argument("--findings-index", default="findings")
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("fit", help="fit a model from a CSV table")
    p.add_argument("--algo", choices=("pca", "logreg"), required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--into", required=True)
    p.add_argument("--fields", default="", help="pca: comma-separated fields")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--response", default="")
    p.add_argument("--predictors", default="")
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-dir", default="./models")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("apply", help="apply a saved model to a CSV table")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--model-dir", default="./models")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("anomaly", help="frequency-based outlier detection on a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--fields", required=True)
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_anomaly)

    p = sub.add_parser("gen", help="generate a synthetic corpus with a manifest")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--events", type=int, default=1000)
    p.add_argument("--attack-rate", type=float, default=0.0)
    p.add_argument("--error-rate", type=float, default=0.02)
    p.add_argument("--out-dir", default="./corpus")
    p.set_defaults(func=cmd_gen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
