"""The forward/receive CLI commands as real subprocesses over a socket."""

import signal
import subprocess
import sys
import time

from logforge.engine import Engine


def wait_for(predicate, timeout=20.0, interval=0.1):
    deadline = time.time() + timeout
    while time.time() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return False


def test_forward_receive_subprocess_pipeline(tmp_path):
    log = tmp_path / "app.log"
    with log.open("w") as fh:
        for i in range(500):
            fh.write(f"[2018-01-17 15:30:00,{i:06d}]INFO (D ) cli event {i}\n")
    data_dir = tmp_path / "data"

    receiver = subprocess.Popen(
        [sys.executable, "-m", "logforge.cli", "receive",
         "--listen", "127.0.0.1:19970", "--data-dir", str(data_dir)],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    try:
        assert wait_for(lambda: _port_open("127.0.0.1", 19970), timeout=60), \
            "receiver never bound"
        forwarder = subprocess.Popen(
            [sys.executable, "-m", "logforge.cli", "forward", str(log),
             "--dest", "127.0.0.1:19970", "--state-dir", str(tmp_path / "fstate"),
             "--poll-interval", "0.1", "--host", "cli-host"],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
        )
        try:
            time.sleep(2.0)  # a few poll cycles
        finally:
            forwarder.send_signal(signal.SIGTERM)
            out, err = forwarder.communicate(timeout=20)
        assert forwarder.returncode == 0, err
        assert "forwarded 500 events" in err
    finally:
        receiver.send_signal(signal.SIGTERM)
        out, err = receiver.communicate(timeout=20)
    assert receiver.returncode == 0, err
    assert "indexed 500 events" in err

    engine = Engine(data_dir)
    table, _ = engine.search("* | stats count")
    assert table.rows == [[500]]
    table, _ = engine.search('host="cli-host" event | head 1')
    assert len(table.rows) == 1


def _port_open(host, port):
    import socket

    try:
        with socket.create_connection((host, port), timeout=0.2):
            return True
    except OSError:
        return False


def test_serve_subprocess_answers_http(tmp_path):
    import json
    import urllib.request
    from pathlib import Path

    from logforge.service.generator import GenProfile, generate_corpus

    corpus = generate_corpus(GenProfile(seed=31, events=200), tmp_path / "c")
    engine = Engine(tmp_path / "data")
    engine.ingest_path(corpus.applog, sourcetype="applog", host="app01")
    engine.flush()

    ui_dir = Path(__file__).resolve().parent.parent / "frontend" / "dist"
    cmd = [sys.executable, "-m", "logforge.cli", "serve",
           "--data-dir", str(tmp_path / "data"), "--port", "18099",
           "--host", "127.0.0.1"]
    if ui_dir.is_dir():
        cmd += ["--ui-dir", str(ui_dir)]
    server = subprocess.Popen(cmd, stdout=subprocess.PIPE,
                              stderr=subprocess.PIPE, text=True)
    try:
        assert wait_for(lambda: _port_open("127.0.0.1", 18099), timeout=60), \
            "server never bound"

        def get_json(path):
            with urllib.request.urlopen(f"http://127.0.0.1:18099{path}", timeout=5) as r:
                return json.loads(r.read())

        health = get_json("/api/health")
        assert health["indexes"]["main"] == 200

        body = json.dumps({"query": "sourcetype=applog | stats count"}).encode()
        req = urllib.request.Request("http://127.0.0.1:18099/api/search", data=body,
                                     headers={"content-type": "application/json"})
        with urllib.request.urlopen(req, timeout=5) as r:
            assert json.loads(r.read())["rows"] == [[200]]

        if ui_dir.is_dir():
            with urllib.request.urlopen("http://127.0.0.1:18099/ui/", timeout=5) as r:
                assert b"logforge" in r.read()
    finally:
        server.send_signal(signal.SIGTERM)
        try:
            server.communicate(timeout=15)
        except subprocess.TimeoutExpired:
            server.kill()
            server.communicate(timeout=10)
