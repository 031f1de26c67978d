import pytest

from logforge.engine import Engine
from logforge.index_store import RollPolicy
from logforge.service.generator import GenProfile, generate_corpus

# The shared corpus holds 10^4 events total: 5k app events + 5k access lines.
# Seed pinned for every suite; attack rate seeds 25 attacks (5 per rule).
CORPUS_SEED = 42
CORPUS_EVENTS = 5_000
CORPUS_ATTACK_RATE = 0.005


@pytest.fixture(scope="session")
def corpus10k(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus10k")
    return generate_corpus(
        GenProfile(seed=CORPUS_SEED, events=CORPUS_EVENTS,
                   attack_rate=CORPUS_ATTACK_RATE),
        out,
    )


@pytest.fixture(scope="session")
def benign_corpus10k(tmp_path_factory):
    out = tmp_path_factory.mktemp("benign10k")
    return generate_corpus(
        GenProfile(seed=CORPUS_SEED, events=10_000, attack_rate=0.0,
                   error_rate=0.0),
        out,
    )


@pytest.fixture(scope="session")
def engine10k(tmp_path_factory, corpus10k):
    data_dir = tmp_path_factory.mktemp("engine10k")
    engine = Engine(data_dir,
                    roll_policy=RollPolicy(max_bytes=1024 * 1024,
                                           provisional_terms=60_000))
    engine.ingest_path(corpus10k.applog, sourcetype="applog", host="app01")
    engine.ingest_path(corpus10k.accesslog, sourcetype="accesslog",
                       host="www.example.com")
    return engine


@pytest.fixture(scope="session")
def reference_events10k(engine10k, corpus10k):
    from oracle_reference import load_reference_events

    return load_reference_events(
        [(corpus10k.applog, "app01", "applog"),
         (corpus10k.accesslog, "www.example.com", "accesslog")],
        engine10k.rules)


@pytest.fixture()
def small_engine(tmp_path):
    return Engine(tmp_path / "data")
