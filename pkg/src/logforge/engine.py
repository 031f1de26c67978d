"""Engine: the indexes, rules and saved searches one deployment operates on."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .index_store import IndexHandle, RollPolicy
from .ingest import RuleSet, ingest_file
from .query import execute


def _data_file(name: str):
    return resources.files("logforge").joinpath("data").joinpath(name)


def default_ruleset() -> RuleSet:
    """Break/extraction rules shipped with the package (applog + accesslog)."""
    with _data_file("default_rules.json").open("rb") as fh:
        return RuleSet.from_dict(json.load(fh))


def builtin_query_pack() -> dict[str, dict]:
    """The canonical saved searches shipped with the package."""
    with _data_file("query_pack.json").open("rb") as fh:
        return json.load(fh)


class Engine:
    def __init__(self, data_dir: str | Path, state_dir: str | Path | None = None,
                 rules: RuleSet | None = None, roll_policy: RollPolicy | None = None,
                 default_index: str = "main", use_bloom: bool = True):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.state_dir = Path(state_dir) if state_dir else self.data_dir / "state"
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.rules = rules or default_ruleset()
        self.roll_policy = roll_policy or RollPolicy()
        self.default_index = default_index
        self.use_bloom = use_bloom
        self.indexes: dict[str, IndexHandle] = {}
        self.unparsed_counters: dict[str, int] = {}
        for child in sorted(self.data_dir.iterdir()):
            if child.is_dir() and child != self.state_dir and list(child.glob("*.meta.json")):
                self.indexes[child.name] = IndexHandle(self.data_dir, child.name,
                                                       self.roll_policy)

    @property
    def model_dir(self) -> Path:
        path = self.state_dir / "models"
        path.mkdir(parents=True, exist_ok=True)
        return path

    def index(self, name: str | None = None) -> IndexHandle:
        """The named index, created on first use."""
        name = name or self.default_index
        if name not in self.indexes:
            self.indexes[name] = IndexHandle(self.data_dir, name, self.roll_policy)
        return self.indexes[name]

    def resolve_index(self, name: str) -> IndexHandle | None:
        """Lookup that never creates: unknown indexes search as empty."""
        if name in self.indexes:
            return self.indexes[name]
        if (self.data_dir / name).is_dir():
            self.indexes[name] = IndexHandle(self.data_dir, name, self.roll_policy)
            return self.indexes[name]
        return None

    def ingest_path(self, path: str | Path, index: str | None = None,
                    sourcetype: str = "applog", host: str = "localhost") -> int:
        handle = self.index(index)
        events = ingest_file(path, self.rules, host, sourcetype, self.unparsed_counters)
        return handle.index_events(events)

    def search(self, text: str, earliest: int | None = None, latest: int | None = None):
        return execute(text, self, earliest, latest)

    def saved_searches(self) -> dict[str, dict]:
        """Builtin query pack merged with user-saved searches from state."""
        searches = dict(builtin_query_pack())
        user_path = self.state_dir / "saved_searches.json"
        if user_path.exists():
            for name, entry in json.loads(user_path.read_text()).items():
                if isinstance(entry, str):
                    entry = {"query": entry}
                searches[name] = entry
        return searches

    def save_search(self, name: str, query: str) -> None:
        user_path = self.state_dir / "saved_searches.json"
        current = json.loads(user_path.read_text()) if user_path.exists() else {}
        current[name] = {"query": query}
        user_path.write_text(json.dumps(current, indent=2))

    def flush(self) -> None:
        for handle in self.indexes.values():
            handle.flush()
