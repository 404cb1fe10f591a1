"""Task specs and the shipped micro fixtures.

A task spec is one of ``"top"``, ``"bottom"``, ``{"reach": [tokens]}``,
``{"reach_avoid": {"goal": g, "avoid": [...]}}``, ``{"hex": "..."}`` or a
full DFA document as accepted by :meth:`Dfa.from_dict`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Union

from .dfa import Dfa, DfaVector, reach, reach_avoid
from .env import Layout
from .errors import InvalidConfigError, InvalidDfaError


def parse_task(spec, alphabet_size: int) -> Dfa:
    if spec == "top":
        return Dfa.top(alphabet_size)
    if spec == "bottom":
        return Dfa.bottom(alphabet_size)
    if not isinstance(spec, dict):
        raise InvalidDfaError(f"unrecognized task spec {spec!r}")
    if "reach" in spec:
        return reach(spec["reach"], alphabet_size)
    if "reach_avoid" in spec:
        ra = spec["reach_avoid"]
        return reach_avoid(ra["goal"], ra["avoid"], alphabet_size)
    if "hex" in spec:
        a = Dfa.from_hex(spec["hex"])
        if a.alphabet_size != alphabet_size:
            from .errors import AlphabetMismatchError

            raise AlphabetMismatchError(f"task has {a.alphabet_size} symbols, expected {alphabet_size}")
        return a
    return Dfa.from_dict(spec, alphabet_size)


def parse_tasks(specs, alphabet_size: int) -> DfaVector:
    return DfaVector(parse_task(s, alphabet_size) for s in specs)


def load_tasks(path: Union[str, Path], alphabet_size: int) -> DfaVector:
    """A JSON list of task specs, or JSON lines with one DFA document per line."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = [json.loads(line) for line in text.splitlines() if line.strip()]
    if isinstance(doc, dict):
        doc = doc.get("tasks", [doc])
    return parse_tasks(doc, alphabet_size)


@dataclass(frozen=True)
class Fixture:
    name: str
    layout: Layout
    tasks: DfaVector
    expected_optimum: float
    notes: str = ""

    @property
    def horizon(self) -> int:
        return self.layout.max_steps

    @classmethod
    def from_dict(cls, doc: dict) -> "Fixture":
        try:
            layout = Layout.from_ascii("\n".join(doc["layout"]))
            tasks = parse_tasks(doc["tasks"], layout.alphabet_size)
            return cls(doc["name"], layout, tasks, float(doc["expected_optimum"]), doc.get("notes", ""))
        except KeyError as exc:
            raise InvalidConfigError(f"fixture is missing field {exc}") from exc

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Fixture":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fixture_dir() -> Path:
    return Path(str(resources.files("dfacoop") / "data" / "fixtures"))


def layout_dir() -> Path:
    return Path(str(resources.files("dfacoop") / "data" / "layouts"))


def load_fixtures(directory: Union[str, Path, None] = None) -> list:
    directory = fixture_dir() if directory is None else Path(directory)
    return [Fixture.load(p) for p in sorted(directory.glob("*.json"))]


def get_fixture(name: str) -> Fixture:
    path = fixture_dir() / f"{name}.json"
    if not path.exists():
        raise InvalidConfigError(f"no fixture named {name!r}")
    return Fixture.load(path)
