"""TokenEnv: a cooperative gridworld where agents reach (never collect) tokens.

Cells are ``(row, col)`` pairs. Agents move synchronously in the four
cardinal directions or stay. A door cell can be entered during a step only
if, at the start of that step, some agent stands on a button of the door's
color. Agents may share cells.

ASCII layout format, one character per cell::

    #  wall         .  floor        @  spawn cell
    0-9 token       a-d button      A-D door of the matching color

preceded by optional ``key: value`` header lines (``max_steps``, ``agents``,
``spawn`` = fixed|region, ``alphabet``). With ``spawn: fixed`` agent ``i``
starts on the ``i``-th ``@`` in row-major order; with ``spawn: region`` the
agents are placed on distinct ``@`` cells drawn uniformly at random.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import EpisodeOverError, InvalidActionError, InvalidLayoutError

Cell = tuple[int, int]

ACTIONS = ("up", "down", "left", "right", "noop")
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1), (0, 0))
NOOP = 4
N_ACTIONS = len(ACTIONS)
COLORS = "abcd"
DEFAULT_MAX_STEPS = 100

_HEADER = re.compile(r"^\s*([a-z_]+)\s*:\s*(\S+)\s*$")


@dataclass(frozen=True, eq=False)
class Layout:
    width: int
    height: int
    walls: frozenset = frozenset()
    tokens: dict = field(default_factory=dict)
    buttons: dict = field(default_factory=dict)
    doors: dict = field(default_factory=dict)
    spawn_points: tuple = ()
    n_agents: Optional[int] = None
    spawn_mode: str = "fixed"
    max_steps: int = DEFAULT_MAX_STEPS
    alphabet_size: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "walls", frozenset(map(tuple, self.walls)))
        object.__setattr__(self, "tokens", {tuple(c): int(t) for c, t in self.tokens.items()})
        object.__setattr__(self, "buttons", {tuple(c): str(v) for c, v in self.buttons.items()})
        object.__setattr__(self, "doors", {tuple(c): str(v) for c, v in self.doors.items()})
        object.__setattr__(self, "spawn_points", tuple(tuple(c) for c in self.spawn_points))
        if self.n_agents is None:
            object.__setattr__(self, "n_agents", len(self.spawn_points))
        if self.alphabet_size is None:
            object.__setattr__(self, "alphabet_size", max(self.tokens.values(), default=-1) + 1)
        self._validate()

    def _validate(self):
        if self.width < 1 or self.height < 1:
            raise InvalidLayoutError("layout must have at least one cell")
        if self.max_steps < 1:
            raise InvalidLayoutError("max_steps must be positive")
        if self.spawn_mode not in ("fixed", "region"):
            raise InvalidLayoutError(f"unknown spawn mode {self.spawn_mode!r}")
        groups = {
            "wall": set(self.walls),
            "token": set(self.tokens),
            "button": set(self.buttons),
            "door": set(self.doors),
        }
        for name, cells in groups.items():
            for c in cells:
                if not self.in_bounds(c):
                    raise InvalidLayoutError(f"{name} cell {c} out of bounds")
        for (n1, c1), (n2, c2) in itertools.combinations(groups.items(), 2):
            if c1 & c2:
                raise InvalidLayoutError(f"{n1} and {n2} cells overlap at {sorted(c1 & c2)[0]}")
        for color in set(self.doors.values()) | set(self.buttons.values()):
            if color not in COLORS:
                raise InvalidLayoutError(f"unknown color {color!r}")
        for cell, color in self.doors.items():
            if color not in self.buttons.values():
                raise InvalidLayoutError(f"door at {cell} has no {color!r} button")
        for t in self.tokens.values():
            if not 0 <= t < self.alphabet_size:
                raise InvalidLayoutError(f"token {t} outside alphabet of size {self.alphabet_size}")
        if self.n_agents < 1:
            raise InvalidLayoutError("layout needs at least one agent")
        for c in self.spawn_points:
            if not self.in_bounds(c) or c in self.walls or c in self.doors:
                raise InvalidLayoutError(f"spawn cell {c} is not passable")
            if c in self.tokens:
                # an initial label would be consumed before the first step
                raise InvalidLayoutError(f"spawn cell {c} holds a token")
        if self.spawn_mode == "fixed":
            if len(self.spawn_points) != self.n_agents:
                raise InvalidLayoutError(
                    f"{self.n_agents} agents but {len(self.spawn_points)} fixed spawn points"
                )
            if len(set(self.spawn_points)) != len(self.spawn_points):
                raise InvalidLayoutError("spawn conflict: two agents share a spawn point")
        elif len(set(self.spawn_points)) < self.n_agents:
            raise InvalidLayoutError("spawn region smaller than the number of agents")

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def passable(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.walls

    @cached_property
    def free_cells(self) -> list:
        return [
            (r, c)
            for r in range(self.height)
            for c in range(self.width)
            if (r, c) not in self.walls
        ]

    # -- ASCII format -----------------------------------------------------

    @classmethod
    def from_ascii(cls, text: str) -> "Layout":
        headers: dict[str, str] = {}
        rows: list[str] = []
        for line in text.splitlines():
            if not line.strip() or line.lstrip().startswith(";"):
                continue
            m = _HEADER.match(line)
            if m and not rows:
                headers[m.group(1)] = m.group(2)
                continue
            rows.append(line.rstrip())
        if not rows:
            raise InvalidLayoutError("layout has no grid rows")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise InvalidLayoutError("grid rows differ in length")
        walls, tokens, buttons, doors, spawns = set(), {}, {}, {}, []
        for r, line in enumerate(rows):
            for c, ch in enumerate(line):
                cell = (r, c)
                if ch == "#":
                    walls.add(cell)
                elif ch.isdigit():
                    tokens[cell] = int(ch)
                elif ch in COLORS:
                    buttons[cell] = ch
                elif ch in COLORS.upper():
                    doors[cell] = ch.lower()
                elif ch == "@":
                    spawns.append(cell)
                elif ch != ".":
                    raise InvalidLayoutError(f"unknown layout character {ch!r} at {cell}")
        known = {"max_steps", "agents", "spawn", "alphabet"}
        unknown = set(headers) - known
        if unknown:
            raise InvalidLayoutError(f"unknown layout header(s): {sorted(unknown)}")
        try:
            n_agents = int(headers.get("agents", len(spawns)))
            max_steps = int(headers.get("max_steps", DEFAULT_MAX_STEPS))
            alphabet = int(headers["alphabet"]) if "alphabet" in headers else None
        except ValueError as exc:
            raise InvalidLayoutError(f"bad header value: {exc}") from exc
        mode = headers.get("spawn", "fixed" if n_agents == len(spawns) else "region")
        return cls(
            width=width,
            height=len(rows),
            walls=frozenset(walls),
            tokens=tokens,
            buttons=buttons,
            doors=doors,
            spawn_points=tuple(spawns),
            n_agents=n_agents,
            spawn_mode=mode,
            max_steps=max_steps,
            alphabet_size=alphabet,
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Layout":
        return cls.from_ascii(Path(path).read_text(encoding="utf-8"))

    def to_ascii(self) -> str:
        grid = [["."] * self.width for _ in range(self.height)]
        for r, c in self.walls:
            grid[r][c] = "#"
        for (r, c), t in self.tokens.items():
            if t > 9:
                raise InvalidLayoutError("tokens above 9 have no ASCII form")
            grid[r][c] = str(t)
        for (r, c), color in self.buttons.items():
            grid[r][c] = color
        for (r, c), color in self.doors.items():
            grid[r][c] = color.upper()
        for r, c in self.spawn_points:
            grid[r][c] = "@"
        head = [
            f"max_steps: {self.max_steps}",
            f"agents: {self.n_agents}",
            f"spawn: {self.spawn_mode}",
            f"alphabet: {self.alphabet_size}",
        ]
        return "\n".join(head + ["".join(row) for row in grid]) + "\n"

    @cached_property
    def digest(self) -> str:
        return hashlib.sha256(self.to_ascii().encode()).hexdigest()

    def replace(self, **changes) -> "Layout":
        fields = dict(
            width=self.width, height=self.height, walls=self.walls, tokens=self.tokens,
            buttons=self.buttons, doors=self.doors, spawn_points=self.spawn_points,
            n_agents=self.n_agents, spawn_mode=self.spawn_mode, max_steps=self.max_steps,
            alphabet_size=self.alphabet_size,
        )
        fields.update(changes)
        return Layout(**fields)

    # -- ego observation support -----------------------------------------

    @cached_property
    def n_channels(self) -> int:
        return 1 + self.alphabet_size + 2 * len(COLORS) + 2

    @cached_property
    def _padded_static(self) -> np.ndarray:
        # static channels padded by (H-1, W-1) on every side; padding reads as wall
        H, W = self.height, self.width
        static = np.zeros((self.n_channels - 2, 3 * H - 2, 3 * W - 2), dtype=np.uint8)
        static[0] = 1
        static[0, H - 1:2 * H - 1, W - 1:2 * W - 1] = 0
        for r, c in self.walls:
            static[0, r + H - 1, c + W - 1] = 1
        base = 1
        for (r, c), t in self.tokens.items():
            static[base + t, r + H - 1, c + W - 1] = 1
        base += self.alphabet_size
        for (r, c), color in self.buttons.items():
            static[base + COLORS.index(color), r + H - 1, c + W - 1] = 1
        base += len(COLORS)
        for (r, c), color in self.doors.items():
            static[base + COLORS.index(color), r + H - 1, c + W - 1] = 1
        static.setflags(write=False)
        return static


@dataclass(frozen=True)
class GridState:
    positions: tuple
    step_count: int = 0
    terminated: bool = False


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    from .sampling import make_rng

    return make_rng(0 if seed is None else seed)


def spawn_support(layout: Layout) -> list:
    """All initial position tuples with their probabilities."""
    if layout.spawn_mode == "fixed":
        return [(tuple(layout.spawn_points), 1.0)]
    region = sorted(set(layout.spawn_points))
    combos = list(itertools.permutations(region, layout.n_agents))
    return [(combo, 1.0 / len(combos)) for combo in combos]


def reset(layout: Layout, seed=None) -> GridState:
    """Initial state: fixed spawn points, or distinct uniform cells of the spawn region."""
    if layout.spawn_mode == "fixed":
        return GridState(tuple(layout.spawn_points))
    rng = _as_rng(seed)
    region = sorted(set(layout.spawn_points))
    picks = rng.choice(len(region), size=layout.n_agents, replace=False)
    return GridState(tuple(region[int(i)] for i in picks))


def door_open(layout: Layout, state: GridState, cell: Cell) -> bool:
    color = layout.doors.get(cell)
    if color is None:
        return True
    return any(layout.buttons.get(p) == color for p in state.positions)


def step(layout: Layout, state: GridState, joint_action: Sequence[int]) -> GridState:
    """Synchronous move of all agents; blocked moves resolve to staying put."""
    if state.terminated:
        raise EpisodeOverError("the episode is over")
    if len(joint_action) != len(state.positions):
        raise InvalidActionError(
            f"expected {len(state.positions)} actions, got {len(joint_action)}"
        )
    pressed = {layout.buttons[p] for p in state.positions if p in layout.buttons}
    moved = []
    for (r, c), a in zip(state.positions, joint_action):
        if not 0 <= a < N_ACTIONS:
            raise InvalidActionError(f"unknown action {a}")
        dr, dc = MOVES[a]
        target = (r + dr, c + dc)
        if not layout.passable(target):
            target = (r, c)
        elif target in layout.doors and layout.doors[target] not in pressed:
            target = (r, c)
        moved.append(target)
    count = state.step_count + 1
    return GridState(tuple(moved), count, count >= layout.max_steps)


def label(layout: Layout, state: GridState, agent: int) -> Optional[int]:
    """Token under the agent, or ``None``."""
    return layout.tokens.get(state.positions[agent])


def labels(layout: Layout, state: GridState) -> tuple:
    return tuple(layout.tokens.get(p) for p in state.positions)


def ego_view(layout: Layout, state: GridState, agent: int) -> np.ndarray:
    """Agent-centred one-hot view of the whole map.

    Shape ``(channels, 2H - 1, 2W - 1)``; the agent sits at the centre cell.
    Channels: wall (out-of-bounds reads as wall), one per token symbol, one
    per button color, one per door color, self, and a count of other agents.
    """
    H, W = layout.height, layout.width
    r, c = state.positions[agent]
    static = layout._padded_static[:, r:r + 2 * H - 1, c:c + 2 * W - 1]
    agents = np.zeros((2, 2 * H - 1, 2 * W - 1), dtype=np.uint8)
    agents[0, H - 1, W - 1] = 1
    for j, (rj, cj) in enumerate(state.positions):
        if j != agent:
            agents[1, H - 1 + rj - r, W - 1 + cj - c] += 1
    return np.concatenate([static, agents])


def ego_digest(layout: Layout, state: GridState, agent: int) -> bytes:
    return hashlib.blake2b(ego_view(layout, state, agent).tobytes(), digest_size=16).digest()


def trace_record(step_index: int, state: GridState, layout: Layout, joint_action) -> dict:
    return {
        "step": step_index,
        "positions": [list(p) for p in state.positions],
        "labels": list(labels(layout, state)),
        "joint_action": None if joint_action is None else list(joint_action),
    }


def write_trace(records: Iterable[dict], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_trace(path: Union[str, Path]) -> list:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
