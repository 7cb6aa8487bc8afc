"""Game graphs, ownership, finite-memory strategies and lasso runs.

Vertices are referred to by their index in ``GameGraph.names`` everywhere
below; names only appear at the I/O boundary.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Callable, Iterable, Mapping, Sequence

if TYPE_CHECKING:
    from .preferences import Preference


class ArenaError(ValueError):
    """Structural problem: a non-edge, a bad history, an invalid strategy."""


def ceil_log2(n: int) -> int:
    """Bits needed to store one of ``n`` values (0 for n <= 1)."""
    return max(n - 1, 0).bit_length()


@dataclass(frozen=True)
class GameGraph:
    names: tuple[str, ...]
    succ: tuple[tuple[int, ...], ...]
    init: int

    @classmethod
    def from_edges(cls, names: Sequence[str], edges: Iterable[tuple[str, str]], init: str) -> GameGraph:
        index = {name: i for i, name in enumerate(names)}
        if len(index) != len(names):
            raise ArenaError("duplicate vertex names")
        out: list[set[int]] = [set() for _ in names]
        for u, v in edges:
            if u not in index or v not in index:
                raise ArenaError(f"edge ({u}, {v}) mentions an unknown vertex")
            out[index[u]].add(index[v])
        if init not in index:
            raise ArenaError(f"initial vertex {init!r} is not a vertex")
        return cls(tuple(names), tuple(tuple(sorted(s)) for s in out), index[init])

    @property
    def n(self) -> int:
        return len(self.names)

    @cached_property
    def index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.names)}

    @cached_property
    def _succ_sets(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(s) for s in self.succ)

    def vertex(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise ArenaError(f"unknown vertex {name!r}") from None

    def is_edge(self, u: int, v: int) -> bool:
        return v in self._succ_sets[u]

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.succ[u]]

    def is_path(self, seq: Sequence[int]) -> bool:
        return all(self.is_edge(u, v) for u, v in zip(seq, seq[1:]))

    def check_history(self, history: Sequence[int]) -> None:
        """Raise unless ``history`` is a (possibly empty) path from init."""
        if history and history[0] != self.init:
            raise ArenaError(f"history must start at {self.names[self.init]}")
        for u, v in zip(history, history[1:]):
            if not self.is_edge(u, v):
                raise ArenaError(f"history is not a path: no edge {self.names[u]} -> {self.names[v]}")

    def fmt(self, seq: Iterable[int]) -> str:
        return ",".join(self.names[v] for v in seq)


@dataclass(frozen=True)
class Ownership:
    players: tuple[str, ...]
    owner: tuple[int, ...]  # vertex index -> player index

    def vertices_of(self, player: int) -> list[int]:
        return [v for v, p in enumerate(self.owner) if p == player]


@dataclass(frozen=True)
class GameSpec:
    graph: GameGraph
    ownership: Ownership
    prefs: tuple[Preference, ...]  # indexed like ownership.players

    @property
    def players(self) -> range:
        return range(len(self.ownership.players))

    def owner(self, v: int) -> int:
        return self.ownership.owner[v]

    def player_index(self, name: str) -> int:
        try:
            return self.ownership.players.index(name)
        except ValueError:
            raise ArenaError(f"unknown player {name!r}") from None


@dataclass(frozen=True)
class Issue:
    kind: str  # "structure", "preference" or "warning"
    message: str

    @property
    def blocking(self) -> bool:
        return self.kind != "warning"

    def __str__(self) -> str:
        return f"[{self.kind}] {self.message}"


def validate(spec: GameSpec) -> list[Issue]:
    """Report every violated invariant.  Warnings (test-only families) do not
    make the spec invalid; see :func:`ensure_valid`."""
    g = spec.graph
    issues: list[Issue] = []
    if g.n == 0:
        return [Issue("structure", "no vertices")]
    for v in range(g.n):
        if not g.succ[v]:
            issues.append(Issue("structure", f"vertex {g.names[v]} is a sink (no outgoing edge)"))
    if not 0 <= g.init < g.n:
        issues.append(Issue("structure", "initial vertex is not a vertex"))
    own = spec.ownership
    if len(own.owner) != g.n:
        issues.append(Issue("structure", "ownership does not cover every vertex"))
    elif any(not 0 <= p < len(own.players) for p in own.owner):
        issues.append(Issue("structure", "a vertex is owned by an undeclared player"))
    if len(set(own.players)) != len(own.players):
        issues.append(Issue("structure", "duplicate player names"))
    if len(spec.prefs) != len(own.players):
        issues.append(Issue("structure", "every player needs exactly one preference"))
    else:
        for a, pref in enumerate(spec.prefs):
            kind = "warning" if pref.test_only else "preference"
            for msg in pref.diagnostics():
                issues.append(Issue(kind, f"player {own.players[a]}: {msg}"))
    return issues


def ensure_valid(spec: GameSpec) -> None:
    bad = [i for i in validate(spec) if i.blocking]
    if bad:
        raise ArenaError("; ".join(map(str, bad)))


# --- lasso runs -------------------------------------------------------------

def _primitive_root(cycle: tuple[int, ...]) -> tuple[int, ...]:
    n = len(cycle)
    for p in range(1, n + 1):
        if n % p == 0 and cycle[:p] * (n // p) == cycle:
            return cycle[:p]
    return cycle


def normalize(stem: Sequence[int], cycle: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Shortest primitive cycle, then shortest stem, same infinite word."""
    stem, cycle = tuple(stem), _primitive_root(tuple(cycle))
    while stem and stem[-1] == cycle[-1]:
        stem = stem[:-1]
        cycle = cycle[-1:] + cycle[:-1]
    return stem, cycle


@dataclass(frozen=True)
class LassoRun:
    """The run ``stem + cycle + cycle + ...``; always kept in normal form."""

    stem: tuple[int, ...]
    cycle: tuple[int, ...]

    def __post_init__(self):
        if not self.cycle:
            raise ArenaError("a lasso needs a nonempty cycle")
        stem, cycle = normalize(self.stem, self.cycle)
        object.__setattr__(self, "stem", stem)
        object.__setattr__(self, "cycle", cycle)

    @property
    def first(self) -> int:
        return self.stem[0] if self.stem else self.cycle[0]

    @property
    def size(self) -> int:
        return len(self.stem) + len(self.cycle)

    def at(self, i: int) -> int:
        if i < len(self.stem):
            return self.stem[i]
        return self.cycle[(i - len(self.stem)) % len(self.cycle)]

    def unroll(self, n: int) -> list[int]:
        return [self.at(i) for i in range(n)]

    def drop_first(self) -> LassoRun:
        """The run without its first vertex."""
        if self.stem:
            return LassoRun(self.stem[1:], self.cycle)
        return LassoRun((), self.cycle[1:] + self.cycle[:1])

    def prefixed(self, history: Sequence[int]) -> LassoRun:
        """``history ^ self``: history ends with the vertex this run starts at."""
        if not history:
            return self
        if history[-1] != self.first:
            raise ArenaError("history does not end where the run starts")
        tail = self.drop_first()
        return LassoRun(tuple(history) + tail.stem, tail.cycle)

    def is_valid(self, graph: GameGraph) -> bool:
        seq = self.stem + self.cycle + self.cycle[:1]
        return graph.is_path(seq)

    def fmt(self, graph: GameGraph) -> str:
        return f"{graph.fmt(self.stem)}:{graph.fmt(self.cycle)}"

    @classmethod
    def parse(cls, text: str, graph: GameGraph) -> LassoRun:
        """Parse the ``stem:cycle`` literal (comma-separated vertex names)."""
        if text.count(":") != 1:
            raise ArenaError(f"lasso literal {text!r} must look like 'stem:cycle'")
        s, c = text.split(":")
        stem = [graph.vertex(x.strip()) for x in s.split(",") if x.strip()]
        cycle = [graph.vertex(x.strip()) for x in c.split(",") if x.strip()]
        run = cls(tuple(stem), tuple(cycle))
        if not run.is_valid(graph):
            raise ArenaError(f"lasso {text!r} does not follow the edges of the graph")
        return run


def lasso_from_trace(trace: Sequence[int], loop_start: int) -> LassoRun:
    return LassoRun(tuple(trace[:loop_start]), tuple(trace[loop_start:]))


# --- strategies -------------------------------------------------------------

StepFn = Callable[[int, int], tuple[int, int]]


@dataclass(frozen=True, eq=False)
class MealyStrategy:
    """Strategic implementation: on arrival at ``v`` with memory ``M`` (the
    content just before arrival) ``step(v, M)`` gives the proposed next
    vertex and the new memory.

    Memory words are ints below ``2**mem_bits``.  ``players`` is a single
    player for ordinary strategies and the whole coalition for punishments.
    Strategies built by the solver also provide ``choose(v, M_after)`` since
    their choice only depends on the updated memory.
    """

    players: tuple[int, ...]
    mem_bits: int
    step_fn: StepFn
    initial_mem: int = 0
    choose_fn: Callable[[int, int], int] | None = None
    label: str = ""
    meta: dict = field(default_factory=dict)

    def step(self, v: int, mem: int) -> tuple[int, int]:
        return self.step_fn(v, mem)

    def choose(self, v: int, mem_after: int) -> int:
        if self.choose_fn is None:
            raise ArenaError("strategy does not expose post-update choices")
        return self.choose_fn(v, mem_after)

    @property
    def owner(self) -> int:
        return self.players[0]

    def with_initial(self, mem: int) -> MealyStrategy:
        return MealyStrategy(self.players, self.mem_bits, self.step_fn, mem, self.choose_fn, self.label, self.meta)

    @classmethod
    def split(cls, players, mem_bits, update: Callable[[int, int], int], choose: Callable[[int, int], int],
              initial_mem: int = 0, label: str = "") -> MealyStrategy:
        """Build from a memory update ``update(M, v)`` and a choice ``choose(v, M')``."""
        def step(v, mem):
            m2 = update(mem, v)
            return choose(v, m2), m2
        return cls(tuple(players), mem_bits, step, initial_mem, choose, label)

    @classmethod
    def positional(cls, players, graph: GameGraph, choice: Mapping[int, int], label: str = "") -> MealyStrategy:
        """Memoryless strategy; vertices missing from ``choice`` take their smallest successor."""
        table = tuple(choice.get(v, graph.succ[v][0]) for v in range(graph.n))
        return cls.split(players, 0, lambda m, v: 0, lambda v, m: table[v], label=label)

    @classmethod
    def from_table(cls, players, graph: GameGraph, mem_bits: int,
                   table: Mapping[tuple[int, int], tuple[int, int]], initial_mem: int = 0) -> MealyStrategy:
        """Tabulated step map.  Pairs absent from the table keep their memory
        and move to the smallest successor, which makes the map total."""
        table = dict(table)

        def step(v, mem):
            hit = table.get((v, mem))
            return hit if hit is not None else (graph.succ[v][0], mem)
        return cls(tuple(players), mem_bits, step, initial_mem, None, "table", {"table": table})


def reachable_pairs(spec: GameSpec, strategy: MealyStrategy, limit: int = 1_000_000) -> list[tuple[int, int]]:
    """(vertex, memory-before-arrival) pairs met along any play from init."""
    graph = spec.graph
    start = (graph.init, strategy.initial_mem)
    seen = {start}
    order = [start]
    queue = deque(order)
    while queue:
        v, mem = queue.popleft()
        choice, m2 = strategy.step(v, mem)
        nexts = [choice] if spec.owner(v) in strategy.players else graph.succ[v]
        for u in nexts:
            if (u, m2) not in seen:
                if len(seen) >= limit:
                    raise ArenaError("strategy state space exceeds the exploration limit")
                seen.add((u, m2))
                order.append((u, m2))
                queue.append((u, m2))
    return order


def check_strategy(spec: GameSpec, strategy: MealyStrategy, exhaustive_bits: int = 10) -> list[str]:
    """Edge-respecting check: all of V x {0,1}^m when m is small, otherwise
    the pairs reachable from init."""
    graph = spec.graph
    problems = []
    if strategy.mem_bits <= exhaustive_bits:
        pairs = [(v, m) for v in range(graph.n) for m in range(1 << strategy.mem_bits)]
    else:
        pairs = reachable_pairs(spec, strategy)
    for v, mem in pairs:
        if spec.owner(v) not in strategy.players:
            continue
        u, m2 = strategy.step(v, mem)
        if not graph.is_edge(v, u):
            problems.append(f"at {graph.names[v]} with memory {mem:0{strategy.mem_bits}b} proposes non-successor {u}")
        if not 0 <= m2 < (1 << strategy.mem_bits) and strategy.mem_bits:
            problems.append(f"at {graph.names[v]} memory update leaves {strategy.mem_bits} bits")
    return problems


def _machines(profile: Mapping[int, MealyStrategy]) -> tuple[list[MealyStrategy], dict[int, int]]:
    machines: list[MealyStrategy] = []
    slot: dict[int, int] = {}
    ids: dict[int, int] = {}
    for player, strat in profile.items():
        if id(strat) not in ids:
            ids[id(strat)] = len(machines)
            machines.append(strat)
        slot[player] = ids[id(strat)]
    return machines, slot


def simulate(spec: GameSpec, profile: Mapping[int, MealyStrategy], start: int | None = None,
             mems: Sequence[int] | None = None) -> LassoRun:
    """Run the strategies jointly from ``start`` until the joint state repeats.

    A strategy object shared by several players (a coalition) is stepped
    once per vertex.  ``mems`` overrides the initial memories, in the order
    the distinct machines first appear in ``profile``.
    """
    graph = spec.graph
    machines, slot = _machines(profile)
    v = graph.init if start is None else start
    cur = tuple(m.initial_mem for m in machines) if mems is None else tuple(mems)
    seen: dict[tuple, int] = {}
    trace: list[int] = []
    while (v, cur) not in seen:
        seen[(v, cur)] = len(trace)
        trace.append(v)
        steps = [m.step(v, mem) for m, mem in zip(machines, cur)]
        owner = spec.owner(v)
        if owner not in slot:
            raise ArenaError(f"no strategy for player {spec.ownership.players[owner]}")
        nxt = steps[slot[owner]][0]
        if not graph.is_edge(v, nxt):
            word = cur[slot[owner]]
            bits = machines[slot[owner]].mem_bits
            raise ArenaError(
                f"strategy of {spec.ownership.players[owner]} proposes non-successor at vertex "
                f"{graph.names[v]} with memory {word:0{bits}b}" if bits else
                f"strategy of {spec.ownership.players[owner]} proposes non-successor at vertex {graph.names[v]}")
        cur = tuple(s[1] for s in steps)
        v = nxt
    return lasso_from_trace(trace, seen[(v, cur)])


def play(spec: GameSpec, profile: Mapping[int, MealyStrategy]) -> LassoRun:
    """The run induced by one strategy per player, as a normalized lasso."""
    missing = [p for p in spec.players if p not in profile]
    if missing:
        raise ArenaError(f"profile lacks strategies for {[spec.ownership.players[p] for p in missing]}")
    return simulate(spec, profile)


def memory_after(strategy: MealyStrategy, history: Sequence[int], mem: int | None = None) -> int:
    mem = strategy.initial_mem if mem is None else mem
    for v in history:
        mem = strategy.step(v, mem)[1]
    return mem


def shift(strategy: MealyStrategy, history: Sequence[int], graph: GameGraph | None = None) -> MealyStrategy:
    """Same step map, initial memory replaced by the memory after ``history``."""
    if graph is not None:
        graph.check_history(history)
    return strategy.with_initial(memory_after(strategy, history))


# --- restricted arenas ------------------------------------------------------

@dataclass
class Restriction:
    """Product of the graph with the memories of some fixed strategies.

    State ``i`` stands for ``labels[i] = (vertex, memories)`` with memories
    taken just before arrival at the vertex.  ``owner[i]`` is the owning
    player, or None where a fixed strategy decides (single successor).
    """

    labels: list[tuple[int, tuple[int, ...]]]
    succ: list[list[int]]
    owner: list[int | None]
    init: int = 0

    @property
    def size(self) -> int:
        return len(self.labels)

    def vertex(self, i: int) -> int:
        return self.labels[i][0]

    def as_game_graph(self, graph: GameGraph) -> GameGraph:
        names = tuple(f"{graph.names[v]}|{','.join(map(str, mems))}" for v, mems in self.labels)
        return GameGraph(names, tuple(tuple(sorted(s)) for s in self.succ), self.init)


def explore_restriction(spec: GameSpec, fixed: Mapping[int, MealyStrategy], start: int | None = None,
                        mems: Sequence[int] | None = None, limit: int = 2_000_000) -> Restriction:
    graph = spec.graph
    machines, slot = _machines(fixed)
    v0 = graph.init if start is None else start
    m0 = tuple(m.initial_mem for m in machines) if mems is None else tuple(mems)
    index = {(v0, m0): 0}
    labels = [(v0, m0)]
    succ: list[list[int]] = []
    owner: list[int | None] = []
    i = 0
    while i < len(labels):
        v, cur = labels[i]
        steps = [m.step(v, mem) for m, mem in zip(machines, cur)]
        nmem = tuple(s[1] for s in steps)
        p = spec.owner(v)
        if p in slot:
            nxt = steps[slot[p]][0]
            if not graph.is_edge(v, nxt):
                raise ArenaError(f"fixed strategy proposes non-successor at {graph.names[v]}")
            targets = [nxt]
            owner.append(None)
        else:
            targets = list(graph.succ[v])
            owner.append(p)
        out = []
        for u in targets:
            key = (u, nmem)
            j = index.get(key)
            if j is None:
                if len(labels) >= limit:
                    raise ArenaError("restricted arena exceeds the exploration limit")
                j = index[key] = len(labels)
                labels.append(key)
            out.append(j)
        succ.append(out)
        i += 1
    return Restriction(labels, succ, owner)


def restrict(spec: GameSpec, fixed: Mapping[int, MealyStrategy]) -> Restriction:
    """Arena left to the players not in ``fixed`` once the others are fixed."""
    return explore_restriction(spec, fixed)


def restriction_path(r: Restriction) -> LassoRun | None:
    """The unique run when every state has a single successor, else None."""
    if any(len(s) != 1 for s in r.succ):
        return None
    seen: dict[int, int] = {}
    trace = []
    i = r.init
    while i not in seen:
        seen[i] = len(trace)
        trace.append(r.vertex(i))
        i = r.succ[i][0]
    return lasso_from_trace(trace, seen[i])
