"""One-vs-all threshold games solved as parity games on a product arena.

Product states pair a state of some base arena (a graph vertex, or a vertex
plus the memory of fixed strategies) with the state of a parity automaton
after reading that vertex.  Player 0 is the protagonist and wins when the
least priority seen infinitely often is even.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Hashable, Sequence

import networkx as nx

from .arena import ArenaError, GameSpec, LassoRun, MealyStrategy, ceil_log2
from .preferences import PRE, ParityAutomaton, evaluate, tracker_state

PROTAGONIST, COALITION = "protagonist", "coalition"


@dataclass
class ParityArena:
    labels: list[tuple[Hashable, Hashable]]  # (base state, automaton state)
    succ: list[list[int]]
    owner: list[int]  # 0 protagonist, 1 coalition
    priority: list[int]
    vertex: list[int]
    init: int = 0

    @property
    def size(self) -> int:
        return len(self.labels)

    def lasso(self, stem: Sequence[int], cycle: Sequence[int]) -> LassoRun:
        return LassoRun(tuple(self.vertex[s] for s in stem), tuple(self.vertex[s] for s in cycle))


def build_product(start: Hashable, successors: Callable[[Hashable], Sequence[Hashable]],
                  vertex_of: Callable[[Hashable], int], side_of: Callable[[Hashable], int],
                  automaton: ParityAutomaton, limit: int = 2_000_000) -> ParityArena:
    first = (start, automaton.step(automaton.init, vertex_of(start)))
    index = {first: 0}
    arena = ParityArena([first], [], [], [], [])
    i = 0
    while i < len(arena.labels):
        b, d = arena.labels[i]
        v = vertex_of(b)
        arena.vertex.append(v)
        arena.owner.append(side_of(b))
        arena.priority.append(automaton.priority(d))
        out = []
        for b2 in successors(b):
            key = (b2, automaton.step(d, vertex_of(b2)))
            j = index.get(key)
            if j is None:
                if len(arena.labels) >= limit:
                    raise ArenaError("product arena exceeds the exploration limit")
                j = index[key] = len(arena.labels)
                arena.labels.append(key)
            out.append(j)
        arena.succ.append(out)
        i += 1
    return arena


# --- solvers -----------------------------------------------------------------

@dataclass
class ParitySolution:
    regions: tuple[set[int], set[int]]
    strategy: dict[int, int]  # state -> successor, for states owned by their region's winner

    def winner(self, state: int) -> int:
        return 0 if state in self.regions[0] else 1


def _attractor(arena: ParityArena, pred, nodes: set[int], target: set[int], player: int):
    rank = {t: 0 for t in target}
    count = {}
    queue = deque(sorted(target))
    while queue:
        u = queue.popleft()
        for v in pred[u]:
            if v not in nodes or v in rank:
                continue
            if arena.owner[v] == player:
                rank[v] = rank[u] + 1
                queue.append(v)
            else:
                if v not in count:
                    count[v] = sum(1 for w in arena.succ[v] if w in nodes)
                count[v] -= 1
                if count[v] == 0:
                    rank[v] = rank[u] + 1
                    queue.append(v)
    strat = {}
    for v, r in rank.items():
        if r > 0 and arena.owner[v] == player:
            strat[v] = min(w for w in arena.succ[v] if w in rank and rank[w] < r)
    return set(rank), strat


def solve_parity(arena: ParityArena) -> ParitySolution:
    """Zielonka's recursive algorithm; ties go to the smallest state index."""
    pred: list[list[int]] = [[] for _ in range(arena.size)]
    for v, out in enumerate(arena.succ):
        for w in out:
            pred[w].append(v)
    for p in pred:
        p.sort()

    def solve(nodes: set[int]):
        if not nodes:
            return (set(), set()), {}
        p = min(arena.priority[v] for v in nodes)
        i = p % 2
        top = {v for v in nodes if arena.priority[v] == p}
        a, sa = _attractor(arena, pred, nodes, top, i)
        sub, st1 = solve(nodes - a)
        if not sub[1 - i]:
            strat = {v: w for v, w in st1.items() if arena.owner[v] == i}
            strat.update(sa)
            for v in sorted(top):
                if arena.owner[v] == i:
                    strat[v] = min(w for w in arena.succ[v] if w in nodes)
            regions = [set(), set()]
            regions[i] = set(nodes)
            return tuple(regions), strat
        b, sb = _attractor(arena, pred, nodes, sub[1 - i], 1 - i)
        sub2, st2 = solve(nodes - b)
        strat = dict(st2)
        strat.update({v: w for v, w in st1.items() if v in sub[1 - i] and arena.owner[v] == 1 - i})
        strat.update(sb)
        regions = [None, None]
        regions[1 - i] = sub2[1 - i] | b
        regions[i] = sub2[i]
        return tuple(regions), strat

    regions, strat = solve(set(range(arena.size)))
    return ParitySolution(regions, strat)


def _reachable(succ: Sequence[Sequence[int]], init: int) -> list[int]:
    seen = {init}
    order = [init]
    queue = deque(order)
    while queue:
        v = queue.popleft()
        for w in succ[v]:
            if w not in seen:
                seen.add(w)
                order.append(w)
                queue.append(w)
    return order


def _bfs_path(succ, src: int, dst: int, allowed=None) -> list[int] | None:
    """Shortest path ``src .. dst`` with at least one edge."""
    parent: dict[int, int] = {}
    queue = deque([src])
    while queue:
        v = queue.popleft()
        for w in succ[v]:
            if (allowed is None or w in allowed) and w not in parent:
                parent[w] = v
                if w == dst:
                    path = [w]
                    while True:
                        w = parent[w]
                        path.append(w)
                        if w == src:
                            return path[::-1]
                queue.append(w)
    return None


def find_lasso(succ: Sequence[Sequence[int]], priority: Sequence[int], init: int,
               parity: int = 0) -> tuple[list[int], list[int]] | None:
    """A reachable cycle whose least priority has the given parity, as
    ``(stem, cycle)`` state lists, or None."""
    reach = _reachable(succ, init)
    for p in sorted({priority[s] for s in reach if priority[s] % 2 == parity}):
        keep = [s for s in reach if priority[s] >= p]
        keep_set = set(keep)
        g = nx.DiGraph()
        g.add_nodes_from(keep)
        g.add_edges_from((s, t) for s in keep for t in succ[s] if t in keep_set)
        comps = sorted((sorted(c) for c in nx.strongly_connected_components(g)), key=lambda c: c[0])
        for comp in comps:
            if len(comp) == 1 and not g.has_edge(comp[0], comp[0]):
                continue
            hits = [s for s in comp if priority[s] == p]
            if not hits:
                continue
            t = hits[0]
            cyc = _bfs_path(succ, t, t, set(comp))
            stem = [] if t == init else _bfs_path(succ, init, t)[:-1]
            return stem, cyc[:-1]
    return None


def certificate_ok(arena: ParityArena, sol: ParitySolution, state: int | None = None) -> bool:
    """With the winner's strategy fixed, no reachable cycle is won by the loser."""
    s0 = arena.init if state is None else state
    w = sol.winner(s0)
    region = sol.regions[w]
    succ = [[sol.strategy[v]] if (arena.owner[v] == w and v in region) else arena.succ[v]
            for v in range(arena.size)]
    if any(arena.owner[v] == w and v in region and v not in sol.strategy for v in range(arena.size)):
        return False
    return find_lasso(succ, arena.priority, s0, parity=1 - w) is None


# --- threshold games ---------------------------------------------------------

def horizon(spec: GameSpec, player: int) -> int:
    """Lasso size up to which counter-based threshold automata are exact."""
    return max(8, spec.prefs[player].pieces.k)


def anchor_of(spec: GameSpec, player: int, piece: int) -> int:
    pref = spec.prefs[player]
    return pref.last_vertex(tracker_state(pref, piece))


def coalition_of(spec: GameSpec, player: int) -> tuple[int, ...]:
    return tuple(p for p in spec.players if p != player)


@dataclass
class ThresholdGame:
    spec: GameSpec
    protagonist: int
    piece: int
    outcome: object
    automaton: ParityAutomaton
    arena: ParityArena
    threshold: LassoRun | None = None

    @property
    def coalition(self) -> tuple[int, ...]:
        return coalition_of(self.spec, self.protagonist)


def threshold_automaton(spec: GameSpec, player: int, piece: int, outcome) -> ParityAutomaton:
    pref = spec.prefs[player]
    return pref.above(tracker_state(pref, piece), outcome, horizon(spec, player))


def graph_product(spec: GameSpec, player: int, anchor: int, automaton: ParityAutomaton) -> ParityArena:
    g = spec.graph
    return build_product(anchor, lambda v: g.succ[v], lambda v: v,
                         lambda v: 0 if spec.owner(v) == player else 1, automaton)


def build_threshold_outcome(spec: GameSpec, player: int, piece: int, outcome) -> ThresholdGame:
    aut = threshold_automaton(spec, player, piece, outcome)
    arena = graph_product(spec, player, anchor_of(spec, player, piece), aut)
    return ThresholdGame(spec, player, piece, outcome, aut, arena)


def build_threshold(spec: GameSpec, player: int, piece: int, threshold: LassoRun) -> ThresholdGame:
    anchor = anchor_of(spec, player, piece)
    if threshold.first != anchor:
        raise ArenaError(f"threshold starts at {spec.graph.names[threshold.first]}, "
                         f"the piece ends at {spec.graph.names[anchor]}")
    game = build_threshold_outcome(spec, player, piece, evaluate(spec.prefs[player], piece, threshold))
    game.threshold = threshold
    return game


@dataclass
class ThresholdSolution:
    winner: str
    strategy: MealyStrategy
    mem_bits_used: int
    mem_bits_raw: int
    certified: bool
    game: ThresholdGame = field(repr=False)
    solution: ParitySolution = field(repr=False)

    @property
    def protagonist_wins(self) -> bool:
        return self.winner == PROTAGONIST


def lift_strategy(game: ThresholdGame, sol: ParitySolution, side: int) -> tuple[MealyStrategy, int, int]:
    """Mealy strategy on the graph whose memory is the automaton state.

    Returns the strategy, the bits it actually needs (0 when its choices on
    the reachable part depend on the vertex only) and the raw bits."""
    arena, aut, spec = game.arena, game.automaton, game.spec
    players = (game.protagonist,) if side == 0 else game.coalition
    dstates: list = [PRE]
    didx = {PRE: 0}
    for _, d in arena.labels:
        if d not in didx:
            didx[d] = len(dstates)
            dstates.append(d)
    region = sol.regions[side]
    table = {}
    for s in range(arena.size):
        if arena.owner[s] == side and s in region:
            v, d = arena.labels[s]
            table[(v, didx[d])] = arena.vertex[sol.strategy[s]]
    raw = ceil_log2(len(dstates))

    # reachable part under the strategy
    positional: dict[int, int] = {}
    factors = True
    seen = {arena.init}
    queue = deque([arena.init])
    while queue:
        s = queue.popleft()
        if arena.owner[s] == side and s in region:
            nxt = [sol.strategy[s]]
            v, w = arena.vertex[s], arena.vertex[sol.strategy[s]]
            if positional.setdefault(v, w) != w:
                factors = False
        else:
            nxt = arena.succ[s]
        for t in nxt:
            if t not in seen:
                seen.add(t)
                queue.append(t)
    label = f"{'win' if side == 0 else 'punish'}[{game.protagonist}:{game.piece}>{game.outcome}]"
    if not factors:
        found = positional_winner(arena, spec.graph, side)
        if found is not None:
            positional, factors = found, True
    if factors:
        return MealyStrategy.positional(players, spec.graph, positional, label), 0, raw
    g = spec.graph

    def update(mem, v):
        return didx.get(aut.step(dstates[mem], v), 0)

    def choose(v, mem):
        return table.get((v, mem), g.succ[v][0])
    return MealyStrategy.split(players, raw, update, choose, 0, label), raw, raw


def positional_winner(arena: ParityArena, graph, side: int, cap: int = 4096) -> dict[int, int] | None:
    """A memoryless choice per graph vertex winning for ``side`` from the
    initial state, found by exhaustive search when there are at most ``cap``
    candidates."""
    owned = sorted({arena.vertex[s] for s in range(arena.size) if arena.owner[s] == side})
    options = [graph.succ[v] for v in owned]
    if math.prod(len(o) for o in options) > cap:
        return None
    for combo in itertools.product(*options):
        choice = dict(zip(owned, combo))
        succ = [[t for t in arena.succ[s] if arena.vertex[t] == choice[arena.vertex[s]]]
                if arena.owner[s] == side else arena.succ[s] for s in range(arena.size)]
        if find_lasso(succ, arena.priority, arena.init, 1 - side) is None:
            return choice
    return None


def solve_game(game: ThresholdGame) -> ThresholdSolution:
    sol = solve_parity(game.arena)
    side = sol.winner(game.arena.init)
    strat, used, raw = lift_strategy(game, sol, side)
    return ThresholdSolution(PROTAGONIST if side == 0 else COALITION, strat, used, raw,
                             certificate_ok(game.arena, sol), game, sol)


def solve_threshold(spec: GameSpec, player: int, piece: int, threshold: LassoRun) -> ThresholdSolution:
    return solve_game(build_threshold(spec, player, piece, threshold))


@lru_cache(maxsize=4096)
def solve_threshold_outcome(spec: GameSpec, player: int, piece: int, outcome) -> ThresholdSolution:
    """Threshold game "strictly better than ``outcome``" (None: any run)."""
    return solve_game(build_threshold_outcome(spec, player, piece, outcome))


@lru_cache(maxsize=256)
def measure_uniform_memory(spec: GameSpec, player: int) -> int:
    """Largest number of bits used by a winning strategy over all pieces and
    outcome-class thresholds of ``player``."""
    pref = spec.prefs[player]
    m = 0
    for piece in pref.pieces.consumed():
        for o in pref.classes():
            m = max(m, solve_threshold_outcome(spec, player, piece, o).mem_bits_used)
    return m


def accepting_run(spec: GameSpec, start: Hashable, successors, vertex_of, automaton: ParityAutomaton
                  ) -> LassoRun | None:
    """Some run of the base arena accepted by ``automaton`` (one-player search)."""
    arena = build_product(start, successors, vertex_of, lambda b: 0, automaton)
    found = find_lasso(arena.succ, arena.priority, arena.init, 0)
    return None if found is None else arena.lasso(*found)
