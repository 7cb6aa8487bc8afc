"""Best future guarantees per player and piece."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .arena import ArenaError, GameSpec, LassoRun, MealyStrategy, simulate
from .preferences import evaluate
from .threshold import (accepting_run, anchor_of, coalition_of, solve_threshold_outcome,
                        threshold_automaton)


@dataclass(frozen=True)
class GuaranteeEntry:
    player: int
    piece: int
    min_outcome: object
    witness: LassoRun
    realizing: MealyStrategy
    punishing: MealyStrategy

    def describe(self, spec: GameSpec) -> dict:
        pref = spec.prefs[self.player]
        return {"player": spec.ownership.players[self.player], "piece": pref.pieces.label(self.piece),
                "min_outcome": _show(self.min_outcome), "witness": self.witness.fmt(spec.graph),
                "realizing_bits": self.realizing.mem_bits, "punishing_bits": self.punishing.mem_bits}


def _show(o):
    return list(map(_show, o)) if isinstance(o, tuple) else (o if isinstance(o, (bool, int)) else str(o))


def canonical_piece(spec: GameSpec, player: int, piece: int) -> int:
    """The start piece stands for the piece reached after the initial vertex."""
    pa = spec.prefs[player].pieces
    return pa.after_init() if piece == pa.start else piece


def _smallest_positional(spec: GameSpec, players) -> MealyStrategy:
    return MealyStrategy.positional(tuple(players), spec.graph, {}, label="smallest")


@lru_cache(maxsize=1024)
def guarantee_entry(spec: GameSpec, player: int, piece: int) -> GuaranteeEntry:
    piece = canonical_piece(spec, player, piece)
    pref = spec.prefs[player]
    classes = pref.classes()
    best = 0
    realizing = _smallest_positional(spec, (player,))
    # the best class whose predecessor threshold the protagonist still beats
    for j in range(len(classes) - 1, 0, -1):
        sol = solve_threshold_outcome(spec, player, piece, classes[j - 1])
        if sol.protagonist_wins:
            best, realizing = j, sol.strategy
            break
    pun = solve_threshold_outcome(spec, player, piece, classes[best])
    if pun.protagonist_wins:
        raise ArenaError("threshold games are not monotone; outcome classes are misordered")
    punishing = pun.strategy
    profile = {player: realizing}
    profile.update({c: punishing for c in coalition_of(spec, player)})
    witness = simulate(spec, profile, start=anchor_of(spec, player, piece))
    return GuaranteeEntry(player, piece, classes[best], witness, realizing, punishing)


def best_outcome(spec: GameSpec, player: int, piece: int) -> tuple[object, LassoRun]:
    e = guarantee_entry(spec, player, piece)
    return e.min_outcome, e.witness


def realizing_strategy(spec: GameSpec, player: int, piece: int) -> MealyStrategy:
    return guarantee_entry(spec, player, piece).realizing


def punishment_strategy(spec: GameSpec, player: int, piece: int) -> MealyStrategy:
    return guarantee_entry(spec, player, piece).punishing


@lru_cache(maxsize=100_000)
def realizes_guarantee(spec: GameSpec, player: int, strategy: MealyStrategy, memory: int, piece: int) -> bool:
    """Whether ``strategy``, holding ``memory`` just before arriving at the
    piece's last vertex, keeps every continuation at or above the piece's
    minimal guaranteed outcome."""
    pref = spec.prefs[player]
    classes = pref.classes()
    low = classes.index(guarantee_entry(spec, player, piece).min_outcome)
    if low == 0:
        return True
    below = threshold_automaton(spec, player, piece, classes[low - 1]).complement()
    g = spec.graph

    def successors(state):
        v, m = state
        nxt, m2 = strategy.step(v, m)
        targets = [nxt] if spec.owner(v) == player else g.succ[v]
        return [(u, m2) for u in targets]
    start = (anchor_of(spec, player, piece), memory)
    return accepting_run(spec, start, successors, lambda s: s[0], below) is None


@dataclass
class GuaranteeTable:
    spec: GameSpec
    entries: dict[tuple[int, int], GuaranteeEntry]

    def __getitem__(self, key: tuple[int, int]) -> GuaranteeEntry:
        player, piece = key
        canon = canonical_piece(self.spec, player, piece)
        if (player, canon) not in self.entries:
            raise KeyError(f"no guarantee for player {player} at unreachable piece {piece}")
        return self.entries[(player, canon)]

    def rows(self) -> list[dict]:
        return [e.describe(self.spec) for _, e in sorted(self.entries.items(), key=lambda kv: kv[0])]


def build_table(spec: GameSpec, players=None) -> GuaranteeTable:
    players = spec.players if players is None else players
    entries = {}
    for a in players:
        for piece in spec.prefs[a].pieces.consumed():
            entries[(a, piece)] = guarantee_entry(spec, a, piece)
    return GuaranteeTable(spec, entries)


def witness_outcome(spec: GameSpec, entry: GuaranteeEntry):
    return evaluate(spec.prefs[entry.player], entry.piece, entry.witness)
