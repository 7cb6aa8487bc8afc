"""Guarantee-realizing composed strategies and Nash equilibrium assembly.

A composed strategy keeps three registers: the piece of the history so
far, the index (a piece) of the local strategy currently followed and that
strategy's memory.  Registers are packed into one memory word as
``piece | index << w | local << 2w`` with ``w = ceil(log2 k)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

from .arena import GameSpec, LassoRun, MealyStrategy, ceil_log2, play
from .guarantees import GuaranteeTable, build_table, realizes_guarantee
from .preferences import EnergyParity
from .threshold import measure_uniform_memory

log = logging.getLogger(__name__)


class SynthesisError(RuntimeError):
    pass


class ComposedStrategy:
    def __init__(self, spec: GameSpec, player: int, table: GuaranteeTable):
        self.spec = spec
        self.player = player
        self.pieces = spec.prefs[player].pieces
        self.k = self.pieces.k
        self.w = ceil_log2(self.k)
        self.locals: dict[int, MealyStrategy] = {j: table[(player, j)].realizing for j in self.pieces.consumed()}
        self.local_bits = max((s.mem_bits for s in self.locals.values()), default=0)
        self.mem_bits = self.local_bits + 2 * self.w
        self.initial_mem = self.pack(self.pieces.start, self.pieces.after_init(), 0)
        self.switches: set[tuple[int, int, int]] = set()  # (piece, from, to)
        self._cache: dict[tuple[int, int], int] = {}
        self.machine = MealyStrategy((player,), self.mem_bits, self.step, self.initial_mem, self.choose,
                                     label=f"composed[{spec.ownership.players[player]}]")

    def pack(self, piece: int, index: int, local: int) -> int:
        return piece | index << self.w | local << 2 * self.w

    def unpack(self, mem: int) -> tuple[int, int, int]:
        mask = (1 << self.w) - 1
        return mem & mask, (mem >> self.w) & mask, mem >> 2 * self.w

    def _realizes(self, index: int, local: int, piece: int) -> bool:
        return realizes_guarantee(self.spec, self.player, self.locals[index], local, piece)

    def update(self, mem: int, v: int) -> int:
        hit = self._cache.get((mem, v))
        if hit is not None:
            return hit
        piece, index, local = self.unpack(mem)
        nxt = self.pieces.delta(piece, v)
        if self._realizes(index, local, nxt):
            new = (index, self.locals[index].step(v, local)[1])
        else:
            for cand in self.pieces.consumed():
                if self._realizes(cand, 0, nxt):
                    new = (cand, self.locals[cand].step(v, 0)[1])
                    self.switches.add((nxt, index, cand))
                    log.debug("player %s switches from %s to %s at piece %s", self.player, index, cand, nxt)
                    break
            else:
                raise SynthesisError(
                    f"no local strategy realizes the guarantee of player {self.spec.ownership.players[self.player]} "
                    f"at piece {self.pieces.label(nxt)}; the preference violates the construction's conditions")
        out = self.pack(nxt, *new)
        self._cache[(mem, v)] = out
        return out

    def choose(self, v: int, mem: int) -> int:
        _, index, local = self.unpack(mem)
        return self.locals[index].choose(v, local)

    def step(self, v: int, mem: int) -> tuple[int, int]:
        m2 = self.update(mem, v)
        return self.choose(v, m2), m2

    def index_at(self, mem: int) -> int:
        return self.unpack(mem)[1]


def compose_guarantee_strategy(spec: GameSpec, player: int, table: GuaranteeTable | None = None) -> ComposedStrategy:
    return ComposedStrategy(spec, player, table or build_table(spec))


class EquilibriumMachine:
    """Player ``a``'s strategy in the equilibrium profile.

    Memory word: the low bit flags punishment.  Without it the payload holds
    every player's composed memory; with it, the deviator, the piece at
    which the deviation happened and the punishing strategy's memory.
    """

    def __init__(self, spec: GameSpec, player: int, composed: Mapping[int, ComposedStrategy],
                 table: GuaranteeTable):
        self.spec = spec
        self.player = player
        self.composed = composed
        self.table = table
        order = sorted(composed)
        self.offsets = {}
        off = 0
        for b in order:
            self.offsets[b] = off
            off += composed[b].mem_bits
        self.path_bits = off
        self.dev_bits = ceil_log2(len(order))
        self.piece_bits = max(c.w for c in composed.values())
        self.pun_mem_bits = max((table[(b, j)].punishing.mem_bits for b in order
                                 for j in composed[b].pieces.consumed()), default=0)
        pun_bits = self.dev_bits + self.piece_bits + self.pun_mem_bits
        self.mem_bits = 1 + max(self.path_bits, pun_bits)
        init = 0
        for b in order:
            init |= composed[b].initial_mem << self.offsets[b]
        self.machine = MealyStrategy((player,), self.mem_bits, self.step, init << 1,
                                     label=f"ne[{spec.ownership.players[player]}]")

    def _field(self, payload: int, b: int) -> int:
        return (payload >> self.offsets[b]) & ((1 << self.composed[b].mem_bits) - 1)

    def _punishing(self, b: int, piece: int) -> MealyStrategy:
        return self.table[(b, piece)].punishing

    def step(self, v: int, mem: int) -> tuple[int, int]:
        spec = self.spec
        payload = mem >> 1
        if mem & 1:
            b = payload & ((1 << self.dev_bits) - 1)
            piece = (payload >> self.dev_bits) & ((1 << self.piece_bits) - 1)
            pmem = payload >> (self.dev_bits + self.piece_bits)
            return self._punish(b, piece, pmem, v)
        deviator = None
        for b, c in self.composed.items():
            piece, _, _ = c.unpack(self._field(payload, b))
            if piece == c.pieces.start:
                continue
            u = c.pieces.last_vertex(piece)
            owner = spec.owner(u)
            if owner == b:
                predicted = c.choose(u, self._field(payload, b))
                if predicted != v and owner != self.player:
                    deviator = (b, piece, u)
                break
        if deviator is not None:
            b, piece, u = deviator
            pmem = self._punishing(b, piece).step(u, 0)[1]
            return self._punish(b, piece, pmem, v)
        new = 0
        for b, c in self.composed.items():
            new |= c.update(self._field(payload, b), v) << self.offsets[b]
        choice = self.composed[self.player].choose(v, self._field(new, self.player))
        return choice, new << 1

    def _punish(self, b: int, piece: int, pmem: int, v: int) -> tuple[int, int]:
        strat = self._punishing(b, piece)
        choice, pmem2 = strat.step(v, pmem)
        if self.spec.owner(v) == b or not self.spec.graph.is_edge(v, choice):
            choice = self.spec.graph.succ[v][0]
        payload = b | piece << self.dev_bits | pmem2 << (self.dev_bits + self.piece_bits)
        return choice, payload << 1 | 1


@dataclass
class EquilibriumProfile:
    spec: GameSpec
    strategies: dict[int, MealyStrategy]
    composed: dict[int, ComposedStrategy]
    induced: LassoRun
    m: int
    k: int
    table: GuaranteeTable = field(repr=False)

    @property
    def bound(self) -> int:
        return memory_bound(len(self.strategies), self.m, self.k)

    @property
    def used_bits(self) -> dict[int, int]:
        return {a: s.mem_bits for a, s in self.strategies.items()}

    @property
    def bound_ok(self) -> bool:
        return max(self.used_bits.values()) <= self.bound


def memory_bound(players: int, m: int, k: int) -> int:
    return players * (m + 2 * ceil_log2(k)) + 1


def energy_bound(players: int, n: int, cap: int, weight: int) -> int:
    """Closed-form memory bound for bounded energy parity games, ceil(log2) throughout."""
    return (1 + players * n * cap ** players * ceil_log2(2 * n * weight)
            + (players ** 2 + players) * ceil_log2(n * cap))


def synthesize_ne(spec: GameSpec) -> EquilibriumProfile:
    table = build_table(spec)
    composed = {a: ComposedStrategy(spec, a, table) for a in spec.players}
    induced = play(spec, {a: c.machine for a, c in composed.items()})
    machines = {a: EquilibriumMachine(spec, a, composed, table).machine for a in spec.players}
    m = max(measure_uniform_memory(spec, a) for a in spec.players)
    k = max(c.k for c in composed.values())
    return EquilibriumProfile(spec, machines, composed, induced, m, k, table)


def memory_report(profile: EquilibriumProfile) -> dict:
    spec = profile.spec
    used = profile.used_bits
    report = {
        "players": {spec.ownership.players[a]: used[a] for a in sorted(used)},
        "m": profile.m,
        "k": profile.k,
        "bound": profile.bound,
        "max_used": max(used.values()),
        "margin": profile.bound - max(used.values()),
        "bound_ok": profile.bound_ok,
    }
    if all(isinstance(p, EnergyParity) for p in spec.prefs):
        n = spec.graph.n
        cap = max(p.cap for p in spec.prefs)
        weight = max(max(abs(d) for d in p.deltas) for p in spec.prefs) or 1
        eb = energy_bound(len(spec.prefs), n, cap, weight)
        report["energy_bound"] = eb
        report["energy_ok"] = report["max_used"] <= eb
    return report


def composed_profile(profile: EquilibriumProfile) -> dict[int, MealyStrategy]:
    return {a: c.machine for a, c in profile.composed.items()}


def on_path_switches(profile: EquilibriumProfile) -> dict[int, int]:
    """Local-strategy changes of every composed strategy along the induced run,
    counted over the stem and two turns of the cycle."""
    run = profile.induced
    hist = list(run.stem) + list(run.cycle) * 2
    out = {}
    for a, c in profile.composed.items():
        mem = c.initial_mem
        count = 0
        for v in hist:
            before = c.index_at(mem)
            mem = c.update(mem, v)
            count += c.index_at(mem) != before
        out[a] = count
    return out
