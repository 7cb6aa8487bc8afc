"""Preference families over runs, piece automata and threshold automata.

A preference is evaluated on lasso runs.  Every family carries a *tracker*:
a deterministic automaton over vertices whose states are the pieces of
histories (histories that lead to the same tracker state compare their
continuations identically).  Outcomes are plain Python values ordered by
``<``; two runs are indifferent iff their outcomes are equal.

Threshold automata are deterministic parity automata with the convention
that the least priority seen infinitely often must be even.  They read a
run of the future game starting with its anchor vertex.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, Hashable, Iterable, Sequence

from .arena import ArenaError, GameGraph, LassoRun

START = None  # tracker state before anything was read
DEAD = -1  # energy level / counter value once the lower bound was crossed
PRE = "pre"  # threshold automaton state before the anchor vertex

FAMILIES = ("parity", "muller-rank", "energy-parity", "mean-payoff", "mean-payoff-blocks",
            "reach-then-mp", "count")


class PreferenceError(ValueError):
    pass


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise PreferenceError(f"use exact rationals ('p/q' strings), not floats: {x!r}")
    return Fraction(str(x))


def _frac_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def run_tracker(track: Callable, q: Hashable, run: LassoRun) -> list:
    """Tracker states visited infinitely often when reading ``run`` from ``q``."""
    for v in run.stem:
        q = track(q, v)
    first_seen: dict[Hashable, int] = {}
    blocks: list[list] = []
    while q not in first_seen:
        first_seen[q] = len(blocks)
        block = []
        for v in run.cycle:
            q = track(q, v)
            block.append(q)
        blocks.append(block)
    return [s for b in blocks[first_seen[q]:] for s in b]


# --- acceptance conditions layered on top of a tracker -----------------------

class Condition:
    """Extra state ``x`` updated after the tracker, with a priority map."""

    init: Hashable = 0

    def step(self, x, t, v):
        return x

    def priority(self, t, x) -> int:
        raise NotImplementedError


class Universal(Condition):
    def priority(self, t, x):
        return 0


class Empty(Condition):
    def priority(self, t, x):
        return 1


class ByTracker(Condition):
    """Priority read off the tracker state alone."""

    def __init__(self, fn: Callable[[Any], int]):
        self.fn = fn

    def priority(self, t, x):
        return self.fn(t)


class Counters(Condition):
    """Saturating energy counters, one per weight vector, plus a verdict.

    Each counter starts at ``B``, is capped at ``2B`` and dies below 0.
    A lasso whose stem plus cycle has at most ``B / max|w|`` vertices keeps
    a counter alive iff the cycle's weight sum is nonnegative.
    """

    def __init__(self, weights: Sequence[Sequence[int]], bound: int, verdict: Callable[[Any, tuple], int]):
        self.weights = [tuple(w) for w in weights]
        self.bound = bound
        self.cap = 2 * bound
        self.verdict = verdict
        self.init = tuple(bound for _ in weights)

    def step(self, x, t, v):
        out = []
        for c, w in zip(x, self.weights):
            if c != DEAD:
                c = min(self.cap, c + w[v])
                if c < 0:
                    c = DEAD
            out.append(c)
        return tuple(out)

    def priority(self, t, x):
        return self.verdict(t, tuple(c != DEAD for c in x))


class ParityAutomaton:
    """Deterministic parity automaton over the runs of a future game."""

    def __init__(self, pref: Preference, q: Hashable, cond: Condition, shift: int = 0, label: str = ""):
        self.pref = pref
        self.q = q
        self.cond = cond
        self.shift = shift
        self.label = label
        self.init = PRE

    def step(self, state, v: int):
        if state == PRE:
            return (self.q, self.cond.init)
        t, x = state
        t2 = self.pref.track(t, v)
        return (t2, self.cond.step(x, t2, v))

    def priority(self, state) -> int:
        if state == PRE:
            return 1 + self.shift
        return self.cond.priority(*state) + self.shift

    def complement(self) -> ParityAutomaton:
        return ParityAutomaton(self.pref, self.q, self.cond, self.shift + 1, f"not({self.label})")

    def accepts(self, run: LassoRun) -> bool:
        """Acceptance of a lasso anchored at the tracker state's vertex."""
        state = self.step(self.init, run.first)
        for v in run.drop_first().stem:
            state = self.step(state, v)
        cyc = run.drop_first().cycle
        first_seen: dict = {}
        blocks: list[list[int]] = []
        while state not in first_seen:
            first_seen[state] = len(blocks)
            pri = []
            for v in cyc:
                state = self.step(state, v)
                pri.append(self.priority(state))
            blocks.append(pri)
        return min(p for b in blocks[first_seen[state]:] for p in b) % 2 == 0

    def count_states(self, graph: GameGraph) -> int:
        """Reachable states when reading paths of ``graph`` from the anchor."""
        anchor = self.pref.last_vertex(self.q)
        start = (anchor, self.step(self.init, anchor))
        seen = {start}
        queue = deque([start])
        while queue:
            v, d = queue.popleft()
            for u in graph.succ[v]:
                nxt = (u, self.step(d, u))
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return len({d for _, d in seen}) + 1

    def max_priority(self, graph: GameGraph) -> int:
        return max(self.priority(s) for s in self._states(graph))

    def _states(self, graph):
        anchor = self.pref.last_vertex(self.q)
        start = (anchor, self.step(self.init, anchor))
        seen = {start}
        queue = deque([start])
        while queue:
            v, d = queue.popleft()
            yield d
            for u in graph.succ[v]:
                nxt = (u, self.step(d, u))
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)


# --- piece automata ----------------------------------------------------------

class PieceAutomaton:
    """Reachable part of a preference's tracker, states numbered in BFS order.

    State 0 is the start state (empty history).  ``k`` counts it too.
    """

    def __init__(self, pref: Preference, limit: int = 200_000):
        self.pref = pref
        graph = pref.graph
        self.states: list[Hashable] = [START]
        self.index: dict[Hashable, int] = {START: 0}
        self._delta: dict[tuple[int, int], int] = {}
        queue = deque([0])
        while queue:
            i = queue.popleft()
            s = self.states[i]
            letters = [graph.init] if s is START else graph.succ[pref.last_vertex(s)]
            for v in letters:
                t = pref.track(s, v)
                j = self.index.get(t)
                if j is None:
                    if len(self.states) >= limit:
                        raise PreferenceError("piece automaton exceeds the state limit")
                    j = self.index[t] = len(self.states)
                    self.states.append(t)
                    queue.append(j)
                self._delta[(i, v)] = j

    @property
    def k(self) -> int:
        return len(self.states)

    @property
    def start(self) -> int:
        return 0

    def delta(self, i: int, v: int) -> int:
        j = self._delta.get((i, v))
        if j is None:
            t = self.pref.track(self.states[i], v)
            j = self.index.get(t)
            if j is None:
                raise ArenaError(f"reading {self.pref.graph.names[v]} leaves the reachable pieces")
            self._delta[(i, v)] = j
        return j

    def last_vertex(self, i: int) -> int | None:
        s = self.states[i]
        return None if s is START else self.pref.last_vertex(s)

    def read(self, history: Sequence[int]) -> int:
        self.pref.graph.check_history(history)
        i = 0
        for v in history:
            i = self.delta(i, v)
        return i

    def label(self, i: int) -> str:
        s = self.states[i]
        return "start" if s is START else self.pref.piece_label(s)

    def find(self, label: str) -> int:
        for i in range(self.k):
            if self.label(i) == label:
                return i
        raise PreferenceError(f"no piece labelled {label!r}")

    def consumed(self) -> range:
        return range(1, self.k)

    def after_init(self) -> int:
        return self.delta(0, self.pref.graph.init)


# --- families ----------------------------------------------------------------

class Preference:
    """Base class; subclasses fix the tracker, outcomes and threshold automata."""

    kind = ""
    finite_outcomes = True
    test_only = False
    tracker_factor = 1

    def __init__(self, graph: GameGraph):
        self.graph = graph

    # tracker: last vertex by default
    def track(self, state, v: int):
        return v

    def last_vertex(self, state) -> int:
        return state

    def piece_label(self, state) -> str:
        return self.graph.names[state]

    @cached_property
    def pieces(self) -> PieceAutomaton:
        if self.test_only and not self.finite_pieces:
            raise PreferenceError(f"{self.kind}: infinitely many pieces")
        return PieceAutomaton(self)

    finite_pieces = True

    def evaluate_tail(self, q, tail: LassoRun):
        raise NotImplementedError

    def outcome(self, run: LassoRun):
        """Outcome of a full run from the initial vertex."""
        return self.evaluate_tail(self.track(START, run.first), run.drop_first())

    def classes(self) -> list:
        raise NotImplementedError

    def above(self, q, o, horizon: int = 16) -> ParityAutomaton:
        """Automaton for runs from tracker state ``q`` whose outcome beats ``o``
        (``o=None`` accepts everything)."""
        if o is None:
            return ParityAutomaton(self, q, Universal(), label="true")
        cond = self._above(q, o, horizon)
        return ParityAutomaton(self, q, cond, label=f"> {o}")

    def _above(self, q, o, horizon) -> Condition:
        raise NotImplementedError

    def less(self, x, y) -> bool:
        return x < y

    def diagnostics(self) -> list[str]:
        return []

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _names(self, vs: Iterable[int]) -> list[str]:
        return [self.graph.names[v] for v in sorted(vs)]

    def __eq__(self, other):
        return isinstance(other, Preference) and self.to_dict() == other.to_dict() and self.graph == other.graph

    def __hash__(self):
        return hash((self.kind, self.graph))

    def __repr__(self):
        return f"<{type(self).__name__} {self.to_dict()}>"


def _parity_norm(priorities: Sequence[int], winning: str) -> tuple[int, ...]:
    """Shift priorities so that an even least priority means the objective holds."""
    if winning not in ("even", "odd"):
        raise PreferenceError(f"winning_parity must be 'even' or 'odd', got {winning!r}")
    off = 0 if winning == "even" else 1
    return tuple(p + off for p in priorities)


class Parity(Preference):
    kind = "parity"

    def __init__(self, graph, priorities: Sequence[int], winning_parity: str = "even"):
        super().__init__(graph)
        if len(priorities) != graph.n or any(p < 0 for p in priorities):
            raise PreferenceError("parity needs a natural priority for every vertex")
        self.priorities = tuple(priorities)
        self.winning_parity = winning_parity
        self.norm = _parity_norm(self.priorities, winning_parity)

    def wins(self, cycle) -> bool:
        return min(self.norm[v] for v in cycle) % 2 == 0

    def evaluate_tail(self, q, tail):
        return self.wins(tail.cycle)

    def outcome(self, run):
        return self.wins(run.cycle)

    def classes(self):
        return [False, True]

    def _above(self, q, o, horizon):
        if o:
            return Empty()
        return ByTracker(lambda t: self.norm[t])

    def to_dict(self):
        return {"type": self.kind, "priorities": dict(zip(self.graph.names, self.priorities)),
                "winning_parity": self.winning_parity}


class MullerRank(Preference):
    """Rank of the set of vertices visited infinitely often; higher is better."""

    kind = "muller-rank"

    def __init__(self, graph, ranks: Sequence[tuple[Iterable[int], int]], default_rank: int = 0):
        super().__init__(graph)
        self.ranks: dict[frozenset[int], int] = {}
        for infset, rank in ranks:
            s = frozenset(infset)
            if not s:
                raise PreferenceError("muller-rank: empty inf-set")
            if s in self.ranks and self.ranks[s] != rank:
                raise PreferenceError("muller-rank: inf-set listed twice with different ranks")
            self.ranks[s] = int(rank)
        self.default_rank = int(default_rank)
        self.relevant = tuple(sorted(set().union(*self.ranks) if self.ranks else ()))

    def rank_of(self, infset) -> int:
        return self.ranks.get(frozenset(infset), self.default_rank)

    def evaluate_tail(self, q, tail):
        return self.rank_of(tail.cycle)

    def outcome(self, run):
        return self.rank_of(run.cycle)

    def classes(self):
        return sorted(set(self.ranks.values()) | {self.default_rank})

    def _above(self, q, o, horizon):
        if all(r <= o for r in self.classes()):
            return Empty()
        return LatestAppearanceRecord(self, o)

    def to_dict(self):
        ranks = [{"infset": self._names(s), "rank": r}
                 for s, r in sorted(self.ranks.items(), key=lambda kv: (sorted(kv[0]), kv[1]))]
        return {"type": self.kind, "ranks": ranks, "default_rank": self.default_rank}


class LatestAppearanceRecord(Condition):
    """Muller condition "rank(inf-set) > o" as a parity condition.

    Symbols are the vertices occurring in some ranked set plus one symbol
    standing for every other vertex.  The state is the record (a permutation
    of symbols, most recent first) and the position where the last symbol
    was found.
    """

    def __init__(self, pref: MullerRank, o: int):
        self.pref = pref
        self.o = o
        rel = pref.relevant
        self.nsym = len(rel) + 1
        other = len(rel)
        self.sym = [rel.index(v) if v in rel else other for v in range(pref.graph.n)]
        self.init = (tuple(range(self.nsym)), self.nsym - 1)
        self._accept: dict[frozenset, bool] = {}

    def step(self, x, t, v):
        perm, _ = x
        s = self.sym[v]
        i = perm.index(s)
        return ((s,) + perm[:i] + perm[i + 1:], i)

    def _accepting(self, symbols: frozenset) -> bool:
        hit = self._accept.get(symbols)
        if hit is None:
            rel = self.pref.relevant
            if len(rel) in symbols:
                rank = self.pref.default_rank
            else:
                rank = self.pref.rank_of(rel[j] for j in symbols)
            hit = self._accept[symbols] = rank > self.o
        return hit

    def priority(self, t, x):
        perm, i = x
        ok = self._accepting(frozenset(perm[:i + 1]))
        return 2 * (self.nsym - 1 - i) + (0 if ok else 1)


class EnergyParity(Preference):
    """Bounded energy (excess above the cap is lost) and a parity objective.

    Outcome ``(energy_safe, parity_win)`` compared lexicographically.
    The energy level is updated on every visited vertex, the initial vertex
    included.
    """

    kind = "energy-parity"
    tracker_factor = 0  # set per instance

    def __init__(self, graph, deltas: Sequence[int], initial: int, cap: int, priorities: Sequence[int],
                 winning_parity: str = "even"):
        super().__init__(graph)
        if len(deltas) != graph.n or len(priorities) != graph.n:
            raise PreferenceError("energy-parity needs a delta and a priority for every vertex")
        if not 0 <= initial <= cap:
            raise PreferenceError("energy-parity requires 0 <= initial <= cap")
        self.deltas = tuple(int(d) for d in deltas)
        self.initial = int(initial)
        self.cap = int(cap)
        self.priorities = tuple(priorities)
        self.winning_parity = winning_parity
        self.norm = _parity_norm(self.priorities, winning_parity)
        self.tracker_factor = self.cap + 2

    def level(self, e: int, v: int) -> int:
        if e == DEAD:
            return DEAD
        e = min(self.cap, e + self.deltas[v])
        return DEAD if e < 0 else e

    def track(self, state, v):
        e = self.initial if state is START else state[1]
        return (v, self.level(e, v))

    def last_vertex(self, state):
        return state[0]

    def piece_label(self, state):
        v, e = state
        return f"{self.graph.names[v]}@{'dead' if e == DEAD else e}"

    def evaluate_tail(self, q, tail):
        inf = run_tracker(self.track, q, tail)
        return (inf[0][1] != DEAD, min(self.norm[v] for v in tail.cycle) % 2 == 0)

    def outcome(self, run):
        # direct simulation of the energy level, independent of the piece automaton
        e = self.initial
        for v in run.stem:
            e = self.level(e, v)
        seen = set()
        while e not in seen:
            seen.add(e)
            for v in run.cycle:
                e = self.level(e, v)
        return (e != DEAD, min(self.norm[v] for v in run.cycle) % 2 == 0)

    def classes(self):
        return [(False, False), (False, True), (True, False), (True, True)]

    def _above(self, q, o, horizon):
        good = {c for c in self.classes() if c > o}
        if not good:
            return Empty()

        def pri(t):
            safe = t[1] != DEAD
            both = (safe, True) in good and (safe, False) in good
            if both:
                return 0
            if (safe, True) in good:
                return self.norm[t[0]] + 2
            return 1
        return ByTracker(pri)

    def to_dict(self):
        names = self.graph.names
        return {"type": self.kind, "deltas": dict(zip(names, self.deltas)), "initial": self.initial,
                "cap": self.cap, "priorities": dict(zip(names, self.priorities)),
                "winning_parity": self.winning_parity}


def _scaled(payoffs: Sequence[Fraction], t: Fraction) -> list[int]:
    """Integer weights with the sign pattern of every sum of ``payoff - t``."""
    diffs = [p - t for p in payoffs]
    den = 1
    for d in diffs:
        den = den * d.denominator // math.gcd(den, d.denominator)
    ints = [int(d * den) for d in diffs]
    g = 0
    for x in ints:
        g = math.gcd(g, x)
    return [x // g for x in ints] if g > 1 else ints


def _counter_bound(weights: Sequence[Sequence[int]], horizon: int) -> int:
    w = max([abs(x) for ws in weights for x in ws] + [1])
    return max(horizon, 1) * w


class MeanPayoff(Preference):
    """Exact long-run average of vertex payoffs (the cycle average of a lasso).

    With ``priorities`` the run must also satisfy the parity objective,
    otherwise its value is ``fail_value`` (minus infinity when unset).
    The outcome space is infinite; use :func:`discretize`.
    """

    kind = "mean-payoff"
    finite_outcomes = False

    def __init__(self, graph, payoffs: Sequence, mode: str = "limsup", priorities: Sequence[int] | None = None,
                 winning_parity: str = "even", fail_value=None):
        super().__init__(graph)
        if len(payoffs) != graph.n:
            raise PreferenceError("mean-payoff needs a payoff for every vertex")
        if mode not in ("limsup", "liminf"):
            raise PreferenceError("mode must be 'limsup' or 'liminf'")
        self.payoffs = tuple(_frac(p) for p in payoffs)
        self.mode = mode
        self.priorities = None if priorities is None else tuple(priorities)
        self.winning_parity = winning_parity
        self.norm = None if priorities is None else _parity_norm(self.priorities, winning_parity)
        self.fail_value = None if fail_value is None else _frac(fail_value)

    def average(self, cycle) -> Fraction:
        return sum((self.payoffs[v] for v in cycle), Fraction(0)) / len(cycle)

    def parity_ok(self, cycle) -> bool:
        return self.norm is None or min(self.norm[v] for v in cycle) % 2 == 0

    def value(self, cycle):
        if not self.parity_ok(cycle):
            return float("-inf") if self.fail_value is None else self.fail_value
        return self.average(cycle)

    def evaluate_tail(self, q, tail):
        return self.value(tail.cycle)

    def outcome(self, run):
        return self.value(run.cycle)

    def diagnostics(self):
        return ["infinite outcome space (exact mean payoff); threshold games are not uniformly "
                "finite-memory determined; discretize with a block width epsilon"]

    def classes(self):
        raise PreferenceError("mean-payoff has infinitely many outcome classes; discretize first")

    def _above(self, q, o, horizon):
        raise PreferenceError("mean-payoff thresholds are not compiled; discretize first")

    def _extra_dict(self):
        d = {}
        if self.priorities is not None:
            d["priorities"] = dict(zip(self.graph.names, self.priorities))
            d["winning_parity"] = self.winning_parity
        if self.fail_value is not None:
            d["fail_value"] = _frac_str(self.fail_value)
        return d

    def to_dict(self):
        return {"type": self.kind, "payoffs": {n: _frac_str(p) for n, p in zip(self.graph.names, self.payoffs)},
                "mode": self.mode, **self._extra_dict()}


class MeanPayoffBlocks(MeanPayoff):
    """Mean payoff cut into blocks ``[j*eps, (j+1)*eps)``; outcome is ``j``.

    A run failing the parity objective gets the block of ``fail_value``, or
    a bottom block below every attainable one when no fail value is set.
    """

    kind = "mean-payoff-blocks"
    finite_outcomes = True

    def __init__(self, graph, payoffs, epsilon, mode="limsup", priorities=None, winning_parity="even",
                 fail_value=None):
        super().__init__(graph, payoffs, mode, priorities, winning_parity, fail_value)
        self.epsilon = _frac(epsilon)
        if self.epsilon <= 0:
            raise PreferenceError("block width epsilon must be positive")

    def block(self, x: Fraction) -> int:
        return math.floor(x / self.epsilon)

    @property
    def lowest(self) -> int:
        return self.block(min(self.payoffs))

    @property
    def fail_outcome(self) -> int | None:
        if self.norm is None:
            return None
        if self.fail_value is None:
            return self.lowest - 1
        return self.block(self.fail_value)

    def value(self, cycle):
        if not self.parity_ok(cycle):
            return self.fail_outcome
        return self.block(self.average(cycle))

    def diagnostics(self):
        return []

    def classes(self):
        lo, hi = self.lowest, self.block(max(self.payoffs))
        fail = self.fail_outcome
        if fail is not None:
            lo, hi = min(lo, fail), max(hi, fail)
        return list(range(lo, hi + 1))

    def _above(self, q, o, horizon):
        if all(c <= o for c in self.classes()):
            return Empty()
        t = (o + 1) * self.epsilon
        weights = [_scaled(self.payoffs, t)]
        bound = _counter_bound(weights, horizon)
        fail = self.fail_outcome
        norm = self.norm
        if norm is None:
            verdict = lambda tr, alive: 0 if alive[0] else 1
        elif fail > o:
            # parity failing is already good enough
            verdict = lambda tr, alive: 0 if alive[0] else norm[tr] + 3
        else:
            verdict = lambda tr, alive: norm[tr] + 2 if alive[0] else 1
        return Counters(weights, bound, verdict)

    def to_dict(self):
        d = super().to_dict()
        d["type"] = self.kind
        d["epsilon"] = _frac_str(self.epsilon)
        return d


class ReachThenMeanPayoff(MeanPayoffBlocks):
    """Lexicographic (mean-payoff block, target reached), block dominant."""

    kind = "reach-then-mp"
    tracker_factor = 2

    def __init__(self, graph, target: Iterable[int], payoffs, epsilon, mode="limsup"):
        super().__init__(graph, payoffs, epsilon, mode)
        self.target = frozenset(target)

    def track(self, state, v):
        reached = False if state is START else state[1]
        return (v, reached or v in self.target)

    def last_vertex(self, state):
        return state[0]

    def piece_label(self, state):
        return f"{self.graph.names[state[0]]}{'+' if state[1] else '-'}"

    def evaluate_tail(self, q, tail):
        inf = run_tracker(self.track, q, tail)
        return (self.block(self.average(tail.cycle)), inf[0][1])

    def outcome(self, run):
        reached = any(v in self.target for v in run.stem + run.cycle)
        return (self.block(self.average(run.cycle)), reached)

    def classes(self):
        return [(b, r) for b in range(self.lowest, self.block(max(self.payoffs)) + 1) for r in (False, True)]

    def _above(self, q, o, horizon):
        b, r = o
        if all(c <= o for c in self.classes()):
            return Empty()
        weights = [_scaled(self.payoffs, (b + 1) * self.epsilon)]
        if not r:
            weights.append(_scaled(self.payoffs, b * self.epsilon))
        bound = _counter_bound(weights, horizon)

        def verdict(tr, alive):
            ok = alive[0] or (len(alive) > 1 and tr[1] and alive[1])
            return 0 if ok else 1
        return Counters(weights, bound, verdict)

    def to_dict(self):
        return {"type": self.kind, "target": self._names(self.target),
                "payoffs": {n: _frac_str(p) for n, p in zip(self.graph.names, self.payoffs)},
                "epsilon": _frac_str(self.epsilon), "mode": self.mode}


class Count(Preference):
    """Number of visits to ``counted`` vertices if finite, else -1.

    With a cap the value is ``min(count, cap)`` and the tracker remembers
    the count up to the cap.  Without a cap the family is only usable in
    tests: its outcomes are unbounded and it violates the pumping (Mont)
    condition; outcomes from a piece are then counted from the anchor on,
    which is enough to compare continuations.
    """

    kind = "count"

    def __init__(self, graph, counted: Iterable[int], cap: int | None = None):
        super().__init__(graph)
        self.counted = frozenset(counted)
        self.cap = None if cap is None else int(cap)
        if self.cap is not None and self.cap < 0:
            raise PreferenceError("count cap must be nonnegative")
        self.test_only = self.cap is None
        self.finite_outcomes = self.cap is not None
        self.tracker_factor = 1 if self.cap is None else self.cap + 1

    def track(self, state, v):
        if self.cap is None:
            return v
        c = 0 if state is START else state[1]
        return (v, min(self.cap, c + (v in self.counted)))

    def last_vertex(self, state):
        return state if self.cap is None else state[0]

    def piece_label(self, state):
        if self.cap is None:
            return self.graph.names[state]
        return f"{self.graph.names[state[0]]}#{state[1]}"

    def _visits(self, seq) -> int:
        return sum(1 for v in seq if v in self.counted)

    def evaluate_tail(self, q, tail):
        if any(v in self.counted for v in tail.cycle):
            return -1
        if self.cap is None:
            return self._visits(tail.stem)
        return min(self.cap, q[1] + self._visits(tail.stem))

    def outcome(self, run):
        if any(v in self.counted for v in run.cycle):
            return -1
        c = self._visits(run.stem)
        return c if self.cap is None else min(c, self.cap)

    def diagnostics(self):
        if self.cap is None:
            return ["test-only family: unbounded outcomes (uncapped count) and the regular-Mont "
                    "condition fails; set a cap"]
        return []

    def classes(self):
        if self.cap is None:
            raise PreferenceError("uncapped count has infinitely many outcome classes")
        return list(range(-1, self.cap + 1))

    def _above(self, q, o, horizon):
        if self.cap is not None and o >= self.cap:
            return Empty()
        need = o + 1
        counted = self.counted
        if self.cap is not None:
            def pri(t):
                if t[0] in counted:
                    return 1
                return 2 if t[1] >= need else 3
            return ByTracker(pri)
        return _TailCount(counted, need)

    def to_dict(self):
        return {"type": self.kind, "counted": self._names(self.counted), "cap": self.cap}


class _TailCount(Condition):
    def __init__(self, counted, need):
        self.counted = counted
        self.need = need
        self.init = 0

    def step(self, x, t, v):
        return min(self.need, x + (v in self.counted))

    def priority(self, t, x):
        if t in self.counted:
            return 1
        return 2 if x >= self.need else 3


# --- operations --------------------------------------------------------------

def _resolve(pref: Preference, piece: int, run: LassoRun):
    """(tracker state, tail after the anchor) for a run from ``piece``."""
    pa = pref.pieces
    if piece == pa.start:
        q = pref.track(START, run.first)
        if run.first != pref.graph.init:
            raise ArenaError("a run from the start piece must begin at the initial vertex")
    else:
        q = pa.states[piece]
        if pref.last_vertex(q) != run.first:
            raise ArenaError(f"run starts at {pref.graph.names[run.first]} but piece {pa.label(piece)} "
                             f"ends at {pref.graph.names[pref.last_vertex(q)]}")
    return q, run.drop_first()


def evaluate(pref: Preference, piece: int, run: LassoRun):
    """Outcome of ``run`` continuing any history of ``piece``."""
    q, tail = _resolve(pref, piece, run)
    return pref.evaluate_tail(q, tail)


def compare(pref: Preference, o1, o2) -> str:
    if pref.less(o2, o1):
        return "first-better"
    if pref.less(o1, o2):
        return "second-better"
    return "equivalent"


def piece_of(pref: Preference, history: Sequence[int]) -> int:
    return pref.pieces.read(history)


def tracker_state(pref: Preference, piece: int):
    """Tracker state for ``piece``; the start piece stands for the game itself."""
    pa = pref.pieces
    return pa.states[pa.after_init() if piece == pa.start else piece]


def compile_threshold(pref: Preference, piece: int, threshold: LassoRun, horizon: int = 16) -> ParityAutomaton:
    """Parity automaton accepting the runs from ``piece`` strictly better than ``threshold``.

    For the mean-payoff families acceptance is exact on lassos with at most
    ``horizon`` vertices (and on games over arenas of that size).
    """
    return pref.above(tracker_state(pref, piece), evaluate(pref, piece, threshold), horizon)


def discretize(pref: MeanPayoff, epsilon) -> MeanPayoffBlocks:
    eps = _frac(epsilon)
    if eps <= 0:
        raise PreferenceError("epsilon must be positive")
    if not isinstance(pref, MeanPayoff) or isinstance(pref, ReachThenMeanPayoff):
        raise PreferenceError("only mean-payoff preferences can be discretized")
    pri = pref.priorities
    return MeanPayoffBlocks(pref.graph, pref.payoffs, eps, pref.mode, pri, pref.winning_parity, pref.fail_value)


# --- axiom checkers ----------------------------------------------------------

def check_strict_weak_order(outcomes: Iterable, less: Callable[[Any, Any], bool]):
    """Exhaustive check on a sample.  Returns ``(True, None)`` or
    ``(False, (axiom, x, y, z))``."""
    xs = list(outcomes)
    uniq = []
    for x in xs:
        if not any(x is u or (type(x) is type(u) and x == u) for u in uniq):
            uniq.append(x)
    for x in uniq:
        if less(x, x):
            return False, ("irreflexivity", x, x, x)
    for x, y, z in itertools.product(uniq, repeat=3):
        if less(x, y) and less(y, z) and not less(x, z):
            return False, ("transitivity", x, y, z)
        if not less(x, y) and not less(y, z) and less(x, z):
            return False, ("incomparability-transitivity", x, y, z)
    return True, None


@dataclass
class PrefixLinearWitness:
    h1: tuple[int, ...]
    h2: tuple[int, ...]
    run1: LassoRun
    run2: LassoRun
    reason: str


def check_prefix_linear(pref: Preference, histories: Iterable[Sequence[int]],
                        run_pairs: Iterable[tuple[LassoRun, LassoRun]],
                        piece_fn: Callable[[Sequence[int]], Hashable] | None = None):
    """Histories sharing a piece must end alike and order every pair of
    continuations alike.  Outcomes are computed on the full runs, without
    the piece automaton.  Returns ``(ok, witness)``."""
    piece_fn = piece_fn or pref.pieces.read
    pairs = list(run_pairs)
    groups: dict[Hashable, list[tuple[int, ...]]] = {}
    for h in histories:
        groups.setdefault(piece_fn(h), []).append(tuple(h))
    for hs in groups.values():
        for h1, h2 in itertools.combinations(hs, 2):
            if h1[-1] != h2[-1]:
                return False, PrefixLinearWitness(h1, h2, None, None, "same piece, different last vertex")
            for r1, r2 in pairs:
                if r1.first != h1[-1] or r2.first != h1[-1]:
                    continue
                a1, a2 = pref.outcome(r1.prefixed(h1)), pref.outcome(r2.prefixed(h1))
                b1, b2 = pref.outcome(r1.prefixed(h2)), pref.outcome(r2.prefixed(h2))
                if pref.less(a1, a2) != pref.less(b1, b2) or pref.less(a2, a1) != pref.less(b2, b1):
                    return False, PrefixLinearWitness(h1, h2, r1, r2, "continuations ordered differently")
    return True, None


@dataclass
class MontVerdict:
    status: str  # "pass", "fail" or "vacuous"
    detail: str
    values: list

    @property
    def ok(self) -> bool:
        return self.status != "fail"


def check_regular_mont(pref: Preference, h0: Sequence[int], loop: Sequence[int], tail: LassoRun,
                       steps: int = 6) -> MontVerdict:
    """Pump ``loop`` (a cycle from the last vertex of ``h0`` back to it,
    given without its starting vertex) in front of ``tail``.

    If the first ``steps`` pumps each strictly improve and stay in the piece
    of ``h0``, the run pumping forever must beat the unpumped run.
    """
    g = pref.graph
    h0, loop = tuple(h0), tuple(loop)
    g.check_history(h0)
    v = h0[-1]
    if not loop or loop[-1] != v or not g.is_path((v,) + loop):
        raise ArenaError("loop must be a cycle returning to the last vertex of h0")
    if tail.first != v or not tail.is_valid(g):
        raise ArenaError("tail must be a valid run from the last vertex of h0")
    runs = [tail.prefixed(h0 + loop * n) for n in range(steps + 1)]
    values = [pref.outcome(r) for r in runs]
    try:
        pa = pref.pieces
        base = pa.read(h0)
        for n in range(1, steps + 1):
            if pa.read(h0 + loop * n) != base:
                return MontVerdict("vacuous", f"pumping {n} time(s) leaves the piece of h0", values)
    except PreferenceError:
        pass
    for n in range(steps):
        if not pref.less(values[n], values[n + 1]):
            return MontVerdict("vacuous", f"pumping is not strictly improving at step {n}", values)
    limit = pref.outcome(LassoRun(h0, loop))
    if pref.less(values[0], limit):
        return MontVerdict("pass", "pumping forever beats the unpumped run", values + [limit])
    return MontVerdict("fail", f"pumping improves {values[0]} -> ... -> {values[-1]} but pumping forever "
                       f"yields {limit}", values + [limit])


# --- sampling helpers --------------------------------------------------------

def enumerate_lassos(graph: GameGraph, start: int, max_size: int) -> list[LassoRun]:
    """Every lasso from ``start`` with ``|stem| + |cycle| <= max_size``."""
    found: dict[LassoRun, None] = {}
    stack = [(start,)]
    while stack:
        path = stack.pop()
        last = path[-1]
        for j in range(len(path)):
            if graph.is_edge(last, path[j]):
                found[LassoRun(path[:j], path[j:])] = None
        if len(path) < max_size:
            for u in reversed(graph.succ[last]):
                stack.append(path + (u,))
    return sorted(found, key=lambda r: (r.size, r.stem, r.cycle))


def enumerate_paths(graph: GameGraph, start: int, max_len: int) -> list[tuple[int, ...]]:
    out = []
    stack = [(start,)]
    while stack:
        path = stack.pop()
        out.append(path)
        if len(path) < max_len:
            for u in reversed(graph.succ[path[-1]]):
                stack.append(path + (u,))
    return sorted(out, key=lambda p: (len(p), p))


def simple_cycles_at(graph: GameGraph, v: int) -> list[tuple[int, ...]]:
    """Simple cycles through ``v``, as vertex lists after ``v`` ending in ``v``."""
    out = []
    stack = [(v, (), frozenset([v]))]
    while stack:
        u, path, seen = stack.pop()
        for w in graph.succ[u]:
            if w == v:
                out.append(path + (v,))
            elif w not in seen:
                stack.append((w, path + (w,), seen | {w}))
    return sorted(out, key=lambda c: (len(c), c))


def random_lasso(graph: GameGraph, start: int, rng, max_size: int) -> LassoRun:
    """Random walk from ``start`` closed into a lasso at the first repeat or length limit."""
    while True:
        path = [start]
        length = rng.randint(1, max_size)
        while len(path) < length:
            path.append(rng.choice(graph.succ[path[-1]]))
        closers = [j for j in range(len(path)) if graph.is_edge(path[-1], path[j])]
        if closers:
            j = rng.choice(closers)
            return LassoRun(tuple(path[:j]), tuple(path[j:]))


# --- construction from dictionaries -----------------------------------------

def _per_vertex(graph: GameGraph, mapping: dict, what: str, default=None, conv=int):
    unknown = set(mapping) - set(graph.names)
    if unknown:
        raise PreferenceError(f"{what}: unknown vertices {sorted(unknown)}")
    out = []
    for name in graph.names:
        if name in mapping:
            out.append(conv(mapping[name]))
        elif default is not None:
            out.append(default)
        else:
            raise PreferenceError(f"{what}: missing value for vertex {name}")
    return out


def _vertices(graph: GameGraph, names) -> list[int]:
    return [graph.vertex(n) for n in names]


def preference_from_dict(d: dict, graph: GameGraph) -> Preference:
    if not isinstance(d, dict) or "type" not in d:
        raise PreferenceError("preference must be an object with a 'type' field")
    kind = d["type"]
    if kind == "parity":
        return Parity(graph, _per_vertex(graph, d.get("priorities", {}), "priorities"),
                      d.get("winning_parity", "even"))
    if kind == "muller-rank":
        ranks = [(_vertices(graph, r["infset"]), int(r["rank"])) for r in d.get("ranks", [])]
        return MullerRank(graph, ranks, int(d.get("default_rank", 0)))
    if kind == "energy-parity":
        return EnergyParity(graph, _per_vertex(graph, d.get("deltas", {}), "deltas", default=0),
                            int(d["initial"]), int(d["cap"]),
                            _per_vertex(graph, d.get("priorities", {}), "priorities"),
                            d.get("winning_parity", "even"))
    if kind in ("mean-payoff", "mean-payoff-blocks"):
        payoffs = _per_vertex(graph, d.get("payoffs", {}), "payoffs", conv=_frac)
        pri = d.get("priorities")
        pri = None if pri is None else _per_vertex(graph, pri, "priorities")
        common = dict(mode=d.get("mode", "limsup"), priorities=pri,
                      winning_parity=d.get("winning_parity", "even"), fail_value=d.get("fail_value"))
        if kind == "mean-payoff":
            return MeanPayoff(graph, payoffs, **common)
        if "epsilon" not in d:
            raise PreferenceError("mean-payoff-blocks requires 'epsilon'")
        return MeanPayoffBlocks(graph, payoffs, d["epsilon"], **common)
    if kind == "reach-then-mp":
        if "epsilon" not in d:
            raise PreferenceError("reach-then-mp requires 'epsilon'")
        return ReachThenMeanPayoff(graph, _vertices(graph, d.get("target", [])),
                                   _per_vertex(graph, d.get("payoffs", {}), "payoffs", conv=_frac),
                                   d["epsilon"], d.get("mode", "limsup"))
    if kind == "count":
        return Count(graph, _vertices(graph, d.get("counted", [])), d.get("cap"))
    raise PreferenceError(f"unknown preference family {kind!r}; supported: {', '.join(FAMILIES)}")
