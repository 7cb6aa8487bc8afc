"""Nash equilibrium verification and brute-force oracles for tiny games."""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .arena import (ArenaError, GameSpec, LassoRun, MealyStrategy, ensure_valid, explore_restriction,
                    lasso_from_trace, play, restrict)
from .guarantees import canonical_piece
from .preferences import evaluate, tracker_state
from .threshold import accepting_run, anchor_of, horizon

DEFAULT_CAP = 10 ** 6


class CapExceeded(RuntimeError):
    pass


@dataclass
class Verdict:
    is_ne: bool
    deviator: int | None = None
    improving_run: LassoRun | None = None
    improved_from: object = None
    improved_to: object = None

    def describe(self, spec: GameSpec) -> dict:
        if self.is_ne:
            return {"is_ne": True}
        return {"is_ne": False, "deviator": spec.ownership.players[self.deviator],
                "improving_run": self.improving_run.fmt(spec.graph),
                "improved_from": str(self.improved_from), "improved_to": str(self.improved_to)}


def best_deviation(spec: GameSpec, player: int, profile: Mapping[int, MealyStrategy], current):
    """Best outcome ``player`` reaches against the others' fixed strategies,
    if strictly better than ``current``: ``(outcome, run)`` or None."""
    pref = spec.prefs[player]
    r = restrict(spec, {p: s for p, s in profile.items() if p != player})
    q = tracker_state(pref, pref.pieces.start)
    h = max(horizon(spec, player), r.size * pref.tracker_factor)

    def search(o):
        return accepting_run(spec, r.init, lambda i: r.succ[i], r.vertex, pref.above(q, o, h))

    if not pref.finite_outcomes:
        run = search(current)
        return None if run is None else (evaluate(pref, 0, run), run)
    classes = pref.classes()
    for j in range(len(classes) - 1, 0, -1):
        if not pref.less(current, classes[j]):
            break
        run = search(classes[j - 1])
        if run is not None:
            return evaluate(pref, 0, run), run
    return None


def verify_ne(spec: GameSpec, profile: Mapping[int, MealyStrategy]) -> Verdict:
    run = play(spec, profile)
    for b in spec.players:
        pref = spec.prefs[b]
        current = evaluate(pref, 0, run)
        found = best_deviation(spec, b, profile, current)
        if found is not None:
            better, witness = found
            if not pref.less(current, better):
                raise ArenaError("deviation search returned a run that is not an improvement")
            # report whole-run outcomes; the search compares tails from the start piece
            return Verdict(False, b, witness, pref.outcome(run), pref.outcome(witness))
    return Verdict(True)


# --- enumeration ---------------------------------------------------------------

def count_strategies(spec: GameSpec, players, bits: int) -> int:
    g = spec.graph
    size = 1 << bits
    total = 1
    for v in range(g.n):
        opts = size * (len(g.succ[v]) if spec.owner(v) in players else 1)
        total *= opts ** size
    return total


def enumerate_strategies(spec: GameSpec, players, bits: int, cap: int = DEFAULT_CAP) -> Iterator[MealyStrategy]:
    """Every ``bits``-bit Mealy strategy for ``players`` (tabulated)."""
    players = tuple(players)
    n = count_strategies(spec, players, bits)
    if n > cap:
        raise CapExceeded(f"{n} strategies exceed the enumeration cap {cap}")
    g = spec.graph
    mems = range(1 << bits)
    keys = [(v, m) for v in range(g.n) for m in mems]
    options = [[(u, m2) for u in (g.succ[v] if spec.owner(v) in players else g.succ[v][:1]) for m2 in mems]
               for v, _ in keys]
    for combo in itertools.product(*options):
        yield MealyStrategy.from_table(players, g, bits, dict(zip(keys, combo)))


def _history_to(spec: GameSpec, player: int, piece: int) -> tuple[int, ...]:
    pa = spec.prefs[player].pieces
    g = spec.graph
    first = (g.init,)
    seen = {pa.read(first): first}
    queue = deque([first])
    while queue:
        h = queue.popleft()
        if pa.read(h) == piece:
            return h
        for u in g.succ[h[-1]]:
            j = pa.read(h + (u,))
            if j not in seen:
                seen[j] = h + (u,)
                queue.append(h + (u,))
    raise ArenaError("piece is not reachable")


def _forced_run(succ, owned, vertex, init, choice: Mapping) -> LassoRun:
    seen: dict = {}
    trace = []
    i = init
    while i not in seen:
        seen[i] = len(trace)
        trace.append(vertex(i))
        i = choice[i] if i in owned else succ[i][0]
    return lasso_from_trace(trace, seen[i])


def _tracked_restriction(spec: GameSpec, player: int, r, piece: int):
    """Restriction paired with the player's piece tracker: on this product
    memoryless coalition responses are as strong as arbitrary ones."""
    pa = spec.prefs[player].pieces
    start = (r.init, piece)
    succ = {}
    queue = deque([start])
    while queue:
        i, j = node = queue.popleft()
        if node in succ:
            continue
        succ[node] = [(t, pa.delta(j, r.vertex(t))) for t in r.succ[i]]
        queue.extend(n for n in succ[node] if n not in succ)
    owned = [n for n in succ if r.owner[n[0]] is not None]
    return start, succ, owned


def brute_force_guarantee(spec: GameSpec, player: int, piece: int, bits: int = 0, cap: int = DEFAULT_CAP):
    """Max over ``bits``-bit strategies of the worst outcome under memoryless
    coalition responses on the restriction tracked by the piece automaton."""
    pref = spec.prefs[player]
    piece = canonical_piece(spec, player, piece)
    hist = _history_to(spec, player, piece)
    anchor = anchor_of(spec, player, piece)
    work = 0
    best = None
    for strat in enumerate_strategies(spec, (player,), bits, cap):
        r = explore_restriction(spec, {player: strat}, start=anchor, mems=(0,))
        start, succ, owned = _tracked_restriction(spec, player, r, piece)
        work += math.prod(len(succ[n]) for n in owned)
        if work > cap:
            raise CapExceeded(f"more than {cap} strategy/response pairs")
        worst = None
        for combo in itertools.product(*(succ[n] for n in owned)):
            run = _forced_run(succ, set(owned), lambda n: r.vertex(n[0]), start, dict(zip(owned, combo)))
            o = pref.outcome(run.prefixed(hist))
            if worst is None or pref.less(o, worst):
                worst = o
        if best is None or pref.less(best, worst):
            best = worst
    return best


@dataclass
class BruteNE:
    total: int
    equilibria: list[dict[int, MealyStrategy]] = field(default_factory=list)
    refuted: list[tuple[dict[int, MealyStrategy], Verdict]] = field(default_factory=list)


def brute_force_ne(spec: GameSpec, bits: int = 0, cap: int = DEFAULT_CAP) -> BruteNE:
    """All ``bits``-bit profiles, each checked against every deviation."""
    ensure_valid(spec)
    counts = [count_strategies(spec, (a,), bits) for a in spec.players]
    total = math.prod(counts)
    if total > cap:
        raise CapExceeded(f"{total} profiles exceed the enumeration cap {cap}")
    per_player = [list(enumerate_strategies(spec, (a,), bits, cap)) for a in spec.players]
    result = BruteNE(total)
    for combo in itertools.product(*per_player):
        profile = dict(zip(spec.players, combo))
        verdict = verify_ne(spec, profile)
        if verdict.is_ne:
            result.equilibria.append(profile)
        else:
            result.refuted.append((profile, verdict))
    return result


# --- axiom report ----------------------------------------------------------------

def check_axioms(spec: GameSpec, samples: int = 50, seed: int = 0, max_size: int = 4) -> dict[int, dict]:
    """Strict weak order, prefix-linearity and pumping checks per player on
    exhaustive small lassos plus ``samples`` random ones."""
    import random

    from .preferences import (PreferenceError, check_prefix_linear, check_regular_mont, check_strict_weak_order,
                              enumerate_lassos, enumerate_paths, random_lasso, simple_cycles_at)
    g = spec.graph
    rng = random.Random(seed)
    runs = enumerate_lassos(g, g.init, max_size)
    runs += [random_lasso(g, g.init, rng, 2 * max_size) for _ in range(samples)]
    histories = enumerate_paths(g, g.init, max_size)
    tails = {v: enumerate_lassos(g, v, max(2, max_size - 1)) for v in range(g.n)}
    report = {}
    for a in spec.players:
        pref = spec.prefs[a]
        swo_ok, swo_wit = check_strict_weak_order([pref.outcome(r) for r in runs], pref.less)
        pairs = []
        for v in range(g.n):
            ts = tails[v][:8] + [random_lasso(g, v, rng, max_size) for _ in range(2)]
            pairs += [(x, y) for x in ts for y in ts if x != y]
        try:
            pl_ok, pl_wit = check_prefix_linear(pref, histories, pairs)
        except (PreferenceError, ArenaError) as exc:
            pl_ok, pl_wit = False, str(exc)
        mont = {"status": "vacuous", "detail": "no strictly improving pumping found"}
        for h0 in histories[:max(1, min(len(histories), 3 * g.n))]:
            for loop in simple_cycles_at(g, h0[-1]):
                for tail in tails[h0[-1]][:12]:
                    verdict = check_regular_mont(pref, h0, loop, tail)
                    if verdict.status == "fail":
                        mont = {"status": "fail", "detail": verdict.detail, "h0": g.fmt(h0),
                                "loop": g.fmt(loop), "tail": tail.fmt(g)}
                        break
                    if verdict.status == "pass" and mont["status"] == "vacuous":
                        mont = {"status": "pass", "detail": verdict.detail}
                if mont["status"] == "fail":
                    break
            if mont["status"] == "fail":
                break
        report[a] = {
            "strict_weak_order": {"ok": swo_ok, "witness": None if swo_ok else [str(x) for x in swo_wit]},
            "prefix_linear": {"ok": pl_ok, "witness": None if pl_ok else str(pl_wit)},
            "regular_mont": mont,
        }
    return report


def axioms_pass(report: dict[int, dict]) -> bool:
    return all(r["strict_weak_order"]["ok"] and r["prefix_linear"]["ok"] and r["regular_mont"]["status"] != "fail"
               for r in report.values())
