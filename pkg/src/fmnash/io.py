"""JSON game files, strategy/profile files and DOT export."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .arena import ArenaError, GameGraph, GameSpec, MealyStrategy, Ownership, reachable_pairs
from .preferences import PreferenceError, preference_from_dict


class GameFormatError(ValueError):
    def __init__(self, message: str, source: str = "<game>", where: str = ""):
        self.source = source
        self.where = where
        super().__init__(f"{source}{':' + where if where else ''}: {message}")


def bundled_games() -> list[str]:
    folder = resources.files("fmnash") / "games"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".game"))


def resolve_game_path(name: str) -> Path | Any:
    """A filesystem path, or the name of a bundled fixture (``fig1a``)."""
    p = Path(name)
    if p.exists():
        return p
    stem = p.name[:-5] if p.name.endswith(".game") else p.name
    bundled = resources.files("fmnash") / "games" / f"{stem}.game"
    if bundled.is_file():
        return bundled
    raise GameFormatError("no such file or bundled game", str(name))


def load_game(name: str) -> GameSpec:
    path = resolve_game_path(name)
    return parse_game_text(path.read_text(encoding="utf-8"), str(name))


def parse_game(path) -> GameSpec:
    return load_game(str(path))


def _need(doc: Mapping, key: str, kind, source: str):
    if key not in doc:
        raise GameFormatError(f"missing field '{key}'", source, key)
    if not isinstance(doc[key], kind):
        raise GameFormatError(f"field '{key}' has the wrong type", source, key)
    return doc[key]


def parse_game_text(text: str, source: str = "<game>") -> GameSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(exc.msg, source, f"{exc.lineno}:{exc.colno}") from None
    return game_from_dict(doc, source)


def game_from_dict(doc: Any, source: str = "<game>") -> GameSpec:
    if not isinstance(doc, dict):
        raise GameFormatError("top level must be an object", source)
    vertices = _need(doc, "vertices", list, source)
    if not vertices:
        raise GameFormatError("empty vertex list", source, "vertices")
    if len(set(vertices)) != len(vertices) or not all(isinstance(v, str) for v in vertices):
        raise GameFormatError("vertex names must be distinct strings", source, "vertices")
    edges = _need(doc, "edges", list, source)
    for i, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 2 and all(x in vertices for x in e)):
            raise GameFormatError("edge must be a pair of declared vertices", source, f"edges[{i}]")
    init = _need(doc, "init", str, source)
    if init not in vertices:
        raise GameFormatError(f"initial vertex {init!r} is not declared", source, "init")
    players = _need(doc, "players", list, source)
    owner = _need(doc, "owner", dict, source)
    prefs = _need(doc, "preferences", dict, source)
    graph = GameGraph.from_edges(vertices, [tuple(e) for e in edges], init)
    own = []
    for v in vertices:
        if v not in owner:
            raise GameFormatError(f"vertex {v!r} has no owner", source, f"owner.{v}")
        if owner[v] not in players:
            raise GameFormatError(f"owner {owner[v]!r} is not a declared player", source, f"owner.{v}")
        own.append(players.index(owner[v]))
    parsed = []
    for p in players:
        if p not in prefs:
            raise GameFormatError(f"player {p!r} has no preference", source, f"preferences.{p}")
        try:
            parsed.append(preference_from_dict(prefs[p], graph))
        except (PreferenceError, ArenaError, KeyError, TypeError, ValueError) as exc:
            raise GameFormatError(str(exc), source, f"preferences.{p}") from None
    return GameSpec(graph, Ownership(tuple(players), tuple(own)), tuple(parsed))


def game_to_dict(spec: GameSpec) -> dict:
    g = spec.graph
    players = list(spec.ownership.players)
    return {
        "vertices": list(g.names),
        "edges": [[g.names[u], g.names[v]] for u, v in g.edges()],
        "init": g.names[g.init],
        "players": players,
        "owner": {g.names[v]: players[spec.owner(v)] for v in range(g.n)},
        "preferences": {players[a]: spec.prefs[a].to_dict() for a in spec.players},
    }


def emit_game(spec: GameSpec) -> str:
    return json.dumps(game_to_dict(spec), indent=2) + "\n"


# --- strategies and profiles -------------------------------------------------

def _bits(x: int, n: int) -> str:
    return format(x, f"0{n}b") if n else ""


def _unbits(s: str) -> int:
    return int(s, 2) if s else 0


def strategy_to_dict(spec: GameSpec, strategy: MealyStrategy) -> dict:
    """Tabulated over the (vertex, memory) pairs the strategy can meet."""
    g = spec.graph
    n = strategy.mem_bits
    rows = []
    for v, mem in sorted(reachable_pairs(spec, strategy)):
        to, m2 = strategy.step(v, mem)
        if not g.is_edge(v, to):
            to = g.succ[v][0]
        rows.append({"vertex": g.names[v], "mem": _bits(mem, n), "to": g.names[to], "mem_next": _bits(m2, n)})
    return {"players": [spec.ownership.players[p] for p in strategy.players], "mem_bits": n,
            "initial_mem": _bits(strategy.initial_mem, n), "label": strategy.label, "step": rows}


def strategy_from_dict(spec: GameSpec, doc: Mapping) -> MealyStrategy:
    g = spec.graph
    try:
        players = tuple(spec.player_index(p) for p in doc["players"])
        n = int(doc["mem_bits"])
        table = {(g.vertex(r["vertex"]), _unbits(r["mem"])): (g.vertex(r["to"]), _unbits(r["mem_next"]))
                 for r in doc["step"]}
        return MealyStrategy.from_table(players, g, n, table, _unbits(doc.get("initial_mem", "")))
    except (KeyError, TypeError) as exc:
        raise GameFormatError(f"malformed strategy: {exc}", "<profile>") from None


def profile_to_dict(spec: GameSpec, profile: Mapping[int, MealyStrategy], extra: Mapping | None = None) -> dict:
    doc = {"strategies": {spec.ownership.players[a]: strategy_to_dict(spec, profile[a]) for a in sorted(profile)}}
    if extra:
        doc.update(extra)
    return doc


def profile_from_dict(spec: GameSpec, doc: Mapping) -> dict[int, MealyStrategy]:
    if not isinstance(doc, dict) or "strategies" not in doc:
        raise GameFormatError("profile must have a 'strategies' object", "<profile>")
    return {spec.player_index(name): strategy_from_dict(spec, s) for name, s in doc["strategies"].items()}


def load_profile(spec: GameSpec, path) -> dict[int, MealyStrategy]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GameFormatError(exc.msg, str(path), f"{exc.lineno}:{exc.colno}") from None
    return profile_from_dict(spec, doc)


# --- DOT ---------------------------------------------------------------------

def _q(s: str) -> str:
    return '"' + s.replace('"', r'\"') + '"'


def mealy_dot(spec: GameSpec, strategy: MealyStrategy, name: str = "strategy") -> str:
    g = spec.graph
    n = strategy.mem_bits
    lines = [f"digraph {_q(name)} {{", "  rankdir=LR;"]
    for v, mem in sorted(reachable_pairs(spec, strategy)):
        to, m2 = strategy.step(v, mem)
        mine = spec.owner(v) in strategy.players
        label = f"{g.names[v]} / {_bits(mem, n) or '-'}"
        lines.append(f"  {_q(label)} -> {_q(_bits(m2, n) or '-')} "
                     f"[label={_q(g.names[to] if mine else '')}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def product_dot(arena, graph: GameGraph, name: str = "product") -> str:
    lines = [f"digraph {_q(name)} {{"]
    for s in range(arena.size):
        shape = "circle" if arena.owner[s] == 0 else "box"
        lines.append(f"  s{s} [shape={shape}, label={_q(f'{graph.names[arena.vertex[s]]}:{arena.priority[s]}')}];")
    for s, out in enumerate(arena.succ):
        for t in out:
            lines.append(f"  s{s} -> s{t};")
    lines.append("}")
    return "\n".join(lines) + "\n"
