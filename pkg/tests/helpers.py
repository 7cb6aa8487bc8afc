import random

from fmnash.arena import GameGraph, GameSpec, MealyStrategy, Ownership
from fmnash.io import game_from_dict, load_game

FIXTURES_PASSING = ["fig1a", "fig1b-eps025", "fig1b-eps1", "fig2-capped", "energy-a", "energy-b",
                    "reach-mp", "loop", "parity-r1", "parity-r2", "parity-r3", "mix3"]


def game(name):
    return load_game(name)


def random_parity_doc(seed, n=None, players=("P1", "P2"), max_priority=3):
    rng = random.Random(seed)
    n = n or rng.randint(2, 5)
    names = [f"v{i}" for i in range(n)]
    edges = set()
    for i in range(n):
        for j in rng.sample(range(n), rng.randint(1, min(2, n))):
            edges.add((names[i], names[j]))
    return {
        "vertices": names,
        "edges": [list(e) for e in sorted(edges)],
        "init": names[0],
        "players": list(players),
        "owner": {v: rng.choice(players) for v in names},
        "preferences": {p: {"type": "parity", "priorities": {v: rng.randint(0, max_priority) for v in names},
                            "winning_parity": "even"} for p in players},
    }


def random_parity_spec(seed, n=None):
    return game_from_dict(random_parity_doc(seed, n))


def names(spec, *vs):
    return tuple(spec.graph.vertex(v) for v in vs)


def positional(spec, player, choices):
    """Memoryless strategy from a {vertex name: successor name} map."""
    g = spec.graph
    return MealyStrategy.positional((player,), g, {g.vertex(k): g.vertex(v) for k, v in choices.items()})


def single_loop_spec():
    g = GameGraph.from_edges(["v"], [("v", "v")], "v")
    from fmnash.preferences import Parity
    return GameSpec(g, Ownership(("P",), (0,)), (Parity(g, [0]),))
