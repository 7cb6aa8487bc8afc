import itertools
import random

import pytest

from fmnash.arena import ArenaError, MealyStrategy, play
from fmnash.io import load_game
from fmnash.preferences import compare
from fmnash.synthesis import synthesize_ne
from fmnash.verify import (CapExceeded, axioms_pass, brute_force_ne, check_axioms, count_strategies,
                           enumerate_strategies, verify_ne)
from helpers import FIXTURES_PASSING, game, positional, random_parity_spec


def random_positional_profile(spec, rng):
    g = spec.graph
    return {a: MealyStrategy.positional((a,), g, {v: rng.choice(g.succ[v]) for v in spec.ownership.vertices_of(a)})
            for a in spec.players}


def improves_positionally(spec, profile):
    """Some player gains by switching to another memoryless strategy."""
    g = spec.graph
    base = play(spec, profile)
    for b in spec.players:
        pref = spec.prefs[b]
        mine = spec.ownership.vertices_of(b)
        for combo in itertools.product(*(g.succ[v] for v in mine)):
            dev = dict(profile)
            dev[b] = MealyStrategy.positional((b,), g, dict(zip(mine, combo)))
            if pref.less(pref.outcome(base), pref.outcome(play(spec, dev))):
                return True
    return False


def test_fig1a_synthesized_is_ne():
    spec = game("fig1a")
    assert verify_ne(spec, synthesize_ne(spec).strategies).is_ne


def test_fig1a_second_equilibrium_on_ab():
    spec = game("fig1a")
    prof = {0: positional(spec, 0, {"a": "b", "x": "x"}), 1: positional(spec, 1, {"b": "a", "y": "y"})}
    assert play(spec, prof).fmt(spec.graph) == ":a,b"
    assert verify_ne(spec, prof).is_ne


def test_fig1a_refuted_profile_has_witness():
    spec = game("fig1a")
    prof = {0: positional(spec, 0, {"a": "b"}), 1: positional(spec, 1, {"b": "y"})}
    v = verify_ne(spec, prof)
    assert not v.is_ne and v.deviator == 0
    assert v.improved_from == 0 and v.improved_to == 1
    assert set(v.improving_run.cycle) == {spec.graph.vertex("x")}


def test_capped_count_postponing_is_not_ne():
    spec = game("fig2-capped")
    prof = {0: positional(spec, 0, {"c1": "b1", "c2": "b2"}), 1: positional(spec, 1, {"b1": "c2", "b2": "c1"})}
    v = verify_ne(spec, prof)
    assert not v.is_ne
    assert spec.graph.vertex("d") in v.improving_run.cycle
    assert spec.prefs[v.deviator].less(v.improved_from, v.improved_to)


def test_blocks_bbbg_is_ne():
    spec = game("fig1b-eps025")
    b, g = spec.graph.vertex("b"), spec.graph.vertex("g")

    def step(v, mem):
        return (g if mem == 2 else b), (mem + 1) % 4
    strat = MealyStrategy((0,), 2, step, 0)
    run = play(spec, {0: strat})
    assert run.fmt(spec.graph) == ":b,b,b,g"
    assert spec.prefs[0].outcome(run) == 3
    assert verify_ne(spec, {0: strat}).is_ne


@pytest.mark.parametrize("seed", range(30))
def test_verify_matches_positional_deviation_search(seed):
    spec = random_parity_spec(seed)
    rng = random.Random(seed)
    for _ in range(4):
        prof = random_positional_profile(spec, rng)
        v = verify_ne(spec, prof)
        assert v.is_ne == (not improves_positionally(spec, prof))
        if not v.is_ne:
            pref = spec.prefs[v.deviator]
            assert v.improving_run.is_valid(spec.graph)
            assert pref.less(v.improved_from, v.improved_to)
            assert pref.outcome(v.improving_run) == v.improved_to


@pytest.mark.parametrize("name", FIXTURES_PASSING)
def test_synthesized_profiles_verify(name):
    spec = load_game(name)
    assert verify_ne(spec, synthesize_ne(spec).strategies).is_ne


def test_uncapped_postponement_game_has_no_positional_ne():
    spec = game("fig2-uncapped")
    res = brute_force_ne(spec, bits=0)
    assert res.total == 16 and not res.equilibria
    assert len(res.refuted) == 16
    for _, v in res.refuted:
        pref = spec.prefs[v.deviator]
        assert pref.less(v.improved_from, v.improved_to)


def test_fig1a_brute_force_contains_synthesized_collapse():
    spec = game("fig1a")
    g = spec.graph
    res = brute_force_ne(spec, bits=0)
    assert res.equilibria
    collapse = [p for p in res.equilibria
                if p[0].step(g.vertex("a"), 0)[0] == g.vertex("x") and p[1].step(g.vertex("b"), 0)[0] == g.vertex("y")]
    assert collapse


def test_exact_mean_payoff_refused():
    with pytest.raises(ArenaError):
        brute_force_ne(load_game("fig1b-exact"), bits=0)


def test_enumeration_cap():
    spec = game("mix3")
    with pytest.raises(CapExceeded):
        brute_force_ne(spec, bits=2)
    with pytest.raises(CapExceeded):
        list(enumerate_strategies(spec, (0,), 3, cap=100))


def test_count_strategies_arithmetic():
    spec = game("fig1a")
    # P1 owns a (2 successors) and x (1); two memory values each
    assert count_strategies(spec, (0,), 0) == 2
    assert count_strategies(spec, (0,), 1) == (2 * 2) ** 2 * 2 ** 2 * 2 ** 2 * 2 ** 2
    assert len(list(enumerate_strategies(spec, (0,), 0))) == 2


def test_axiom_report_flags_postponement():
    report = check_axioms(game("fig2-uncapped"), samples=20, seed=1)
    assert not axioms_pass(report)
    mont = report[0]["regular_mont"]
    assert mont["status"] == "fail"
    assert {"b1", "c2", "b2"} <= set(mont["loop"].split(","))


@pytest.mark.parametrize("name", FIXTURES_PASSING)
def test_axioms_hold_on_shipped_fixtures(name):
    assert axioms_pass(check_axioms(load_game(name), samples=10, seed=0))


def test_compare_used_by_verdicts_is_consistent():
    spec = game("fig1a")
    v = verify_ne(spec, {0: positional(spec, 0, {"a": "b"}), 1: positional(spec, 1, {"b": "y"})})
    assert compare(spec.prefs[0], v.improved_to, v.improved_from) == "first-better"
