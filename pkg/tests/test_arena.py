import pytest

from fmnash.arena import (ArenaError, GameGraph, GameSpec, LassoRun, MealyStrategy, Ownership, check_strategy,
                          memory_after, normalize, play, restrict, restriction_path, shift, validate)
from fmnash.preferences import Parity
from helpers import game, names, positional, single_loop_spec


def test_fig1a_is_valid():
    spec = game("fig1a")
    assert validate(spec) == []
    assert spec.graph.n == 4 and len(spec.graph.edges()) == 6


def test_single_loop_valid():
    assert validate(single_loop_spec()) == []


def test_sink_is_reported_by_name():
    g = GameGraph.from_edges(["u", "w"], [("u", "w")], "u")
    spec = GameSpec(g, Ownership(("P",), (0, 0)), (Parity(g, [0, 0]),))
    issues = validate(spec)
    assert any("w" in i.message and "sink" in i.message for i in issues)


def test_successor_lists_sorted_and_unique():
    g = GameGraph.from_edges(["a", "b", "c"], [("a", "c"), ("a", "b"), ("a", "c"), ("b", "a"), ("c", "a")], "a")
    assert g.succ[0] == (1, 2)


def test_play_fig1a_moving_to_x():
    spec = game("fig1a")
    prof = {0: positional(spec, 0, {"a": "x", "x": "x"}), 1: positional(spec, 1, {"b": "y", "y": "y"})}
    run = play(spec, prof)
    assert run.fmt(spec.graph) == "a:x"


def test_play_single_loop():
    spec = single_loop_spec()
    run = play(spec, {0: MealyStrategy.positional((0,), spec.graph, {})})
    assert run == LassoRun((), (0,))


def test_play_fig1b_two_bit_counter():
    spec = game("fig1b-eps025")
    b, g = names(spec, "b", "g")

    def choose(v, m):
        return g if m == 3 else b
    strat = MealyStrategy.split((0,), 2, lambda m, v: (m + 1) % 4, choose)
    assert play(spec, {0: strat}).fmt(spec.graph) == ":b,b,b,g"


def test_play_reports_non_successor_with_memory_word():
    spec = game("fig1a")
    bad = MealyStrategy((0,), 1, lambda v, m: (3, 1))  # a -> y is not an edge
    other = positional(spec, 1, {})
    with pytest.raises(ArenaError, match="vertex a with memory 0"):
        play(spec, {0: bad, 1: other})


def test_shift_empty_history_is_identity():
    spec = game("fig1a")
    s = MealyStrategy.split((0,), 1, lambda m, v: 1 - m, lambda v, m: spec.graph.succ[v][0])
    t = shift(s, ())
    assert t.initial_mem == s.initial_mem and t.step_fn is s.step_fn


def test_shift_counter_after_three_steps():
    spec = game("fig1a")
    s = MealyStrategy.split((0,), 1, lambda m, v: 1 - m, lambda v, m: spec.graph.succ[v][0])
    assert shift(s, names(spec, "a", "b", "a"), spec.graph).initial_mem == 1


def test_shift_positional_keeps_empty_memory():
    spec = game("fig1a")
    s = positional(spec, 0, {"a": "x"})
    assert shift(s, names(spec, "a", "b"), spec.graph).initial_mem == 0


def test_shift_rejects_non_path():
    spec = game("fig1a")
    with pytest.raises(ArenaError):
        shift(positional(spec, 0, {}), names(spec, "a", "y"), spec.graph)


def test_restrict_nothing_fixed_copies_graph():
    spec = game("fig1a")
    r = restrict(spec, {})
    assert r.size == spec.graph.n
    assert sorted(len(s) for s in r.succ) == sorted(len(s) for s in spec.graph.succ)


def test_restrict_fig1a_fixing_p2():
    spec = game("fig1a")
    r = restrict(spec, {1: positional(spec, 1, {"b": "y", "y": "y"})})
    b, y = names(spec, "b", "y")
    for i in range(r.size):
        if r.vertex(i) == b:
            assert [r.vertex(j) for j in r.succ[i]] == [y]


def test_restrict_all_matches_play():
    spec = game("fig1a")
    prof = {0: positional(spec, 0, {"a": "b"}), 1: positional(spec, 1, {"b": "a"})}
    assert restriction_path(restrict(spec, prof)) == play(spec, prof)


def test_normalize_primitive_then_shortest_stem():
    assert normalize((1, 2), (1, 2, 1, 2)) == ((), (1, 2))
    assert normalize((0, 2, 1), (2, 1)) == ((0,), (2, 1))


def test_lasso_parse_and_format():
    spec = game("fig1a")
    run = LassoRun.parse("a:x", spec.graph)
    assert run.fmt(spec.graph) == "a:x"
    assert LassoRun.parse(":a,b", spec.graph) == LassoRun((), names(spec, "a", "b"))
    with pytest.raises(ArenaError):
        LassoRun.parse("a:", spec.graph)


def test_check_strategy_flags_bad_moves():
    spec = game("fig1a")
    bad = MealyStrategy((0,), 0, lambda v, m: (3, 0))
    assert check_strategy(spec, bad)
    assert check_strategy(spec, positional(spec, 0, {"a": "x"})) == []


def test_memory_after_full_history():
    spec = game("fig1a")
    s = MealyStrategy.split((0,), 2, lambda m, v: (m + 1) % 4, lambda v, m: spec.graph.succ[v][0])
    assert memory_after(s, [0, 1, 0, 1, 0]) == 1
