import random

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from fmnash.arena import LassoRun, MealyStrategy, memory_after, normalize, play, restrict, restriction_path, shift
from fmnash.io import load_game
from fmnash.preferences import compare, compile_threshold, evaluate, random_lasso
from fmnash.threshold import solve_threshold_outcome
from helpers import FIXTURES_PASSING, random_parity_spec

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(min_value=0, max_value=10 ** 6)
fixtures = st.sampled_from(FIXTURES_PASSING)


def random_strategy(spec, player, rng, bits=1):
    g = spec.graph
    size = 1 << bits
    table = {(v, m): (rng.choice(g.succ[v]), rng.randrange(size)) for v in range(g.n) for m in range(size)}
    return MealyStrategy.from_table((player,), g, bits, table, rng.randrange(size))


def random_profile(spec, rng):
    return {a: random_strategy(spec, a, rng, bits=rng.randint(0, 2)) for a in spec.players}


@SETTINGS
@given(seeds)
def test_play_agrees_with_full_restriction(seed):
    rng = random.Random(seed)
    spec = random_parity_spec(seed % 500)
    prof = random_profile(spec, rng)
    r = restrict(spec, prof)
    assert all(len(s) == 1 for s in r.succ)
    assert restriction_path(r) == play(spec, prof)


@SETTINGS
@given(seeds)
def test_restriction_has_no_sinks(seed):
    rng = random.Random(seed)
    spec = random_parity_spec(seed % 500)
    prof = random_profile(spec, rng)
    fixed = {a: s for a, s in prof.items() if rng.random() < 0.5}
    r = restrict(spec, fixed)
    assert all(r.succ[i] for i in range(r.size))


@SETTINGS
@given(seeds, st.integers(min_value=0, max_value=6), st.integers(min_value=1, max_value=6))
def test_shift_is_action_compatible(seed, h_len, ext_len):
    rng = random.Random(seed)
    spec = random_parity_spec(seed % 500)
    g = spec.graph
    strat = random_strategy(spec, 0, rng, bits=2)
    walk = [g.init]
    for _ in range(h_len + ext_len):
        walk.append(rng.choice(g.succ[walk[-1]]))
    h, ext = walk[:h_len + 1], walk[h_len + 1:]
    shifted = shift(strat, h, g)
    mem_a, mem_b = shifted.initial_mem, memory_after(strat, h)
    for v in ext:
        a, mem_a = shifted.step(v, mem_a)
        b, mem_b = strat.step(v, mem_b)
        assert a == b


@SETTINGS
@given(st.lists(st.integers(0, 3), max_size=6), st.lists(st.integers(0, 3), min_size=1, max_size=6))
def test_lasso_normal_form(stem, cycle):
    run = LassoRun(tuple(stem), tuple(cycle))
    assert normalize(run.stem, run.cycle) == (run.stem, run.cycle)
    n = 3 * (len(stem) + len(cycle))
    raw = (stem + cycle * n)[:n]
    assert run.unroll(n) == raw
    assert len(run.cycle) <= len(cycle) and len(run.stem) <= len(stem)


@SETTINGS
@given(fixtures, seeds)
def test_evaluate_invariant_under_unrolling(name, seed):
    spec = load_game(name)
    rng = random.Random(seed)
    run = random_lasso(spec.graph, spec.graph.init, rng, 6)
    k = rng.randint(1, 3)
    unrolled = LassoRun(run.stem + run.cycle * rng.randint(0, 2), run.cycle * k)
    for pref in spec.prefs:
        piece = pref.pieces.after_init()
        assert evaluate(pref, piece, unrolled) == evaluate(pref, piece, run)


@SETTINGS
@given(fixtures, seeds)
def test_threshold_acceptance_matches_comparison(name, seed):
    spec = load_game(name)
    g = spec.graph
    rng = random.Random(seed)
    a = rng.randrange(len(spec.prefs))
    pref = spec.prefs[a]
    piece = rng.choice(list(pref.pieces.consumed()))
    anchor = pref.pieces.last_vertex(piece)
    threshold = random_lasso(g, anchor, rng, 6)
    aut = compile_threshold(pref, piece, threshold)
    for _ in range(10):
        run = random_lasso(g, anchor, rng, 6)
        expect = compare(pref, evaluate(pref, piece, threshold), evaluate(pref, piece, run)) == "second-better"
        assert aut.accepts(run) == expect


@SETTINGS
@given(fixtures, seeds)
def test_threshold_wins_are_monotone(name, seed):
    spec = load_game(name)
    rng = random.Random(seed)
    a = rng.randrange(len(spec.prefs))
    pref = spec.prefs[a]
    piece = rng.choice(list(pref.pieces.consumed()))
    wins = [solve_threshold_outcome(spec, a, piece, o).protagonist_wins for o in pref.classes()]
    # once lost, every higher threshold stays lost
    assert wins == sorted(wins, reverse=True)
    assert all(solve_threshold_outcome(spec, a, piece, o).certified for o in pref.classes())


@SETTINGS
@given(fixtures, seeds)
def test_outcomes_form_strict_weak_order(name, seed):
    spec = load_game(name)
    rng = random.Random(seed)
    for pref in spec.prefs:
        outs = [pref.outcome(random_lasso(spec.graph, spec.graph.init, rng, 6)) for _ in range(6)]
        for x in outs:
            assert not pref.less(x, x)
            for y in outs:
                assert not (pref.less(x, y) and pref.less(y, x))
                for z in outs:
                    if pref.less(x, y) and pref.less(y, z):
                        assert pref.less(x, z)
