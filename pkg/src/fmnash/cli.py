"""Command line interface: ``fmnash <command> GAME ...``.

Exit codes: 0 success (or NE confirmed), 2 counterexample / failed check,
1 bad input, 64 usage error, 70 internal error.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .arena import ArenaError, LassoRun, MealyStrategy, ensure_valid, simulate, validate
from .guarantees import guarantee_entry
from .io import (GameFormatError, load_game, load_profile, mealy_dot, product_dot, profile_to_dict,
                 strategy_to_dict)
from .preferences import PreferenceError
from .synthesis import SynthesisError, memory_report, synthesize_ne
from .threshold import solve_threshold
from .verify import CapExceeded, axioms_pass, brute_force_guarantee, brute_force_ne, check_axioms, verify_ne

EXIT_OK, EXIT_ERROR, EXIT_COUNTER, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 64, 70


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _emit(args, data: dict, text: str) -> None:
    print(json.dumps(data, indent=2, default=str) if args.json else text)


def _player(spec, name: str) -> int:
    try:
        return spec.player_index(name)
    except ArenaError:
        raise UsageError(f"unknown player {name!r}; players: {', '.join(spec.ownership.players)}") from None


def _piece(spec, player: int, label: str) -> int:
    try:
        return spec.prefs[player].pieces.find(label)
    except PreferenceError:
        labels = [spec.prefs[player].pieces.label(i) for i in range(spec.prefs[player].pieces.k)]
        raise UsageError(f"unknown piece {label!r}; pieces: {', '.join(labels)}") from None


def _loaded(args):
    spec = load_game(args.game)
    ensure_valid(spec)
    return spec


def cmd_validate(args) -> int:
    spec = load_game(args.game)
    issues = validate(spec)
    bad = [i for i in issues if i.blocking]
    data = {"valid": not bad, "issues": [{"kind": i.kind, "message": i.message} for i in issues]}
    text = "\n".join(map(str, issues)) + ("\n" if issues else "") + ("valid" if not bad else "invalid")
    _emit(args, data, text)
    return EXIT_OK if not bad else EXIT_ERROR


def cmd_solve_threshold(args) -> int:
    spec = _loaded(args)
    a = _player(spec, args.player)
    piece = _piece(spec, a, args.piece)
    threshold = LassoRun.parse(args.threshold, spec.graph)
    sol = solve_threshold(spec, a, piece, threshold)
    outcome = sol.game.outcome
    data = {"player": args.player, "piece": args.piece, "threshold": threshold.fmt(spec.graph),
            "threshold_outcome": str(outcome), "winner": sol.winner, "mem_bits_used": sol.mem_bits_used,
            "mem_bits_raw": sol.mem_bits_raw, "product_states": sol.game.arena.size, "certified": sol.certified}
    if sol.protagonist_wins:
        profile = {p: MealyStrategy.positional((p,), spec.graph, {}) for p in spec.players}
        profile[a] = sol.strategy
        run = simulate(spec, profile, start=threshold.first)
        data["sample_run"] = run.fmt(spec.graph)
    if args.output:
        Path(args.output).write_text(json.dumps(strategy_to_dict(spec, sol.strategy), indent=2) + "\n")
    if args.dot:
        Path(args.dot).write_text(product_dot(sol.game.arena, spec.graph) + mealy_dot(spec, sol.strategy))
    text = (f"{sol.winner} wins (threshold outcome {outcome}); strategy uses {sol.mem_bits_used} bits "
            f"({sol.mem_bits_raw} raw), product has {sol.game.arena.size} states")
    if "sample_run" in data:
        text += f"\nsample winning run: {data['sample_run']}"
    _emit(args, data, text)
    return EXIT_OK


def cmd_guarantees(args) -> int:
    spec = _loaded(args)
    players = [_player(spec, args.player)] if args.player else list(spec.players)
    jobs = [(a, j) for a in players for j in spec.prefs[a].pieces.consumed()]
    if args.parallel > 1:
        with ThreadPoolExecutor(args.parallel) as pool:
            entries = list(pool.map(lambda key: guarantee_entry(spec, *key), jobs))
    else:
        entries = [guarantee_entry(spec, *key) for key in jobs]
    rows = sorted((e.describe(spec) for e in entries), key=lambda r: (r["player"], r["piece"]))
    text = "\n".join(f"{r['player']:>6} @ {r['piece']:<10} min={r['min_outcome']!s:<12} witness={r['witness']}"
                     for r in rows)
    _emit(args, {"guarantees": rows}, text)
    return EXIT_OK


def cmd_synthesize(args) -> int:
    spec = _loaded(args)
    profile = synthesize_ne(spec)
    report = memory_report(profile)
    doc = profile_to_dict(spec, profile.strategies,
                          {"induced": profile.induced.fmt(spec.graph), "memory": report})
    if args.output:
        Path(args.output).write_text(json.dumps(doc, indent=2) + "\n")
    if args.dot:
        Path(args.dot).write_text("".join(mealy_dot(spec, s, f"ne-{spec.ownership.players[a]}")
                                          for a, s in profile.strategies.items()))
    text = (f"induced run: {profile.induced.fmt(spec.graph)}\n"
            f"memory bits: {report['players']} (bound {report['bound']}, m={report['m']}, k={report['k']}, "
            f"margin {report['margin']})")
    if "energy_bound" in report:
        text += f"\nenergy bound: {report['energy_bound']} ({'ok' if report['energy_ok'] else 'exceeded'})"
    _emit(args, {"induced": doc["induced"], "memory": report}, text)
    return EXIT_OK if report["bound_ok"] else EXIT_COUNTER


def cmd_verify(args) -> int:
    spec = _loaded(args)
    profile = load_profile(spec, args.profile)
    verdict = verify_ne(spec, profile)
    d = verdict.describe(spec)
    text = "Nash equilibrium" if verdict.is_ne else (
        f"not an equilibrium: {d['deviator']} improves {d['improved_from']} -> {d['improved_to']} "
        f"via {d['improving_run']}")
    _emit(args, d, text)
    return EXIT_OK if verdict.is_ne else EXIT_COUNTER


def cmd_check_axioms(args) -> int:
    spec = load_game(args.game)
    report = check_axioms(spec, args.samples, args.seed)
    names = spec.ownership.players
    lines = []
    for a, r in report.items():
        lines.append(f"{names[a]}: strict-weak-order {'ok' if r['strict_weak_order']['ok'] else 'FAIL'}, "
                     f"prefix-linear {'ok' if r['prefix_linear']['ok'] else 'FAIL'}, "
                     f"regular-Mont {r['regular_mont']['status']}")
        for key in ("strict_weak_order", "prefix_linear"):
            if not r[key]["ok"]:
                lines.append(f"  {key} witness: {r[key]['witness']}")
        if r["regular_mont"]["status"] == "fail":
            m = r["regular_mont"]
            lines.append(f"  regular-Mont witness: h0={m['h0']} loop={m['loop']} tail={m['tail']}: {m['detail']}")
    _emit(args, {names[a]: r for a, r in report.items()}, "\n".join(lines))
    return EXIT_OK if axioms_pass(report) else EXIT_COUNTER


def cmd_brute(args) -> int:
    spec = _loaded(args)
    if args.ne:
        res = brute_force_ne(spec, args.bits)
        refuted = [v.describe(spec) for _, v in res.refuted]
        data = {"profiles": res.total, "equilibria": len(res.equilibria), "refuted": refuted}
        if res.equilibria:
            text = f"{len(res.equilibria)} equilibria among {res.total} profiles"
        else:
            text = f"no equilibria found among {res.total} profiles"
        text += "".join(f"\n  refuted: {r['deviator']} {r['improved_from']} -> {r['improved_to']} "
                        f"via {r['improving_run']}" for r in refuted) if args.verbose else ""
        _emit(args, data, text)
        return EXIT_OK
    name, label = args.guarantee
    a = _player(spec, name)
    value = brute_force_guarantee(spec, a, _piece(spec, a, label), args.bits)
    _emit(args, {"player": name, "piece": label, "guarantee": str(value)}, f"guarantee of {name} at {label}: {value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fmnash", description="Finite-memory Nash equilibria for games on graphs")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", help="check a game file")
    s.add_argument("game")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("solve-threshold", help="solve one one-vs-all threshold game")
    s.add_argument("game")
    s.add_argument("--player", required=True)
    s.add_argument("--piece", required=True, help="piece label, or 'start'")
    s.add_argument("--threshold", required=True, help="lasso literal stem:cycle")
    s.add_argument("-o", "--output", help="write the winner's strategy as JSON")
    s.add_argument("--dot", help="write the product arena and strategy in DOT")
    s.set_defaults(func=cmd_solve_threshold)

    s = sub.add_parser("guarantees", help="best guarantee per player and piece")
    s.add_argument("game")
    s.add_argument("--player")
    s.add_argument("--parallel", type=int, default=1)
    s.set_defaults(func=cmd_guarantees)

    s = sub.add_parser("synthesize", help="build a finite-memory Nash equilibrium")
    s.add_argument("game")
    s.add_argument("-o", "--output", help="profile file to write")
    s.add_argument("--dot", help="write the Mealy machines in DOT")
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("verify", help="check a profile for profitable deviations")
    s.add_argument("game")
    s.add_argument("profile")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("check-axioms", help="sample the preference axioms")
    s.add_argument("game")
    s.add_argument("--samples", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_check_axioms)

    s = sub.add_parser("brute", help="brute-force oracles for tiny games")
    s.add_argument("game")
    s.add_argument("--bits", type=int, default=0)
    mode = s.add_mutually_exclusive_group(required=True)
    mode.add_argument("--ne", action="store_true", help="enumerate equilibria")
    mode.add_argument("--guarantee", nargs=2, metavar=("PLAYER", "PIECE"))
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_brute)
    return p


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fmnash: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GameFormatError, ArenaError, PreferenceError, CapExceeded, OSError) as exc:
        print(f"fmnash: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SynthesisError as exc:
        print(f"fmnash: internal: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        print(f"fmnash: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
