"""Command-line front end: ``smoothnash <command> [options]``.

Every command prints a JSON run report (or writes it to ``--out``). Exit
status is 0 on verified success, 2 when no equilibrium was found or a check
failed, and 1 on errors, including unknown flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from smoothnash import calibration
from smoothnash.core import Game, SmoothParams, random_game, verify
from smoothnash.enumeration import find_weak
from smoothnash.errors import NotFoundError, SmoothNashError
from smoothnash.gamefile import game_to_dict, load_game
from smoothnash.logit import logit_fixed_point
from smoothnash.query import QueryCountingOracle, QueryParams, query_equilibrium
from smoothnash.reductions import (
    GMPParams, check_gmp_marginals, gmp_marginal_threshold, make_gmp, pad_game, unpad_profile)
from smoothnash.sampling import make_rng
from smoothnash.strong import bimatrix_strong, general_strong
from smoothnash.zerosum import ZeroSumGame, solve_omd, solve_pmwu

SEED_ENV = "SMOOTHNASH_SEED"
EXIT_OK, EXIT_ERROR, EXIT_NOT_FOUND = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """Reports usage errors with exit status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _fraction(text: str) -> float:
    """Parses ``0.25`` or ``1/4``."""
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError) as err:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from err


def _common(parser: argparse.ArgumentParser, sigma=True, epsilon=True, delta=False) -> None:
    if sigma:
        parser.add_argument("--sigma", type=_fraction, required=True, help="smoothness in (0, 1]")
    if epsilon:
        parser.add_argument("--epsilon", type=_fraction, required=True, help="allowed gain")
    if delta:
        parser.add_argument("--delta", type=_fraction, default=0.25, help="failure probability")
    parser.add_argument("--seed", type=int, default=None,
                        help=f"random seed (falls back to ${SEED_ENV})")
    parser.add_argument("--out", type=Path, default=None, help="write output here")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smoothnash", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve-weak", help="weak equilibrium by sparse enumeration")
    p.add_argument("game", type=Path)
    _common(p)
    p.add_argument("--k", type=int, default=None, help="starting sparsity")
    p.add_argument("--c1", type=float, default=calibration.WEAK_C1)

    p = sub.add_parser("solve-strong", help="strong equilibrium via anchored LPs")
    p.add_argument("game", type=Path)
    _common(p)
    p.add_argument("--k", type=int, default=None, help="anchor sparsity")
    p.add_argument("--c1", type=float, default=None,
                   help="sparsity constant (default depends on the number of players)")

    p = sub.add_parser("solve-zerosum", help="zero-sum dynamics (row payoff = 1 - column payoff)")
    p.add_argument("game", type=Path)
    _common(p, epsilon=False)
    p.add_argument("--alg", choices=["pmwu", "omd"], default="omd")
    p.add_argument("--T", type=int, default=1024, help="iterations")
    p.add_argument("--eta", type=float, default=None, help="pmwu step size")
    p.add_argument("--epsilon", type=_fraction, default=None,
                   help="report strong_ok against this gap (default: final gap)")
    p.add_argument("--trace", type=Path, default=None, help="CSV of gaps and step sizes")

    p = sub.add_parser("query-solve", help="query-efficient randomized weak solver")
    p.add_argument("game", type=Path)
    _common(p, delta=True)
    p.add_argument("--c1", type=float, default=calibration.QUERY_C1)
    p.add_argument("--c2", type=float, default=calibration.QUERY_C2)

    p = sub.add_parser("verify", help="re-verify strategies from a report")
    p.add_argument("game", type=Path)
    p.add_argument("--profile", type=Path, required=True, help="report with 'strategies'")
    _common(p)
    p.add_argument("--strong", action="store_true", help="require strong_ok")
    p.add_argument("--marginal-epsilon", type=_fraction, default=None,
                   help="block-marginal tolerance for matching pennies games")

    p = sub.add_parser("make-game", help="generate a game file")
    p.add_argument("kind", choices=["gmp", "pad", "random", "zerosum"])
    p.add_argument("--K", type=int, default=4, help="matching pennies blocks")
    p.add_argument("--players", type=int, default=2)
    p.add_argument("--actions", type=int, default=4)
    p.add_argument("--game", type=Path, default=None, help="input game for 'pad'")
    p.add_argument("--k", type=int, default=2, help="padding factor")
    _common(p, sigma=False, epsilon=False)

    p = sub.add_parser("pad", help="pad a game, or unpad strategies of a padded game")
    p.add_argument("game", type=Path)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--unpad", type=Path, default=None,
                   help="report on the padded game; its strategies are merged and verified on GAME")
    p.add_argument("--sigma", type=_fraction, default=None)
    p.add_argument("--epsilon", type=_fraction, default=None)
    _common(p, sigma=False, epsilon=False)

    p = sub.add_parser("qre", help="logit equilibrium by damped iteration")
    p.add_argument("game", type=Path)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-10)
    _common(p, sigma=False, epsilon=False)
    return parser


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise SmoothNashError(f"${SEED_ENV} must be an integer, got {env!r}")
    return int(np.random.SeedSequence().entropy % 2**63)


def _emit(payload: Dict[str, Any], out: Optional[Path]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _report(command: str, params: Dict[str, Any], started: float, report=None,
            strategies: Optional[Sequence[np.ndarray]] = None, **extra) -> Dict[str, Any]:
    out = {"command": command, "parameters": params,
           "wall_time": round(time.perf_counter() - started, 6)}
    if report is not None:
        out["report"] = report.to_dict()
    if strategies is not None:
        out["strategies"] = [np.asarray(x, dtype=float).tolist() for x in strategies]
    out.update(extra)
    return out


def _load_strategies(path: Path) -> List[np.ndarray]:
    try:
        data = json.loads(path.read_text())
        return [np.asarray(x, dtype=float) for x in data["strategies"]]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as err:
        raise SmoothNashError(f"{path}: cannot read 'strategies' ({err})") from err


def _solve_weak(args, started):
    game = load_game(args.game)
    smooth = SmoothParams(args.sigma, game.num_actions)
    profile, report = find_weak(game, smooth, args.epsilon, args.k, args.c1, threads=args.threads)
    params = {"sigma": args.sigma, "epsilon": args.epsilon, "k": args.k, "c1": args.c1}
    return _report("solve-weak", params, started, report, profile), report.weak_ok


def _solve_strong(args, started):
    game = load_game(args.game)
    smooth = SmoothParams(args.sigma, game.num_actions)
    if game.num_players == 2:
        c1 = calibration.BIMATRIX_C1 if args.c1 is None else args.c1
        sol = bimatrix_strong(game.payoffs[0], game.payoffs[1], smooth, args.epsilon, c1, args.k,
                              threads=args.threads)
    else:
        c1 = calibration.GENERAL_C if args.c1 is None else args.c1
        sol = general_strong(game, smooth, args.epsilon, c1, args.k, threads=args.threads)
    params = {"sigma": args.sigma, "epsilon": args.epsilon, "k": sol.k, "c1": c1}
    payload = _report("solve-strong", params, started, sol.report, sol.profile,
                      anchor=[x.tolist() for x in sol.anchor], lp_rounds=sol.lp_rounds)
    return payload, sol.report.strong_ok


def _solve_zerosum(args, started):
    game = load_game(args.game)
    if game.num_players != 2 or not np.allclose(game.payoffs[0] + game.payoffs[1], 1.0):
        raise SmoothNashError("solve-zerosum needs a 2-player game whose payoffs sum to 1")
    zs = ZeroSumGame(game.payoffs[1])
    smooth = SmoothParams(args.sigma, zs.n)
    if args.alg == "pmwu":
        trace = solve_pmwu(zs, smooth, args.T, args.eta)
    else:
        trace = solve_omd(zs, smooth, args.T)
    if args.trace is not None:
        with open(args.trace, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["iteration", "gap", "eta_x", "eta_y"])
            for t, gap in sorted(trace.gaps.items()):
                writer.writerow([t, repr(float(gap)), repr(float(trace.eta_x[t - 1])),
                                 repr(float(trace.eta_y[t - 1]))])
    profile = [trace.x_avg, trace.y_avg]
    epsilon = trace.final_gap if args.epsilon is None else args.epsilon
    report = verify(game, profile, smooth, epsilon)
    params = {"sigma": args.sigma, "alg": args.alg, "T": args.T, "eta": args.eta,
              "epsilon": epsilon}
    payload = _report("solve-zerosum", params, started, report, profile,
                      duality_gap=trace.final_gap)
    return payload, report.strong_ok


def _query_solve(args, started):
    game = load_game(args.game)
    smooth = SmoothParams(args.sigma, game.num_actions)
    seed = _seed(args)
    oracle = QueryCountingOracle(game)
    qp = QueryParams(args.epsilon, args.sigma, args.delta, game.num_players, args.c1, args.c2)
    profile, found = query_equilibrium(oracle, qp, make_rng(seed), threads=args.threads)
    report = verify(game, profile, smooth, args.epsilon)
    params = {"sigma": args.sigma, "epsilon": args.epsilon, "delta": args.delta, "c1": args.c1,
              "c2": args.c2, "seed": seed, "t": qp.t, "l": qp.l, "k": qp.k, "N": qp.N}
    payload = _report("query-solve", params, started, report, profile,
                      query_count=oracle.query_count, found=found)
    if not found:
        return payload, None
    return payload, report.weak_ok


def _verify(args, started):
    game = load_game(args.game)
    smooth = SmoothParams(args.sigma, game.num_actions)
    profile = _load_strategies(args.profile)
    report = verify(game, profile, smooth, args.epsilon)
    ok = report.strong_ok if args.strong else report.weak_ok
    extra = {}
    if game.metadata.get("generator") == "gmp":
        K, M = int(game.metadata["K"]), int(game.metadata["M"])
        tol = args.marginal_epsilon
        if tol is None:
            tol = gmp_marginal_threshold(args.sigma, K, M)
        marginals_ok, x_bar, y_bar = check_gmp_marginals(*profile, tol, args.sigma, K, M)
        extra["gmp_marginals"] = {"epsilon": tol, "ok": marginals_ok,
                                  "row": x_bar.tolist(), "column": y_bar.tolist()}
        ok = ok and marginals_ok
    params = {"sigma": args.sigma, "epsilon": args.epsilon, "strong": args.strong}
    return _report("verify", params, started, report, profile, **extra), ok


def _make_game(args, started):
    seed = _seed(args)
    rng = make_rng(seed)
    if args.kind == "gmp":
        game = make_gmp(GMPParams(args.K), rng).game
    elif args.kind == "random":
        game = random_game(args.players, args.actions, rng)
    elif args.kind == "zerosum":
        A = rng.random((args.actions, args.actions))
        game = Game.from_matrices(1.0 - A, A)
    else:
        if args.game is None:
            raise SmoothNashError("make-game pad needs --game")
        game = pad_game(load_game(args.game), args.k)
    game = Game(game.payoffs, game.transform, {**game.metadata, "generator": game.metadata.get(
        "generator", args.kind), "seed": seed})
    return game_to_dict(game), True


def _pad(args, started):
    game = load_game(args.game)
    if args.unpad is None:
        return game_to_dict(pad_game(game, args.k)), True
    if args.sigma is None or args.epsilon is None:
        raise SmoothNashError("--unpad needs --sigma and --epsilon")
    profile = [unpad_profile(x, game.num_actions, args.k) for x in _load_strategies(args.unpad)]
    report = verify(game, profile, SmoothParams(args.sigma, game.num_actions), args.epsilon)
    params = {"sigma": args.sigma, "epsilon": args.epsilon, "k": args.k}
    return _report("pad", params, started, report, profile), report.weak_ok


def _qre(args, started):
    game = load_game(args.game)
    profile, residual = logit_fixed_point(game, args.lam, args.damping, args.max_iter, args.tol)
    params = {"lambda": args.lam, "damping": args.damping, "max_iter": args.max_iter,
              "tol": args.tol}
    payload = _report("qre", params, started, None, profile, residual=residual)
    return payload, residual <= args.tol


COMMANDS = {
    "solve-weak": _solve_weak,
    "solve-strong": _solve_strong,
    "solve-zerosum": _solve_zerosum,
    "query-solve": _query_solve,
    "verify": _verify,
    "make-game": _make_game,
    "pad": _pad,
    "qre": _qre,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Runs one command and returns its exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code not in (0, None) else EXIT_OK
    started = time.perf_counter()
    try:
        payload, ok = COMMANDS[args.command](args, started)
    except NotFoundError as err:
        print(f"smoothnash: not found: {err}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except (SmoothNashError, ValueError) as err:
        print(f"smoothnash: error: {err}", file=sys.stderr)
        return EXIT_ERROR
    _emit(payload, args.out)
    return EXIT_OK if ok else EXIT_NOT_FOUND


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
