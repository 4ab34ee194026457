#!/usr/bin/env python3
"""
evigame command line: validate games, solve for each refinement, run purification
sweeps and perturbed homotopies, check assessments and compare against the grid oracle.

Exit codes: 0 success, 1 validation/check failure or domain error, 2 usage error.
"""

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from auxiliary_solver import NotFound, find_truth_leaning, solve_star, verify_auxiliary
from disturbed_lab import construct_purifiable, purification_trace
from equilibrium_check import (
    Perturbation,
    verify_pbe,
    verify_perturbed_pbe,
    verify_purifiable,
    verify_truth_leaning,
)
from evidence_game import EvidenceGame, EvidenceGameError, SolverDefect, validate_game
from evigame_bench import OracleGrid, analyze, oracle_compare, oracle_pbe_grid, random_game
from evigame_config import DEFAULT_SAMPLES, log_level
from evigame_io import (
    assessment_to_dict,
    check_to_dict,
    dumps,
    family_to_dict,
    fmt,
    game_to_dict,
    homotopy_csv,
    load_assessment,
    load_game,
    load_perturbation,
    star_to_dict,
    trace_csv,
)
from perturbed_lab import (
    DEFAULT_FACTOR,
    DEFAULT_STEPS,
    HomotopyPath,
    LiftError,
    canonical_paths,
    homotopy_weakly_tl,
    lift_witness,
    solve_perturbed,
)
from receiver_response import FAMILIES

logger = logging.getLogger(__name__)

CONCEPTS = ("pbe", "truth-leaning", "purifiable", "perturbed", "auxiliary")
PATHS = ("equal", "increasing", "decreasing", "all")


class UsageError(Exception):
    """A flag value that argparse accepted but cannot be interpreted"""


def _pairs(text: str, flag: str) -> Dict[str, str]:
    """Parse "k1:v1,k2:v2" into a dict of strings"""
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, value = part.partition(":")
        if not sep or not key or not value:
            raise UsageError(f"{flag}: expected key:value pairs, got {part!r}")
        out[key.strip()] = value.strip()
    return out


def _rational_flag(text: str, flag: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"{flag}: {text!r} is not a rational") from None


def _per_item(text: str, flag: str, items: Sequence[str]) -> Dict[str, Fraction]:
    """A single rational for every item, or an item:value map"""
    if ":" not in text:
        value = _rational_flag(text, flag)
        return {e: value for e in items}
    return {e: _rational_flag(v, flag) for e, v in _pairs(text, flag).items()}


def _perturbation(args: argparse.Namespace, game: EvidenceGame) -> Perturbation:
    if args.perturbation:
        return load_perturbation(Path(args.perturbation))
    if args.reward is None or args.floor is None:
        raise UsageError("--reward and --floor (or --perturbation FILE) are required")
    return Perturbation(
        _per_item(args.reward, "--reward", game.items),
        _per_item(args.floor, "--floor", game.items),
    )


def _weights(text: Optional[str]) -> Dict[Fraction, Dict[Fraction, Fraction]]:
    """Parse "1/2=1:3/10,0:7/10;..." into belief level -> action weights"""
    out: Dict[Fraction, Dict[Fraction, Fraction]] = {}
    if not text:
        return out
    for block in filter(None, (b.strip() for b in text.split(";"))):
        level, sep, row = block.partition("=")
        if not sep:
            raise UsageError(f"--weights: expected level=action:prob,..., got {block!r}")
        out[_rational_flag(level, "--weights")] = {
            _rational_flag(a, "--weights"): _rational_flag(p, "--weights")
            for a, p in _pairs(row, "--weights").items()
        }
    return out


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
        logger.info(f"Wrote {out}")
    else:
        sys.stdout.write(text)


def _add_perturbation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--reward", help="truth reward: a rational or item:rational pairs")
    parser.add_argument("--floor", help="minimum truth probability: a rational or item:rational pairs")
    parser.add_argument("--perturbation", help="JSON file with 'reward' and 'floor' maps")


def cmd_validate(args: argparse.Namespace) -> int:
    report = validate_game(load_game(Path(args.game)))
    doc = {
        "status": "ok" if report.ok else "invalid",
        "violations": [
            {"invariant": v.invariant, "items": list(v.items), "detail": v.detail}
            for v in report.violations
        ],
    }
    _emit(dumps(doc), args.out)
    return 0 if report.ok else 1


def _load_valid(path: str) -> EvidenceGame:
    game = load_game(Path(path))
    report = validate_game(game)
    if not report.ok:
        names = sorted({v.invariant for v in report.violations})
        raise EvidenceGameError(f"{path}: invalid game ({', '.join(names)})")
    return game


def cmd_analyze(args: argparse.Namespace) -> int:
    _emit(dumps(analyze(_load_valid(args.game), timing=args.timing)), args.out)
    return 0


def cmd_solve_star(args: argparse.Namespace) -> int:
    _emit(dumps(star_to_dict(solve_star(_load_valid(args.game)))), args.out)
    return 0


def cmd_truth_leaning(args: argparse.Namespace) -> int:
    found = find_truth_leaning(_load_valid(args.game))
    if isinstance(found, NotFound):
        doc: Dict[str, Any] = {
            "found": False,
            "structuresTried": found.structures_tried,
            "pruned": found.pruned,
            "refuted": found.refuted,
        }
    else:
        doc = {"found": True, "families": [family_to_dict(f) for f in found]}
    _emit(dumps(doc), args.out)
    return 0


def cmd_purifiable(args: argparse.Namespace) -> int:
    game = _load_valid(args.game)
    A = construct_purifiable(game, solve_star(game), _weights(args.weights))
    _emit(dumps(assessment_to_dict(A)), args.out)
    return 0


def cmd_disturbed_sweep(args: argparse.Namespace) -> int:
    game = _load_valid(args.game)
    schedule = [float(_rational_flag(s, "--scales")) for s in args.scales.split(",") if s.strip()]
    pattern = None
    if args.pattern:
        lookup = {fmt(a): a for a in game.actions}
        pattern = {}
        for a, s in _pairs(args.pattern, "--pattern").items():
            action = lookup.get(fmt(_rational_flag(a, "--pattern")))
            if action is None:
                raise UsageError(f"--pattern: {a!r} is not an action of the game")
            pattern[action] = float(_rational_flag(s, "--pattern"))
    trace = purification_trace(
        game, args.family, schedule, solve_star(game), pattern, args.seed, args.samples
    )
    _emit(trace_csv(trace.outcomes, trace.scales, game.actions), args.out)
    summary = {
        "verdict": trace.verdict,
        "supChange": f"{trace.sup_change:.12g}",
        "limit": assessment_to_dict(trace.limit),
        "generic": trace.generic,
        "notes": trace.notes,
    }
    if args.summary:
        Path(args.summary).write_text(dumps(summary))
    return 0


def cmd_perturbed(args: argparse.Namespace) -> int:
    game = _load_valid(args.game)
    families = solve_perturbed(game, _perturbation(args, game))
    _emit(dumps({"families": [family_to_dict(f) for f in families]}), args.out)
    return 0


def _paths(args: argparse.Namespace, game: EvidenceGame) -> List[HomotopyPath]:
    factor = _rational_flag(args.factor, "--factor")
    if args.path == "custom":
        return [HomotopyPath(_perturbation(args, game), factor, args.steps, "custom")]
    paths = canonical_paths(game, factor, args.steps)
    return paths if args.path == "all" else [p for p in paths if p.label == args.path]


def cmd_weakly_tl(args: argparse.Namespace) -> int:
    game = _load_valid(args.game)
    paths = _paths(args, game)
    if args.trace and len(paths) != 1:
        raise UsageError("--trace needs a single --path")
    results = [homotopy_weakly_tl(game, path) for path in paths]
    doc = []
    for result in results:
        entry: Dict[str, Any] = {
            "path": result.path.label,
            "verdict": result.verdict,
            "finalChange": f"{float(result.final_change):.12g}",
        }
        if result.limit is not None:
            entry["limit"] = assessment_to_dict(result.limit)
        doc.append(entry)
    if args.trace:
        Path(args.trace).write_text(homotopy_csv(game, results[0]))
    _emit(dumps(doc), args.out)
    return 0 if all(r.converged for r in results) else 1


def cmd_lift(args: argparse.Namespace) -> int:
    game = _load_valid(args.game)
    A = load_assessment(Path(args.assessment), game) if args.assessment else None
    try:
        lifted = lift_witness(game, solve_star(game), A, _perturbation(args, game))
    except LiftError as e:
        doc = {"status": "error", "message": str(e), "constraint": e.constraint}
        if e.bound is not None:
            doc["bound"] = fmt(e.bound)
        _emit(dumps(doc), args.out)
        return 1
    _emit(dumps(assessment_to_dict(lifted)), args.out)
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    game = _load_valid(args.game)
    A = load_assessment(Path(args.assessment), game)
    if args.concept == "pbe":
        result = verify_pbe(game, A)
    elif args.concept == "truth-leaning":
        result = verify_truth_leaning(game, A)
    elif args.concept == "purifiable":
        result = verify_purifiable(game, A, solve_star(game))
    elif args.concept == "perturbed":
        result = verify_perturbed_pbe(game, _perturbation(args, game), A)
    else:
        result = verify_auxiliary(game, A.sigma, A.mu)
    _emit(dumps(check_to_dict(result)), args.out)
    return 0 if result.passed else 1


def cmd_random(args: argparse.Namespace) -> int:
    if not 0.0 <= args.density <= 1.0:
        raise UsageError(f"--density must lie in [0, 1], got {args.density}")
    game = random_game(args.items, args.density, args.actions, args.seed)
    _emit(dumps(game_to_dict(game)), args.out)
    return 0


def cmd_oracle_compare(args: argparse.Namespace) -> int:
    game = _load_valid(args.game)
    try:
        grid = OracleGrid(
            _rational_flag(args.step, "--step"), _rational_flag(args.tolerance, "--tolerance")
        )
    except ValueError as e:
        raise UsageError(str(e)) from None
    if args.solver == "perturbed":
        eps = _perturbation(args, game)
        output: Any = solve_perturbed(game, eps)
        points = oracle_pbe_grid(game, grid, eps)
    else:
        eps = None
        output = find_truth_leaning(game)
        candidates = oracle_pbe_grid(game, grid, face_value_off_path=True)
        points = [A for A in candidates if verify_truth_leaning(game, A).passed]
    comparison = oracle_compare(game, output, grid, eps, points)
    doc = {
        "ok": comparison.ok,
        "oraclePoints": len(points),
        "unsupported": comparison.unsupported,
        "unexplained": comparison.unexplained,
    }
    _emit(dumps(doc), args.out)
    return 0 if comparison.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evigame", description="Evidence game equilibrium solver")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, handler, help_text: str, game: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        if game:
            p.add_argument("game", help="game JSON file")
        p.add_argument("--out", help="write output here instead of stdout")
        p.set_defaults(handler=handler)
        return p

    command("validate", cmd_validate, "check the structural assumptions of a game")

    p = command("analyze", cmd_analyze, "full refinement report")
    p.add_argument("--timing", action="store_true", help="include wall-clock timing")

    command("solve-star", cmd_solve_star, "star beliefs and the sender strategy set")
    command("truth-leaning", cmd_truth_leaning, "every truth-leaning equilibrium family")

    p = command("purifiable", cmd_purifiable, "construct a purifiable equilibrium")
    p.add_argument("--weights", help='tie weights, e.g. "1/2=1:3/10,0:7/10"')

    p = command("disturbed-sweep", cmd_disturbed_sweep, "purification trace as CSV")
    p.add_argument("--scales", required=True, help="decreasing disturbance scales, e.g. 0.5,0.25,0.1")
    p.add_argument("--family", choices=FAMILIES, default="gaussian")
    p.add_argument("--pattern", help='per-action shock scales, e.g. "1:1,0:0"')
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--summary", help="write the limit and verdict as JSON here")

    p = command("perturbed", cmd_perturbed, "equilibria of one perturbed game")
    _add_perturbation_flags(p)

    p = command("weakly-tl", cmd_weakly_tl, "homotopy toward weakly truth-leaning equilibria")
    p.add_argument("--path", choices=PATHS + ("custom",), default="all")
    p.add_argument("--factor", default=str(DEFAULT_FACTOR))
    p.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    p.add_argument("--trace", help="write the step trace CSV here (single path)")
    _add_perturbation_flags(p)

    p = command("lift", cmd_lift, "carry a purifiable truth-leaning equilibrium into a perturbed game")
    p.add_argument("--assessment", help="assessment JSON (default: the constructed purifiable one)")
    _add_perturbation_flags(p)

    p = command("check", cmd_check, "judge an assessment against one solution concept")
    p.add_argument("assessment", help="assessment JSON file")
    p.add_argument("--concept", choices=CONCEPTS, default="pbe")
    _add_perturbation_flags(p)

    p = command("random", cmd_random, "generate a valid random game", game=False)
    p.add_argument("--items", type=int, default=3)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--actions", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)

    p = command("oracle-compare", cmd_oracle_compare, "differential check against the grid oracle")
    p.add_argument("--solver", choices=("truth-leaning", "perturbed"), default="truth-leaning")
    p.add_argument("--step", default="1/20")
    p.add_argument("--tolerance", default="0")
    _add_perturbation_flags(p)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=log_level("WARNING"), stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.handler(args)
    except UsageError as e:
        sys.stderr.write(f"evigame {args.command}: error: {e}\n")
        return 2
    except (EvidenceGameError, SolverDefect, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
