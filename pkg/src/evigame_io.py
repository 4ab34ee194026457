"""
JSON and CSV formats: games, assessments, perturbations, star solutions and
equilibrium families. Rationals are always written as "num/den" strings.
"""

import csv
import io
import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence

from equilibrium_check import Assessment, CheckResult, Perturbation, ReceiverStrategy
from evidence_game import (
    BeliefSystem,
    EvidenceGame,
    EvidenceSpace,
    GameFormatError,
    SenderStrategy,
    UnknownEvidenceError,
)
from structure_search import assessment_coordinates, coordinate_names

logger = logging.getLogger(__name__)

GAME_KEYS = ("prior", "evidence", "feasible", "fG", "fB", "actions", "payoffG", "payoffB")


def rational(value: Any, where: str = "value") -> Fraction:
    """Parse "num/den", a decimal string or an integer"""
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise GameFormatError(f"{where}: expected a rational string, got {value!r}")
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as e:
        raise GameFormatError(f"{where}: cannot parse {value!r} as a rational ({e})") from None


def fmt(x: Fraction) -> str:
    return str(Fraction(x))


def fmt_real(x: float) -> str:
    return f"{x:.12g}"


def _mapping(doc: Mapping[str, Any], key: str) -> Dict[str, Any]:
    value = doc.get(key)
    if not isinstance(value, dict):
        raise GameFormatError(f"'{key}' must be an object")
    return value


def game_from_dict(doc: Mapping[str, Any]) -> EvidenceGame:
    if not isinstance(doc, dict):
        raise GameFormatError("Game document must be a JSON object")
    missing = [k for k in GAME_KEYS if k not in doc]
    if missing:
        raise GameFormatError(f"Game document is missing {missing}")
    items = doc["evidence"]
    if not isinstance(items, list) or not all(isinstance(e, str) for e in items):
        raise GameFormatError("'evidence' must be a list of strings")
    rows = doc["feasible"]
    if not isinstance(rows, list) or len(rows) != len(items):
        raise GameFormatError("'feasible' must hold one list per evidence item")
    try:
        space = EvidenceSpace.from_lower_sets(items, dict(zip(items, rows)))
    except UnknownEvidenceError as e:
        raise GameFormatError(str(e)) from None
    actions_raw = doc["actions"]
    if not isinstance(actions_raw, list):
        raise GameFormatError("'actions' must be a list")
    actions = tuple(rational(a, "actions") for a in actions_raw)
    lookup = {str(a): a for a in actions}

    def action_table(key: str) -> Dict[Fraction, Fraction]:
        table = {}
        for a, u in _mapping(doc, key).items():
            action = lookup.get(a)
            if action is None:
                action = rational(a, key)
            table[action] = rational(u, f"{key}[{a}]")
        return table

    return EvidenceGame(
        rational(doc["prior"], "prior"),
        space,
        {e: rational(p, f"fG[{e}]") for e, p in _mapping(doc, "fG").items()},
        {e: rational(p, f"fB[{e}]") for e, p in _mapping(doc, "fB").items()},
        actions,
        action_table("payoffG"),
        action_table("payoffB"),
    )


def game_to_dict(game: EvidenceGame) -> Dict[str, Any]:
    return {
        "prior": fmt(game.prior),
        "evidence": list(game.items),
        "feasible": [list(game.space.lower(e)) for e in game.items],
        "fG": {e: fmt(game.f_good.get(e, 0)) for e in game.items},
        "fB": {e: fmt(game.f_bad.get(e, 0)) for e in game.items},
        "actions": [fmt(a) for a in game.actions],
        "payoffG": {fmt(a): fmt(game.payoff_good[a]) for a in game.actions},
        "payoffB": {fmt(a): fmt(game.payoff_bad[a]) for a in game.actions},
    }


def dumps(doc: Any) -> str:
    """Canonical text: two-space indent and a trailing newline"""
    return json.dumps(doc, indent=2) + "\n"


def _read_json(path: Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise GameFormatError(f"{path}: invalid JSON ({e})") from None


def load_game(path: Path) -> EvidenceGame:
    return game_from_dict(_read_json(path))


def save_game(game: EvidenceGame, path: Path) -> None:
    Path(path).write_text(dumps(game_to_dict(game)))


def assessment_from_dict(doc: Mapping[str, Any], game: EvidenceGame) -> Assessment:
    if not isinstance(doc, dict) or not {"sigma", "rho", "mu"} <= set(doc):
        raise GameFormatError("Assessment needs 'sigma', 'rho' and 'mu'")
    lookup = {str(a): a for a in game.actions}
    sigma = {
        e: {m: rational(p, f"sigma[{e}][{m}]") for m, p in row.items()}
        for e, row in _mapping(doc, "sigma").items()
    }
    rho = {}
    for m, row in _mapping(doc, "rho").items():
        rho[m] = {}
        for a, p in row.items():
            action = lookup.get(a)
            if action is None:
                action = rational(a, f"rho[{m}]")
            rho[m][action] = rational(p, f"rho[{m}][{a}]")
    mu = {m: rational(v, f"mu[{m}]") for m, v in _mapping(doc, "mu").items()}
    return Assessment(SenderStrategy(sigma), ReceiverStrategy(rho), BeliefSystem(mu))


def assessment_to_dict(A: Assessment) -> Dict[str, Any]:
    return {
        "sigma": {e: {m: fmt(p) for m, p in row.items()} for e, row in A.sigma.rows.items()},
        "rho": {m: {fmt(a): fmt(p) for a, p in row.items()} for m, row in A.rho.rows.items()},
        "mu": {m: fmt(v) for m, v in A.mu.beliefs.items()},
    }


def load_assessment(path: Path, game: EvidenceGame) -> Assessment:
    return assessment_from_dict(_read_json(path), game)


def perturbation_from_dict(doc: Mapping[str, Any]) -> Perturbation:
    return Perturbation(
        {e: rational(r, f"reward[{e}]") for e, r in _mapping(doc, "reward").items()},
        {e: rational(f, f"floor[{e}]") for e, f in _mapping(doc, "floor").items()},
    )


def load_perturbation(path: Path) -> Perturbation:
    return perturbation_from_dict(_read_json(path))


def perturbation_to_dict(eps: Perturbation) -> Dict[str, Any]:
    return {
        "reward": {e: fmt(r) for e, r in eps.reward.items()},
        "floor": {e: fmt(f) for e, f in eps.floor.items()},
    }


def check_to_dict(result: CheckResult) -> Dict[str, Any]:
    return {
        "pass": result.passed,
        "violations": [
            {"condition": v.condition, "where": list(v.where), "witness": v.witness}
            for v in result.violations
        ],
    }


def star_to_dict(star) -> Dict[str, Any]:
    """Star beliefs, the representative sigma* and the linear description of Sigma*"""
    return {
        "muStar": {m: fmt(v) for m, v in star.mu_star.beliefs.items()},
        "sigmaStar": {e: {m: fmt(p) for m, p in row.items()} for e, row in star.sigma_star.rows.items()},
        "levels": [
            {
                "belief": fmt(level.value),
                "truthful": list(level.truthful),
                "pooled": list(level.pooled),
            }
            for level in star.levels
        ],
        "polytope": {
            "support": {e: list(ms) for e, ms in star.permitted.items()},
            "forcedTruth": dict(star.forced_truth),
            "equalities": [
                {
                    "message": eq.message,
                    "belief": fmt(eq.belief),
                    "coefficients": {e: fmt(c) for e, c in eq.coeffs.items()},
                }
                for eq in star.equalities
            ],
        },
    }


def family_to_dict(family) -> Dict[str, Any]:
    return {
        "structure": family.describe(),
        "representative": assessment_to_dict(family.representative),
        "parameters": family.parameters(),
        "absorbed": [s.describe(family.game.items) for s in family.absorbed],
    }


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def trace_csv(outcomes, scales: Sequence[float], actions: Sequence[Fraction]) -> str:
    """Columns: scale, message, belief, action, probability, stderr"""
    rows: List[List[str]] = []
    for scale, outcome in zip(scales, outcomes):
        for m, response in outcome.rho.items():
            for a in actions:
                rows.append(
                    [
                        fmt_real(scale),
                        m,
                        fmt(outcome.mu[m]),
                        fmt(a),
                        fmt_real(response.probs.get(a, 0.0)),
                        fmt_real(response.stderr.get(a, 0.0)),
                    ]
                )
    return write_csv(["scale", "message", "belief", "action", "probability", "stderr"], rows)


def homotopy_csv(game: EvidenceGame, result) -> str:
    """Columns: step, epsilon scale, then one column per strategy coordinate"""
    names = coordinate_names(game)
    rows = []
    for step in result.trace:
        coords = assessment_coordinates(game, step.assessment)
        rows.append([str(step.step), fmt(step.scale)] + [fmt(coords[n]) for n in names])
    return write_csv(["step", "scale"] + names, rows)
