"""
Fixtures, random games, brute-force grid oracles and the full analysis report.
"""

import logging
import time
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from auxiliary_solver import (
    NotFound,
    belief_diagnostics,
    solve_star,
    verify_auxiliary,
)
from disturbed_lab import genericity_check
from equilibrium_check import Assessment, Perturbation, ReceiverStrategy
from evidence_game import (
    ONE,
    ZERO,
    BeliefSystem,
    EvidenceGame,
    EvidenceSpace,
    RegimeExceededError,
    SenderStrategy,
    face_value_belief,
    posterior_from_strategy,
)
from evigame_io import assessment_to_dict, family_to_dict, fmt, load_game, star_to_dict
from perturbed_lab import relations_report
from receiver_response import expected_utility, indifference_thresholds
from structure_search import EquilibriumFamily, assessment_coordinates, sup_distance

logger = logging.getLogger(__name__)

# Configuration
FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures"
FIXTURES = ("faa", "v1-good-bad", "v2-lenient", "v3-two-types", "v4-truthful")
ORACLE_ITEM_LIMIT = 3
ORACLE_ACTION_LIMIT = 3
PAYOFF_RANGE = 5
MAX_WEIGHT = 10


def fixture_path(name: str) -> Path:
    stem = name[:-5] if name.endswith(".json") else name
    return FIXTURE_DIR / f"{stem}.json"


def load_fixture(name: str) -> EvidenceGame:
    return load_game(fixture_path(name))


def _weights(rng: np.random.Generator, n: int, ceiling: int) -> List[int]:
    return [int(w) for w in rng.integers(0, ceiling + 1, size=n)]


def _distribution(raw: Sequence[int]) -> List[Fraction]:
    total = sum(raw)
    return [Fraction(w, total) for w in raw]


def random_game(num_items: int, density: float, num_actions: int, seed: int) -> EvidenceGame:
    """A valid game: random preorder, masses with denominator at most 100, increasing differences"""
    if num_items < 1 or num_actions < 2:
        raise ValueError("Random games need at least one item and two actions")
    rng = np.random.default_rng(seed)
    items = [f"e{i}" for i in range(num_items)]
    reach = [[i == j for j in range(num_items)] for i in range(num_items)]
    for i in range(num_items):
        for j in range(i + 1, num_items):
            if rng.random() < density:
                reach[i][j] = True
    for k in range(num_items):
        for i in range(num_items):
            if reach[i][k]:
                for j in range(num_items):
                    if reach[k][j]:
                        reach[i][j] = True
    # reach[i][j]: e_i can be disclosed by e_j
    lower = {items[j]: [items[i] for i in range(num_items) if reach[i][j]] for j in range(num_items)}
    space = EvidenceSpace.from_lower_sets(items, lower)

    ceiling = min(MAX_WEIGHT, 100 // num_items)
    good = _weights(rng, num_items, ceiling)
    bad = _weights(rng, num_items, ceiling)
    for i in range(num_items):
        if good[i] + bad[i] == 0:
            bad[i] = 1
    if sum(good) == 0:
        good[0] = 1
    if sum(bad) == 0:
        bad[-1] = 1
    prior = Fraction(int(rng.integers(1, 100)), 100)

    actions = tuple(Fraction(k) for k in range(num_actions))
    payoff_good, payoff_bad = _payoffs(rng, actions)
    return EvidenceGame(
        prior,
        space,
        dict(zip(items, _distribution(good))),
        dict(zip(items, _distribution(bad))),
        actions,
        payoff_good,
        payoff_bad,
    )


def _payoffs(rng: np.random.Generator, actions: Sequence[Fraction]):
    bad = [Fraction(int(v)) for v in rng.integers(-PAYOFF_RANGE, PAYOFF_RANGE + 1, size=len(actions))]
    good = [Fraction(int(v)) for v in rng.integers(-PAYOFF_RANGE, PAYOFF_RANGE + 1, size=len(actions))]
    for k in range(1, len(actions)):
        if good[k] - bad[k] <= good[k - 1] - bad[k - 1]:
            good[k] = bad[k] + (good[k - 1] - bad[k - 1]) + 1
    return dict(zip(actions, good)), dict(zip(actions, bad))


def resample_payoffs(game: EvidenceGame, seed: int) -> EvidenceGame:
    """Same evidence structure, fresh receiver payoffs"""
    good, bad = _payoffs(np.random.default_rng(seed), game.actions)
    return game.with_payoffs(game.actions, good, bad)


@dataclass(frozen=True)
class OracleGrid:
    step: Fraction
    tolerance: Fraction = ZERO

    def __post_init__(self):
        if not ZERO < self.step <= Fraction(1, 4):
            raise ValueError(f"Grid step must lie in (0, 1/4], got {self.step}")
        if (1 / self.step).denominator != 1:
            raise ValueError(f"Grid step must divide 1, got {self.step}")
        if self.tolerance < 0:
            raise ValueError("Oracle tolerance must be nonnegative")

    @property
    def points(self) -> int:
        return int(1 / self.step)


def _compositions(total: int, parts: int) -> Iterable[tuple]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _grid_rows(options: Sequence[Any], grid: OracleGrid) -> List[Dict[Any, Fraction]]:
    rows = []
    for counts in _compositions(grid.points, len(options)):
        rows.append({o: c * grid.step for o, c in zip(options, counts) if c})
    return rows


def _near_best(game: EvidenceGame, mu: Fraction, tolerance: Fraction) -> List[Fraction]:
    utilities = {a: expected_utility(game, mu, a) for a in game.actions}
    best = max(utilities.values())
    return [a for a in game.actions if utilities[a] >= best - tolerance]


def _receiver_rows(game: EvidenceGame, mu: Fraction, grid: OracleGrid) -> List[Dict[Fraction, Fraction]]:
    allowed = _near_best(game, mu, grid.tolerance)
    if len(allowed) == 1:
        return [{allowed[0]: ONE}]
    return _grid_rows(allowed, grid)


def oracle_pbe_grid(
    game: EvidenceGame,
    grid: OracleGrid,
    eps: Optional[Perturbation] = None,
    face_value_off_path: bool = False,
) -> List[Assessment]:
    """Every grid assessment meeting the equilibrium conditions within the tolerance.

    Unreached messages range over the belief grid, or sit at face value when
    face_value_off_path is set.
    """
    if len(game.items) > ORACLE_ITEM_LIMIT or len(game.actions) > ORACLE_ACTION_LIMIT:
        raise RegimeExceededError(
            f"Grid oracle handles |E| <= {ORACLE_ITEM_LIMIT} and K <= {ORACLE_ACTION_LIMIT}"
        )
    if eps is not None:
        eps.validate_for(game)
    items = game.items
    sender_rows = []
    for e in items:
        rows = _grid_rows(game.space.lower(e), grid)
        if eps is not None:
            rows = [r for r in rows if r.get(e, ZERO) >= eps.floor[e]]
        sender_rows.append(rows)
    belief_grid = [k * grid.step for k in range(grid.points + 1)]

    found = []
    for profile in product(*sender_rows):
        sigma = SenderStrategy(dict(zip(items, profile)))
        belief_options = []
        for m in items:
            posterior = posterior_from_strategy(game, sigma, m)
            if posterior is not None:
                belief_options.append([posterior])
            elif face_value_off_path:
                belief_options.append([face_value_belief(game, m)])
            else:
                belief_options.append(belief_grid)
        for beliefs in product(*belief_options):
            mu = dict(zip(items, beliefs))
            receiver_options = [_receiver_rows(game, mu[m], grid) for m in items]
            for rho_rows in product(*receiver_options):
                rho = ReceiverStrategy(dict(zip(items, rho_rows)))
                if _sender_ok(game, sigma, rho, grid.tolerance, eps):
                    found.append(Assessment(sigma, rho, BeliefSystem(mu)))
    logger.debug(f"Grid oracle found {len(found)} points at step {grid.step}")
    return found


def _sender_ok(
    game: EvidenceGame,
    sigma: SenderStrategy,
    rho: ReceiverStrategy,
    tolerance: Fraction,
    eps: Optional[Perturbation],
) -> bool:
    for e in game.items:
        def payoff(m: str) -> Fraction:
            bonus = eps.reward[e] if eps is not None and m == e else ZERO
            return rho.value(m) + bonus

        best = max(payoff(m) for m in game.space.lower(e))
        for m in sigma.support(e):
            if eps is not None and m == e and sigma.prob(e, e) <= eps.floor[e]:
                continue
            if payoff(m) < best - tolerance:
                return False
    return True


def auxiliary_oracle_grid(game: EvidenceGame, grid: OracleGrid) -> List[Assessment]:
    """Grid sender strategies forming a truth-leaning equilibrium of the belief-paid auxiliary game"""
    if len(game.items) > ORACLE_ITEM_LIMIT:
        raise RegimeExceededError(f"Grid oracle handles |E| <= {ORACLE_ITEM_LIMIT}")
    found = []
    rows = [_grid_rows(game.space.lower(e), grid) for e in game.items]
    for profile in product(*rows):
        sigma = SenderStrategy(dict(zip(game.items, profile)))
        mu = {}
        for m in game.items:
            posterior = posterior_from_strategy(game, sigma, m)
            mu[m] = posterior if posterior is not None else face_value_belief(game, m)
        beliefs = BeliefSystem(mu)
        if verify_auxiliary(game, sigma, beliefs).passed:
            found.append(Assessment(sigma, ReceiverStrategy({m: {} for m in game.items}), beliefs))
    return found


@dataclass
class OracleComparison:
    unsupported: List[str]
    unexplained: List[str]

    @property
    def ok(self) -> bool:
        return not self.unsupported and not self.unexplained


SolverOutput = Union[Sequence[EquilibriumFamily], Sequence[Assessment], NotFound]


def _extreme_points(family: EquilibriumFamily) -> List[Assessment]:
    points = [family.representative]
    for name, r in family.ranges.items():
        if r.degenerate:
            continue
        points.append(family.extreme(name, maximize=False))
        points.append(family.extreme(name, maximize=True))
    return points


def oracle_compare(
    game: EvidenceGame,
    solver_output: SolverOutput,
    grid: OracleGrid,
    eps: Optional[Perturbation] = None,
    oracle_points: Optional[List[Assessment]] = None,
) -> OracleComparison:
    """Solver equilibria against grid-oracle points, both directions within one grid step"""
    if oracle_points is None:
        oracle_points = oracle_pbe_grid(game, grid, eps)
    oracle_coords = [assessment_coordinates(game, A) for A in oracle_points]
    items: Sequence[Any] = [] if isinstance(solver_output, NotFound) else list(solver_output)

    def near_oracle(A: Assessment) -> bool:
        coords = assessment_coordinates(game, A)
        return any(sup_distance(coords, o) <= grid.step for o in oracle_coords)

    unsupported = []
    for n, item in enumerate(items):
        if isinstance(item, EquilibriumFamily):
            for point in _extreme_points(item):
                if not near_oracle(point):
                    unsupported.append(f"family {n} ({item.describe()}): {assessment_to_dict(point)}")
                    break
        elif not near_oracle(item):
            unsupported.append(f"assessment {n}: {assessment_to_dict(item)}")

    unexplained = []
    for A, coords in zip(oracle_points, oracle_coords):
        explained = False
        for item in items:
            if isinstance(item, EquilibriumFamily):
                distance, _ = item.nearest(coords)
            else:
                distance = sup_distance(coords, assessment_coordinates(game, item))
            if distance <= grid.step:
                explained = True
                break
        if not explained:
            unexplained.append(str(assessment_to_dict(A)))
    return OracleComparison(unsupported, unexplained)


def _homotopy_summary(result) -> Dict[str, Any]:
    summary = {
        "path": result.path.label,
        "verdict": result.verdict,
        "finalChange": f"{float(result.final_change):.12g}",
    }
    if result.limit is not None:
        summary["limit"] = assessment_to_dict(result.limit)
    return summary


def analyze(game: EvidenceGame, timing: bool = False) -> Dict[str, Any]:
    """Every refinement the library computes for one game, as a JSON-ready report"""
    started = time.perf_counter()
    star = solve_star(game)
    generic = genericity_check(game, star)
    relations = relations_report(game)
    tl = relations.truth_leaning

    report: Dict[str, Any] = {
        "game": {
            "evidence": list(game.items),
            "actions": [fmt(a) for a in game.actions],
            "faceValue": {m: fmt(face_value_belief(game, m)) for m in game.items},
            "thresholds": [
                {"belief": fmt(t.belief), "lower": fmt(t.lower), "upper": fmt(t.upper)}
                for t in indifference_thresholds(game)
            ],
        },
        "star": star_to_dict(star),
        "diagnostics": [
            {
                "message": d.message,
                "faceValue": fmt(d.face_value),
                "muStar": fmt(d.mu_star),
                "bayes": d.bayes_label,
                "minMatches": d.min_matches,
                "indicatorMatches": d.indicator_matches,
            }
            for d in belief_diagnostics(game, star)
        ],
        "genericity": {
            "generic": generic.generic,
            "ties": [
                {"message": m, "belief": fmt(v), "actions": [fmt(a) for a in acts]}
                for m, v, acts in generic.ties
            ],
        },
        "truthLeaning": (
            {"found": False, "structuresTried": tl.structures_tried, "pruned": tl.pruned}
            if isinstance(tl, NotFound)
            else {"found": True, "families": [family_to_dict(f) for f in tl]}
        ),
        "purifiable": (
            {"unique": True, "assessment": assessment_to_dict(relations.purifiable)}
            if relations.purifiable is not None
            else {
                "unique": False,
                "tiedLevels": sorted({fmt(v) for _, v, _ in generic.ties}),
            }
        ),
        "weaklyTruthLeaning": [_homotopy_summary(h) for h in relations.homotopies],
        "relations": {
            "weakAndPurifiableIsTruthLeaning": {
                "status": relations.weak_and_purifiable_is_truth_leaning.status,
                "witnesses": relations.weak_and_purifiable_is_truth_leaning.witnesses,
            },
            "truthLeaningAndPurifiableIsWeak": {
                "status": relations.truth_leaning_and_purifiable_is_weak.status,
                "witnesses": relations.truth_leaning_and_purifiable_is_weak.witnesses,
            },
        },
    }
    if timing:
        report["timing"] = {"seconds": round(time.perf_counter() - started, 3)}
    return report
