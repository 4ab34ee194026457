"""
Perturbed games: exact equilibrium families under truth rewards and truthful floors,
homotopy continuation toward weakly truth-leaning limits, the lift of purifiable
truth-leaning equilibria into perturbed games, and the implication report.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from auxiliary_solver import NotFound, StarSolution, find_truth_leaning, solve_star
from disturbed_lab import construct_purifiable, genericity_check
from equilibrium_check import (
    Assessment,
    CheckResult,
    Perturbation,
    PerturbationError,
    ReceiverStrategy,
    verify_pbe,
    verify_perturbed_pbe,
    verify_purifiable,
    verify_truth_leaning,
)
from evidence_game import (
    ONE,
    ZERO,
    BeliefSystem,
    EvidenceGame,
    EvidenceGameError,
    RegimeExceededError,
    SenderStrategy,
    SolverDefect,
    posterior_from_strategy,
    rationalize,
    rationalize_row,
)
from evigame_config import HOMOTOPY_TOLERANCE, worker_count
from receiver_response import best_response_set
from structure_search import (
    PERTURBED,
    EquilibriumFamily,
    assessment_coordinates,
    coordinate_names,
    search,
    sup_distance,
)

logger = logging.getLogger(__name__)

# Configuration
PERTURBED_ITEM_LIMIT = 6
PERTURBED_ACTION_LIMIT = 4
DEFAULT_FACTOR = Fraction(1, 2)
DEFAULT_STEPS = 30
CANONICAL_REWARD = Fraction(1, 10)
CANONICAL_FLOOR = Fraction(1, 20)
INTERIOR_SHRINK = 2**20  # fallback selections keep this fraction of the family's slack
MAX_FLOOR_HALVINGS = 60


class LiftError(EvidenceGameError):
    """A truth-leaning equilibrium cannot be lifted into the given perturbed game"""

    def __init__(self, message: str, constraint: str = "", bound: Optional[Fraction] = None):
        super().__init__(message)
        self.constraint = constraint
        self.bound = bound


def solve_perturbed(game: EvidenceGame, eps: Perturbation) -> List[EquilibriumFamily]:
    """Every equilibrium family of the perturbed game, exact"""
    eps.validate_for(game)
    if len(game.items) > PERTURBED_ITEM_LIMIT or len(game.actions) > PERTURBED_ACTION_LIMIT:
        raise RegimeExceededError(
            f"Perturbed search handles |E| <= {PERTURBED_ITEM_LIMIT} and K <= {PERTURBED_ACTION_LIMIT}"
        )
    outcome = search(game, PERTURBED, lambda A: verify_perturbed_pbe(game, eps, A), eps)
    if not outcome.families:
        raise SolverDefect(
            f"No equilibrium of the perturbed game among {outcome.structures_tried} structures",
            outcome.refuted,
        )
    return outcome.families


@dataclass(frozen=True)
class HomotopyPath:
    base: Perturbation
    factor: Fraction = DEFAULT_FACTOR
    steps: int = DEFAULT_STEPS
    label: str = "custom"

    def __post_init__(self):
        if not ZERO < self.factor < ONE:
            raise PerturbationError(f"Homotopy factor must lie in (0, 1), got {self.factor}")
        if self.steps < 3:
            raise PerturbationError(f"Homotopy needs at least 3 steps, got {self.steps}")

    def scale(self, k: int) -> Fraction:
        return self.factor**k

    def perturbation(self, k: int) -> Perturbation:
        return self.base.scaled(self.scale(k))


@dataclass(frozen=True)
class HomotopyStep:
    step: int
    scale: Fraction
    assessment: Assessment
    family: int
    change: Optional[Fraction]


@dataclass
class HomotopyResult:
    path: HomotopyPath
    trace: List[HomotopyStep]
    verdict: str
    final_change: Fraction
    limit: Optional[Assessment] = None
    pbe: Optional[CheckResult] = None

    @property
    def converged(self) -> bool:
        return self.verdict == "converged"


def _lexicographic_key(game: EvidenceGame, A: Assessment) -> Tuple[Fraction, ...]:
    coords = assessment_coordinates(game, A)
    return tuple(coords[name] for name in coordinate_names(game))


def _select(
    game: EvidenceGame,
    eps: Perturbation,
    families: List[EquilibriumFamily],
    previous: Optional[Assessment],
) -> Tuple[int, Assessment]:
    if previous is None:
        candidates = [(f.lexicographic_minimum(), i) for i, f in enumerate(families)]
        candidates.sort(key=lambda c: (_lexicographic_key(game, c[0]), c[1]))
        choices = [(i, A) for A, i in candidates]
    else:
        target = assessment_coordinates(game, previous)
        ranked = []
        for i, fam in enumerate(families):
            distance, A = fam.nearest(target)
            ranked.append((distance, i, A))
        ranked.sort(key=lambda r: (r[0], r[1]))
        choices = [(i, A) for _, i, A in ranked]

    i, A = choices[0]
    if verify_perturbed_pbe(game, eps, A).passed:
        return i, A
    # closure point left the family; step inside by a sliver of the family's slack
    fam = families[i]
    target = assessment_coordinates(game, previous or A)
    _, inner = fam.nearest(target, fam.t_star / INTERIOR_SHRINK)
    if not verify_perturbed_pbe(game, eps, inner).passed:
        raise SolverDefect(f"Homotopy selection from {fam.describe()} is not an equilibrium")
    return i, inner


def _rationalized_limit(game: EvidenceGame, A: Assessment) -> Assessment:
    sigma = SenderStrategy({e: rationalize_row(A.sigma.rows[e]) for e in game.items})
    rho = ReceiverStrategy({m: rationalize_row(A.rho.rows[m]) for m in game.items})
    mu: Dict[str, Fraction] = {}
    for m in game.items:
        posterior = posterior_from_strategy(game, sigma, m)
        mu[m] = posterior if posterior is not None else rationalize(A.mu[m])
    return Assessment(sigma, rho, BeliefSystem(mu))


def homotopy_weakly_tl(game: EvidenceGame, path: HomotopyPath) -> HomotopyResult:
    """Follow equilibria of shrinking perturbations by nearest-neighbour selection"""
    trace: List[HomotopyStep] = []
    previous: Optional[Assessment] = None
    for k in range(path.steps):
        eps = path.perturbation(k)
        families = solve_perturbed(game, eps)
        index, chosen = _select(game, eps, families, previous)
        change = None
        if previous is not None:
            change = sup_distance(
                assessment_coordinates(game, previous), assessment_coordinates(game, chosen)
            )
        trace.append(HomotopyStep(k, path.scale(k), chosen, index, change))
        previous = chosen

    final_change = trace[-1].change if trace[-1].change is not None else ZERO
    if final_change >= Fraction(HOMOTOPY_TOLERANCE):
        logger.info(f"Homotopy on path '{path.label}' diverges (last change {float(final_change):.3g})")
        return HomotopyResult(path, trace, "divergent", final_change)

    limit = _rationalized_limit(game, trace[-1].assessment)
    pbe = verify_pbe(game, limit)
    verdict = "converged" if pbe.passed else "unverified-limit"
    logger.info(f"Homotopy on path '{path.label}': {verdict}")
    return HomotopyResult(path, trace, verdict, final_change, limit, pbe)


def canonical_paths(
    game: EvidenceGame, factor: Fraction = DEFAULT_FACTOR, steps: int = DEFAULT_STEPS
) -> List[HomotopyPath]:
    """Equal, increasing and decreasing reward orderings over the evidence items"""
    items = game.items
    n = len(items)
    floors = {e: CANONICAL_FLOOR for e in items}
    orderings = {
        "equal": {e: CANONICAL_REWARD for e in items},
        "increasing": {e: CANONICAL_REWARD * (i + 1) / n for i, e in enumerate(items)},
        "decreasing": {e: CANONICAL_REWARD * (n - i) / n for i, e in enumerate(items)},
    }
    return [
        HomotopyPath(Perturbation(rewards, dict(floors)), factor, steps, label)
        for label, rewards in orderings.items()
    ]


def _lift_gap(game: EvidenceGame, A: Assessment, eps: Perturbation) -> None:
    for e in game.items:
        if A.sigma.prob(e, e) == ONE:
            continue
        best = max(A.rho.value(m) for m in game.space.lower(e))
        gap = best - A.rho.value(e)
        if not eps.reward[e] < gap:
            raise LiftError(
                f"Reward {eps.reward[e]} for '{e}' is not below its disclosure gap {gap}",
                f"reward[{e}] < {gap}",
                gap,
            )


def _lifted(game: EvidenceGame, A: Assessment, eps: Perturbation) -> Assessment:
    rows: Dict[str, Dict[str, Fraction]] = {}
    for e in game.items:
        if A.sigma.prob(e, e) == ONE:
            rows[e] = dict(A.sigma.rows[e])
        else:
            keep = ONE - eps.floor[e]
            rows[e] = {m: p * keep for m, p in A.sigma.rows[e].items() if p}
            rows[e][e] = eps.floor[e]
    sigma = SenderStrategy(rows)
    mu = {m: posterior_from_strategy(game, sigma, m) for m in game.items}
    return Assessment(sigma, A.rho, BeliefSystem(mu))


def _belief_breaks(game: EvidenceGame, A: Assessment, lifted: Assessment) -> Optional[str]:
    for m in game.items:
        played = A.rho.support(m)
        if len(played) != 1 or best_response_set(game, lifted.mu[m]) != played:
            return m
    return None


def lift_witness(
    game: EvidenceGame,
    star: StarSolution,
    A: Optional[Assessment],
    eps: Perturbation,
) -> Assessment:
    """Carry a purifiable truth-leaning equilibrium into the perturbed game"""
    eps.validate_for(game)
    if not genericity_check(game, star).generic:
        raise LiftError("genericity precondition fails", "generic")
    if A is None:
        A = construct_purifiable(game, star)
        if not verify_truth_leaning(game, A).passed:
            raise LiftError("no purifiable truth-leaning equilibrium exists", "truth-leaning")
    elif not (verify_truth_leaning(game, A).passed and verify_purifiable(game, A, star).passed):
        raise LiftError("assessment is not a purifiable truth-leaning equilibrium", "precondition")
    for e in game.items:
        if A.sigma.prob(e, e) not in (ZERO, ONE):
            raise LiftError(f"Type '{e}' mixes truth with probability {A.sigma.prob(e, e)}", "pure truth")

    _lift_gap(game, A, eps)
    lifted = _lifted(game, A, eps)
    broken = _belief_breaks(game, A, lifted)
    if broken is not None:
        bound = None
        for j in range(1, MAX_FLOOR_HALVINGS + 1):
            factor = Fraction(1, 2**j)
            shrunk = Perturbation(dict(eps.reward), {e: f * factor for e, f in eps.floor.items()})
            if _belief_breaks(game, A, _lifted(game, A, shrunk)) is None:
                bound = factor
                break
        raise LiftError(
            f"Lifted belief at '{broken}' leaves the region where the receiver's response is constant",
            f"belief[{broken}]",
            bound,
        )
    check = verify_perturbed_pbe(game, eps, lifted)
    if not check.passed:
        raise SolverDefect(f"Lifted assessment fails {check.conditions()}")
    return lifted


@dataclass
class Implication:
    status: str
    witnesses: List[str] = field(default_factory=list)


@dataclass
class RelationsReport:
    truth_leaning: object
    purifiable: Optional[Assessment]
    generic: bool
    homotopies: List[HomotopyResult]
    weak_and_purifiable_is_truth_leaning: Implication
    truth_leaning_and_purifiable_is_weak: Implication


def _limit_implication(game: EvidenceGame, star: StarSolution, results: List[HomotopyResult]) -> Implication:
    witnesses = []
    failures = []
    for res in results:
        if res.limit is None or not res.converged:
            continue
        if verify_purifiable(game, res.limit, star).passed:
            label = f"path {res.path.label}"
            if verify_truth_leaning(game, res.limit).passed:
                witnesses.append(label)
            else:
                failures.append(label)
    if failures:
        return Implication("fails", failures)
    return Implication("holds" if witnesses else "vacuous", witnesses)


def _lift_implication(
    game: EvidenceGame, star: StarSolution, generic: bool, candidates: List[Assessment], path: HomotopyPath
) -> Implication:
    if not generic:
        return Implication("not-applicable")
    if not candidates:
        return Implication("vacuous")
    witnesses, failures = [], []
    for n, A in enumerate(candidates):
        try:
            lifted = lift_witness(game, star, A, path.perturbation(path.steps - 1))
        except LiftError as e:
            failures.append(f"candidate {n}: {e}")
            continue
        distance = sup_distance(assessment_coordinates(game, A), assessment_coordinates(game, lifted))
        if distance < Fraction(HOMOTOPY_TOLERANCE):
            witnesses.append(f"candidate {n}: lifted along path {path.label}")
        else:
            failures.append(f"candidate {n}: lifted point stays {float(distance):.3g} away")
    if failures:
        return Implication("fails", failures)
    return Implication("holds", witnesses)


def relations_report(game: EvidenceGame) -> RelationsReport:
    """Truth-leaning, purifiable and weakly truth-leaning sets with the implications between them"""
    if len(game.items) > PERTURBED_ITEM_LIMIT or len(game.actions) > PERTURBED_ACTION_LIMIT:
        raise RegimeExceededError("Relations report needs the exhaustive regime")
    star = solve_star(game)
    truth_leaning = find_truth_leaning(game)
    generic = genericity_check(game, star).generic
    purifiable = construct_purifiable(game, star) if generic else None

    paths = canonical_paths(game)
    with ThreadPoolExecutor(max_workers=min(len(paths), worker_count())) as pool:
        homotopies = list(pool.map(lambda p: homotopy_weakly_tl(game, p), paths))

    candidates: List[Assessment] = []
    if generic:
        if not isinstance(truth_leaning, NotFound):
            candidates += [
                f.representative
                for f in truth_leaning
                if verify_purifiable(game, f.representative, star).passed
            ]
        if purifiable is not None and verify_truth_leaning(game, purifiable).passed:
            if all(c != purifiable for c in candidates):
                candidates.append(purifiable)
    equal_path = paths[0]
    return RelationsReport(
        truth_leaning,
        purifiable,
        generic,
        homotopies,
        _limit_implication(game, star, homotopies),
        _lift_implication(game, star, generic, candidates, equal_path),
    )
