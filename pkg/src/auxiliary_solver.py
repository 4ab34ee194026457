"""
Auxiliary-game solver: the universal belief system mu* and sender-strategy set Sigma*
shared by every disturbed game, plus the exhaustive truth-leaning search of the
undisturbed game.

The auxiliary game pays the sender the receiver's belief itself. Its truth-leaning
equilibrium is built level by level: among the types still unassigned, the largest
up-closed set with the highest pooled posterior forms the next level. Types in it
whose face value reaches the level disclose truthfully; the others pool into them.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

from equilibrium_check import CheckResult, Collector, verify_truth_leaning
from evidence_game import (
    ONE,
    ZERO,
    BeliefSystem,
    DimensionMismatchError,
    EvidenceGame,
    RegimeExceededError,
    SenderStrategy,
    SolverDefect,
    check_sender_strategy,
    face_value_belief,
    posterior_from_strategy,
)
from exact_lp import LinearProgram, solve_linear_system
from structure_search import TRUTH_LEANING, EquilibriumFamily, search

logger = logging.getLogger(__name__)

# Configuration
STAR_ITEM_LIMIT = 12  # up-set enumeration is exponential in the number of items
TRUTH_LEANING_ITEM_LIMIT = 8
TRUTH_LEANING_ACTION_LIMIT = 5
VERTEX_VARIABLE_LIMIT = 16


@dataclass(frozen=True)
class StarLevel:
    value: Fraction
    members: Tuple[str, ...]
    truthful: Tuple[str, ...]
    pooled: Tuple[str, ...]


@dataclass(frozen=True)
class BayesEquality:
    """sum over senders e of sigma(message|e) * coeffs[e] == 0"""

    message: str
    belief: Fraction
    coeffs: Dict[str, Fraction]


@dataclass(frozen=True)
class StarSolution:
    prior: Fraction
    items: Tuple[str, ...]
    feasible: Tuple[Tuple[bool, ...], ...]
    f_good: Dict[str, Fraction]
    f_bad: Dict[str, Fraction]
    mu_star: BeliefSystem
    sigma_star: SenderStrategy
    levels: Tuple[StarLevel, ...]
    permitted: Dict[str, Tuple[str, ...]]
    forced_truth: Dict[str, bool]
    equalities: Tuple[BayesEquality, ...]

    def matches(self, game: EvidenceGame) -> bool:
        """Star objects depend only on the prior, the evidence structure and the distributions"""
        return (
            self.prior == game.prior
            and self.items == game.items
            and self.feasible == game.space.feasible
            and all(self.f_good.get(e, ZERO) == game.f_good.get(e, ZERO) for e in self.items)
            and all(self.f_bad.get(e, ZERO) == game.f_bad.get(e, ZERO) for e in self.items)
        )

    def contains(self, sigma: SenderStrategy) -> bool:
        return sigma_star_membership(self, sigma)

    def reached(self) -> Tuple[str, ...]:
        return tuple(m for level in self.levels for m in level.truthful)


def _up_closed_sets(game: EvidenceGame, remaining: List[str]) -> List[FrozenSet[str]]:
    upper = {e: frozenset(u for u in game.space.upper(e) if u in remaining) for e in remaining}
    found = []
    for k in range(1, len(remaining) + 1):
        for subset in combinations(remaining, k):
            chosen = frozenset(subset)
            if all(upper[e] <= chosen for e in chosen):
                found.append(chosen)
    return found


def _pooled_posterior(game: EvidenceGame, types) -> Fraction:
    good = sum((game.weight_good(e) for e in types), ZERO)
    return good / sum((game.mass(e) for e in types), ZERO)


def _levels(game: EvidenceGame) -> List[StarLevel]:
    remaining = list(game.items)
    levels = []
    while remaining:
        candidates = _up_closed_sets(game, remaining)
        best = max(_pooled_posterior(game, u) for u in candidates)
        members = frozenset().union(*(u for u in candidates if _pooled_posterior(game, u) == best))
        ordered = tuple(e for e in game.items if e in members)
        truthful = tuple(e for e in ordered if face_value_belief(game, e) >= best)
        pooled = tuple(e for e in ordered if e not in truthful)
        levels.append(StarLevel(best, ordered, truthful, pooled))
        logger.debug(f"Star level {best}: truthful {truthful}, pooled {pooled}")
        remaining = [e for e in remaining if e not in members]
    return levels


def _lexicographic_vertex(
    variables: List[Tuple[str, str]], lp: LinearProgram
) -> Dict[Tuple[str, str], Fraction]:
    """Fill the earliest (type, message) entries first"""
    lp = lp.copy()
    chosen = {}
    for j, key in enumerate(variables):
        result = lp.maximize({j: ONE})
        if not result.optimal:
            raise SolverDefect(f"Star polytope became {result.status} while fixing {key}")
        chosen[key] = result.value
        lp.add({j: ONE}, "==", result.value)
    return chosen


def _polytope(
    game: EvidenceGame, permitted: Dict[str, Tuple[str, ...]], equalities: Tuple[BayesEquality, ...]
) -> Tuple[List[Tuple[str, str]], LinearProgram]:
    """Free pooling entries with their row-sum and Bayes constraints"""
    variables = [(e, m) for e in game.items for m in permitted[e] if m != e]
    index = {key: j for j, key in enumerate(variables)}
    lp = LinearProgram(len(variables))
    for e in game.items:
        keys = [index[(e, m)] for m in permitted[e] if m != e]
        if keys:
            lp.add({j: ONE for j in keys}, "==", ONE)
    for eq in equalities:
        coeffs = {index[(e, eq.message)]: c for e, c in eq.coeffs.items() if e != eq.message}
        lp.add(coeffs, "==", -eq.coeffs.get(eq.message, ZERO))
    return variables, lp


def solve_star(game: EvidenceGame) -> StarSolution:
    """mu* and Sigma* from the auxiliary game's truth-leaning equilibrium"""
    if len(game.items) > STAR_ITEM_LIMIT:
        raise RegimeExceededError(
            f"Star solver handles at most {STAR_ITEM_LIMIT} evidence items, got {len(game.items)}"
        )
    levels = _levels(game)
    mu: Dict[str, Fraction] = {}
    permitted: Dict[str, Tuple[str, ...]] = {}
    forced: Dict[str, bool] = {}
    equalities = []
    for level in levels:
        for e in level.truthful:
            mu[e] = level.value
            permitted[e] = (e,)
            forced[e] = True
        for e in level.pooled:
            mu[e] = face_value_belief(game, e)
            permitted[e] = tuple(m for m in game.space.lower(e) if m in level.truthful)
            forced[e] = False
            if not permitted[e]:
                raise SolverDefect(f"Pooled type '{e}' has no truthful message at level {level.value}")
        for m in level.truthful:
            senders = [m] + [e for e in level.pooled if m in permitted[e]]
            coeffs = {
                e: game.mass(e) * (face_value_belief(game, e) - level.value) for e in senders
            }
            equalities.append(BayesEquality(m, level.value, coeffs))
    equalities = tuple(equalities)

    variables, lp = _polytope(game, permitted, equalities)
    vertex = _lexicographic_vertex(variables, lp)
    rows: Dict[str, Dict[str, Fraction]] = {}
    for e in game.items:
        if forced[e]:
            rows[e] = {e: ONE}
        else:
            rows[e] = {m: vertex[(e, m)] for m in permitted[e] if vertex[(e, m)]}
    sigma = SenderStrategy(rows)
    beliefs = BeliefSystem(mu)

    check = verify_auxiliary(game, sigma, beliefs)
    if not check.passed:
        raise SolverDefect(
            f"Auxiliary equilibrium failed re-verification: {check.conditions()}",
            [f"level {lv.value}: {lv.members}" for lv in levels],
        )
    logger.info(f"Star solution with {len(levels)} belief levels")
    return StarSolution(
        game.prior,
        game.items,
        game.space.feasible,
        dict(game.f_good),
        dict(game.f_bad),
        beliefs,
        sigma,
        tuple(levels),
        permitted,
        forced,
        equalities,
    )


def verify_auxiliary(game: EvidenceGame, sigma: SenderStrategy, mu: BeliefSystem) -> CheckResult:
    """Truth-leaning equilibrium conditions of the game where the sender is paid the belief"""
    out = Collector()
    for problem in check_sender_strategy(game, sigma):
        out.flag("strategy-validity", (), problem)
    for e in game.items:
        best = max(mu[m] for m in game.space.lower(e))
        for m in sigma.support(e):
            if mu[m] < best:
                out.flag("sender-optimality", (e, m), f"belief {mu[m]} < {best}")
        if mu[e] == best and sigma.prob(e, e) != ONE:
            out.flag("truth-leaning", (e,), f"truth attains {best} yet sigma({e}|{e})={sigma.prob(e, e)}")
    for m in game.items:
        posterior = posterior_from_strategy(game, sigma, m)
        if posterior is None:
            if mu[m] != face_value_belief(game, m):
                out.flag("off-path-belief", (m,), f"{mu[m]} differs from face value")
        elif posterior != mu[m]:
            out.flag("bayes-consistency", (m,), f"belief {mu[m]} but Bayes gives {posterior}")
    return out.result()


def sigma_star_membership(star: StarSolution, sigma: SenderStrategy) -> bool:
    """Exact test of the Sigma* constraints: supports, forced truth and Bayes equalities"""
    items = star.items
    if set(sigma.rows) != set(items):
        raise DimensionMismatchError(
            f"Sender strategy rows {sorted(sigma.rows)} do not match evidence {sorted(items)}"
        )
    for e in items:
        row = sigma.rows[e]
        if any(p < 0 for p in row.values()) or sum(row.values(), ZERO) != ONE:
            return False
        if any(p > 0 and m not in star.permitted[e] for m, p in row.items()):
            return False
        if star.forced_truth[e] and sigma.prob(e, e) != ONE:
            return False
    for eq in star.equalities:
        if sum((sigma.prob(eq.message, e) * c for e, c in eq.coeffs.items()), ZERO) != 0:
            return False
    return True


def sigma_star_vertices(star: StarSolution) -> List[SenderStrategy]:
    """All vertices of Sigma*, by exhaustive basis enumeration"""
    variables = [(e, m) for e in star.items for m in star.permitted[e] if m != e]
    if len(variables) > VERTEX_VARIABLE_LIMIT:
        raise RegimeExceededError(f"Vertex enumeration limited to {VERTEX_VARIABLE_LIMIT} pooling entries")
    index = {key: j for j, key in enumerate(variables)}
    matrix: List[List[Fraction]] = []
    rhs: List[Fraction] = []
    for e in star.items:
        keys = [index[(e, m)] for m in star.permitted[e] if m != e]
        if keys:
            matrix.append([ONE if j in keys else ZERO for j in range(len(variables))])
            rhs.append(ONE)
    for eq in star.equalities:
        row = [ZERO] * len(variables)
        for e, c in eq.coeffs.items():
            if e != eq.message:
                row[index[(e, eq.message)]] = c
        matrix.append(row)
        rhs.append(-eq.coeffs.get(eq.message, ZERO))

    vertices = []
    seen = set()
    for k in range(0, len(variables) + 1):
        for basis in combinations(range(len(variables)), k):
            sub = [[row[j] for j in basis] for row in matrix]
            if basis:
                solution = solve_linear_system(sub, rhs)
            else:
                solution = [] if all(b == 0 for b in rhs) else None
            if solution is None or any(v < 0 for v in solution):
                continue
            point = [ZERO] * len(variables)
            for j, v in zip(basis, solution):
                point[j] = v
            key = tuple(point)
            if key in seen:
                continue
            seen.add(key)
            rows = {e: {e: ONE} for e in star.items if star.forced_truth[e]}
            for e in star.items:
                if not star.forced_truth[e]:
                    rows[e] = {m: point[index[(e, m)]] for m in star.permitted[e] if point[index[(e, m)]]}
            vertices.append(SenderStrategy({e: rows[e] for e in star.items}))
    return vertices


@dataclass(frozen=True)
class BeliefDiagnostic:
    message: str
    face_value: Fraction
    mu_star: Fraction
    bayes: Optional[Fraction]
    min_matches: Optional[bool]
    indicator: int
    truth_prob: Fraction

    @property
    def indicator_matches(self) -> bool:
        return self.truth_prob == self.indicator

    @property
    def bayes_label(self) -> str:
        return "0/0-undefined" if self.bayes is None else str(self.bayes)


def belief_diagnostics(game: EvidenceGame, star: StarSolution) -> List[BeliefDiagnostic]:
    """Per message: face value, star belief, the Bayes term under sigma*, and the truth indicator"""
    report = []
    for m in game.items:
        nu = face_value_belief(game, m)
        mu = star.mu_star[m]
        bayes = posterior_from_strategy(game, star.sigma_star, m)
        matches = None if bayes is None else mu == min(nu, bayes)
        indicator = 1 if mu <= nu else 0
        diag = BeliefDiagnostic(m, nu, mu, bayes, matches, indicator, star.sigma_star.prob(m, m))
        if matches is False or not diag.indicator_matches:
            logger.info(f"Belief diagnostic mismatch at '{m}'")
        report.append(diag)
    return report


@dataclass(frozen=True)
class NotFound:
    """Certificate that no structure of the exhaustive search is realised"""

    structures_tried: int
    pruned: int
    refuted: Tuple[str, ...] = field(default_factory=tuple)


def find_truth_leaning(game: EvidenceGame) -> Union[List[EquilibriumFamily], NotFound]:
    if len(game.items) > TRUTH_LEANING_ITEM_LIMIT or len(game.actions) > TRUTH_LEANING_ACTION_LIMIT:
        raise RegimeExceededError(
            f"Truth-leaning search handles |E| <= {TRUTH_LEANING_ITEM_LIMIT} and "
            f"K <= {TRUTH_LEANING_ACTION_LIMIT}"
        )
    outcome = search(game, TRUTH_LEANING, lambda A: verify_truth_leaning(game, A))
    if not outcome.families:
        return NotFound(outcome.structures_tried, outcome.pruned, tuple(outcome.refuted))
    return outcome.families
