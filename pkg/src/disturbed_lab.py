"""
Disturbed games: truth-leaning outcomes under receiver payoff shocks, purification
traces as the shocks vanish, the purifiable-equilibrium constructor and genericity.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtri

from auxiliary_solver import StarSolution
from equilibrium_check import (
    Assessment,
    CheckResult,
    ReceiverStrategy,
    StarMismatchError,
    verify_pbe,
    verify_purifiable,
)
from evidence_game import (
    ONE,
    ZERO,
    BeliefSystem,
    EvidenceGame,
    EvidenceGameError,
    SenderStrategy,
    SolverDefect,
    rationalize_row,
)
from evigame_config import DEFAULT_SAMPLES, RHO_TOLERANCE, worker_count
from receiver_response import (
    Disturbance,
    DisturbanceError,
    SmoothedResponse,
    best_response_set,
    smoothed_response,
)

logger = logging.getLogger(__name__)

# Configuration
MIN_SCHEDULE_POINTS = 3
MONTE_CARLO_SLACK = 3  # standard errors allowed in the sender optimality re-check


class PurifiableWeightsError(EvidenceGameError):
    """Tie-breaking weights do not match the tied best responses at the star beliefs"""


class ScheduleError(EvidenceGameError):
    """Disturbance scale schedule is too short or not strictly decreasing"""


@dataclass(frozen=True)
class DisturbedOutcome:
    sigma: SenderStrategy
    mu: BeliefSystem
    rho: Dict[str, SmoothedResponse]

    def value(self, m: str) -> float:
        return self.rho[m].value


def _require_star(game: EvidenceGame, star: StarSolution) -> None:
    if not star.matches(game):
        raise StarMismatchError("Star solution was computed for a different game")


def solve_disturbed(
    game: EvidenceGame, eta: Disturbance, star: StarSolution, method: str = "auto"
) -> DisturbedOutcome:
    """The disturbed game's truth-leaning outcome: sigma*, mu* and smoothed responses at mu*"""
    _require_star(game, star)
    by_level: Dict[Fraction, SmoothedResponse] = {}
    rho = {}
    for m in game.items:
        level = star.mu_star[m]
        if level not in by_level:
            by_level[level] = smoothed_response(game, eta, level, method)
        rho[m] = by_level[level]
    outcome = DisturbedOutcome(star.sigma_star, star.mu_star, rho)

    for e in game.items:
        options = game.space.lower(e)
        best = max(outcome.value(m) for m in options)
        for m in star.sigma_star.support(e):
            slack = MONTE_CARLO_SLACK * max(rho[m2].value_stderr for m2 in options)
            if outcome.value(m) < best - slack:
                raise SolverDefect(
                    f"Disturbed outcome: type '{e}' discloses '{m}' worth {outcome.value(m)} below {best}"
                )
    return outcome


@dataclass(frozen=True)
class GenericityReport:
    generic: bool
    ties: Tuple[Tuple[str, Fraction, Tuple[Fraction, ...]], ...] = ()


def genericity_check(game: EvidenceGame, star: StarSolution) -> GenericityReport:
    """Generic iff the best response at every star belief is unique"""
    ties = []
    for m in game.items:
        tied = best_response_set(game, star.mu_star[m])
        if len(tied) > 1:
            ties.append((m, star.mu_star[m], tied))
    return GenericityReport(not ties, tuple(ties))


def construct_purifiable(
    game: EvidenceGame,
    star: StarSolution,
    weights: Optional[Mapping[Fraction, Mapping[Fraction, Fraction]]] = None,
) -> Assessment:
    """sigma*, mu* and a belief-measurable receiver: point mass, or the given weights at tied levels"""
    _require_star(game, star)
    weights = {Fraction(v): {Fraction(a): Fraction(p) for a, p in w.items()} for v, w in (weights or {}).items()}
    levels = {star.mu_star[m] for m in game.items}
    for v in weights:
        if v not in levels:
            raise PurifiableWeightsError(f"No message has star belief {v}")
        if len(best_response_set(game, v)) == 1:
            raise PurifiableWeightsError(f"Best response at belief {v} is unique; no weights allowed")

    rows: Dict[Fraction, Dict[Fraction, Fraction]] = {}
    for v in sorted(levels):
        tied = best_response_set(game, v)
        if len(tied) == 1:
            rows[v] = {tied[0]: ONE}
            continue
        if v not in weights:
            raise PurifiableWeightsError(
                f"Belief {v} ties actions {[str(a) for a in tied]}; weights are required"
            )
        w = weights[v]
        off = [a for a, p in w.items() if p and a not in tied]
        if off:
            raise PurifiableWeightsError(f"Weights at {v} put mass off the tied set: {[str(a) for a in off]}")
        if any(p < 0 for p in w.values()) or sum(w.values(), ZERO) != ONE:
            raise PurifiableWeightsError(f"Weights at {v} must be a probability distribution")
        rows[v] = {a: p for a, p in w.items() if p}

    rho = ReceiverStrategy({m: dict(rows[star.mu_star[m]]) for m in game.items})
    A = Assessment(star.sigma_star, rho, star.mu_star)
    check = verify_purifiable(game, A, star) + verify_pbe(game, A)
    if not check.passed:
        raise SolverDefect(f"Constructed purifiable equilibrium fails {check.conditions()}")
    return A


@dataclass
class PurificationTrace:
    scales: List[float]
    outcomes: List[DisturbedOutcome]
    limit: Assessment
    verdict: str
    sup_change: float
    pbe: CheckResult
    purifiable: CheckResult
    generic: bool
    notes: List[str] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.verdict == "converged"


def purification_trace(
    game: EvidenceGame,
    family: str,
    schedule: Sequence[float],
    star: StarSolution,
    pattern: Optional[Mapping[Fraction, float]] = None,
    seed: int = 0,
    samples: int = DEFAULT_SAMPLES,
) -> PurificationTrace:
    """Disturbed outcomes along a vanishing shock schedule and their rationalized limit"""
    _require_star(game, star)
    scales = [float(s) for s in schedule]
    if len(scales) < MIN_SCHEDULE_POINTS:
        raise ScheduleError(f"Schedule needs at least {MIN_SCHEDULE_POINTS} points, got {len(scales)}")
    if any(s <= 0 for s in scales) or any(b >= a for a, b in zip(scales, scales[1:])):
        raise ScheduleError("Schedule must be positive and strictly decreasing")
    pattern = dict(pattern or {game.actions[-1]: 1.0})
    base = Disturbance(family, pattern, seed, samples)

    def run(k: int) -> DisturbedOutcome:
        derived = int(np.random.SeedSequence([seed, k]).generate_state(1)[0])
        return solve_disturbed(game, base.scaled(scales[k], derived), star)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        outcomes = list(pool.map(run, range(len(scales))))

    last, previous = outcomes[-1], outcomes[-2]
    change = max(
        abs(last.rho[m].probs.get(a, 0.0) - previous.rho[m].probs.get(a, 0.0))
        for m in game.items
        for a in game.actions
    )
    rho = ReceiverStrategy({m: rationalize_row(last.rho[m].probs) for m in game.items})
    limit = Assessment(star.sigma_star, rho, star.mu_star)
    pbe = verify_pbe(game, limit)
    purifiable = verify_purifiable(game, limit, star)
    verdict = "converged" if change < RHO_TOLERANCE and pbe.passed else "not-converged"
    report = genericity_check(game, star)
    notes = []
    if not report.generic:
        notes.append("family-dependent limit")
    logger.info(f"Purification trace over {len(scales)} scales: {verdict} (sup change {change:.3g})")
    return PurificationTrace(scales, outcomes, limit, verdict, change, pbe, purifiable, report.generic, notes)


def shocked_indifference_belief(game: EvidenceGame, eta: Disturbance, value: float) -> float:
    """Belief at which the shocked receiver's expected action equals value (two actions, gaussian)"""
    if len(game.actions) != 2 or eta.family != "gaussian":
        raise DisturbanceError("Indifference belief is defined for two actions with gaussian shocks")
    low, high = game.actions
    share = (value - float(low)) / float(high - low)
    if not 0.0 < share < 1.0:
        raise DisturbanceError(f"Expected action {value} is not strictly between {low} and {high}")
    s = math.hypot(eta.scale(low), eta.scale(high))
    if s == 0:
        raise DisturbanceError("Degenerate disturbance: every action has scale 0")
    d_good = float(game.payoff_good[high] - game.payoff_good[low])
    d_bad = float(game.payoff_bad[high] - game.payoff_bad[low])
    mu = (s * float(ndtri(share)) - d_bad) / (d_good - d_bad)
    if not 0.0 <= mu <= 1.0:
        raise DisturbanceError(f"No belief in [0, 1] yields expected action {value}")
    return mu
