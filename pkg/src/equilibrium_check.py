"""
Equilibrium predicates: perfect Bayesian, truth-leaning, purifiable and perturbed-game
conditions judged exactly in rationals. Every solver result is checked against these.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Tuple

from evidence_game import (
    ONE,
    ZERO,
    BeliefSystem,
    DimensionMismatchError,
    EvidenceGame,
    EvidenceGameError,
    SenderStrategy,
    check_sender_strategy,
    face_value_belief,
    posterior_from_strategy,
)
from receiver_response import best_response_set

logger = logging.getLogger(__name__)


class PerturbationError(EvidenceGameError):
    """Truth rewards or truthful-disclosure floors are out of range"""


class StarMismatchError(EvidenceGameError):
    """A star solution was computed for a different game"""


@dataclass(frozen=True)
class ReceiverStrategy:
    """rows[m][a] is the probability of action a after message m"""

    rows: Dict[str, Dict[Fraction, Fraction]]

    def prob(self, a: Fraction, m: str) -> Fraction:
        return self.rows.get(m, {}).get(a, ZERO)

    def support(self, m: str) -> Tuple[Fraction, ...]:
        return tuple(a for a, p in self.rows.get(m, {}).items() if p > 0)

    def value(self, m: str) -> Fraction:
        """Sender's expected action after m"""
        return sum((a * p for a, p in self.rows.get(m, {}).items()), ZERO)


@dataclass(frozen=True)
class Assessment:
    sigma: SenderStrategy
    rho: ReceiverStrategy
    mu: BeliefSystem


@dataclass(frozen=True)
class CheckViolation:
    condition: str
    where: Tuple[str, ...]
    witness: str


@dataclass(frozen=True)
class CheckResult:
    violations: Tuple[CheckViolation, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    def conditions(self) -> List[str]:
        return sorted({v.condition for v in self.violations})

    def __add__(self, other: "CheckResult") -> "CheckResult":
        return CheckResult(self.violations + other.violations)


@dataclass(frozen=True)
class Perturbation:
    """Truth reward reward[e] and minimum truthful probability floor[e] per evidence item"""

    reward: Dict[str, Fraction]
    floor: Dict[str, Fraction]

    @classmethod
    def uniform(cls, items: Iterable[str], reward: Fraction, floor: Fraction) -> "Perturbation":
        items = tuple(items)
        return cls({e: Fraction(reward) for e in items}, {e: Fraction(floor) for e in items})

    def validate_for(self, game: EvidenceGame) -> None:
        items = set(game.items)
        if set(self.reward) != items or set(self.floor) != items:
            raise PerturbationError("Perturbation must give a reward and a floor for every evidence item")
        for e in game.items:
            if self.reward[e] <= 0:
                raise PerturbationError(f"Reward for '{e}' must be positive, got {self.reward[e]}")
            if not ZERO < self.floor[e] < ONE:
                raise PerturbationError(f"Floor for '{e}' must lie in (0, 1), got {self.floor[e]}")

    def scaled(self, factor: Fraction) -> "Perturbation":
        return Perturbation(
            {e: r * factor for e, r in self.reward.items()},
            {e: f * factor for e, f in self.floor.items()},
        )


class Collector:
    def __init__(self):
        self.found: List[CheckViolation] = []

    def flag(self, condition: str, where: Iterable[object], witness: str) -> None:
        self.found.append(CheckViolation(condition, tuple(str(w) for w in where), witness))

    def result(self) -> CheckResult:
        return CheckResult(tuple(self.found))


def check_dimensions(game: EvidenceGame, A: Assessment) -> None:
    items = set(game.items)
    check_sender_strategy(game, A.sigma)
    if set(A.rho.rows) != items:
        raise DimensionMismatchError(
            f"Receiver strategy rows {sorted(A.rho.rows)} do not match evidence {sorted(items)}"
        )
    for m, row in A.rho.rows.items():
        unknown = [a for a in row if a not in game.actions]
        if unknown:
            raise DimensionMismatchError(f"Receiver row '{m}' uses unknown actions {[str(a) for a in unknown]}")
    if set(A.mu.beliefs) != items:
        raise DimensionMismatchError(
            f"Belief system covers {sorted(A.mu.beliefs)}, expected {sorted(items)}"
        )


def _strategy_validity(game: EvidenceGame, A: Assessment, out: Collector) -> None:
    for problem in check_sender_strategy(game, A.sigma):
        out.flag("strategy-validity", (), problem)
    for m, row in A.rho.rows.items():
        if any(p < 0 for p in row.values()) or sum(row.values(), ZERO) != ONE:
            out.flag("strategy-validity", (m,), f"receiver row sums to {sum(row.values(), ZERO)}")
    for m, mu in A.mu.beliefs.items():
        if not ZERO <= mu <= ONE:
            out.flag("strategy-validity", (m,), f"belief {mu} outside [0, 1]")


def _receiver_optimality(
    game: EvidenceGame, rho: ReceiverStrategy, beliefs: Mapping[str, Fraction], out: Collector
) -> None:
    for m in game.items:
        allowed = best_response_set(game, beliefs[m])
        for a in rho.support(m):
            if a not in allowed:
                out.flag(
                    "receiver-optimality",
                    (m, a),
                    f"action {a} played at belief {beliefs[m]}; best responses {[str(b) for b in allowed]}",
                )


def _bayes_consistency(game: EvidenceGame, A: Assessment, out: Collector) -> None:
    for m in game.items:
        posterior = posterior_from_strategy(game, A.sigma, m)
        if posterior is not None and posterior != A.mu[m]:
            out.flag("bayes-consistency", (m,), f"belief {A.mu[m]} but Bayes gives {posterior}")


def _disclosure_values(game: EvidenceGame, rho: ReceiverStrategy) -> Dict[str, Fraction]:
    return {m: rho.value(m) for m in game.items}


def verify_pbe(game: EvidenceGame, A: Assessment) -> CheckResult:
    """Sender optimality, receiver optimality and Bayes consistency on reached messages"""
    check_dimensions(game, A)
    out = Collector()
    _strategy_validity(game, A, out)
    values = _disclosure_values(game, A.rho)
    for e in game.items:
        best = max(values[m] for m in game.space.lower(e))
        for m in A.sigma.support(e):
            if values[m] < best:
                out.flag("sender-optimality", (e, m), f"disclosing {m} yields {values[m]} < {best}")
    _receiver_optimality(game, A.rho, A.mu.beliefs, out)
    _bayes_consistency(game, A, out)
    return out.result()


def verify_truth_leaning(game: EvidenceGame, A: Assessment) -> CheckResult:
    """A perfect Bayesian equilibrium where indifferent senders tell the truth and off-path beliefs are face value"""
    out = Collector()
    values = _disclosure_values(game, A.rho)
    pbe = verify_pbe(game, A)
    for e in game.items:
        best = max(values[m] for m in game.space.lower(e))
        if values[e] == best and A.sigma.prob(e, e) != ONE:
            out.flag("truth-leaning", (e,), f"truth attains {best} yet sigma({e}|{e})={A.sigma.prob(e, e)}")
    for m in game.items:
        if posterior_from_strategy(game, A.sigma, m) is None:
            nu = face_value_belief(game, m)
            if A.mu[m] != nu:
                out.flag("off-path-belief", (m,), f"unreached belief {A.mu[m]} differs from face value {nu}")
    return pbe + out.result()


def verify_purifiable(game: EvidenceGame, A: Assessment, star) -> CheckResult:
    """Sender strategy in the star set, beliefs equal to the star beliefs, belief-measurable best responses"""
    if not star.matches(game):
        raise StarMismatchError("Star solution was computed for a different game")
    check_dimensions(game, A)
    out = Collector()
    _strategy_validity(game, A, out)
    if not star.contains(A.sigma):
        out.flag("purifiable-sigma", (), "sender strategy is not in the star set")
    mu_star = star.mu_star.beliefs
    for m in game.items:
        if A.mu[m] != mu_star[m]:
            out.flag("purifiable-belief", (m,), f"belief {A.mu[m]} differs from star belief {mu_star[m]}")
    _receiver_optimality(game, A.rho, mu_star, out)
    items = game.items
    for i, m in enumerate(items):
        for m2 in items[i + 1 :]:
            if mu_star[m] == mu_star[m2] and A.rho.rows[m] != A.rho.rows[m2]:
                # rows may differ only by explicit zero entries
                left = {a: p for a, p in A.rho.rows[m].items() if p}
                right = {a: p for a, p in A.rho.rows[m2].items() if p}
                if left != right:
                    out.flag("equal-belief", (m, m2), f"equal star belief {mu_star[m]} but different responses")
    return out.result()


def verify_perturbed_pbe(game: EvidenceGame, eps: Perturbation, A: Assessment) -> CheckResult:
    """Equilibrium of the perturbed game; the floor exempts truthful disclosure from optimality"""
    eps.validate_for(game)
    check_dimensions(game, A)
    out = Collector()
    _strategy_validity(game, A, out)
    values = _disclosure_values(game, A.rho)
    for e in game.items:
        truth = A.sigma.prob(e, e)
        if truth < eps.floor[e]:
            out.flag("floor", (e,), f"sigma({e}|{e})={truth} below floor {eps.floor[e]}")

        def payoff(m: str) -> Fraction:
            return values[m] + (eps.reward[e] if m == e else ZERO)

        best = max(payoff(m) for m in game.space.lower(e))
        for m in A.sigma.support(e):
            if m == e and truth <= eps.floor[e]:
                continue
            if payoff(m) < best:
                out.flag("sender-optimality", (e, m), f"disclosing {m} yields {payoff(m)} < {best}")
    _receiver_optimality(game, A.rho, A.mu.beliefs, out)
    _bayes_consistency(game, A, out)
    return out.result()
