"""
Evidence games: the disclosure preorder, evidence distributions, receiver payoffs,
structural validation and exact belief arithmetic.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

from evigame_config import DENOMINATOR_BOUND

logger = logging.getLogger(__name__)

ZERO = Fraction(0)
ONE = Fraction(1)


class EvidenceGameError(ValueError):
    """Base class for domain errors raised by the solvers"""


class GameFormatError(EvidenceGameError):
    """A game, assessment or parameter document could not be parsed"""


class UnknownEvidenceError(EvidenceGameError):
    """An evidence identifier is not part of the game"""


class DimensionMismatchError(EvidenceGameError):
    """A strategy or belief system does not fit the game it is judged against"""


class RegimeExceededError(EvidenceGameError):
    """The game is larger than an exhaustive search can handle"""


class SolverDefect(RuntimeError):
    """A solver produced something its own verification rejects"""

    def __init__(self, message: str, trace: Optional[List[str]] = None):
        super().__init__(message)
        self.trace = list(trace or [])


@dataclass(frozen=True)
class EvidenceSpace:
    """Evidence items with the feasibility matrix feasible[m][e] (m can be disclosed by e)"""

    items: Tuple[str, ...]
    feasible: Tuple[Tuple[bool, ...], ...]

    @classmethod
    def from_lower_sets(cls, items: Iterable[str], lower: Mapping[str, Iterable[str]]) -> "EvidenceSpace":
        items = tuple(items)
        position = {e: i for i, e in enumerate(items)}
        matrix = [[False] * len(items) for _ in items]
        for e, disclosable in lower.items():
            if e not in position:
                raise UnknownEvidenceError(f"Unknown evidence '{e}'")
            for m in disclosable:
                if m not in position:
                    raise UnknownEvidenceError(f"Unknown evidence '{m}' in feasible set of '{e}'")
                matrix[position[m]][position[e]] = True
        return cls(items, tuple(tuple(row) for row in matrix))

    def index(self, e: str) -> int:
        try:
            return self.items.index(e)
        except ValueError:
            raise UnknownEvidenceError(f"Unknown evidence '{e}'") from None

    def precedes(self, m: str, e: str) -> bool:
        """True iff m can be disclosed by a sender holding e"""
        return self.feasible[self.index(m)][self.index(e)]

    def lower(self, e: str) -> Tuple[str, ...]:
        j = self.index(e)
        return tuple(m for i, m in enumerate(self.items) if self.feasible[i][j])

    def upper(self, m: str) -> Tuple[str, ...]:
        i = self.index(m)
        return tuple(e for j, e in enumerate(self.items) if self.feasible[i][j])


@dataclass(frozen=True)
class EvidenceGame:
    prior: Fraction
    space: EvidenceSpace
    f_good: Dict[str, Fraction]
    f_bad: Dict[str, Fraction]
    actions: Tuple[Fraction, ...]
    payoff_good: Dict[Fraction, Fraction]
    payoff_bad: Dict[Fraction, Fraction]

    @property
    def items(self) -> Tuple[str, ...]:
        return self.space.items

    def weight_good(self, e: str) -> Fraction:
        """Joint probability of evidence e and the good state"""
        return self.f_good.get(e, ZERO) * self.prior

    def weight_bad(self, e: str) -> Fraction:
        return self.f_bad.get(e, ZERO) * (ONE - self.prior)

    def mass(self, e: str) -> Fraction:
        return self.weight_good(e) + self.weight_bad(e)

    def with_payoffs(
        self,
        actions: Iterable[Fraction],
        payoff_good: Mapping[Fraction, Fraction],
        payoff_bad: Mapping[Fraction, Fraction],
    ) -> "EvidenceGame":
        return EvidenceGame(
            self.prior,
            self.space,
            dict(self.f_good),
            dict(self.f_bad),
            tuple(actions),
            dict(payoff_good),
            dict(payoff_bad),
        )


@dataclass(frozen=True)
class SenderStrategy:
    """rows[e][m] is the probability that a sender holding e discloses m"""

    rows: Dict[str, Dict[str, Fraction]]

    def prob(self, m: str, e: str) -> Fraction:
        return self.rows.get(e, {}).get(m, ZERO)

    def support(self, e: str) -> Tuple[str, ...]:
        return tuple(m for m, p in self.rows.get(e, {}).items() if p > 0)

    @classmethod
    def truthful(cls, items: Iterable[str]) -> "SenderStrategy":
        return cls({e: {e: ONE} for e in items})


@dataclass(frozen=True)
class BeliefSystem:
    beliefs: Dict[str, Fraction] = field(default_factory=dict)

    def __getitem__(self, m: str) -> Fraction:
        try:
            return self.beliefs[m]
        except KeyError:
            raise UnknownEvidenceError(f"No belief recorded for '{m}'") from None


@dataclass(frozen=True)
class Violation:
    invariant: str
    items: Tuple[str, ...]
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_game(game: EvidenceGame) -> ValidationReport:
    """Check every structural assumption; problems are reported, never raised"""
    found: List[Violation] = []

    def flag(invariant: str, items: Iterable[object], detail: str) -> None:
        found.append(Violation(invariant, tuple(str(i) for i in items), detail))

    items = game.items
    if not items:
        flag("identifiers", (), "evidence list is empty")
    for e in items:
        if not isinstance(e, str) or not e:
            flag("identifiers", (e,), "identifier must be a nonempty string")
    duplicates = sorted({e for e in items if items.count(e) > 1})
    if duplicates:
        flag("identifiers", duplicates, "identifiers must be unique")

    n = len(items)
    matrix = game.space.feasible
    if len(matrix) != n or any(len(row) != n for row in matrix):
        flag("feasibility matrix", (), f"expected a {n}x{n} relation")
    else:
        for i, e in enumerate(items):
            if not matrix[i][i]:
                flag("reflexivity", (e,), f"'{e}' cannot disclose itself")
        for i in range(n):
            for j in range(n):
                if not matrix[i][j]:
                    continue
                for k in range(n):
                    if matrix[j][k] and not matrix[i][k]:
                        flag(
                            "transitivity",
                            (items[i], items[j], items[k]),
                            f"{items[i]} <= {items[j]} <= {items[k]} but not {items[i]} <= {items[k]}",
                        )

    if not ZERO < game.prior < ONE:
        flag("prior", (), f"prior {game.prior} must lie strictly between 0 and 1")

    for label, dist in (("fG", game.f_good), ("fB", game.f_bad)):
        unknown = sorted(set(dist) - set(items))
        if unknown:
            flag("distribution", unknown, f"{label} assigns mass to unknown evidence")
        negative = [e for e, p in dist.items() if p < 0]
        if negative:
            flag("nonnegative mass", negative, f"{label} has negative mass")
        total = sum(dist.values(), ZERO)
        if total != ONE:
            flag("distribution", (), f"{label} sums to {total}, not 1")

    for e in items:
        if game.f_good.get(e, ZERO) + game.f_bad.get(e, ZERO) <= 0:
            flag("positive mass", (e,), f"'{e}' has zero total mass")

    actions = game.actions
    if not actions:
        flag("actions nonempty", (), "at least one action is required")
    for a, b in zip(actions, actions[1:]):
        if not a < b:
            flag("actions increasing", (a, b), f"actions must be strictly increasing ({a} >= {b})")

    for label, table in (("payoffG", game.payoff_good), ("payoffB", game.payoff_bad)):
        missing = [a for a in actions if a not in table]
        extra = [a for a in table if a not in actions]
        if missing or extra:
            flag("payoff table", missing + extra, f"{label} must cover exactly the actions")

    if all(a in game.payoff_good and a in game.payoff_bad for a in actions):
        diffs = [game.payoff_good[a] - game.payoff_bad[a] for a in actions]
        for k in range(1, len(actions)):
            if not diffs[k] > diffs[k - 1]:
                flag(
                    "increasing differences",
                    (actions[k - 1], actions[k]),
                    f"payoffG-payoffB goes {diffs[k - 1]} -> {diffs[k]}",
                )

    if found:
        logger.debug(f"Game validation found {len(found)} violation(s)")
    return ValidationReport(tuple(found))


def feasible_set(space: EvidenceSpace, e: str) -> Tuple[str, ...]:
    """Lower contour set LC(e), in item order"""
    return space.lower(e)


def face_value_belief(game: EvidenceGame, m: str) -> Fraction:
    """Posterior on the good state if m is taken to be the sender's true evidence"""
    game.space.index(m)
    return game.weight_good(m) / game.mass(m)


def message_mass(game: EvidenceGame, sigma: SenderStrategy, m: str) -> Fraction:
    """Unconditional probability that m is disclosed"""
    return sum((sigma.prob(m, e) * game.mass(e) for e in game.space.upper(m)), ZERO)


def posterior_from_strategy(game: EvidenceGame, sigma: SenderStrategy, m: str) -> Optional[Fraction]:
    """Bayes posterior at m, or None when m is disclosed with probability zero"""
    good = ZERO
    total = ZERO
    for e in game.space.upper(m):
        p = sigma.prob(m, e)
        if p:
            good += p * game.weight_good(e)
            total += p * game.mass(e)
    if total == 0:
        return None
    return good / total


def check_sender_strategy(game: EvidenceGame, sigma: SenderStrategy) -> List[str]:
    """Raise on unknown identifiers; return descriptions of invalid rows"""
    known = set(game.items)
    if set(sigma.rows) != known:
        raise DimensionMismatchError(
            f"Sender strategy rows {sorted(sigma.rows)} do not match evidence {sorted(known)}"
        )
    problems = []
    for e, row in sigma.rows.items():
        unknown = set(row) - known
        if unknown:
            raise DimensionMismatchError(f"Sender row '{e}' mentions unknown evidence {sorted(unknown)}")
        if any(p < 0 for p in row.values()):
            problems.append(f"row {e} has a negative probability")
        if sum(row.values(), ZERO) != ONE:
            problems.append(f"row {e} sums to {sum(row.values(), ZERO)}")
        for m, p in row.items():
            if p > 0 and not game.space.precedes(m, e):
                problems.append(f"'{e}' cannot disclose '{m}'")
    return problems


def rationalize(x, bound: int = DENOMINATOR_BOUND) -> Fraction:
    """Closest fraction with denominator at most bound"""
    return Fraction(x).limit_denominator(bound)


def rationalize_row(row: Mapping[Any, Any], bound: int = DENOMINATOR_BOUND) -> Dict[Any, Fraction]:
    """Rationalize a probability row; the largest entry absorbs the rounding so the row sums to 1"""
    if not row:
        return {}
    keys = list(row)
    largest = max(keys, key=lambda k: row[k])
    exact = {k: rationalize(row[k], bound) for k in keys if k != largest}
    exact[largest] = ONE - sum(exact.values(), ZERO)
    return {k: exact[k] for k in keys if exact[k] != 0}
