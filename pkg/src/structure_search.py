"""
Exhaustive structure search shared by the truth-leaning and perturbed-game solvers.

A structure fixes a belief region for every message and a disclosure behavior for
every type. Inside a structure the equilibrium conditions are linear in the sender
and receiver mixing probabilities, so each structure is one exact LP with a slack t
standing in for every strict inequality; the structure is realised iff max t > 0.
"""

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import chain, combinations, product
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from equilibrium_check import Assessment, CheckResult, Perturbation, ReceiverStrategy
from evidence_game import (
    ONE,
    ZERO,
    BeliefSystem,
    EvidenceGame,
    SenderStrategy,
    SolverDefect,
    face_value_belief,
)
from exact_lp import LinearProgram
from receiver_response import BeliefRegion, belief_regions, region_of

logger = logging.getLogger(__name__)

TRUTH_LEANING = "truth-leaning"
PERTURBED = "perturbed"

# Behavior states
TRUTHFUL = "truthful"
POOLING = "pooling"
ABOVE = "above"
FLOOR = "floor"


class Affine:
    """const + sum(coeffs[j] * x_j)"""

    __slots__ = ("const", "coeffs")

    def __init__(self, const=ZERO, coeffs: Optional[Dict[int, Fraction]] = None):
        self.const = Fraction(const)
        self.coeffs = dict(coeffs or {})

    @classmethod
    def var(cls, j: int) -> "Affine":
        return cls(ZERO, {j: ONE})

    def __add__(self, other: "Affine") -> "Affine":
        coeffs = dict(self.coeffs)
        for j, c in other.coeffs.items():
            coeffs[j] = coeffs.get(j, ZERO) + c
        return Affine(self.const + other.const, coeffs)

    def __sub__(self, other: "Affine") -> "Affine":
        return self + other * Fraction(-1)

    def __mul__(self, k) -> "Affine":
        k = Fraction(k)
        return Affine(self.const * k, {j: c * k for j, c in self.coeffs.items()})

    @property
    def is_constant(self) -> bool:
        return not any(self.coeffs.values())

    def at(self, x: Sequence[Fraction]) -> Fraction:
        return self.const + sum((c * x[j] for j, c in self.coeffs.items()), ZERO)


@dataclass(frozen=True)
class Behavior:
    state: str
    support: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Structure:
    regions: Tuple[BeliefRegion, ...]
    behaviors: Tuple[Behavior, ...]

    def describe(self, items: Sequence[str]) -> str:
        parts = []
        for e, region, behavior in zip(items, self.regions, self.behaviors):
            sends = ",".join(behavior.support) or "-"
            parts.append(f"{e}:{region.describe()}/{behavior.state}[{sends}]")
        return " ".join(parts)


@dataclass(frozen=True)
class ParamRange:
    lower: Fraction
    upper: Fraction
    lower_closed: bool
    upper_closed: bool

    @property
    def degenerate(self) -> bool:
        return self.lower == self.upper

    def describe(self) -> str:
        if self.degenerate:
            return str(self.lower)
        left = "[" if self.lower_closed else "("
        right = "]" if self.upper_closed else ")"
        return f"{left}{self.lower}, {self.upper}{right}"


def coordinate_names(game: EvidenceGame) -> List[str]:
    """Canonical order of strategy coordinates: sender entries, then receiver entries"""
    names = [f"sigma[{e}->{m}]" for e in game.items for m in game.space.lower(e)]
    names += [f"rho[{m}:{a}]" for m in game.items for a in game.actions]
    return names


def assessment_coordinates(game: EvidenceGame, A: Assessment) -> Dict[str, Fraction]:
    coords = {}
    for e in game.items:
        for m in game.space.lower(e):
            coords[f"sigma[{e}->{m}]"] = A.sigma.prob(m, e)
    for m in game.items:
        for a in game.actions:
            coords[f"rho[{m}:{a}]"] = A.rho.prob(a, m)
    return coords


def sup_distance(left: Mapping[str, Fraction], right: Mapping[str, Fraction]) -> Fraction:
    keys = set(left) | set(right)
    return max((abs(left.get(k, ZERO) - right.get(k, ZERO)) for k in keys), default=ZERO)


class StructureModel:
    """The LP of one structure: variables, coordinate expressions and constraints"""

    def __init__(
        self,
        game: EvidenceGame,
        structure: Structure,
        mode: str,
        eps: Optional[Perturbation] = None,
    ):
        self.game = game
        self.structure = structure
        self.mode = mode
        self.lp = LinearProgram()
        self.t = self.lp.new_var()
        self.lp.add({self.t: ONE}, "<=", ONE)
        self.names: Dict[int, str] = {}
        self.coords: Dict[str, Affine] = {}
        self.reached = set()
        items = game.items
        behavior = dict(zip(items, structure.behaviors))
        region = dict(zip(items, structure.regions))

        for e in items:
            b = behavior[e]
            row = Affine()
            for m in game.space.lower(e):
                self.coords[f"sigma[{e}->{m}]"] = Affine()
            if mode == TRUTH_LEANING and b.state == TRUTHFUL:
                self.coords[f"sigma[{e}->{e}]"] = Affine(ONE)
                self.reached.add(e)
                continue
            if mode == PERTURBED:
                truth = self._variable(f"sigma[{e}->{e}]")
                row = row + truth
                self.reached.add(e)
                if b.state == ABOVE:
                    self.ge(truth - Affine(eps.floor[e]), Affine(), strict=True)
                else:
                    self.eq(truth, Affine(eps.floor[e]))
            for m in b.support:
                x = self._variable(f"sigma[{e}->{m}]")
                self.ge(x, Affine(), strict=True)
                row = row + x
                self.reached.add(m)
            self.eq(row, Affine(ONE))

        self.values: Dict[str, Affine] = {}
        for m in items:
            r = region[m]
            for a in game.actions:
                self.coords[f"rho[{m}:{a}]"] = Affine()
            if r.is_threshold:
                total = Affine()
                value = Affine()
                for a in r.actions:
                    x = self._variable(f"rho[{m}:{a}]")
                    total = total + x
                    value = value + x * a
                self.eq(total, Affine(ONE))
                self.values[m] = value
            else:
                self.coords[f"rho[{m}:{r.actions[0]}]"] = Affine(ONE)
                self.values[m] = Affine(r.actions[0])

        for m in items:
            if m in self.reached:
                self._region_constraints(m, region[m])

        for e in items:
            self._sender_constraints(e, behavior[e], eps)

    def _variable(self, name: str) -> Affine:
        j = self.lp.new_var()
        self.names[j] = name
        expr = Affine.var(j)
        self.coords[name] = expr
        return expr

    def ge(self, lhs: Affine, rhs: Affine, strict: bool = False) -> None:
        diff = lhs - rhs
        if strict:
            diff = diff - Affine.var(self.t)
        self.lp.add(diff.coeffs, ">=", -diff.const)

    def eq(self, lhs: Affine, rhs: Affine) -> None:
        diff = lhs - rhs
        self.lp.add(diff.coeffs, "==", -diff.const)

    def _excess(self, m: str, bound: Fraction) -> Affine:
        """Good mass minus bound times total mass arriving at m"""
        total = Affine()
        for e in self.game.space.upper(m):
            expr = self.coords.get(f"sigma[{e}->{m}]")
            if expr is None:
                continue
            k = self.game.weight_good(e) - bound * self.game.mass(e)
            total = total + expr * k
        return total

    def _region_constraints(self, m: str, r: BeliefRegion) -> None:
        if r.is_threshold:
            self.eq(self._excess(m, r.lower), Affine())
            return
        if not (r.lower == ZERO and r.lower_closed):
            self.ge(self._excess(m, r.lower), Affine(), strict=not r.lower_closed)
        if not (r.upper == ONE and r.upper_closed):
            self.ge(Affine(), self._excess(m, r.upper), strict=not r.upper_closed)

    def _sender_constraints(self, e: str, b: Behavior, eps: Optional[Perturbation]) -> None:
        lower = self.game.space.lower(e)
        val = self.values
        if self.mode == TRUTH_LEANING:
            if b.state == TRUTHFUL:
                for m in lower:
                    self.ge(val[e], val[m])
                return
            lead = b.support[0]
            for m in b.support[1:]:
                self.eq(val[m], val[lead])
            for m in lower:
                self.ge(val[lead], val[m])
            self.ge(val[lead], val[e], strict=True)
            return
        truth = val[e] + Affine(eps.reward[e])
        others = [m for m in lower if m != e]
        if b.state == ABOVE:
            for m in others:
                self.ge(truth, val[m])
            for m in b.support:
                self.eq(val[m], truth)
            return
        lead = b.support[0]
        for m in b.support[1:]:
            self.eq(val[m], val[lead])
        self.ge(val[lead], truth)
        for m in others:
            self.ge(val[lead], val[m])

    def with_slack(self, sense: str, value) -> LinearProgram:
        lp = self.lp.copy()
        lp.add({self.t: ONE}, sense, value)
        return lp

    def fix(self, lp: LinearProgram, coords: Mapping[str, Fraction]) -> bool:
        """Pin every coordinate; False when a constant coordinate disagrees"""
        for name, expr in self.coords.items():
            target = coords.get(name, ZERO)
            if expr.is_constant:
                if expr.const != target:
                    return False
            else:
                lp.add(expr.coeffs, "==", target - expr.const)
        return True

    def assessment(self, x: Sequence[Fraction]) -> Assessment:
        game = self.game
        point = {name: expr.at(x) for name, expr in self.coords.items()}
        sigma = {
            e: {m: point[f"sigma[{e}->{m}]"] for m in game.space.lower(e) if point[f"sigma[{e}->{m}]"]}
            for e in game.items
        }
        rho = {
            m: {a: point[f"rho[{m}:{a}]"] for a in game.actions if point[f"rho[{m}:{a}]"]}
            for m in game.items
        }
        mu = {}
        for m in game.items:
            good = sum((sigma[e].get(m, ZERO) * game.weight_good(e) for e in game.space.upper(m)), ZERO)
            total = sum((sigma[e].get(m, ZERO) * game.mass(e) for e in game.space.upper(m)), ZERO)
            mu[m] = good / total if total else face_value_belief(game, m)
        return Assessment(SenderStrategy(sigma), ReceiverStrategy(rho), BeliefSystem(mu))


class EquilibriumFamily:
    """A relatively open polytope of equilibria sharing one structure"""

    def __init__(self, model: StructureModel, t_star: Fraction, point: Sequence[Fraction]):
        self.model = model
        self.game = model.game
        self.structure = model.structure
        self.t_star = t_star
        self.representative = model.assessment(point)
        self.absorbed: List[Structure] = []
        self.ranges = self._ranges()

    def _ranges(self) -> Dict[str, ParamRange]:
        closure = self.model.with_slack("==", ZERO)
        ranges = {}
        for j, name in sorted(self.model.names.items(), key=lambda kv: kv[1]):
            low = closure.minimize({j: ONE}).value
            high = closure.maximize({j: ONE}).value
            ranges[name] = ParamRange(low, high, self._attained(j, low), self._attained(j, high))
        return ranges

    def _attained(self, j: int, value: Fraction) -> bool:
        lp = self.model.lp.copy()
        lp.add({j: ONE}, "==", value)
        result = lp.maximize({self.model.t: ONE})
        return result.optimal and result.value > 0

    @property
    def dimension_hint(self) -> int:
        """Number of coordinates that actually vary"""
        return sum(1 for r in self.ranges.values() if not r.degenerate)

    @property
    def coordinates(self) -> Dict[str, Fraction]:
        return assessment_coordinates(self.game, self.representative)

    def closure_contains(self, coords: Mapping[str, Fraction]) -> bool:
        lp = self.model.with_slack("==", ZERO)
        return self.model.fix(lp, coords) and lp.feasible()

    def contains(self, coords: Mapping[str, Fraction]) -> bool:
        lp = self.model.lp.copy()
        if not self.model.fix(lp, coords):
            return False
        result = lp.maximize({self.model.t: ONE})
        return result.optimal and result.value > 0

    def nearest(
        self, target: Mapping[str, Fraction], strict_margin: Fraction = ZERO
    ) -> Tuple[Fraction, Assessment]:
        """Sup-norm closest point of the family closure, or of the part with slack at least strict_margin"""
        lp = self.model.with_slack(">=", strict_margin) if strict_margin else self.model.with_slack("==", ZERO)
        d = lp.new_var()
        floor_distance = ZERO
        for name, expr in self.model.coords.items():
            goal = Fraction(target.get(name, ZERO))
            if expr.is_constant:
                floor_distance = max(floor_distance, abs(expr.const - goal))
                continue
            upper = dict(expr.coeffs)
            upper[d] = Fraction(-1)
            lp.add(upper, "<=", goal - expr.const)
            lower = dict(expr.coeffs)
            lower[d] = ONE
            lp.add(lower, ">=", goal - expr.const)
        lp.add({d: ONE}, ">=", floor_distance)
        result = lp.minimize({d: ONE})
        if not result.optimal:
            raise SolverDefect(f"Projection onto {self.describe()} failed: {result.status}")
        return result.value, self.model.assessment(result.x)

    def extreme(self, name: str, maximize: bool) -> Assessment:
        """A closure point where the named variable reaches its bound"""
        j = next(k for k, n in self.model.names.items() if n == name)
        lp = self.model.with_slack("==", ZERO)
        result = lp.maximize({j: ONE}) if maximize else lp.minimize({j: ONE})
        return self.model.assessment(result.x)

    def lexicographic_minimum(self) -> Assessment:
        lp = self.model.with_slack("==", ZERO)
        for name in coordinate_names(self.game):
            expr = self.model.coords[name]
            if expr.is_constant:
                continue
            result = lp.minimize(expr.coeffs)
            lp.add(expr.coeffs, "==", result.value)
        return self.model.assessment(lp.minimize({}).x)

    def describe(self) -> str:
        return self.structure.describe(self.game.items)

    def parameters(self) -> Dict[str, str]:
        return {name: r.describe() for name, r in self.ranges.items()}


@dataclass
class SearchOutcome:
    families: List[EquilibriumFamily] = field(default_factory=list)
    structures_tried: int = 0
    pruned: int = 0
    refuted: List[str] = field(default_factory=list)


def _nonempty_subsets(items: Sequence[str]):
    return chain.from_iterable(combinations(items, k) for k in range(1, len(items) + 1))


def _value_bounds(region: BeliefRegion) -> Tuple[Fraction, Fraction]:
    return region.actions[0], region.actions[-1]


def _overlap(bounds: Sequence[Tuple[Fraction, Fraction]]) -> bool:
    return max(lo for lo, _ in bounds) <= min(hi for _, hi in bounds)


def _candidate_behaviors(
    game: EvidenceGame,
    e: str,
    bounds: Mapping[str, Tuple[Fraction, Fraction]],
    mode: str,
    eps: Optional[Perturbation],
) -> List[Behavior]:
    lower = game.space.lower(e)
    others = [m for m in lower if m != e]
    lo_e, hi_e = bounds[e]
    found = []
    if mode == TRUTH_LEANING:
        best_floor = max(bounds[m][0] for m in lower)
        if hi_e >= best_floor:
            found.append(Behavior(TRUTHFUL))
        for support in _nonempty_subsets(others):
            if all(bounds[m][1] >= best_floor and bounds[m][1] > lo_e for m in support) and _overlap(
                [bounds[m] for m in support]
            ):
                found.append(Behavior(POOLING, support))
        return found
    r = eps.reward[e]
    truth = (lo_e + r, hi_e + r)
    if all(truth[1] >= bounds[m][0] for m in others):
        for support in chain([()], _nonempty_subsets(others)):
            if not support or _overlap([bounds[m] for m in support] + [truth]):
                found.append(Behavior(ABOVE, support))
    others_floor = max((bounds[m][0] for m in others), default=truth[0])
    for support in _nonempty_subsets(others):
        if all(bounds[m][1] >= truth[0] and bounds[m][1] >= others_floor for m in support) and _overlap(
            [bounds[m] for m in support]
        ):
            found.append(Behavior(FLOOR, support))
    return found


def _senders(game: EvidenceGame, behaviors: Mapping[str, Behavior], mode: str) -> Dict[str, List[str]]:
    senders: Dict[str, List[str]] = {m: [] for m in game.items}
    for e, b in behaviors.items():
        if mode == PERTURBED or b.state == TRUTHFUL:
            senders[e].append(e)
        for m in b.support:
            senders[m].append(e)
    return senders


def _belief_compatible(region: BeliefRegion, nus: Sequence[Fraction]) -> bool:
    return region.lower <= max(nus) and region.upper >= min(nus)


def search(
    game: EvidenceGame,
    mode: str,
    verify: Callable[[Assessment], CheckResult],
    eps: Optional[Perturbation] = None,
) -> SearchOutcome:
    """Enumerate structures, solve each exactly and return the realised families"""
    items = game.items
    regions = belief_regions(game)
    nu = {m: face_value_belief(game, m) for m in items}
    nu_region = {m: region_of(regions, nu[m]) for m in items}
    outcome = SearchOutcome()
    families: List[EquilibriumFamily] = []

    for chosen in product(regions, repeat=len(items)):
        region = dict(zip(items, chosen))
        bounds = {m: _value_bounds(region[m]) for m in items}
        options = [_candidate_behaviors(game, e, bounds, mode, eps) for e in items]
        for behaviors in product(*options):
            assigned = dict(zip(items, behaviors))
            senders = _senders(game, assigned, mode)
            consistent = True
            for m in items:
                if senders[m]:
                    consistent = _belief_compatible(region[m], [nu[e] for e in senders[m]])
                else:
                    consistent = region[m] == nu_region[m]
                if not consistent:
                    break
            if not consistent:
                outcome.pruned += 1
                continue
            structure = Structure(tuple(chosen), tuple(behaviors))
            outcome.structures_tried += 1
            model = StructureModel(game, structure, mode, eps)
            result = model.lp.maximize({model.t: ONE})
            if not result.optimal or result.value <= 0:
                outcome.refuted.append(structure.describe(items))
                logger.debug(f"Refuted {structure.describe(items)}")
                continue
            family = EquilibriumFamily(model, result.value, result.x)
            check = verify(family.representative)
            if not check.passed:
                raise SolverDefect(
                    f"Structure {family.describe()} produced a point its predicate rejects: "
                    f"{check.conditions()}",
                    outcome.refuted,
                )
            families.append(family)

    outcome.families = _absorb(families)
    logger.info(
        f"{mode} search: {len(outcome.families)} families from {outcome.structures_tried} structures "
        f"({outcome.pruned} pruned)"
    )
    return outcome


def _absorb(families: List[EquilibriumFamily]) -> List[EquilibriumFamily]:
    """Fold point families lying on the boundary of a larger family into it"""
    kept = []
    for fam in families:
        if fam.dimension_hint == 0:
            coords = fam.coordinates
            host = next(
                (
                    other
                    for other in families
                    if other is not fam and other.dimension_hint > 0 and other.closure_contains(coords)
                ),
                None,
            )
            if host is not None:
                for name, r in host.ranges.items():
                    value = coords.get(name, ZERO)
                    if value == r.lower and not r.lower_closed:
                        host.ranges[name] = replace(r, lower_closed=True)
                    elif value == r.upper and not r.upper_closed:
                        host.ranges[name] = replace(r, upper_closed=True)
                host.absorbed.append(fam.structure)
                continue
            if any(k.dimension_hint == 0 and k.coordinates == coords for k in kept):
                continue
        kept.append(fam)
    return kept
