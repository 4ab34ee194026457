"""Tests for random games, the grid oracle, the analysis report and the command line"""

import csv
import io
import json
import math
from fractions import Fraction

import pytest

from auxiliary_solver import NotFound, find_truth_leaning
from equilibrium_check import (
    Assessment,
    Perturbation,
    ReceiverStrategy,
    verify_perturbed_pbe,
    verify_truth_leaning,
)
from evidence_game import BeliefSystem, SenderStrategy, validate_game
from evigame_bench import (
    FIXTURES,
    OracleGrid,
    analyze,
    fixture_path,
    load_fixture,
    oracle_compare,
    oracle_pbe_grid,
    random_game,
)
from evigame_cli import main
from evigame_io import game_to_dict
from perturbed_lab import solve_perturbed
from structure_search import assessment_coordinates

F = Fraction


def phi(x):
    return 0.5 * math.erfc(-x / math.sqrt(2))


def test_random_games_are_valid_and_seeded():
    for seed in range(20):
        game = random_game(4, 0.5, 3, seed)
        assert validate_game(game).ok, seed
        assert game_to_dict(game) == game_to_dict(random_game(4, 0.5, 3, seed))
    assert game_to_dict(random_game(4, 0.5, 3, 1)) != game_to_dict(random_game(4, 0.5, 3, 2))


def test_random_game_arguments():
    with pytest.raises(ValueError):
        random_game(0, 0.5, 2, 0)
    with pytest.raises(ValueError):
        random_game(3, 0.5, 1, 0)


def test_oracle_grid_arguments():
    with pytest.raises(ValueError):
        OracleGrid(F(1, 2))
    with pytest.raises(ValueError):
        OracleGrid(F(2, 9))
    with pytest.raises(ValueError):
        OracleGrid(F(1, 20), F(-1))
    assert OracleGrid(F(1, 20)).points == 20


def test_oracle_points_of_faa(faa):
    """Pooling with p >= 1/4 and no approval; unreached bad evidence keeps any belief below 2/3"""
    points = oracle_pbe_grid(faa, OracleGrid(F(1, 20)))
    pairs = {(A.sigma.prob("b", "n"), A.rho.prob(F(1), "n")) for A in points}
    assert pairs == {(F(k, 20), F(0)) for k in range(5, 21)}
    full_pooling = [A for A in points if A.sigma.prob("b", "n") == 1]
    assert len(full_pooling) == 14
    assert len(points) == 29


def test_oracle_contains_truthful_equilibrium(v4):
    points = oracle_pbe_grid(v4, OracleGrid(F(1, 20)))
    assert any(
        A.sigma.prob("g", "g") == 1 and A.rho.prob(F(1), "g") == 1 and A.rho.prob(F(1), "n") == 0
        for A in points
    )


def test_oracle_flags_corrupted_assessment(faa):
    eps = Perturbation.uniform(faa.items, F(1, 10), F(1, 20))
    corrupted = Assessment(
        SenderStrategy({"n": {"n": F(1)}, "b": {"n": F(1, 4), "b": F(3, 4)}}),
        ReceiverStrategy({"n": {F(0): F(4, 5), F(1): F(1, 5)}, "b": {F(0): F(1)}}),
        BeliefSystem({"n": F(2, 3), "b": F(0)}),
    )
    comparison = oracle_compare(faa, [corrupted], OracleGrid(F(1, 100)), eps)
    assert not comparison.ok
    assert len(comparison.unsupported) == 1
    assert len(comparison.unexplained) == 1


def test_oracle_explains_a_whole_segment(v3):
    """Equal rewards: every grid point of p1 + p2 = 1/2 lies on the solver's family"""
    eps = Perturbation.uniform(v3.items, F(1, 10), F(1, 20))
    grid = OracleGrid(F(1, 20))
    points = oracle_pbe_grid(v3, grid, eps)
    assert len(points) == 11
    assert oracle_compare(v3, solve_perturbed(v3, eps), grid, eps, points).ok


def test_truth_leaning_absence_matches_oracle(faa):
    grid = OracleGrid(F(1, 20))
    candidates = oracle_pbe_grid(faa, grid, face_value_off_path=True)
    points = [A for A in candidates if verify_truth_leaning(faa, A).passed]
    assert points == []
    assert oracle_compare(faa, find_truth_leaning(faa), grid, oracle_points=points).ok


def truth_leaning_oracle(game, grid):
    candidates = oracle_pbe_grid(game, grid, face_value_off_path=True)
    return [A for A in candidates if verify_truth_leaning(game, A).passed]


def bound_points(family):
    if all(r.degenerate for r in family.ranges.values()):
        return [family.representative]
    return [
        family.extreme(name, maximize)
        for name, r in family.ranges.items()
        if not r.degenerate
        for maximize in (False, True)
    ]


def exact_grid(game, solver_output, max_profiles=20_000):
    """A grid holding every family bound, or None when it is too fine to enumerate"""
    steps = 20
    if not isinstance(solver_output, NotFound):
        for family in solver_output:
            for point in bound_points(family):
                for value in assessment_coordinates(game, point).values():
                    steps = math.lcm(steps, value.denominator)
    if steps > 100:
        return None
    profiles = math.prod(math.comb(steps + len(game.space.lower(e)) - 1, steps) for e in game.items)
    if profiles > max_profiles:
        return None
    return OracleGrid(F(1, steps))


@pytest.mark.parametrize("name", FIXTURES)
def test_fixture_solvers_agree_with_oracle(name):
    game = load_fixture(name)
    grid = OracleGrid(F(1, 100))
    eps = Perturbation.uniform(game.items, F(1, 10), F(1, 20))
    assert oracle_compare(game, solve_perturbed(game, eps), grid, eps).ok
    points = truth_leaning_oracle(game, grid)
    assert oracle_compare(game, find_truth_leaning(game), grid, oracle_points=points).ok


@pytest.mark.parametrize("seed", range(50))
def test_random_tiny_games_agree_with_oracle(seed):
    game = random_game(2 + seed % 2, 0.5, 2 + (seed // 2) % 2, seed)
    eps = Perturbation.uniform(game.items, F(1, 10), F(1, 20))

    perturbed = solve_perturbed(game, eps)
    grid = exact_grid(game, perturbed)
    if grid is not None:
        assert oracle_compare(game, perturbed, grid, eps).ok
    else:
        assert oracle_compare(game, perturbed, OracleGrid(F(1, 20)), eps).unexplained == []
        for family in perturbed:
            for point in bound_points(family):
                assert verify_perturbed_pbe(game, eps, point).passed

    truth_leaning = find_truth_leaning(game)
    grid = exact_grid(game, truth_leaning)
    if grid is not None:
        points = truth_leaning_oracle(game, grid)
        assert oracle_compare(game, truth_leaning, grid, oracle_points=points).ok
    else:
        grid = OracleGrid(F(1, 20))
        points = truth_leaning_oracle(game, grid)
        assert oracle_compare(game, truth_leaning, grid, oracle_points=points).unexplained == []
        for family in [] if isinstance(truth_leaning, NotFound) else truth_leaning:
            assert verify_truth_leaning(game, family.representative).passed


def test_analyze_faa(faa):
    report = analyze(faa)
    assert report["star"]["muStar"] == {"n": "1/2", "b": "0"}
    assert report["truthLeaning"]["found"] is False
    assert report["purifiable"]["unique"] is True
    assert report["genericity"]["generic"] is True
    assert [h["path"] for h in report["weaklyTruthLeaning"]] == ["equal", "increasing", "decreasing"]
    assert "timing" not in report


def test_cli_validate_invalid_game(capsys):
    code = main(["validate", str(fixture_path("invalid/bad-transitivity"))])
    assert code == 1
    doc = json.loads(capsys.readouterr().out)
    assert doc["status"] == "invalid"
    assert "transitivity" in {v["invariant"] for v in doc["violations"]}


def test_cli_analyze_to_file(tmp_path):
    out = tmp_path / "report.json"
    assert main(["analyze", str(fixture_path("faa")), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["star"]["muStar"]["n"] == "1/2"


def test_cli_refuses_invalid_game_for_solvers():
    assert main(["solve-star", str(fixture_path("invalid/bad-transitivity"))]) == 1


def test_cli_disturbed_sweep_csv(capsys, tmp_path):
    summary = tmp_path / "summary.json"
    code = main(
        [
            "disturbed-sweep",
            str(fixture_path("faa")),
            "--scales",
            "0.5,0.25,0.1",
            "--summary",
            str(summary),
        ]
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    approvals = [
        float(r["probability"]) for r in rows if r["message"] == "n" and r["action"] == "1"
    ]
    for got, want in zip(approvals, (phi(-1), phi(-2), phi(-5))):
        assert abs(got - want) < 1e-10
    assert len(approvals) == 3
    assert json.loads(summary.read_text())["generic"] is True


def test_cli_perturbed_needs_perturbation_flags(capsys):
    assert main(["perturbed", str(fixture_path("faa"))]) == 2
    assert "--reward" in capsys.readouterr().err


def test_cli_perturbed(capsys):
    code = main(["perturbed", str(fixture_path("faa")), "--reward", "1/10", "--floor", "1/20"])
    assert code == 0
    families = json.loads(capsys.readouterr().out)["families"]
    assert families[0]["representative"]["sigma"]["b"]["n"] == "1/4"


def test_cli_lift_failure_is_reported(capsys):
    code = main(["lift", str(fixture_path("faa")), "--reward", "1/10", "--floor", "1/20"])
    assert code == 1
    doc = json.loads(capsys.readouterr().out)
    assert doc["status"] == "error"
    assert doc["constraint"] == "truth-leaning"


def test_cli_oracle_compare_truth_leaning():
    assert main(["oracle-compare", str(fixture_path("v1-good-bad"))]) == 0


def test_cli_bad_grid_step_is_usage_error():
    assert main(["oracle-compare", str(fixture_path("faa")), "--step", "1/3"]) == 2


def test_cli_usage_errors():
    assert main([]) == 2
    assert main(["frobnicate"]) == 2


def test_cli_random_game_validates(tmp_path):
    out = tmp_path / "game.json"
    assert main(["random", "--items", "3", "--seed", "7", "--out", str(out)]) == 0
    assert main(["validate", str(out), "--out", str(tmp_path / "status.json")]) == 0


def test_cli_output_is_byte_stable(capsys):
    path = str(fixture_path("v3-two-types"))
    assert main(["solve-star", path]) == 0
    first = capsys.readouterr().out
    assert main(["solve-star", path]) == 0
    assert capsys.readouterr().out == first
    assert json.loads(first)["muStar"] == {"n": "1/2", "b1": "0", "b2": "0"}
