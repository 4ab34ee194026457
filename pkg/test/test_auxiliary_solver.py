"""Tests for the star solution and the truth-leaning search"""

from fractions import Fraction

import pytest

from auxiliary_solver import (
    NotFound,
    belief_diagnostics,
    find_truth_leaning,
    sigma_star_membership,
    sigma_star_vertices,
    solve_star,
    verify_auxiliary,
)
from equilibrium_check import verify_truth_leaning
from evidence_game import DimensionMismatchError, RegimeExceededError, SenderStrategy
from evigame_bench import OracleGrid, auxiliary_oracle_grid, random_game

F = Fraction


def test_star_of_faa(faa):
    star = solve_star(faa)
    assert star.mu_star.beliefs == {"n": F(1, 2), "b": F(0)}
    assert star.sigma_star.rows == {"n": {"n": F(1)}, "b": {"n": F(1)}}
    assert [lv.value for lv in star.levels] == [F(1, 2)]
    assert star.levels[0].truthful == ("n",)
    assert star.levels[0].pooled == ("b",)


def test_star_of_good_bad_variant(v1):
    star = solve_star(v1)
    assert star.mu_star.beliefs == {"n": F(1, 2), "b": F(3, 7)}
    assert star.sigma_star.prob("n", "b") == 1


def test_star_of_two_type_variant(v3):
    star = solve_star(v3)
    assert star.mu_star.beliefs == {"n": F(1, 2), "b1": F(0), "b2": F(0)}
    assert star.sigma_star.prob("n", "b1") == 1
    assert star.sigma_star.prob("n", "b2") == 1


def test_star_of_truthful_game(v4):
    """Levels strictly decrease: the good evidence first, then no evidence"""
    star = solve_star(v4)
    assert [lv.value for lv in star.levels] == [F(1), F(1, 3)]
    assert star.mu_star.beliefs == {"n": F(1, 3), "g": F(1)}
    assert star.sigma_star.rows == {"n": {"n": F(1)}, "g": {"g": F(1)}}


def test_star_ignores_receiver_payoffs(faa, v2):
    """The lenient variant differs only in payoffs"""
    first, second = solve_star(faa), solve_star(v2)
    assert first.mu_star == second.mu_star
    assert first.sigma_star == second.sigma_star
    assert first.matches(v2)


def test_star_passes_auxiliary_check(faa, v1, v3, v4):
    for game in (faa, v1, v3, v4):
        star = solve_star(game)
        assert verify_auxiliary(game, star.sigma_star, star.mu_star).passed


def test_auxiliary_check_rejects_partial_pooling(faa):
    star = solve_star(faa)
    sigma = SenderStrategy({"n": {"n": F(1)}, "b": {"n": F(1, 2), "b": F(1, 2)}})
    assert not verify_auxiliary(faa, sigma, star.mu_star).passed


def test_membership(faa):
    star = solve_star(faa)
    assert sigma_star_membership(star, star.sigma_star)
    partial = SenderStrategy({"n": {"n": F(1)}, "b": {"n": F(1, 2), "b": F(1, 2)}})
    assert not star.contains(partial)
    with pytest.raises(DimensionMismatchError):
        sigma_star_membership(star, SenderStrategy({"n": {"n": F(1)}}))


def test_vertices_of_point_set(faa, v3):
    assert sigma_star_vertices(solve_star(faa)) == [solve_star(faa).sigma_star]
    vertices = sigma_star_vertices(solve_star(v3))
    assert len(vertices) == 1
    assert vertices[0].prob("n", "b1") == 1


def test_belief_diagnostics(faa):
    by_message = {d.message: d for d in belief_diagnostics(faa, solve_star(faa))}
    n, b = by_message["n"], by_message["b"]
    assert n.bayes == F(1, 2)
    assert n.min_matches
    assert n.indicator_matches
    assert b.bayes is None
    assert b.bayes_label == "0/0-undefined"
    assert b.min_matches is None
    assert not b.indicator_matches


def test_star_regime_limit():
    with pytest.raises(RegimeExceededError):
        solve_star(random_game(13, 0.3, 2, seed=1))


def test_faa_has_no_truth_leaning_equilibrium(faa):
    found = find_truth_leaning(faa)
    assert isinstance(found, NotFound)
    assert found.structures_tried > 0


def test_good_bad_variant_unique_truth_leaning(v1):
    found = find_truth_leaning(v1)
    assert len(found) == 1
    A = found[0].representative
    assert A.sigma.prob("b", "b") == 1
    assert A.rho.prob(F(1), "n") == 0
    assert A.mu.beliefs == {"n": F(3, 5), "b": F(3, 7)}
    assert found[0].dimension_hint == 0


def test_lenient_variant_family(v2):
    """p = 1 with approval probability in (0, 1]"""
    found = find_truth_leaning(v2)
    assert len(found) == 1
    family = found[0]
    assert verify_truth_leaning(v2, family.representative).passed
    assert family.ranges["sigma[b->n]"].describe() == "1"
    assert family.ranges["rho[n:1]"].describe() == "(0, 1]"
    never_approve = {
        "sigma[n->n]": F(1),
        "sigma[b->n]": F(1),
        "rho[n:0]": F(1),
        "rho[b:0]": F(1),
    }
    assert not family.contains(never_approve)
    assert family.closure_contains(never_approve)


def test_auxiliary_oracle_agrees_with_star(faa):
    """On the grid the belief-paid game has exactly the star strategy"""
    star = solve_star(faa)
    points = auxiliary_oracle_grid(faa, OracleGrid(F(1, 20)))
    assert len(points) == 1
    for e in faa.items:
        for m in faa.items:
            assert points[0].sigma.prob(m, e) == star.sigma_star.prob(m, e)
    assert points[0].mu["n"] == star.mu_star["n"] == F(1, 2)
