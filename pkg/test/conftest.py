"""Shared fixture games for the evigame test suite"""

from fractions import Fraction

import pytest

from evigame_bench import load_fixture


@pytest.fixture
def faa():
    return load_fixture("faa")


@pytest.fixture
def v1():
    return load_fixture("v1-good-bad")


@pytest.fixture
def v2():
    return load_fixture("v2-lenient")


@pytest.fixture
def v3():
    return load_fixture("v3-two-types")


@pytest.fixture
def v4():
    return load_fixture("v4-truthful")


@pytest.fixture
def three_actions(faa):
    """FAA evidence with a middle action; differences 0, 2, 5"""
    actions = (Fraction(0), Fraction(1), Fraction(2))
    good = {Fraction(0): Fraction(0), Fraction(1): Fraction(1), Fraction(2): Fraction(2)}
    bad = {Fraction(0): Fraction(0), Fraction(1): Fraction(-1), Fraction(2): Fraction(-3)}
    return faa.with_payoffs(actions, good, bad)
