"""Tests for the MCP tool dispatch"""

import asyncio
import json

from evigame_bench import fixture_path
from evigame_mcp_server import dispatch_tool, list_tools, read_resource

TWO_ITEM_POOLING = {
    "sigma": {"n": {"n": "1"}, "b": {"n": "1"}},
    "rho": {"n": {"0": "1"}, "b": {"0": "1"}},
    "mu": {"n": "1/2", "b": "0"},
}


def test_tools_listed():
    tools = asyncio.run(list_tools())
    assert [t.name for t in tools] == [
        "validate_game",
        "analyze_game",
        "solve_star",
        "find_truth_leaning",
        "solve_perturbed",
        "check_assessment",
    ]


def test_validate_fixture():
    assert dispatch_tool("validate_game", {"fixture": "faa"}) == {"status": "ok", "violations": []}


def test_validate_inline_invalid_game():
    doc = json.loads(fixture_path("invalid/bad-transitivity").read_text())
    response = dispatch_tool("validate_game", {"game": doc})
    assert response["status"] == "invalid"


def test_solvers_refuse_invalid_game():
    doc = json.loads(fixture_path("invalid/bad-transitivity").read_text())
    response = dispatch_tool("solve_star", {"game": doc})
    assert response["status"] == "error"
    assert "transitivity" in response["message"]


def test_solve_star():
    response = dispatch_tool("solve_star", {"fixture": "faa"})
    assert response["status"] == "ok"
    assert response["star"]["muStar"] == {"n": "1/2", "b": "0"}


def test_find_truth_leaning_reports_absence():
    response = dispatch_tool("find_truth_leaning", {"fixture": "faa"})
    assert response["found"] is False


def test_solve_perturbed():
    perturbation = {"reward": {"n": "1/10", "b": "1/10"}, "floor": {"n": "1/20", "b": "1/20"}}
    response = dispatch_tool("solve_perturbed", {"fixture": "faa", "perturbation": perturbation})
    assert response["status"] == "ok"
    assert response["families"][0]["representative"]["rho"]["n"]["1"] == "1/10"


def test_check_assessment():
    response = dispatch_tool(
        "check_assessment",
        {"fixture": "faa", "assessment": TWO_ITEM_POOLING, "concept": "purifiable"},
    )
    assert response == {"status": "ok", "pass": True, "violations": []}
    response = dispatch_tool(
        "check_assessment",
        {"fixture": "faa", "assessment": TWO_ITEM_POOLING, "concept": "truth-leaning"},
    )
    assert response["pass"] is False


def test_errors_are_reported():
    assert dispatch_tool("frobnicate", {}) == {"status": "error", "message": "Unknown tool: frobnicate"}
    assert dispatch_tool("solve_star", {})["status"] == "error"
    assert dispatch_tool("solve_star", {"fixture": "missing"})["status"] == "error"
    response = dispatch_tool(
        "check_assessment", {"fixture": "faa", "assessment": TWO_ITEM_POOLING, "concept": "other"}
    )
    assert response == {"status": "error", "message": "Unknown concept 'other'"}


def test_fixture_resource():
    doc = json.loads(asyncio.run(read_resource("evigame://fixtures")))
    assert doc["faa"]["prior"] == "1/2"
