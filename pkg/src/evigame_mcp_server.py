#!/usr/bin/env python3
"""
evigame MCP Server
Exposes the evidence game solvers as MCP tools over stdio
"""

import asyncio
import json
import logging
import sys
from typing import Any, Dict, List

from mcp.server import Server
from mcp.types import Resource, TextContent, Tool

from auxiliary_solver import NotFound, find_truth_leaning, solve_star, verify_auxiliary
from equilibrium_check import (
    verify_pbe,
    verify_perturbed_pbe,
    verify_purifiable,
    verify_truth_leaning,
)
from evidence_game import EvidenceGame, EvidenceGameError, SolverDefect, validate_game
from evigame_bench import FIXTURES, analyze, fixture_path, load_fixture
from evigame_config import log_level
from evigame_io import (
    assessment_from_dict,
    check_to_dict,
    family_to_dict,
    game_from_dict,
    perturbation_from_dict,
    star_to_dict,
)
from perturbed_lab import solve_perturbed

logger = logging.getLogger(__name__)

FIXTURES_URI = "evigame://fixtures"
CONCEPTS = ("pbe", "truth-leaning", "purifiable", "perturbed", "auxiliary")
TOOLS = (
    "validate_game",
    "analyze_game",
    "solve_star",
    "find_truth_leaning",
    "solve_perturbed",
    "check_assessment",
)

GAME_PROPERTIES = {
    "game": {
        "type": "object",
        "description": "Game document: prior, evidence, feasible, fG, fB, actions, payoffG, payoffB",
    },
    "fixture": {
        "type": "string",
        "description": f"Name of a bundled fixture instead of a game document ({', '.join(FIXTURES)})",
    },
}

PERTURBATION_PROPERTY = {
    "type": "object",
    "description": "Perturbation: 'reward' and 'floor' maps from evidence to rational strings",
}


def _game(arguments: Dict[str, Any]) -> EvidenceGame:
    if "game" in arguments:
        return game_from_dict(arguments["game"])
    if "fixture" in arguments:
        name = arguments["fixture"]
        if name not in FIXTURES:
            raise EvidenceGameError(f"Unknown fixture '{name}'")
        return load_fixture(name)
    raise EvidenceGameError("Provide either 'game' or 'fixture'")


def _valid_game(arguments: Dict[str, Any]) -> EvidenceGame:
    game = _game(arguments)
    report = validate_game(game)
    if not report.ok:
        names = sorted({v.invariant for v in report.violations})
        raise EvidenceGameError(f"Invalid game ({', '.join(names)})")
    return game


def dispatch_tool(name: str, arguments: Dict[str, Any]) -> Dict[str, Any]:
    """Run one tool call; failures come back as status 'error'"""
    if name not in TOOLS:
        return {"status": "error", "message": f"Unknown tool: {name}"}
    try:
        if name == "validate_game":
            report = validate_game(_game(arguments))
            return {
                "status": "ok" if report.ok else "invalid",
                "violations": [
                    {"invariant": v.invariant, "items": list(v.items), "detail": v.detail}
                    for v in report.violations
                ],
            }

        game = _valid_game(arguments)
        if name == "analyze_game":
            return {"status": "ok", "report": analyze(game)}

        elif name == "solve_star":
            return {"status": "ok", "star": star_to_dict(solve_star(game))}

        elif name == "find_truth_leaning":
            found = find_truth_leaning(game)
            if isinstance(found, NotFound):
                return {
                    "status": "ok",
                    "found": False,
                    "structuresTried": found.structures_tried,
                    "pruned": found.pruned,
                }
            return {"status": "ok", "found": True, "families": [family_to_dict(f) for f in found]}

        elif name == "solve_perturbed":
            eps = perturbation_from_dict(arguments.get("perturbation", {}))
            families = solve_perturbed(game, eps)
            return {"status": "ok", "families": [family_to_dict(f) for f in families]}

        elif name == "check_assessment":
            A = assessment_from_dict(arguments.get("assessment", {}), game)
            concept = arguments.get("concept", "pbe")
            if concept == "pbe":
                result = verify_pbe(game, A)
            elif concept == "truth-leaning":
                result = verify_truth_leaning(game, A)
            elif concept == "purifiable":
                result = verify_purifiable(game, A, solve_star(game))
            elif concept == "perturbed":
                eps = perturbation_from_dict(arguments.get("perturbation", {}))
                result = verify_perturbed_pbe(game, eps, A)
            elif concept == "auxiliary":
                result = verify_auxiliary(game, A.sigma, A.mu)
            else:
                return {"status": "error", "message": f"Unknown concept '{concept}'"}
            return {"status": "ok", **check_to_dict(result)}

        return {"status": "error", "message": f"Unknown tool: {name}"}

    except (EvidenceGameError, SolverDefect) as e:
        logger.error(f"Tool {name} failed: {e}")
        return {"status": "error", "message": str(e)}


# Create MCP server
app = Server("evigame")


@app.list_resources()
async def list_resources() -> List[Resource]:
    """List available resources"""
    return [
        Resource(
            uri=FIXTURES_URI,
            name="Fixture games",
            mimeType="application/json",
            description="Bundled evidence game fixtures",
        )
    ]


@app.read_resource()
async def read_resource(uri: str) -> str:
    """Read resource content"""
    if str(uri) == FIXTURES_URI:
        return json.dumps(
            {name: json.loads(fixture_path(name).read_text()) for name in FIXTURES}, indent=2
        )
    return json.dumps({"error": "Unknown resource"})


@app.list_tools()
async def list_tools() -> List[Tool]:
    """List available tools"""
    return [
        Tool(
            name="validate_game",
            description="Check an evidence game against its structural assumptions",
            inputSchema={"type": "object", "properties": dict(GAME_PROPERTIES)},
        ),
        Tool(
            name="analyze_game",
            description="Full refinement report: star solution, truth-leaning, purifiable and weakly truth-leaning equilibria",
            inputSchema={"type": "object", "properties": dict(GAME_PROPERTIES)},
        ),
        Tool(
            name="solve_star",
            description="Star beliefs and the sender strategy set shared by all disturbed games",
            inputSchema={"type": "object", "properties": dict(GAME_PROPERTIES)},
        ),
        Tool(
            name="find_truth_leaning",
            description="Every truth-leaning equilibrium family, or a nonexistence certificate",
            inputSchema={"type": "object", "properties": dict(GAME_PROPERTIES)},
        ),
        Tool(
            name="solve_perturbed",
            description="Every equilibrium family of the game with truth rewards and truth floors",
            inputSchema={
                "type": "object",
                "properties": {**GAME_PROPERTIES, "perturbation": PERTURBATION_PROPERTY},
                "required": ["perturbation"],
            },
        ),
        Tool(
            name="check_assessment",
            description="Judge an assessment (sigma, rho, mu) against one solution concept",
            inputSchema={
                "type": "object",
                "properties": {
                    **GAME_PROPERTIES,
                    "assessment": {
                        "type": "object",
                        "description": "Assessment with 'sigma', 'rho' and 'mu' maps of rational strings",
                    },
                    "concept": {
                        "type": "string",
                        "enum": list(CONCEPTS),
                        "description": "Solution concept to check (default pbe)",
                    },
                    "perturbation": PERTURBATION_PROPERTY,
                },
                "required": ["assessment"],
            },
        ),
    ]


@app.call_tool()
async def call_tool(name: str, arguments: Dict[str, Any]) -> List[TextContent]:
    """Execute tool calls"""
    response = await asyncio.to_thread(dispatch_tool, name, arguments or {})
    return [TextContent(type="text", text=json.dumps(response, indent=2))]


async def run_server():
    """Run the MCP server"""
    from mcp.server.stdio import stdio_server

    logger.info("Starting evigame MCP server")

    async with stdio_server() as (read_stream, write_stream):
        await app.run(read_stream, write_stream, app.create_initialization_options())


def main():
    """Main entry point"""
    logging.basicConfig(level=log_level("INFO"), stream=sys.stderr)
    try:
        asyncio.run(run_server())
    except KeyboardInterrupt:
        logger.info("Server stopped by user")
    except Exception as e:
        logger.error(f"Server error: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
