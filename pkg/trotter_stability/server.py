#!/usr/bin/env python3
"""
Trotter Stability MCP Server - FastMCP Implementation

Exposes schedules, closed-form bounds, the Hubbard budget and small noise
campaigns as MCP tools. Tools return JSON-ready dictionaries and report
failures as {"success": False, "error": ...} instead of raising.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from mcp.server.fastmcp import FastMCP

from .campaigns import (
    CampaignConfig,
    hubbard_params,
    hubbard_report,
    ideal_error_table,
    noise_campaign,
)
from .product_formula import OrderSpec, exponential_count
from .product_formula import build_schedule as product_schedule
from .stability_analysis import theorem_bounds
from .utils import to_jsonable

# =============================================================================
# CONFIGURATION
# =============================================================================

PACKAGE_DIR = Path(__file__).parent
CAMPAIGNS_DIR = PACKAGE_DIR / "resources" / "campaigns"
MAX_TOOL_TRIALS = 20000  # keeps a tool call interactive

mcp = FastMCP("trotter-stability")


def _failure(e: Exception) -> Dict[str, Any]:
    return {"success": False, "error": str(e)}


# =============================================================================
# SCHEDULES AND IDEAL ERROR
# =============================================================================

@mcp.tool()
def build_schedule(m: int = 2, order: int = 2, r: int = 1, lam: float = 1.0, merge: bool = False) -> Dict[str, Any]:
    """
    Build a Trotter (order 1) or Suzuki (even order) schedule for m generators.

    Args:
        m: Number of generators
        order: 1 for Trotter, 2k for Suzuki
        r: Number of segments
        lam: Total time λ
        merge: Merge adjacent terms with the same generator index

    Returns:
        Schedule document and exponential counts
    """
    try:
        schedule = product_schedule(m, OrderSpec.from_order(order, r), lam, merge)
        cost = exponential_count(schedule)
        return {"success": True, "N": schedule.N, "schedule": to_jsonable(schedule), "cost": to_jsonable(cost)}
    except Exception as e:
        return _failure(e)


@mcp.tool()
def ideal_errors(config: Dict[str, Any]) -> Dict[str, Any]:
    """
    Noiseless product-formula error over a campaign's λ, r and order sweeps.

    Args:
        config: Campaign mapping, same keys as a campaign file

    Returns:
        Rows with lambda, r, k and ideal_error
    """
    try:
        table = ideal_error_table(CampaignConfig.from_mapping(config))
        return {"success": True, "rows": to_jsonable(table.to_dict(orient="records"))}
    except Exception as e:
        return _failure(e)


# =============================================================================
# BOUNDS AND BUDGETS
# =============================================================================

@mcp.tool()
def bounds(N: int, dim: int, epsilon_m: float, epsilon_t: Optional[float] = None) -> Dict[str, Any]:
    """
    Closed-form error bounds for N factors of dimension ℓ at machine epsilon ε_m.

    Returns:
        Bound report; overflowing bounds are the string "inf"
    """
    try:
        return {"success": True, "bounds": to_jsonable(theorem_bounds(N, dim, epsilon_m, epsilon_t))}
    except Exception as e:
        return _failure(e)


@mcp.tool()
def hubbard_budget(
    t_H: float = 1.0,
    U_H: float = 2.0,
    eta: int = 2,
    sim_time: float = 1.0,
    epsilon_t: float = 1e-3,
    boundary: str = "periodic",
    m: Optional[int] = None,
) -> Dict[str, Any]:
    """Cost and machine-epsilon budget of an η × η Hubbard simulation."""
    try:
        params = hubbard_params(
            {"t_H": t_H, "U_H": U_H, "eta": eta, "sim_time": sim_time, "epsilon_t": epsilon_t, "boundary": boundary}
        )
        return {"success": True, **to_jsonable(hubbard_report(params, m))}
    except Exception as e:
        return _failure(e)


# =============================================================================
# NOISE CAMPAIGNS
# =============================================================================

@mcp.tool()
def run_noise_campaign(config: Dict[str, Any]) -> Dict[str, Any]:
    """
    Run a noise campaign and return its summary (per-trial values are omitted).

    Args:
        config: Campaign mapping, same keys as a campaign file

    Returns:
        Summary statistics, bounds and verdicts
    """
    try:
        campaign = CampaignConfig.from_mapping(config)
        if campaign.trials > MAX_TOOL_TRIALS:
            raise ValueError(f"trials must be at most {MAX_TOOL_TRIALS} for a tool call, got {campaign.trials}")
        return {"success": True, "summary": to_jsonable(noise_campaign(campaign).summary())}
    except Exception as e:
        return _failure(e)


@mcp.tool()
def list_campaigns() -> List[Dict[str, Any]]:
    """
    List the bundled campaign files.

    Returns:
        Name, command and description of each campaign
    """
    campaigns = []
    for path in sorted(CAMPAIGNS_DIR.glob("*.yaml")):
        with open(path, "r") as f:
            data = yaml.safe_load(f) or {}
        campaigns.append(
            {
                "name": path.stem,
                "command": data.get("command", "noise-sim"),
                "description": data.get("description", ""),
                "path": str(path),
            }
        )
    return campaigns


# =============================================================================
# RUN SERVER
# =============================================================================

def main():
    mcp.run()


if __name__ == "__main__":
    main()
