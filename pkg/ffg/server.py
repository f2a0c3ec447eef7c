"""
Main MCP server implementation.
This file initializes the FastMCP server and imports all tools, resources, and prompts.
"""

import logging
import sys
from collections.abc import AsyncIterator
from contextlib import asynccontextmanager
from dataclasses import dataclass

from mcp.server.fastmcp import Context, FastMCP

from .config import load_config, numerics_from_config


@dataclass
class AppContext:
    """
    Application-wide state shared by the tools.

    Attributes:
        config: Merged configuration from defaults, files and FFG_* variables
    """

    config: dict


@asynccontextmanager
async def app_lifespan(server: FastMCP) -> AsyncIterator[AppContext]:
    """
    Application lifecycle manager.

    Loads and validates the configuration once; tools read it from the
    lifespan context.

    Args:
        server: The FastMCP server instance

    Yields:
        The application context
    """
    config = load_config()
    numerics = numerics_from_config(config)
    logging.basicConfig(
        level=config.get("server", {}).get("log_level", "WARNING"), stream=sys.stderr
    )

    # stdout carries the protocol, so lifecycle messages go to stderr
    print("🚀 ffg server starting up...", file=sys.stderr)
    print(
        f"🔢 N={numerics.n_fock}, m_max={numerics.m_max}, l_max={numerics.l_max}, "
        f"k_nodes={numerics.k_nodes}",
        file=sys.stderr,
    )
    try:
        yield AppContext(config=config)
    finally:
        print("🛑 ffg server shutting down...", file=sys.stderr)


mcp = FastMCP(
    "ffg-mcp",
    lifespan=app_lifespan,
    dependencies=["mcp>=1.0", "numpy", "scipy"],
)

from .prompts.ffg_prompts import *  # noqa: E402,F401,F403
from .resources.ffg_resources import *  # noqa: E402,F401,F403

# These imports must come after the MCP server is initialized
from .tools.ffg_tools import *  # noqa: E402,F401,F403

server = mcp


def main():
    """
    Main entry point for the ffg MCP server.
    This function is used by the console script and uvx.
    """
    mcp.run()


if __name__ == "__main__":
    main()
