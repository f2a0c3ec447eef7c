"""MCP tools wrapping the ffg harness and drive design."""
