"""MCP resources describing ffg experiments and numerics."""
