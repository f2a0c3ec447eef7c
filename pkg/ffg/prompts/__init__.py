"""MCP prompts for Floquet engineering workflows."""
