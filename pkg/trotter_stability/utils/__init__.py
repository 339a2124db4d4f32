"""Output helpers shared by the command line and the MCP server."""

from .run_writer import RunWriter, to_jsonable

__all__ = ["RunWriter", "to_jsonable"]
