"""Multi-robot LTL planning with reduced synchronization."""

__version__ = "0.1.0"

# versions of the JSON documents the tools read and write
SCHEMA_VERSIONS = {
    "environment": 1,
    "automaton": 1,
    "team_run": 1,
    "sync_plan": 1,
    "strategy": 1,
    "trace": 1,
}
