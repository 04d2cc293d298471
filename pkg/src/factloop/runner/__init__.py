"""Run orchestration: persistence, HTTP annotation API, CLI and reports."""
