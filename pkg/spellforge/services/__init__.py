"""Workflows the CLI commands delegate to."""
