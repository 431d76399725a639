"""Seeded synthetic cohorts with a known outcome process."""
