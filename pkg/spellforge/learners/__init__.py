"""Regression learners and their shared prediction interface."""
