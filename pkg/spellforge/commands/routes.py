"""Subcommand aggregation."""

import argparse
from typing import Sequence

from spellforge.commands import cluster, evaluate, features, report, synth, train

COMMANDS = (synth, features, train, evaluate, cluster, report)


def include_commands(subparsers, parents: Sequence[argparse.ArgumentParser]) -> None:
    """Register every subcommand on ``subparsers``."""
    for command in COMMANDS:
        command.register(subparsers, parents)
