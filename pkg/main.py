"""Entry point for running the spellforge command line."""

import sys

from spellforge.application import main

if __name__ == "__main__":
    sys.exit(main())
