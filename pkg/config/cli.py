"""The `adiabat` console script."""

import os
import sys
from typing import List, Optional

# Django keeps `check` for its system checks
ALIASES = {"check": "audit"}


def main(argv: Optional[List[str]] = None) -> None:
    """Run an adiabat subcommand: reconstruct, recalibrate, check or plot."""
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings")
    from django.core.management import execute_from_command_line

    argv = list(sys.argv if argv is None else argv)
    if len(argv) > 1 and argv[1] in ALIASES:
        argv[1] = ALIASES[argv[1]]
    execute_from_command_line(argv)


if __name__ == "__main__":
    main()
