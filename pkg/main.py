"""
Entrypoint: `python main.py <subcommand> ...`. See cli/commands.py.
"""

import sys

from cli.commands import main

if __name__ == "__main__":
    sys.exit(main())
