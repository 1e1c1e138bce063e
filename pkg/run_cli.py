#!/usr/bin/env python3
"""
Lua reduction semantics - CLI Launcher

This script provides a convenient way to launch the command-line interface
without installing the package.
"""

import sys
from pathlib import Path

# Add the project root to the Python path if running from the project directory
project_root = Path(__file__).resolve().parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

# Import the CLI module
try:
    from lua_semantics.cli import main as cli_main
except ImportError:
    print("Error: Could not import the lua_semantics package.", file=sys.stderr)
    print("Make sure the package is installed or you are running this script from the project root.",
          file=sys.stderr)
    sys.exit(1)


def main():
    """Main entry point for the CLI launcher."""
    cli_main()


if __name__ == "__main__":
    main()
