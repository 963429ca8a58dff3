"""
Main entry point for the Hyperbolic Bundle Laboratory
=====================================================

Run this file with a subcommand, e.g.

    python src/main.py theta --R 10 --potential zero --rep fuchsian --x 0.37+0i
"""

import sys

from cli import main

if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n👋 Run stopped by user")
        sys.exit(130)
