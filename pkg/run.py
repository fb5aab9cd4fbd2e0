#!/usr/bin/env python3
"""
Range-bound tunneling toolkit - command line entry point.

See `python run.py --help` for the subcommands.
"""
import sys

from core.tunnel_engine.cli import main

if __name__ == '__main__':
    sys.exit(main())
