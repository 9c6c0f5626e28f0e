#!/usr/bin/env python3
"""
Biphoton toolkit
Entry point for the command-line interface
"""

import sys
from dotenv import load_dotenv


def main():
    load_dotenv()

    # imported after .env so LOG_LEVEL and friends reach the logger setup
    from biphoton.cli import run

    return run(sys.argv[1:])

if __name__ == '__main__':
    sys.exit(main())
