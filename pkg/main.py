# main.py
"""
The main entry point for the McKean-Vlasov torus toolkit.

This script is responsible for loading environment variables and handing
the command line to the application.
"""
import logging
import sys

from dotenv import load_dotenv

# Load environment variables from the .env file before src.config reads them.
load_dotenv()

from src.core.application import run


def main() -> int:
    """Runs one subcommand and returns its exit code."""
    try:
        return run(sys.argv[1:])
    except KeyboardInterrupt:
        logging.info("Run interrupted by user.")
        return 130


if __name__ == '__main__':
    sys.exit(main())
