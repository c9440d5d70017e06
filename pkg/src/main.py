#!/usr/bin/env python3
"""Entry point: ``python src/main.py <subcommand> [options]``."""
import sys
from pathlib import Path

from dotenv import load_dotenv

from cli.runner import run

ENV_FILES = (
    Path.cwd() / '.env',
    Path(__file__).resolve().parent.parent / '.env',
)


def load_env_file() -> None:
    """Load the first .env found; variables already set in the environment win."""
    for env_path in ENV_FILES:
        if env_path.is_file():
            load_dotenv(env_path, override=False)
            return


def main() -> int:
    load_env_file()
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
