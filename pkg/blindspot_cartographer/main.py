#!/usr/bin/env python3
"""
Blindspot Cartographer
Main entry point for the package
"""

import sys
import traceback
from typing import List, Optional

import click

from .cli import cli

INTERRUPTED_EXIT = 130


def main(argv: Optional[List[str]] = None):
    """Run the CLI and map failures to exit codes"""
    try:
        result = cli.main(args=argv, prog_name="blindspot-cartographer", standalone_mode=False)
    except (KeyboardInterrupt, click.exceptions.Abort):
        click.echo("\nInterrupted.", err=True)
        sys.exit(INTERRUPTED_EXIT)
    except click.ClickException as e:
        e.show()
        sys.exit(e.exit_code)
    except Exception as e:
        click.echo(f"\nUnexpected error: {e}", err=True)
        click.echo("=" * 60, err=True)
        click.echo("DEBUG INFORMATION:", err=True)
        traceback.print_exc()
        click.echo("=" * 60, err=True)
        sys.exit(1)
    sys.exit(result if isinstance(result, int) else 0)


if __name__ == "__main__":
    main()
