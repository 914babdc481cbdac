import argparse

from app.cli.commands import compare, run, schema, setup


def build_router(parser: argparse.ArgumentParser) -> None:
    """Attach every command to the top-level parser."""
    subparsers = parser.add_subparsers(dest="command", required=True)
    setup.register(subparsers)
    run.register(subparsers)
    compare.register(subparsers)
    schema.register(subparsers)
