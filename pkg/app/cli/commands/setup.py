import argparse

from app.config.settings import settings
from app.services.material import setup_material


def register(subparsers) -> None:
    parser = subparsers.add_parser("setup", help="Generate CA, server and client key material")
    parser.add_argument("--out", default=settings.material_dir)
    parser.add_argument("--seed", type=int, default=settings.default_seed)
    parser.add_argument("--clients", type=int, default=settings.client_count)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    manifest = setup_material(args.out, args.seed, args.clients)
    print(f"wrote {len(manifest.entities)} entities to {args.out}")
    return 0
