import argparse
import json
from pathlib import Path

from app.models.schemas import Report, RunSet

MODELS = {"report": Report, "run-set": RunSet}


def schema_json(model: str) -> str:
    return json.dumps(MODELS[model].model_json_schema(), indent=2, sort_keys=True) + "\n"


def register(subparsers) -> None:
    parser = subparsers.add_parser("schema", help="Print the JSON schema of a report file")
    parser.add_argument("--model", choices=sorted(MODELS), default="report")
    parser.add_argument("--out", help="Write to this file instead of stdout")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    text = schema_json(args.model)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return 0
