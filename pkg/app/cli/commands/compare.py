import argparse
from pathlib import Path

from pydantic import ValidationError

from app.core.exceptions import ConfigError
from app.models.schemas import RunSet
from app.services.report import compare, emit_report


def load_run_set(path: str) -> RunSet:
    try:
        return RunSet.model_validate_json(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read run set {path}: {exc}") from exc
    except ValidationError as exc:
        raise ConfigError(
            f"{path} is not a run set: {exc.error_count()} validation errors"
        ) from exc


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "compare", help="Compare two run sets written by `run --report json`"
    )
    parser.add_argument("a", help="Run set A (usually FLAT)")
    parser.add_argument("b", help="Run set B (usually the baseline)")
    parser.add_argument("--report", choices=["json", "table"], default="table")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    a = load_run_set(args.a)
    b = load_run_set(args.b)
    print(emit_report(compare(a.metrics, b.metrics), args.report), end="")
    return 0
