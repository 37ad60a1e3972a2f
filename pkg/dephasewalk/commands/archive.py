import argparse
import json
import logging

from dephasewalk import archive
from dephasewalk.config import Settings
from dephasewalk.errors import ConfigError

logger = logging.getLogger("dephasewalk.commands.archive")


def run(args: argparse.Namespace, settings: Settings) -> int:
    if args.action == "list":
        result = archive.list_runs()
    elif args.action == "show":
        if not args.run_id:
            raise ConfigError("archive show needs a run id")
        result = archive.show_run(args.run_id)
    else:
        result = {"purged": archive.purge(confirm=args.confirm)}
    print(json.dumps(result, sort_keys=True, indent=2, default=str))
    return 0


def register(subparsers) -> None:
    p = subparsers.add_parser("archive", help="list, show or purge archived runs")
    p.add_argument("action", choices=["list", "show", "purge"])
    p.add_argument("run_id", nargs="?")
    p.add_argument("--confirm", action="store_true", help="required by purge")
    p.set_defaults(func=run)
