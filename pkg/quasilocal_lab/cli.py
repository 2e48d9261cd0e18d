import argparse
import logging
from pathlib import Path
from typing import List, Optional

from quasilocal_lab import constants
from quasilocal_lab.describe import print_topic, print_topics
from quasilocal_lab.errors import LabError
from quasilocal_lab.scene import run_scene, run_scenes, validate_scene
from quasilocal_lab.utils.log_utils import setup_logging

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Quasilocal mass lab: run scenes, describe formulas, validate scene files.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="Run one or more scene files")
    run.add_argument("scenes", type=Path, nargs="+")
    run.add_argument("--out", type=Path, default=None, help=f"Output directory (default: ${constants.OUT_DIR_ENV} or ./_results)")
    run.add_argument("--format", choices=constants.REPORT_FORMATS, default=None)
    run.add_argument("--tol", type=float, default=None, help="Embedding tolerance override")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--threads", type=int, default=1, help="Worker processes for multi-scene runs")

    describe = sub.add_parser("describe", help="Print the formula and conventions of a topic")
    describe.add_argument("topic", nargs="?", default=None)

    validate = sub.add_parser("validate", help="Schema-check scene files without running tasks")
    validate.add_argument("scenes", type=Path, nargs="+")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(logging.DEBUG if args.verbose else logging.INFO)
    try:
        if args.verb == "describe":
            if args.topic is None:
                print_topics()
            else:
                print_topic(args.topic)
            return 0
        if args.verb == "validate":
            for path in args.scenes:
                validate_scene(path)
            return 0
        if len(args.scenes) == 1:
            return run_scene(args.scenes[0], args.out, args.format, args.tol, args.seed)
        return run_scenes(args.scenes, args.out, args.format, args.tol, args.seed, args.threads)
    except LabError as e:
        logger.error(str(e))
        return 2
