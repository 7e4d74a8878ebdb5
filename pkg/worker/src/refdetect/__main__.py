"""Command-line entry point: serve the detector protocol on stdin/stdout."""

import argparse
import sys
import tempfile

from .protocol import serve_protocol


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="refdetect-worker",
        description="Reference detection worker speaking newline-delimited "
        "JSON on stdin/stdout.",
    )
    parser.add_argument(
        "--models",
        default=None,
        help="directory for persisted models (default: a fresh temp dir)",
    )
    args = parser.parse_args(argv)
    models_dir = args.models or tempfile.mkdtemp(prefix="refdetect-models-")
    serve_protocol(sys.stdin, sys.stdout, models_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
