"""Command line front end: ``lipgeo run CONFIG`` and ``lipgeo corpus``."""
import argparse
import json
import sys

from . import corpus as _corpus
from .exceptions import ConfigError
from .report import summary_text
from .runner import load_config, run

EPILOG = """\
exit status: 0 when every verdict matches its expectation, 2 on a verdict
mismatch, 1 on configuration or task errors.  LIPGEO_THREADS caps the number
of worker threads used for per-t jobs (default 1).
"""


def _t_grid(text):
    """'4:64:9' (geometric start:stop:count) or '4,8,16' (explicit values)."""
    try:
        if ":" in text:
            parts = text.split(":")
            start, stop = float(parts[0]), float(parts[1])
            num = int(parts[2]) if len(parts) > 2 else 9
            return {"start": start, "stop": stop, "num": num}
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad t-grid {text!r}; use start:stop:num or v1,v2,...") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="lipgeo", description="Lipschitz geometry of sampled sets.",
                                     epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run_cmd = sub.add_parser("run", help="execute a run configuration", epilog=EPILOG,
                             formatter_class=argparse.RawDescriptionHelpFormatter)
    run_cmd.add_argument("config", help="YAML run configuration")
    run_cmd.add_argument("--density", type=float, default=None,
                         help="sampling spacing h for tasks that sample once; overrides the config (default: per task/set)")
    run_cmd.add_argument("--t-grid", type=_t_grid, default=None,
                         help="radius grid for per-t tasks, start:stop:num or v1,v2,...; overrides the config "
                              "(default: per task/set)")
    run_cmd.add_argument("--seed", type=int, default=None, help="sampling seed (default: config seed, else 0)")
    run_cmd.add_argument("--fail-fast", action="store_true", help="skip remaining tasks after an error or mismatch")
    run_cmd.add_argument("--slack", type=float, default=None,
                         help="discretization slack delta for embedding checks (default 0.1)")
    run_cmd.add_argument("--out", default=None, help="output directory (default: config output_dir)")
    run_cmd.add_argument("--quiet", action="store_true", help="do not print per-task progress")

    corpus_cmd = sub.add_parser("corpus", help="list the built-in example sets")
    corpus_cmd.add_argument("--json", action="store_true", help="machine-readable output")
    return parser


def _print_corpus(as_json):
    rows = _corpus.list_corpus()
    if as_json:
        print(json.dumps(rows, indent=2, sort_keys=True))
        return
    for row in rows:
        print(f"{row['name']:<26} R^{row['ambient_dim']}  {'bounded' if row['bounded'] else 'unbounded':<9} "
              f"{row['description']}")
        for key, value in row["expected"].items():
            print(f"    {key} = {value}    {row['provenance'].get(key, '')}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "corpus":
        _print_corpus(args.json)
        return 0
    try:
        config = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"lipgeo: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    overrides = {"density": args.density, "t_grid": args.t_grid, "seed": args.seed, "slack": args.slack}
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    status, doc = run(config, args.out, overrides, args.fail_fast, log)
    print(summary_text(doc), end="")
    return status


if __name__ == "__main__":
    sys.exit(main())
