"""Command line entry point ``mvlab``.

Exit codes: 0 success, 2 configuration error, 3 runtime error or blow-up.
"""

import argparse
import csv
import io
import json
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from .exceptions import BlowUpError, MVLabError
from .experiments import ConfigError, load_config, run
from .models import list_models

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def render_csv(result):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("MVLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"MVLAB_THREADS must be an integer, got {env!r}") from None
    return 1


def run_experiment(config_path, output_dir=None, threads=None, seed=None):
    """Run one experiment config; write ``<experiment>.csv`` and ``manifest.json``.

    Returns the output directory.
    """
    cfg = load_config(config_path)
    if seed is not None:
        cfg["seed"] = seed
    threads = _threads(threads)
    out = output_dir or cfg.get("output_dir") or "results"
    os.makedirs(out, exist_ok=True)
    start = time.perf_counter()
    result = run(cfg, threads=threads)
    wall = time.perf_counter() - start
    csv_path = os.path.join(out, f"{cfg['experiment']}.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_csv(result))
    manifest = {
        "config": cfg,
        "seed": cfg["seed"],
        "threads": threads,
        "versions": {
            "mvlab": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": wall,
        "csv": os.path.basename(csv_path),
        "summary": result.summary,
    }
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=float)
        fh.write("\n")
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="mvlab", description="McKean-Vlasov particle simulation experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir")
    p_run.add_argument("--threads", type=int)
    p_run.add_argument("--seed", type=int, help="override the config seed")
    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")
    sub.add_parser("list-models", help="print catalog model identifiers")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-models":
            for name in list_models():
                print(name)
        elif args.command == "validate":
            cfg = load_config(args.config)
            print(f"{args.config}: ok ({cfg['experiment']}, model {cfg['model']})")
        else:
            if args.threads is not None and args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            out = run_experiment(args.config, args.output_dir, args.threads, args.seed)
            print(f"results written to {out}")
    except (ConfigError, OSError) as exc:
        print(f"mvlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"mvlab: blow-up: {exc} (particle {exc.particle}, step {exc.step})", file=sys.stderr)
        return EXIT_RUNTIME
    except MVLabError as exc:
        print(f"mvlab: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
