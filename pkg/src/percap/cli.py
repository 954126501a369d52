"""Command line front end: percap <mode> [--config FILE] [key=value ...]."""

from __future__ import annotations

import argparse
import sys

from percap.errors import DataError, ParameterError
from percap.harness import MODES, parse_config, read_config_file, run


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="percap",
        description="Multicast capacity scaling simulator and bounds evaluator")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", help="flat key=value config file")
    ap.add_argument("--out", help="output CSV path (overrides config)")
    ap.add_argument("overrides", nargs="*", metavar="key=value",
                    help="config overrides (win over the file)")
    args = ap.parse_intermixed_args(argv)

    pairs = {}
    try:
        if args.config:
            pairs.update(read_config_file(args.config))
        for tok in args.overrides:
            if "=" not in tok:
                raise ParameterError(f"override {tok!r} is not key=value")
            k, v = tok.split("=", 1)
            pairs[k.strip()] = v.strip()
        pairs["mode"] = args.mode
        if args.out:
            pairs["out"] = args.out
        cfg = parse_config(pairs)
    except (ParameterError, OSError) as exc:
        print(f"percap: config error: {exc}", file=sys.stderr)
        return 1

    try:
        result = run(cfg)
    except (ParameterError, DataError) as exc:
        print(f"percap: error: {exc}", file=sys.stderr)
        return 1
    if result.rows and not cfg.out:
        print(result.csv_body(), end="")
    for scheme, slope, err, k in result.slopes:
        print(f"# slope {scheme}: {slope:.4f} +/- {err:.4f} over {k} sizes",
              file=sys.stderr)
    if result.n_failed:
        print(f"percap: {result.n_failed} failed cells", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
