"""Command line: ``augmi simulate`` and ``augmi metrics``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, parse_config
from .runner import metrics_from_records, read_records, run_scenario


def _simulate(args) -> int:
    try:
        config = parse_config(args.config, preset=args.preset)
        if args.out:
            config = config.replace(output_dir=args.out)
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers: must be >= 1")
    except (ConfigError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    result = run_scenario(config, workers=args.workers)
    n = len(result.records)
    print(f"{n - result.n_failed}/{n} replicates succeeded; outputs in {config.output_dir}")
    return 0 if result.ok else 1


def _metrics(args) -> int:
    rows = read_records(args.records)
    truth = None
    if args.truth:
        with open(args.truth, encoding="utf-8") as fh:
            truth = json.load(fh)
    report = metrics_from_records(rows, truth)
    if args.out:
        report.write_json(args.out)
    else:
        print(report.to_json())
    if args.csv:
        report.write_csv(args.csv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="augmi", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one simulation scenario")
    s.add_argument("--config", required=True, help="scenario JSON file")
    s.add_argument("--preset", choices=["desk"], help="scale preset overriding n, K, m, iterations")
    s.add_argument("--out", help="output directory (overrides output_dir)")
    s.add_argument("--workers", type=int, help="worker processes (overrides AUGMI_WORKERS)")
    s.set_defaults(func=_simulate)

    m = sub.add_parser("metrics", help="recompute metrics from records.csv")
    m.add_argument("--records", required=True)
    m.add_argument("--truth", help="JSON mapping coefficient -> true value")
    m.add_argument("--out", help="write metrics JSON here instead of stdout")
    m.add_argument("--csv", help="also write the flat CSV here")
    m.set_defaults(func=_metrics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
