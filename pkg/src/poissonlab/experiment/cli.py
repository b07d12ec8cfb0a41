"""Command line entry point: ``poissonlab {generate,run,verify-bounds,analyze,schedule}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..auxprocess import schedule_params
from ..errors import PreconditionError
from ..graph import random_regular, write_edgelist
from .analysis import error_budget, gap_statistics
from .campaign import CONFIG, RECORDS, CampaignError, read_records, run_campaign, verify_run
from .config import ConfigError, ExperimentConfig

log = logging.getLogger("poissonlab")


def _cmd_generate(args) -> int:
    g = random_regular(args.n, args.degree, args.seed)
    write_edgelist(g, args.out)
    log.info("wrote %d vertices, %d edges to %s", g.n, len(g.edges()), args.out)
    return 0


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    if args.output_dir is not None:
        cfg = replace(cfg, output_dir=args.output_dir)
    if cfg.output_dir is None:
        raise ConfigError("no output directory (config, --output-dir or POISSONLAB_OUTPUT_DIR)")
    try:
        summary = run_campaign(cfg)
    except CampaignError as exc:
        log.error("%s", exc)
        return 1
    bad = summary.hard_failures
    for name in bad:
        log.error("hard check failed: %s", name)
    log.info("%d records written to %s", len(summary.records), cfg.output_dir)
    return 1 if bad else 0


def _cmd_verify(args) -> int:
    agg, bad = verify_run(args.run_dir)
    for row in agg.get("wegner", []):
        print(f"wegner J={row['interval']} mean={row['mean']:.4g} bound={row['bound']:.4g} "
              f"{'ok' if row['holds'] else 'FAIL'}")
    for row in agg.get("minami", []):
        state = "vacuous" if row["vacuous"] else ("ok" if row["holds"] else "FAIL")
        print(f"minami J={row['interval']} P={row['probability']:.4g} "
              f"bound={row['bound']:.4g} {state}")
    if "chen_stein_bound" in agg:
        print(f"chen-stein lambda_bar={agg['lambda_bar']:.4g} bound={agg['chen_stein_bound']:.4g}")
    if "upper_violations" in agg:
        print(f"comparison omega={agg['omega_count']} omega'={agg['omega_prime_count']} "
              f"violations={agg['upper_violations'] + agg['equality_violations']}")
    for name in bad:
        print(f"FAIL {name}")
    return 1 if bad else 0


def _cmd_analyze(args) -> int:
    run_dir = Path(args.run_dir)
    cfg = ExperimentConfig.from_dict(json.loads((run_dir / CONFIG).read_text()))
    records = read_records(run_dir / RECORDS)
    out = Path(args.out or run_dir)
    out.mkdir(parents=True, exist_ok=True)
    from ..poisson import laplace_table
    nus = [r["nu"] for r in records]
    if nus:
        lam = sum(nus) / len(nus)
        with open(out / "laplace.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "empirical", "reference", "gap", "stderr"])
            for r in laplace_table(nus, lam, cfg.t_grid):
                wr.writerow([r.t, repr(r.empirical), repr(r.reference), repr(r.gap),
                             repr(r.stderr)])
    if cfg.gap_window is not None:
        try:
            st = gap_statistics(records, cfg)
        except PreconditionError as exc:
            log.warning("gap statistics skipped: %s", exc)
        else:
            with open(out / "gaps.csv", "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["bin_lo", "bin_hi", "count"])
                e = st.histogram_edges
                for k, c in enumerate(st.histogram_counts):
                    wr.writerow([e[k], e[k + 1], c])
            print(f"gaps={st.n_gaps} ks={st.ks_statistic:.4f} "
                  f"ratio_mean={st.spacing_ratio_mean:.4f}")
    return 0


def _cmd_schedule(args) -> int:
    p = schedule_params(args.n, args.K, args.mu_s, args.a, strict=False)
    rep = {"params": p.to_dict(), "budget": error_budget(args.K, args.n, args.mu_s, args.a)}
    print(json.dumps(rep, indent=1, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="poissonlab")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("generate", help="write a random regular graph as an edge list")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--degree", type=int, default=3)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_generate)

    s = sub.add_parser("run", help="run a campaign from a JSON config")
    s.add_argument("config")
    s.add_argument("--workers", type=int)
    s.add_argument("--output-dir")
    s.set_defaults(func=_cmd_run)

    s = sub.add_parser("verify-bounds", help="re-check bounds on stored records")
    s.add_argument("run_dir")
    s.set_defaults(func=_cmd_verify)

    s = sub.add_parser("analyze", help="gap statistics and Laplace tables as CSV")
    s.add_argument("run_dir")
    s.add_argument("--out")
    s.set_defaults(func=_cmd_analyze)

    s = sub.add_parser("schedule", help="print schedule parameters and the error budget")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--K", type=int, default=2)
    s.add_argument("--mu-s", type=float, required=True)
    s.add_argument("--a", type=float, required=True)
    s.set_defaults(func=_cmd_schedule)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, PreconditionError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
