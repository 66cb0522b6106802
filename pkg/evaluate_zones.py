#!/usr/bin/env python3
"""Command-line script for the two-zone evaluation."""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from merger.config.cases import MERGING_ZONES
from merger.config.loader import load_config
from merger.core.metrics import aggregate
from merger.core.report import ReportWriter, load_batch_metrics, write_zone_comparison, zone_comparison
from merger.core.scenario import generate_synthetic, write_pair_manifest
from merger.core.simulation import run_batch


def main(argv=None):
    parser = argparse.ArgumentParser(description="Generate and evaluate dangerous pairs in both merging zones")
    parser.add_argument("--output", "-o", type=str, default="output/zones",
                        help="Output directory (default: output/zones)")
    parser.add_argument("--n", type=int, default=100, help="Pairs per zone (default: 100)")
    parser.add_argument("--seed", type=int, default=None, help="Generator seed (default: 7)")
    parser.add_argument("--jobs", "-j", type=int, default=None,
                        help="Worker processes (default: all cores)")
    parser.add_argument("--config", type=str, default=None, help="YAML configuration file")
    args = parser.parse_args(argv)
    if args.n < 1:
        parser.error("--n must be at least 1")

    logging.basicConfig(level=logging.INFO, format='%(message)s', stream=sys.stdout)
    out_dir = Path(args.output)
    cfg = load_config({'output': args.output, 'simulation': {'jobs': args.jobs},
                       'generator': {'n_pairs': args.n, 'seed': args.seed}}, args.config)

    print(f"\n🚀 Evaluating {len(MERGING_ZONES)} zone(s) with {args.n} pair(s) each...")
    summaries = {}
    for zone in MERGING_ZONES:
        print(f"\n🔄 Processing zone: {zone}")
        zone_dir = out_dir / zone
        try:
            pairs = generate_synthetic(replace(cfg.generator, zone=zone), progress=True)
            write_pair_manifest(pairs, zone_dir)
            batch = run_batch(pairs, cfg.cases, cfg.sim, jobs=cfg.jobs, progress=True)
            writer = ReportWriter(zone_dir, cfg.fuel)
            batch_path = writer.write_batch(batch, {p.pair_id: zone for p in pairs})
            metrics = load_batch_metrics(batch_path, cfg.fuel, cfg.sim.dt)
            writer.write_report(metrics)
            summaries[zone] = {case: aggregate(values) for case, values in metrics.get(zone, {}).items()}
        except KeyboardInterrupt:
            print("\n⚠️  Zone evaluation interrupted by user")
            return 1
        except Exception as e:
            print(f"❌ Error processing zone {zone}: {str(e)}")
            continue

    cfg.echo(out_dir)
    comparison_path = write_zone_comparison(zone_comparison(summaries), out_dir / "zone_comparison.json")
    print("\n✨ Zone evaluation completed!")
    print(f"   Check {comparison_path} for the zone comparison")
    return 0


if __name__ == "__main__":
    sys.exit(main())
