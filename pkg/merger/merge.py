#!/usr/bin/env python3
"""Main merge evaluation script."""
import argparse
import logging
import sys
from pathlib import Path

# Add the parent directory to Python path so we can import the merger package
sys.path.append(str(Path(__file__).parent.parent))

from merger.config.cases import COOPERATION_MODES, MERGING_ZONES, SUPPORTED_CASES, VIS_MODES
from merger.config.loader import load_config
from merger.config.settings import DEFAULT_PATHS
from merger.core.errors import MergeError
from merger.core.report import ReportWriter, flag_counts, load_batch_metrics, write_sweep
from merger.core.scenario import (danger_filter, extract_pairs, generate_synthetic, ingest_csv,
                                  load_pair_manifest, write_pair_manifest)
from merger.core.simulation import EventKind, run_batch, sweep_identification_time
from merger.core.vis import VisMode
from merger.utils.interrupts import install_handler, restore_handler

logger = logging.getLogger(__name__)


def _cases(value: str):
    cases = [c.strip() for c in value.split(',') if c.strip()]
    unknown = [c for c in cases if c not in SUPPORTED_CASES]
    if unknown or not cases:
        raise argparse.ArgumentTypeError(
            f"choose from {', '.join(SUPPORTED_CASES)} (got '{value}')")
    return cases


def _t_ids(value: str):
    try:
        return [float(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated seconds, got '{value}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="On-ramp merge evaluation: scenarios, case runs and reports.")
    parser.add_argument("--verbose", "-v", action="store_true", help="Show debug output")
    parser.add_argument("--config", type=str, default=None, help="YAML configuration file")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="Generate synthetic dangerous merging pairs")
    gen.add_argument("--zone", choices=list(MERGING_ZONES.keys()), default=None,
                     help="Merging zone (default: one-third)")
    gen.add_argument("--n", type=int, default=None, help="Number of pairs (default: 100)")
    gen.add_argument("--seed", type=int, default=None, help="Generator seed (default: 7)")
    gen.add_argument("--lead-fraction", type=float, default=None,
                     help="Share of pairs where the on-ramp vehicle merges ahead (default: 0.82)")
    gen.add_argument("--output", "-o", type=str, default=None, help="Output directory")

    ing = sub.add_parser("ingest", help="Extract dangerous pairs from canonical trajectory CSVs")
    ing.add_argument("tracks", nargs="+", help="Canonical trajectory CSV file(s)")
    ing.add_argument("--zone", choices=list(MERGING_ZONES.keys()), default=None,
                     help="Merging zone (default: one-third)")
    ing.add_argument("--danger-threshold", type=float, default=None,
                     help="Keep pairs with a baseline gap below this many seconds (default: 1.8)")
    ing.add_argument("--output", "-o", type=str, default=None, help="Output directory")

    run = sub.add_parser("run", help="Run cases over a pair manifest and write the report")
    run.add_argument("--manifest", "-m", type=str, default=None,
                     help="Pair manifest (default: <output>/pairs.json)")
    run.add_argument("--cases", type=_cases, default=None,
                     help=f"Comma-separated cases from: {', '.join(SUPPORTED_CASES)}")
    run.add_argument("--vis-mode", choices=list(VIS_MODES.keys()), default=None,
                     help="Vehicle identification mode (default: fixed)")
    run.add_argument("--t-id", type=float, default=None, help="Fixed identification time in seconds")
    run.add_argument("--mode", choices=list(COOPERATION_MODES.keys()), default=None,
                     help="Cooperation mode for Cases 2-3 (default: bilateral)")
    run.add_argument("--advance", choices=['exact', 'zoh'], default=None,
                     help="Recursive control propagation (default: exact)")
    run.add_argument("--seed", type=int, default=None, help="Simulation seed (default: 42)")
    run.add_argument("--jobs", "-j", type=int, default=None,
                     help="Worker processes (default: all cores)")
    run.add_argument("--sweep-t-id", type=_t_ids, default=None,
                     help="Also sweep Case 2 over these fixed identification times, e.g. 1.5,3.5,5.5")
    run.add_argument("--output", "-o", type=str, default=None, help="Output directory")

    rep = sub.add_parser("report", help="Recompute the report from a batch's run files")
    rep.add_argument("--batch", "-b", type=str, default=None,
                     help="Batch manifest (default: <output>/batch.json)")
    rep.add_argument("--output", "-o", type=str, default=None, help="Output directory")
    return parser


def _overrides(args) -> dict:
    overrides = {'output': args.output}
    if args.command == 'generate':
        overrides['generator'] = {'zone': args.zone, 'n_pairs': args.n, 'seed': args.seed,
                                  'lead_fraction': args.lead_fraction}
    elif args.command == 'ingest':
        overrides['generator'] = {'zone': args.zone, 'danger_threshold_s': args.danger_threshold}
    elif args.command == 'run':
        overrides['simulation'] = {'seed': args.seed, 'jobs': args.jobs, 'advance': args.advance}
        overrides['vis'] = {'mode': args.vis_mode, 't_id': args.t_id}
        overrides['merge'] = {'mode': args.mode}
        overrides['cases'] = args.cases
        overrides['manifest'] = args.manifest
    return overrides


def cmd_generate(cfg) -> int:
    gen = cfg.generator
    print(f"\n🚀 Generating {gen.n_pairs} pair(s) in the {gen.zone.value} zone (seed {gen.seed})...")
    pairs = generate_synthetic(gen, progress=True)
    manifest = write_pair_manifest(pairs, cfg.output_dir, source='synthetic')
    cfg.echo()
    lead = sum(p.sequence.value == 'onramp_leads' for p in pairs)
    print(f"\n✨ Wrote {len(pairs)} pair(s) for zone {gen.zone.value} ({lead} on-ramp leading)")
    print(f"📁 Manifest: {manifest}")
    return 0


def cmd_ingest(cfg, tracks) -> int:
    gen = cfg.generator
    pairs = []
    for track_file in tracks:
        print(f"\n🔄 Processing: {Path(track_file).name}")
        records = ingest_csv(track_file, cfg.sim.dt)
        found = extract_pairs(records, gen.zone, gen.h, gen.l, cfg.sim.dt)
        pairs.extend(danger_filter(found, gen.danger_threshold_s))
    if not pairs:
        print(f"\n⚠️  No dangerous pairs found in the {gen.zone.value} zone")
        return 0
    manifest = write_pair_manifest(pairs, cfg.output_dir, source='ingested')
    cfg.echo()
    print(f"\n✨ Wrote {len(pairs)} dangerous pair(s) for zone {gen.zone.value}")
    print(f"📁 Manifest: {manifest}")
    return 0


def cmd_run(cfg, sweep_t_ids=None) -> int:
    manifest = cfg.manifest or cfg.output_dir / DEFAULT_PATHS['manifest']
    pairs = load_pair_manifest(manifest, cfg.sim.dt)
    cases = [c.value for c in cfg.cases]
    print(f"\n🚀 Running {len(pairs)} pair(s) x {len(cases)} case(s): {', '.join(cases)}")
    batch = run_batch(pairs, cfg.cases, cfg.sim, jobs=cfg.jobs, progress=True)

    # identification delay varies per pair in statistical mode
    coop_level = logging.INFO if cfg.sim.vis.mode is VisMode.STATISTICAL else logging.DEBUG
    for out in batch.outputs:
        t_coop = out.event_time(EventKind.COOPERATION_START)
        if t_coop is not None:
            logger.log(coop_level, "%s/%s: cooperation starts at t=%.2fs", out.pair_id, out.case.value, t_coop)

    writer = ReportWriter(cfg.output_dir, cfg.fuel)
    batch_path = writer.write_batch(batch, {p.pair_id: p.zone.value for p in pairs})
    written = writer.write_report(load_batch_metrics(batch_path, cfg.fuel, cfg.sim.dt))
    if sweep_t_ids:
        print(f"\n🔄 Sweeping identification time over {len(sweep_t_ids)} value(s)...")
        sweep = sweep_identification_time(pairs, sweep_t_ids, cfg.sim, cfg.jobs, cfg.fuel)
        written.append(write_sweep(sweep, cfg.output_dir / "sweep_t_id.json"))
    cfg.echo()

    for case, counts in sorted(flag_counts(batch.outputs).items()):
        print(f"   {case}: " + ', '.join(f"{flag}={n}" for flag, n in sorted(counts.items())))
    print("\n📁 Report files:")
    for path in written:
        print(f"   - {path.name}")
    if batch.failures:
        print(f"\n❌ {len(batch.failures)} run(s) failed:")
        for failure in batch.failures:
            print(f"   - {failure.pair_id}/{failure.case.value}: {failure.error}")
        return 1
    print(f"\n✨ Completed {len(batch.outputs)} run(s)")
    return 0


def cmd_report(cfg, batch_path) -> int:
    batch_path = Path(batch_path) if batch_path else cfg.output_dir / DEFAULT_PATHS['batch']
    metrics = load_batch_metrics(batch_path, cfg.fuel, cfg.sim.dt)
    written = ReportWriter(cfg.output_dir, cfg.fuel).write_report(metrics)
    print(f"\n✨ Report recomputed from {batch_path}")
    for path in written:
        print(f"   - {path.name}")
    return 0


def main(argv=None) -> int:
    """Main entry point for the merge evaluation script."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == 'generate' and args.n is not None and args.n < 1:
        parser.error("--n must be at least 1")
    if args.command == 'run' and args.jobs is not None and args.jobs < 1:
        parser.error("--jobs must be at least 1")

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(message)s', stream=sys.stdout)
    previous = None
    try:
        cfg = load_config(_overrides(args), args.config)
        previous = install_handler()
        if args.command == 'generate':
            return cmd_generate(cfg)
        if args.command == 'ingest':
            return cmd_ingest(cfg, args.tracks)
        if args.command == 'run':
            return cmd_run(cfg, args.sweep_t_id)
        return cmd_report(cfg, args.batch)
    except KeyboardInterrupt:
        print("\n⚠️  Merge evaluation interrupted by user")
        return 1
    except (MergeError, ValueError, OSError) as e:
        print(f"\n❌ Error: {str(e)}")
        return 1
    finally:
        restore_handler(previous)


if __name__ == "__main__":
    sys.exit(main())
