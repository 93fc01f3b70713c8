"""Command line entry point: ``asocem segment | synth | eval``."""

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

from .evaluation import batch_evaluate
from .levelset import SolverParams
from .micrograph import SegmentationMask, read_micrograph, restore_geometry, write_mask, write_overlay
from .mrc import write_mrc
from .pipeline import PipelineConfig, run_segmentation
from .synthetic import generate, spec_from_dict

logger = logging.getLogger("asocem")

INPUT_SUFFIXES = (".mrc", ".mrcs", ".png", ".tif", ".tiff")

# config-file key -> default; command-line flags override the file
SEGMENT_DEFAULTS = {
    "particle_size": None,
    "alpha": SolverParams.alpha,
    "beta": SolverParams.beta,
    "dt": SolverParams.dt,
    "block_edge": 25,
    "working_size": 800,
    "area_factor": 4.0,
    "max_outer_iters": SolverParams.max_outer_iters,
    "threads": 1,
    "png_overlay": False,
    "mask_format": "png",
}


def _collect_inputs(path):
    path = Path(path)
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix.lower() in INPUT_SUFFIXES)
    return [path]


def _merge_settings(args):
    settings = dict(SEGMENT_DEFAULTS)
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        unknown = set(loaded) - set(settings)
        if unknown:
            raise SystemExit(f"unknown config keys: {', '.join(sorted(unknown))}")
        settings.update(loaded)
    for key in settings:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if settings["particle_size"] is None:
        raise SystemExit("--particle-size is required (flag or config file)")
    return settings


def build_config(settings):
    solver = SolverParams(
        alpha=float(settings["alpha"]),
        beta=float(settings["beta"]),
        dt=float(settings["dt"]),
        max_outer_iters=int(settings["max_outer_iters"]),
    )
    return PipelineConfig(
        particle_size_px=float(settings["particle_size"]),
        working_size=int(settings["working_size"]),
        block_edge=int(settings["block_edge"]),
        solver=solver,
        area_factor=float(settings["area_factor"]),
    )


def _segment_one(path, out_dir, settings):
    cfg = build_config(settings)
    m = read_micrograph(path)
    result = run_segmentation(m, cfg)
    stem = Path(path).stem
    fmt = settings["mask_format"]
    mask_path = out_dir / f"{stem}_mask.{fmt}"
    write_mask(result.mask, mask_path, format=fmt, upsample_to=m.shape)
    if settings["png_overlay"]:
        full = restore_geometry(result.mask.pixels, m.shape)
        write_overlay(m, SegmentationMask(full), out_dir / f"{stem}_overlay.png")
    sidecar = {
        "status": result.status,
        "outer_iters": result.outer_iters,
        "contamination_fraction": result.contamination_fraction,
        "params": {
            **{k: v for k, v in settings.items() if k != "threads"},
            "solver": asdict(cfg.solver),
        },
    }
    (out_dir / f"{stem}_mask.json").write_text(json.dumps(sidecar, indent=2))
    return str(mask_path), result.status


def cmd_segment(args):
    settings = _merge_settings(args)
    inputs = _collect_inputs(args.input)
    if not inputs:
        logger.error("no micrographs found at %s", args.input)
        return 1
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = 0
    threads = max(int(settings["threads"]), 1)
    if threads == 1:
        outcomes = []
        for p in inputs:
            try:
                outcomes.append((p, _segment_one(p, out_dir, settings), None))
            except Exception as exc:  # report and continue with the batch
                outcomes.append((p, None, exc))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [(p, pool.submit(_segment_one, p, out_dir, settings)) for p in inputs]
            outcomes = []
            for p, fut in futures:
                try:
                    outcomes.append((p, fut.result(), None))
                except Exception as exc:
                    outcomes.append((p, None, exc))
    for p, res, exc in outcomes:
        if exc is not None:
            failures += 1
            logger.error("%s: %s", p, exc)
        else:
            logger.info("%s -> %s (%s)", p, res[0], res[1])
    return 1 if failures else 0


def cmd_synth(args):
    spec = spec_from_dict(json.loads(Path(args.spec).read_text()))
    m, gt = generate(spec)
    write_mrc(args.out_mrc, m.pixels.astype("float32"), mode=2)
    fmt = "png" if Path(args.out_gt).suffix.lower() == ".png" else "mrc"
    write_mask(gt, args.out_gt, format=fmt)
    return 0


def cmd_eval(args):
    report = batch_evaluate(args.pred, args.gt, include_undefined=args.include_undefined)
    out = Path(args.report)
    if out.suffix.lower() == ".csv":
        report.write_csv(out)
    else:
        report.write_json(out)
    print(f"mean sensitivity {report.mean_sensitivity:.4f}  mean specificity {report.mean_specificity:.4f}")
    return 0 if report.ok else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="asocem",
        description="Segment contaminated regions in cryo-EM micrographs.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser(
        "segment",
        help="segment micrographs",
        description="Write one mask per micrograph. Mask value 1 (255 in PNG) marks "
        "contamination, 0 usable area; masks are upsampled to the input size.",
    )
    seg.add_argument("--input", required=True, help="micrograph file or directory")
    seg.add_argument("--output", required=True, help="output directory")
    seg.add_argument("--particle-size", dest="particle_size", type=float,
                     help="approximate particle diameter in input pixels")
    seg.add_argument("--config", help="JSON file with the same keys as the flags")
    seg.add_argument("--alpha", type=float, help="boundary length weight")
    seg.add_argument("--beta", type=float, help="contamination area weight")
    seg.add_argument("--dt", type=float, help="level-set time step")
    seg.add_argument("--block-edge", dest="block_edge", type=int)
    seg.add_argument("--working-size", dest="working_size", type=int)
    seg.add_argument("--area-factor", dest="area_factor", type=float,
                     help="keep regions larger than this many particle areas")
    seg.add_argument("--max-outer-iters", dest="max_outer_iters", type=int)
    seg.add_argument("--threads", type=int)
    seg.add_argument("--mask-format", dest="mask_format", choices=("png", "mrc"))
    seg.add_argument("--png-overlay", dest="png_overlay", action="store_true", default=None)
    seg.set_defaults(func=cmd_segment)

    syn = sub.add_parser("synth", help="generate a synthetic micrograph with ground truth")
    syn.add_argument("--spec", required=True, help="JSON synthetic spec")
    syn.add_argument("--out-mrc", dest="out_mrc", required=True)
    syn.add_argument("--out-gt", dest="out_gt", required=True, help=".png or .mrc")
    syn.set_defaults(func=cmd_synth)

    ev = sub.add_parser("eval", help="score predicted masks against ground truth")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--report", required=True, help=".csv or .json output")
    ev.add_argument("--include-undefined", dest="include_undefined", action="store_true",
                    help="average flagged (undefined) metrics too")
    ev.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
