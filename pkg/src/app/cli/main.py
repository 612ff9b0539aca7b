"""relation-track command line: track | eval | synth | gradcheck | bench | viz | fit | config."""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from app.config import ConfigError, Settings, load_config, render_config
from app.detect.targets import STRIDE
from app.io.mot_format import MotFormatError, embeddings_path, group_frames, read_mot, write_embeddings, write_mot
from app.io.synthetic import (
    SyntheticScenarioError,
    render_sequence_frame,
    scenario_from_settings,
    synth_sequence,
)
from app.metrics import MetricsError, evaluate, render_csv, render_summary, render_table
from app.models import Detection
from app.tracking.tracker import FrameObservation
from app.utils.logging import setup_logging
from app.worker.render import RenderError, dump_maps, render_tensor_file
from app.worker.runner import SequenceJob, SequenceRunner

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2

DETECTION_SUFFIXES = {".txt", ".csv"}
DEFORMABLE_RATIO_BOUNDS = (1.5, 2.8)
DENSE_RATIO_BOUNDS = (3.0, 5.5)


class UsageError(ValueError):
    """Arguments that parse but cannot be acted on."""


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _settings(args: argparse.Namespace) -> Settings:
    return load_config(getattr(args, "config", None))


# ---------------------------------------------------------------- track


def _detection_frames(path: Path) -> List[FrameObservation]:
    lines = read_mot(path)
    sidecar = embeddings_path(path)
    vectors = np.load(sidecar) if sidecar.is_file() else None
    if vectors is not None and len(vectors) != len(lines):
        raise UsageError(f"{sidecar} has {len(vectors)} rows for {len(lines)} detections")
    order = {id(line): row for row, line in enumerate(lines)}
    frames = []
    for frame, items in group_frames(lines).items():
        detections = []
        for line in items:
            left, top, right, bottom = line.box
            center = (int(max((left + right) / 2, 0) // STRIDE), int(max((top + bottom) / 2, 0) // STRIDE))
            detections.append(Detection(box=line.box, score=min(max(line.conf, 0.0), 1.0), center=center))
        embeddings = None if vectors is None else [vectors[order[id(line)]] for line in items]
        frames.append(FrameObservation(frame, detections, embeddings))
    logger.info(f"Loaded {len(lines)} detections over {len(frames)} frames from {path}")
    return frames


def _synthetic_frames(
    config: Settings,
    weights: Optional[Path],
    dump_dir: Optional[Path],
) -> List[FrameObservation]:
    sequence = synth_sequence(scenario_from_settings(config))
    if weights is None:
        return sequence.frames()

    from app.nn.infer import infer_frame
    from app.nn.model import RelationTrackNet

    model = RelationTrackNet(channels=config.backbone_channels, num_classes=config.synth_identities, config=config)
    model.load(weights)
    frames = []
    for frame in sorted(sequence.ground_truth):
        result = infer_frame(model, render_sequence_frame(sequence, frame), config)
        if dump_dir is not None:
            dump_maps(dump_dir, frame, result.maps())
        frames.append(FrameObservation(frame, result.detections, result.embeddings))
    return frames


def _load_frames(path: Path, config: Settings, args: argparse.Namespace) -> List[FrameObservation]:
    if not path.is_file():
        raise FileNotFoundError(f"input not found: {path}")
    if path.suffix.lower() in DETECTION_SUFFIXES:
        if args.weights is not None:
            raise UsageError("--weights needs a synthetic config as input, not a detection file")
        return _detection_frames(path)
    return _synthetic_frames(load_config(path), args.weights, args.dump_dir)


def cmd_track(args: argparse.Namespace) -> int:
    config = _settings(args)
    inputs: List[Path] = args.inputs
    out: Path = args.out
    if len(inputs) > 1:
        out.mkdir(parents=True, exist_ok=True)
        targets = [out / f"{p.stem}.txt" for p in inputs]
    else:
        targets = [out]
    jobs = [SequenceJob(p.stem, _load_frames(p, config, args), config) for p in inputs]
    results = SequenceRunner(workers=args.workers or config.workers, config=config).run(jobs)
    status = EXIT_OK
    for result, target in zip(results, targets):
        if not result.success:
            print(f"error: {result.name}: {result.error_message}", file=sys.stderr)
            status = EXIT_USAGE
            continue
        count = write_mot(result.tracks, target)
        print(f"{result.name}: {len(result.tracks)} tracks, {count} lines -> {target}")
    return status


# ---------------------------------------------------------------- eval / synth


def cmd_eval(args: argparse.Namespace) -> int:
    config = _settings(args)
    for path in (args.gt, args.pred):
        if not path.is_file():
            raise FileNotFoundError(f"input not found: {path}")
    report = evaluate(read_mot(args.gt), read_mot(args.pred), config)
    print(render_summary(report))
    print()
    print(render_table(report))
    print()
    print(render_csv(report))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    config = _settings(args)
    sequence = synth_sequence(scenario_from_settings(config))
    out_dir: Path = args.out_dir
    config.ensure_directories(out_dir)
    write_mot(sequence.gt_lines(), out_dir / "gt.txt")
    write_mot(sequence.det_lines(), out_dir / "det.txt")
    write_embeddings(sequence.embedding_rows(), out_dir / "det.txt")
    print(f"wrote {out_dir / 'gt.txt'}, {out_dir / 'det.txt'} and {embeddings_path(out_dir / 'det.txt')}")
    return EXIT_OK


# ---------------------------------------------------------------- verification


def cmd_gradcheck(args: argparse.Namespace) -> int:
    from app.nn.checks import GRADIENT_CASES, TOLERANCE, run_gradient_suite

    unknown = [name for name in args.case if name not in GRADIENT_CASES]
    if unknown:
        raise UsageError(f"unknown gradient case(s) {unknown}; choose from {sorted(GRADIENT_CASES)}")
    results = run_gradient_suite(seeds=args.seeds, max_checks=args.max_checks, names=args.case)
    width = max(len(r.name) for r in results)
    print(f"{'case'.ljust(width)}  seeds  max_rel_err  seconds  status")
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.name.ljust(width)}  {r.seeds:5d}  {r.max_error:11.3e}  {r.seconds:7.2f}  {status}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"gradient check failed (> {TOLERANCE:g}): {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


def _in_bounds(value: float, bounds) -> bool:
    return bounds[0] <= value <= bounds[1]


def cmd_bench(args: argparse.Namespace) -> int:
    from app.nn.bench import attention_scaling, key_sweep

    dtype = np.dtype(_settings(args).dtype)
    rows = attention_scaling(args.sizes, args.channels, args.num_keys, args.num_heads, args.repeats, dtype=dtype)
    print("size  deformable_ms  dense_ms  deformable_ratio  dense_ratio")
    for row in rows:
        print(
            f"{row.size:4d}  {row.deformable * 1e3:13.3f}  {row.dense * 1e3:8.3f}  "
            f"{row.deformable_ratio:16.2f}  {row.dense_ratio:11.2f}"
        )
    if args.keys:
        print()
        print("num_keys  deformable_ms")
        timings = key_sweep(args.keys, args.sizes[0], args.channels, args.num_heads, args.repeats, dtype=dtype)
        for k, seconds in zip(args.keys, timings):
            print(f"{k:8d}  {seconds * 1e3:13.3f}")
    if args.check:
        bad = [
            row.size for row in rows[1:]
            if not (_in_bounds(row.deformable_ratio, DEFORMABLE_RATIO_BOUNDS) and _in_bounds(row.dense_ratio, DENSE_RATIO_BOUNDS))
        ]
        if bad:
            print(f"scaling ratios out of bounds at sizes {bad}", file=sys.stderr)
            return EXIT_VERIFY_FAILED
    return EXIT_OK


# ---------------------------------------------------------------- viz / fit / config


def cmd_viz(args: argparse.Namespace) -> int:
    path = render_tensor_file(args.tensor, args.out, channel=args.channel, scale=args.scale)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    from app.nn.model import RelationTrackNet
    from app.nn.train import Trainer, TrainingSample

    config = _settings(args)
    sequence = synth_sequence(scenario_from_settings(config))
    frames = args.frames or [1]
    missing = [f for f in frames if f not in sequence.ground_truth]
    if missing:
        raise UsageError(f"frames {missing} are outside the scenario's {len(sequence.ground_truth)} frames")
    samples = [
        TrainingSample.from_boxes(
            render_sequence_frame(sequence, f),
            sequence.ground_truth[f],
            labels=[ann.identity - 1 for ann in sequence.ground_truth[f]],
            min_overlap=config.min_overlap,
        )
        for f in frames
    ]
    model = RelationTrackNet(channels=config.backbone_channels, num_classes=config.synth_identities, config=config)
    history = Trainer(model, lr=args.lr).fit(samples, args.steps)
    model.save(args.out)
    print(f"loss {history.total[0]:.4f} -> {history.total[-1]:.4f} after {args.steps} steps; weights -> {args.out}")
    return EXIT_OK


def cmd_config(args: argparse.Namespace) -> int:
    sys.stdout.write(render_config(_settings(args)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relation-track", description="Desk-scale joint detection and tracking")
    parser.add_argument("--log-level", default=None, help="override the configured log level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="associate detections into trajectories")
    p.add_argument("--in", dest="inputs", type=Path, nargs="+", required=True,
                   help="detection file(s) in MOT format, or synthetic config file(s)")
    p.add_argument("--out", type=Path, required=True, help="result file, or directory for several inputs")
    p.add_argument("--config", type=Path)
    p.add_argument("--weights", type=Path, help="network weights (.npz) for the neural path")
    p.add_argument("--dump-dir", type=Path, help="save backbone/det/reid/heatmap maps per frame")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--config", type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a synthetic scenario")
    p.add_argument("--config", type=Path)
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--max-checks", type=int, default=48, help="entries checked per parameter")
    p.add_argument("--case", action="append", default=[], help="restrict to one case (repeatable)")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", help="deformable vs dense attention timings")
    p.add_argument("--sizes", type=_int_list, default=[32, 45, 64])
    p.add_argument("--keys", type=_int_list, default=[], help="num_keys sweep at the first size")
    p.add_argument("--channels", type=int, default=32)
    p.add_argument("--num-keys", type=int, default=9)
    p.add_argument("--num-heads", type=int, default=4)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--check", action="store_true", help="exit 1 when scaling ratios leave their bounds")
    p.add_argument("--config", type=Path)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("viz", help="render a saved map as a PPM image")
    p.add_argument("--tensor", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--channel", type=int, default=None)
    p.add_argument("--scale", type=int, default=1)
    p.set_defaults(func=cmd_viz)

    p = sub.add_parser("fit", help="train the network on synthetic frames")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True, help="weights file (.npz)")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--frames", type=_int_list, default=[])
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("config", help="echo the effective configuration")
    p.add_argument("--config", type=Path)
    p.set_defaults(func=cmd_config)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        setup_logging(args.log_level or _settings(args).log_level)
        return args.func(args)
    except (
        ConfigError,
        FileNotFoundError,
        MotFormatError,
        MetricsError,
        RenderError,
        SyntheticScenarioError,
        UsageError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
