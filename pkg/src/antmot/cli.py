"""Command-line surface: ``antmot track | evaluate | simulate``.

Configuration precedence is defaults < config file (``key=value`` lines)
< command-line flags. Exit codes: 0 success, 1 usage error, 2 parse error,
3 internal numeric error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .metrics import (
    evaluate_sequence,
    frame_weighted_mean,
    score,
)
from .sim import MotionParams, NoiseParams, ScenarioConfig, simulate, occlusion_filter
from .tracker import Tracker, TrackerConfig

__all__ = ["main"]

log = logging.getLogger("antmot")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_NUMERIC = 3

_TRACKER_KEYS = {
    "motion_gate": float,
    "appearance_gate": float,
    "max_age": int,
    "n_init": int,
    "gallery_capacity": int,
    "iou_max_distance": float,
    "min_confidence": float,
}

_SIM_KEYS = {
    "arena_width": float,
    "arena_height": float,
    "n_agents": int,
    "frames": int,
    "box_size": float,
    "seed": int,
    "entry_exit_enabled": lambda s: s.lower() in ("1", "true", "yes"),
    "speed_mean": float,
    "speed_std": float,
    "turn_std": float,
    "abrupt_turn_prob": float,
    "pause_prob": float,
    "miss_prob": float,
    "false_positive_rate": float,
    "position_jitter_std": float,
    "descriptor_noise_std": float,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 instead of argparse's 2
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="antmot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    track = sub.add_parser("track", help="assign track ids to a detection file")
    track.add_argument("--detections", required=True, help="input detection CSV")
    track.add_argument("--embeddings", help="optional appearance embedding CSV")
    track.add_argument("--output", required=True, help="trajectory CSV to write")
    track.add_argument("--config", help="key=value config file")
    track.add_argument("--no-appearance", action="store_true",
                       help="force motion gate + IoU association even with embeddings")
    for key, typ in _TRACKER_KEYS.items():
        track.add_argument(f"--{key.replace('_', '-')}", type=typ, default=None)
    track.set_defaults(func=_cmd_track)

    ev = sub.add_parser("evaluate", help="score trajectory files against ground truth")
    ev.add_argument("--gt", action="append", required=True, help="ground-truth CSV (repeatable)")
    ev.add_argument("--hyp", action="append", required=True, help="hypothesis CSV (repeatable)")
    ev.add_argument("--iou-threshold", type=float, default=0.5)
    ev.add_argument("--weight-by-frames", action=argparse.BooleanOptionalAction, default=True,
                    help="weight multi-sequence aggregates by frame counts")
    ev.set_defaults(func=_cmd_evaluate)

    sim = sub.add_parser("simulate", help="generate a synthetic colony scenario")
    sim.add_argument("--out-dir", required=True)
    sim.add_argument("--config", help="key=value config file")
    sim.add_argument("--merge-distance", type=float, default=0.0,
                     help="drop one detection of agent pairs closer than this")
    for key, typ in _SIM_KEYS.items():
        flag = f"--{key.replace('_', '-')}"
        if key == "entry_exit_enabled":
            sim.add_argument("--entry-exit", dest="entry_exit_enabled",
                             action="store_true", default=None)
        else:
            sim.add_argument(flag, type=typ, default=None)
    sim.set_defaults(func=_cmd_simulate)
    return parser


def _layered(defaults: dict, keys: dict, config_path, args) -> dict:
    """Apply config-file values then explicit flags on top of defaults."""
    values = dict(defaults)
    if config_path:
        raw = io.read_config_file(config_path)
        for key, text in raw.items():
            if key not in keys:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = keys[key](text)
    for key in keys:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[key] = flag_value
    return values


def _cmd_track(args) -> int:
    values = _layered(
        {k: getattr(TrackerConfig(), k) for k in _TRACKER_KEYS},
        _TRACKER_KEYS,
        args.config,
        args,
    )
    rows = io.read_mot_file(args.detections)
    embeddings = None
    if args.embeddings and not args.no_appearance:
        embeddings = io.read_embedding_file(args.embeddings)
    appearance = embeddings is not None
    if not appearance:
        log.warning(
            "appearance matching DISABLED (%s); association degrades to "
            "motion gate + IoU",
            "--no-appearance" if args.no_appearance else "no embedding file given",
        )
    config = TrackerConfig(appearance_matching=appearance, **values)
    frames = io.detections_by_frame(rows, embeddings)
    tracker = Tracker(config)
    outputs = tracker.run(sorted(frames.items()))
    io.write_mot_file(args.output, io.outputs_to_rows(outputs))
    log.info("wrote %s", args.output)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    if len(args.gt) != len(args.hyp):
        raise _UsageError(
            f"--gt and --hyp must be given equally often, got {len(args.gt)} and {len(args.hyp)}"
        )
    lines: list[str] = []
    scores = []
    for index, (gt_path, hyp_path) in enumerate(zip(args.gt, args.hyp)):
        gt = io.gt_by_frame(io.read_mot_file(gt_path))
        hyp = io.gt_by_frame(io.read_mot_file(hyp_path))
        if not gt:
            raise ValueError(f"{gt_path}: ground truth is empty")
        if set(gt) != set(hyp):
            log.warning(
                "%s and %s cover different frame sets (%d vs %d frames)",
                gt_path, hyp_path, len(gt), len(hyp),
            )
        acc = evaluate_sequence(gt, hyp, args.iou_threshold)
        seq = score(acc)
        scores.append(seq)
        lines.append(f"# seq {index}: gt={gt_path} hyp={hyp_path}")
        lines.append(f"seq{index}.frames={seq.frames}")
        lines.append(f"seq{index}.labeled_samples={seq.labeled_samples}")
        lines.append(f"seq{index}.fp={seq.fp}")
        lines.append(f"seq{index}.fn={seq.fn}")
        lines.append(f"seq{index}.ids={seq.ids}")
        lines.append(f"seq{index}.fm={seq.fm}")
        lines.append(f"seq{index}.mota={seq.mota:.6f}")
        lines.append(f"seq{index}.motp={seq.motp:.6f}")
    weights = [s.frames for s in scores] if args.weight_by_frames else [1] * len(scores)
    lines.append("# aggregate" + (" (frame-weighted)" if args.weight_by_frames else " (equal weights)"))
    lines.append(f"aggregate.sequences={len(scores)}")
    lines.append(f"aggregate.frames={sum(s.frames for s in scores)}")
    lines.append(f"aggregate.fp={sum(s.fp for s in scores)}")
    lines.append(f"aggregate.fn={sum(s.fn for s in scores)}")
    lines.append(f"aggregate.ids={sum(s.ids for s in scores)}")
    lines.append(f"aggregate.fm={sum(s.fm for s in scores)}")
    lines.append(f"aggregate.mmota={frame_weighted_mean([s.mota for s in scores], weights):.6f}")
    lines.append(f"aggregate.mmotp={frame_weighted_mean([s.motp for s in scores], weights):.6f}")
    print("\n".join(lines))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    defaults = {
        **{k: getattr(ScenarioConfig(), k) for k in
           ("arena_width", "arena_height", "n_agents", "frames", "box_size",
            "seed", "entry_exit_enabled")},
        **{k: getattr(MotionParams(), k) for k in
           ("speed_mean", "speed_std", "turn_std", "abrupt_turn_prob", "pause_prob")},
        **{k: getattr(NoiseParams(), k) for k in
           ("miss_prob", "false_positive_rate", "position_jitter_std",
            "descriptor_noise_std")},
    }
    values = _layered(defaults, _SIM_KEYS, args.config, args)
    config = ScenarioConfig(
        arena_width=values["arena_width"],
        arena_height=values["arena_height"],
        n_agents=values["n_agents"],
        frames=values["frames"],
        box_size=values["box_size"],
        seed=values["seed"],
        entry_exit_enabled=values["entry_exit_enabled"],
        motion=MotionParams(
            speed_mean=values["speed_mean"],
            speed_std=values["speed_std"],
            turn_std=values["turn_std"],
            abrupt_turn_prob=values["abrupt_turn_prob"],
            pause_prob=values["pause_prob"],
        ),
        noise=NoiseParams(
            miss_prob=values["miss_prob"],
            false_positive_rate=values["false_positive_rate"],
            position_jitter_std=values["position_jitter_std"],
            descriptor_noise_std=values["descriptor_noise_std"],
        ),
    )
    scenario = simulate(config)
    if args.merge_distance > 0:
        scenario = occlusion_filter(scenario, args.merge_distance)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gt_rows = [
        io.MotRow(frame, agent_id + 1, box.left, box.top, box.width, box.height, 1.0)
        for frame, frame_gt in enumerate(scenario.gt)
        for agent_id, box in frame_gt
    ]
    det_rows = []
    embedding_entries = []
    for frame, dets in enumerate(scenario.detections):
        for det_index, det in enumerate(dets):
            det_rows.append(
                io.MotRow(frame, -1, det.box.left, det.box.top,
                          det.box.width, det.box.height, det.confidence)
            )
            embedding_entries.append((frame, det_index, det.descriptor))
    io.write_mot_file(out_dir / "gt.csv", gt_rows)
    io.write_mot_file(out_dir / "detections.csv", det_rows)
    io.write_embedding_file(out_dir / "embeddings.csv", embedding_entries)
    log.info("wrote gt.csv, detections.csv, embeddings.csv to %s", out_dir)
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except io.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE if isinstance(exc, ValueError) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
