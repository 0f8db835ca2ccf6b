"""Command-line entry points: track, eval, simulate, ablate, plot-bev.

Every command honors --seed and writes byte-identical output files across
reruns; anything volatile (wall-clock timings) goes to stderr only.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .config import CONFIG_SCHEMA, TrackerConfig, load_config, schema_help
from .dataio import (TrackedBox, export_bundle, load_sequence, read_labels,
                     read_results, read_detections_2d, write_results)
from .geometry import CameraCalib
from .metrics import evaluate, similarity_fn
from .oracle import (ReplayOracle2D, ReplayOracle3D, SyntheticOracle2D,
                     SyntheticOracle3D, SyntheticOracleParams)
from .pipeline import run_sequence
from .simworld import (PRESET_NAMES, SequenceBundle, build_preset, generate,
                       parse_scenario_file)


def _build_config(args) -> TrackerConfig:
    config = load_config(args.config) if args.config else TrackerConfig()
    if getattr(args, "seed", None) is not None:
        config = config.replace(seed=args.seed)
    if getattr(args, "no_2d", False):
        config = config.replace(use_2d=False)
    if getattr(args, "nms_order", None):
        config = config.replace(nms_order=args.nms_order)
    if getattr(args, "n_hist", None) is not None:
        config = config.replace(n_hist=args.n_hist)
    return config


def _oracles_for(bundle: SequenceBundle, config: TrackerConfig):
    if bundle.world is not None:
        params = SyntheticOracleParams(config.feature_dim, config.feature_sigma,
                                       config.oracle_floor_conf, config.oracle_match_min_iou,
                                       config.oracle_refine_min)
        return SyntheticOracle3D(params, config.seed), SyntheticOracle2D(
            config.oracle_floor_conf, config.oracle_match_min_iou)
    table = {p.frame_index: list(p.detections) for p in bundle.packets}
    oracle3d = ReplayOracle3D(table, config.oracle_floor_conf, config.oracle_match_min_iou)
    oracle2d = None
    if getattr(bundle, "table_2d", None):
        oracle2d = ReplayOracle2D(bundle.table_2d, config.oracle_floor_conf,
                                  config.oracle_match_min_iou)
    return oracle3d, oracle2d


def _load_bundle(args, config: TrackerConfig) -> SequenceBundle:
    if args.preset:
        return generate(build_preset(args.preset, config.seed))
    if args.scenario:
        return generate(parse_scenario_file(args.scenario).with_seed(config.seed))
    if args.kitti:
        if not args.detections:
            raise SystemExit("--kitti needs --detections")
        bundle = load_sequence(args.kitti, args.seq, args.detections, config)
        sidecar = os.path.join(args.detections, f"{args.seq}_2d.txt")
        if os.path.exists(sidecar):
            bundle.table_2d = read_detections_2d(sidecar)  # type: ignore[attr-defined]
        return bundle
    raise SystemExit("choose a data source: --preset, --scenario, or --kitti")


def cmd_track(args) -> int:
    config = _build_config(args)
    bundle = _load_bundle(args, config)
    oracle3d, oracle2d = _oracles_for(bundle, config)
    rows, report, tracker = run_sequence(bundle, oracle3d, oracle2d, config,
                                         trace=args.trace_conf is not None)
    os.makedirs(args.out, exist_ok=True)
    write_results(rows, os.path.join(args.out, f"{bundle.seq_id}.txt"), bundle.calib)
    with open(os.path.join(args.out, f"{bundle.seq_id}_report.json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.trace_conf is not None:
        path = os.path.join(args.out, f"{bundle.seq_id}_trace_{args.trace_conf}.txt")
        _write_conf_trace(tracker, args.trace_conf, path)
    print(report.to_text(include_timings=True), file=sys.stderr)
    print(os.path.join(args.out, f"{bundle.seq_id}.txt"))
    return 0


def _write_conf_trace(tracker, track_id: int, path):
    """Two columns per frame: raw detection score vs fused trajectory confidence."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# frame raw_detection_score fused_confidence\n")
        for summary in tracker.summaries:
            for rec in summary.records:
                if rec.track_id == track_id:
                    fh.write(f"{summary.frame} {rec.raw_detection_score:.6f} "
                             f"{rec.fused_confidence:.6f}\n")


def cmd_eval(args) -> int:
    config = _build_config(args)
    calib = CameraCalib.default(config.image_width, config.image_height)
    if args.calib:
        from .dataio import read_kitti_calib
        calib = read_kitti_calib(args.calib, config.image_width, config.image_height)
    gt = read_labels(args.gt, calib)
    results = read_results(args.results, calib)
    sim = similarity_fn(config.metric_similarity, calib)
    report = evaluate(gt, results, config.clear_threshold, sim)
    print(report.to_text(), end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
            fh.write("\n")
    return 0


def cmd_simulate(args) -> int:
    config = _build_config(args)
    if args.scenario:
        scenario = parse_scenario_file(args.scenario).with_seed(config.seed)
    else:
        scenario = build_preset(args.preset or "random", config.seed)
    bundle = generate(scenario)
    export_bundle(bundle, args.out)
    print(args.out)
    return 0


def cmd_ablate(args) -> int:
    from .simworld import fov_exit_suite, occlusion_suite, random_suite

    config = _build_config(args)
    suites = {
        "random": lambda: random_suite(tuple(range(1, args.scenarios + 1))),
        "occlusion": occlusion_suite,
        "fov-exit": fov_exit_suite,
    }
    scenarios = suites[args.suite]()
    n_hist_values = [int(v) for v in args.n_hist_list.split(",")]
    orders = args.orders.split(",")
    use_2d_values = [True, False] if args.sweep_2d else [True]

    header = f"{'n_hist':>6} {'order':>11} {'2d':>3} {'MOTA':>8} {'HOTA':>8} {'FP':>5} {'FN':>5} {'IDSW':>5}"
    print(header)
    print("-" * len(header))
    lines = [header]
    for n_hist in n_hist_values:
        for order in orders:
            for use_2d in use_2d_values:
                cfg = config.replace(n_hist=n_hist, nms_order=order, use_2d=use_2d)
                mota, hota, fp, fn, idsw = _suite_metrics(scenarios, cfg)
                line = (f"{n_hist:>6} {order:>11} {'y' if use_2d else 'n':>3} "
                        f"{mota:>8.4f} {hota:>8.4f} {fp:>5d} {fn:>5d} {idsw:>5d}")
                print(line)
                lines.append(line)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def _suite_metrics(scenarios, config: TrackerConfig):
    from .metrics import evaluate_clear, evaluate_hota

    motas, hotas = [], []
    fp = fn = idsw = 0
    for scenario in scenarios:
        bundle = generate(scenario)
        oracle3d, oracle2d = _oracles_for(bundle, config)
        rows, _, _ = run_sequence(bundle, oracle3d, oracle2d, config)
        clear = evaluate_clear(bundle.gt, rows, config.clear_threshold)
        hota = evaluate_hota(bundle.gt, rows)
        motas.append(clear.mota)
        hotas.append(hota.hota)
        fp += clear.fp
        fn += clear.fn
        idsw += clear.idsw
    n = max(len(scenarios), 1)
    return sum(motas) / n, sum(hotas) / n, fp, fn, idsw


def cmd_plot_bev(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "jdtracker"

    config = _build_config(args)
    calib = CameraCalib.default(config.image_width, config.image_height)
    rows = read_results(args.results, calib) if args.results else []
    gt = read_labels(args.gt, calib) if args.gt else []

    fig, ax = plt.subplots(figsize=(7, 7))
    palette = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for track_id in sorted({r.track_id for r in rows}):
        pts = [(r.box.cx, r.box.cy) for r in sorted(rows, key=lambda r: r.frame)
               if r.track_id == track_id]
        xs, ys = zip(*pts)
        ax.plot(xs, ys, "-", color=palette[track_id % len(palette)], label=f"track {track_id}")
    for track_id in sorted({g.track_id for g in gt}):
        pts = [(g.box.cx, g.box.cy) for g in sorted(gt, key=lambda g: g.frame)
               if g.track_id == track_id]
        xs, ys = zip(*pts)
        ax.plot(xs, ys, "--", color="0.4", linewidth=0.8)
    ax.set_xlabel("x (m, forward)")
    ax.set_ylabel("y (m, left)")
    ax.set_aspect("equal")
    if rows:
        ax.legend(loc="upper right", fontsize=8)
    fig.savefig(args.out, format="svg", metadata={"Date": None})
    plt.close(fig)

    table_path = os.path.splitext(args.out)[0] + "_table.txt"
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write("# frame track_id x y\n")
        for r in sorted(rows, key=lambda r: (r.track_id, r.frame)):
            fh.write(f"{r.frame} {r.track_id} {r.box.cx:.4f} {r.box.cy:.4f}\n")
    print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jdtracker",
        description="3D multi-object tracking by trajectory regression and "
                    "confidence-guided joint NMS",
        epilog="config keys (also accepted via --config file):\n" + schema_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data_source=False):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if data_source:
            p.add_argument("--preset", choices=PRESET_NAMES, help="built-in scenario")
            p.add_argument("--scenario", help="scenario spec file")
            p.add_argument("--kitti", help="KITTI tracking directory")
            p.add_argument("--seq", default="0000", help="sequence id under --kitti")
            p.add_argument("--detections", help="directory of per-sequence detection files")

    p_track = sub.add_parser("track", help="run the tracker on a sequence")
    common(p_track, data_source=True)
    p_track.add_argument("--no-2d", action="store_true", help="disable the 2D branch")
    p_track.add_argument("--nms-order", choices=("descending", "ascending", "unordered"))
    p_track.add_argument("--n-hist", type=int, default=None)
    p_track.add_argument("--trace-conf", type=int, default=None, metavar="TRACK_ID",
                         help="dump per-frame raw vs fused confidence for one track")
    p_track.add_argument("--out", required=True, help="output directory")
    p_track.set_defaults(func=cmd_track)

    p_eval = sub.add_parser("eval", help="evaluate results against ground truth")
    common(p_eval)
    p_eval.add_argument("--gt", required=True, help="label file (KITTI tracking format)")
    p_eval.add_argument("--results", required=True, help="result file")
    p_eval.add_argument("--calib", help="calibration file matching the boxes")
    p_eval.add_argument("--out", help="write machine-readable summary JSON here")
    p_eval.set_defaults(func=cmd_eval)

    p_sim = sub.add_parser("simulate", help="generate a synthetic sequence to disk")
    common(p_sim, data_source=False)
    p_sim.add_argument("--preset", choices=PRESET_NAMES)
    p_sim.add_argument("--scenario", help="scenario spec file")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_abl = sub.add_parser("ablate", help="sweep n_hist x NMS order x 2D on/off")
    common(p_abl)
    p_abl.add_argument("--suite", choices=("random", "occlusion", "fov-exit"),
                       default="random")
    p_abl.add_argument("--scenarios", type=int, default=5,
                       help="number of random-suite scenarios")
    p_abl.add_argument("--n-hist-list", default="1", help="comma list, e.g. 0,1,5,30")
    p_abl.add_argument("--orders", default="descending",
                       help="comma list of NMS orders")
    p_abl.add_argument("--sweep-2d", action="store_true", help="also toggle the 2D branch")
    p_abl.add_argument("--out", help="write the grid to this file")
    p_abl.set_defaults(func=cmd_ablate)

    p_plot = sub.add_parser("plot-bev", help="draw BEV trajectories as SVG + table")
    common(p_plot)
    p_plot.add_argument("--results", help="result file")
    p_plot.add_argument("--gt", help="label file drawn dashed")
    p_plot.add_argument("--out", required=True, help="output SVG path")
    p_plot.set_defaults(func=cmd_plot_bev)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
