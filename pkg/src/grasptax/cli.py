"""Command line entry point: ``grasptax {prepare,cluster,evaluate,report,run}``.

Exit codes: 0 on success, 1 on validation errors, 2 on numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import ENGINES, FEATURE_SPACES, SAMPLING_MODES, SELECTION_METHODS, PipelineConfig
from .errors import GraspTaxError, MissingFile, NumericalError
from .ingestion import Manifest, _parse_label

# flag -> dotted config field
_OVERRIDES = {
    "feature_space": "feature_space",
    "fused_pose": "fused_pose",
    "fused_appearance": "fused_appearance",
    "pose_weight": "pose_weight",
    "thumb_weight": "thumb_weight",
    "engine": "engine.name",
    "p": "engine.kmeans.p",
    "kmeans_max_iter": "engine.kmeans.max_iter",
    "kmeans_tol": "engine.kmeans.rel_tol",
    "kmeans_n_init": "engine.kmeans.n_init",
    "covariance": "engine.gmm.covariance",
    "n_init": "engine.gmm.n_init",
    "sweep_n_init": "engine.gmm.sweep_n_init",
    "max_steps": "engine.gmm.max_steps",
    "reg": "engine.gmm.reg",
    "n_neighbors": "engine.spectral.n_neighbors",
    "k": "k",
    "selection": "selection",
    "sampling_mode": "sampling.mode",
    "median_window": "sampling.median_window",
    "n_intervals": "sampling.n_intervals",
    "task_cap": "sampling.task_cap",
    "min_cluster_size": "min_cluster_size",
    "review_n": "review_n",
    "report_intervals": "report_intervals",
    "seed": "seed",
}


def _config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline configuration (overrides --config)")
    g.add_argument("--config", help="JSON pipeline configuration")
    g.add_argument("--feature-space", choices=FEATURE_SPACES)
    g.add_argument("--fused-pose", choices=("pose2d", "pose2d_conf", "pose3d"))
    g.add_argument("--fused-appearance", choices=("appearance_avg", "appearance_max"))
    g.add_argument("--pose-weight", type=float)
    g.add_argument("--thumb-weight", type=float)
    g.add_argument("--engine", choices=ENGINES)
    g.add_argument("--p", type=float, help="k-means Minkowski exponent")
    g.add_argument("--kmeans-max-iter", type=int)
    g.add_argument("--kmeans-tol", type=float)
    g.add_argument("--kmeans-n-init", type=int)
    g.add_argument("--covariance", choices=("full", "spherical", "diagonal", "tied"))
    g.add_argument("--n-init", type=int, help="GMM restarts")
    g.add_argument("--sweep-n-init", type=int, help="GMM restarts per k during the k sweep")
    g.add_argument("--max-steps", type=int)
    g.add_argument("--reg", type=float)
    g.add_argument("--n-neighbors", type=int)
    g.add_argument("--k", type=int, help="fixed number of clusters (implies --selection fixed)")
    g.add_argument("--k-min", type=int)
    g.add_argument("--k-max", type=int)
    g.add_argument("--selection", choices=SELECTION_METHODS)
    g.add_argument("--sampling-mode", choices=SAMPLING_MODES)
    g.add_argument("--median-window", type=int)
    g.add_argument("--n-intervals", type=int)
    g.add_argument("--task-cap", type=int)
    g.add_argument("--min-cluster-size", type=int)
    g.add_argument("--review-n", type=int)
    g.add_argument("--report-intervals", type=int)
    g.add_argument("--seed", type=int)


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    changes = {field: getattr(args, flag) for flag, field in _OVERRIDES.items()
               if getattr(args, flag, None) is not None}
    if args.k is not None and args.selection is None:
        changes["selection"] = "fixed"
    if args.k_min is not None or args.k_max is not None:
        changes["k_range"] = [args.k_min or config.k_range[0], args.k_max or config.k_range[1]]
    return config.override(**changes) if changes else config


def _read_labels(path) -> dict:
    if not Path(path).exists():
        raise MissingFile(str(path))
    with open(path, newline="") as fh:
        return {int(row["frame_id"]): _parse_label(row["grasp_label"]) for row in csv.DictReader(fh)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grasptax", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="sample frames and build the feature matrix")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", required=True)
    _config_flags(p)

    p = sub.add_parser("cluster", help="fit the clustering engine, choosing k if configured")
    p.add_argument("features")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    _config_flags(p)

    p = sub.add_parser("evaluate", help="validity indices and review sheets")
    p.add_argument("model")
    p.add_argument("features")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--labels", help="CSV with frame_id, grasp_label")
    _config_flags(p)

    p = sub.add_parser("report", help="keyframe report per cluster")
    p.add_argument("model")
    p.add_argument("features")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", required=True)
    _config_flags(p)

    p = sub.add_parser("run", help="prepare, cluster, evaluate and report in one go")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--labels", help="CSV with frame_id, grasp_label")
    _config_flags(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
        out = Path(args.out)
        if args.command == "prepare":
            pipeline.prepare(Manifest.from_json(args.manifest), config, out)
        elif args.command == "cluster":
            pipeline.cluster(args.features, config, out, args.workers)
        elif args.command == "evaluate":
            labels = _read_labels(args.labels) if args.labels else None
            pipeline.evaluate(args.model, args.features, config, out, labels)
        elif args.command == "report":
            pipeline.report(args.model, args.features, Manifest.from_json(args.manifest), config, out)
        else:
            labels = _read_labels(args.labels) if args.labels else None
            pipeline.run(Manifest.from_json(args.manifest), config, out, args.workers, labels)
    except NumericalError as exc:
        print(f"grasptax: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (GraspTaxError, ValueError) as exc:
        print(f"grasptax: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
