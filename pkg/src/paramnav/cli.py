"""Single executable for the whole pipeline.

Stages hand off through checkpoint files and are independently re-runnable;
every artifact-producing run writes a resolved-config JSON next to its
outputs that suffices to reproduce it byte-for-byte.  Report stages write
their numbers as CSV/JSON plus a rendered matplotlib figure.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .directions import DirectionSet
from .discovery import (DiscoveryConfig, calibrate_shift_range, discover_hybrid,
                        discover_opt, svd_baseline, top_k_eigendirections)
from .distill import DistillConfig, distill_generator
from .evaluation import (ReproduceConfig, StripSpec, ffd_curve, pixel_diff_heatmap,
                         render_strip, reproduce_latent)
from .generator import CONV_LAYERS, GeneratorModel
from .metrics import RandomFeatureMetric, fit_feature_stats, make_metric
from .pngio import normalize_for_display, write_png
from .scenes import DatasetSpec, make_dataset

METHODS = ("svd", "opt", "spectrum", "hybrid")


def _read_config_file(path: str) -> dict:
    """key=value lines with # comments; values parsed as JSON when possible."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (want key=value): {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            out[key.replace("-", "_")] = json.loads(val)
        except json.JSONDecodeError:
            out[key.replace("-", "_")] = val
    return out


def _write_resolved_config(args: argparse.Namespace, out_dir: Path, stage: str):
    resolved = {k: v for k, v in vars(args).items() if k not in ("func",)}
    resolved["stage"] = stage
    path = out_dir / f"{stage}-config.json"
    path.write_text(json.dumps(resolved, sort_keys=True, indent=2, default=str) + "\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _out_dir(args) -> Path:
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _discovery_config(args, count=None) -> DiscoveryConfig:
    return DiscoveryConfig(
        count=count if count is not None else args.k,
        magnitude_range=args.t,
        regression_weight=args.regression_weight,
        lr=args.lr,
        iterations=args.iterations,
        batch=args.batch,
        epsilon=args.epsilon,
        power_iterations=args.power_iterations,
        hessian_batch=args.hessian_batch,
        eigen_count=args.eigen_count,
        seed=args.seed)


# ---------------------------------------------------------------------------
# stages


def cmd_dataset_gen(args):
    out = _out_dir(args)
    spec = DatasetSpec(count=args.count, seed=args.seed, size=args.size,
                       radius_mode=args.radius_mode)
    images, params = make_dataset(spec)
    save_checkpoint((spec, images, params), out / "dataset.navg")
    _write_resolved_config(args, out, "dataset-gen")
    print(f"wrote {out / 'dataset.navg'} ({spec.count} images)")
    return 0


def cmd_train_gen(args):
    out = _out_dir(args)
    cfg = DistillConfig(steps=args.steps, batch=args.batch, lr=args.lr,
                        seed=args.seed, radius_mode=args.radius_mode)
    model, curve = distill_generator(cfg)
    save_checkpoint(model, out / "model.navg")
    _write_csv(out / "distill-loss.csv", ["step", "loss"],
               [(i, v) for i, v in enumerate(curve)])
    if curve:
        from .figures import save_curve_figure
        save_curve_figure(out / "distill-loss.png", range(len(curve)), curve,
                          "step", "per-pixel MSE", "generator distillation")
    _write_resolved_config(args, out, "train-gen")
    print(f"wrote {out / 'model.navg'} (held-out MSE {model.meta['final_mse']:.5f})")
    return 0


def _run_discovery(args, model, layer, out: Path, tag: str = ""):
    from .figures import save_bar_figure, save_loss_figure

    prefix = f"{tag}-" if tag else ""
    method = args.method
    if method == "svd":
        dirs = svd_baseline(model, layer)
        if dirs.magnitude_range is None:
            dirs.magnitude_range = calibrate_shift_range(model, dirs, seed=args.seed)
    elif method == "spectrum":
        cfg = _discovery_config(args)
        dirs, estimates = top_k_eigendirections(model, layer,
                                                make_metric(args.metric, args.seed), cfg)
        _write_csv(out / f"{prefix}eigenvalues.csv", ["rank", "estimate"],
                   list(enumerate(estimates)))
        save_bar_figure(out / f"{prefix}eigenvalues.png", estimates,
                        "rank", "eigenvalue estimate", f"{layer} displacement spectrum")
        dirs.magnitude_range = calibrate_shift_range(model, dirs, seed=args.seed)
    elif method == "opt":
        dirs, curve = discover_opt(model, layer, _discovery_config(args))
        _write_csv(out / f"{prefix}loss.csv", ["iteration", "total", "ce", "mae"], curve)
        save_loss_figure(out / f"{prefix}loss.png", curve, f"{layer} direction training")
    elif method == "hybrid":
        dirs, curve, estimates = discover_hybrid(
            model, layer, make_metric(args.metric, args.seed), _discovery_config(args))
        _write_csv(out / f"{prefix}loss.csv", ["iteration", "total", "ce", "mae"], curve)
        save_loss_figure(out / f"{prefix}loss.png", curve, f"{layer} hybrid training")
        _write_csv(out / f"{prefix}eigenvalues.csv", ["rank", "estimate"],
                   list(enumerate(estimates)))
    else:
        raise ValueError(f"unknown method {method!r}")
    return dirs


def cmd_discover(args):
    out = _out_dir(args)
    model = load_checkpoint(args.model)
    dirs = _run_discovery(args, model, args.layer, out)
    save_checkpoint(dirs, out / "directions.navg")
    _write_resolved_config(args, out, "discover")
    print(f"wrote {out / 'directions.navg'} "
          f"({dirs.count} directions, method={dirs.method}, T={dirs.magnitude_range:.4g})")
    return 0


def cmd_calibrate(args):
    out = _out_dir(args)
    model = load_checkpoint(args.model)
    dirs = load_checkpoint(args.dirs)
    t = calibrate_shift_range(model, dirs, band=(args.band_lo, args.band_hi),
                              seed=args.seed)
    dirs.magnitude_range = t
    save_checkpoint(dirs, out / "directions.navg")
    (out / "calibration.json").write_text(json.dumps(
        {"magnitude_range": t, "band": [args.band_lo, args.band_hi]}, indent=2) + "\n")
    _write_resolved_config(args, out, "calibrate")
    print(f"calibrated T = {t:.6g}")
    return 0


def cmd_strip(args):
    out = _out_dir(args)
    model = load_checkpoint(args.model)
    dirs = load_checkpoint(args.dirs)
    tmax = args.tmax if args.tmax is not None else dirs.magnitude_range
    if tmax is None:
        raise ValueError("direction set has no calibrated range; pass --tmax")
    spec = StripSpec(direction=args.direction, t_max=tmax, steps=args.steps,
                     seeds=tuple(args.seeds))
    grid_img, grid = render_strip(model, dirs, spec)
    write_png(out / "strip.png", grid_img)
    (out / "strip.json").write_text(json.dumps(
        {"direction": args.direction, "t_grid": list(grid),
         "seeds": list(spec.seeds), "label": dirs.labels[args.direction]},
        indent=2) + "\n")
    _write_resolved_config(args, out, "strip")
    print(f"wrote {out / 'strip.png'}")
    return 0


def cmd_heatmap(args):
    from .figures import save_heatmap_figure

    out = _out_dir(args)
    model = load_checkpoint(args.model)
    dirs = load_checkpoint(args.dirs)
    tmax = args.tmax if args.tmax is not None else dirs.magnitude_range
    if tmax is None:
        raise ValueError("direction set has no calibrated range; pass --tmax")
    grid = np.linspace(-tmax, tmax, args.t_steps)
    hm = pixel_diff_heatmap(model, dirs, args.direction, grid,
                            z_count=args.z_count, seed=args.seed)
    write_png(out / "heatmap.png", normalize_for_display(hm))
    save_heatmap_figure(out / "heatmap-fig.png", hm)
    _write_csv(out / "heatmap.csv", [f"col{j}" for j in range(hm.shape[1])],
               [list(row) for row in hm])
    _write_resolved_config(args, out, "heatmap")
    print(f"wrote {out / 'heatmap.png'} (total mass {hm.sum():.6g})")
    return 0


def cmd_ffd_curve(args):
    from .figures import save_curve_figure

    out = _out_dir(args)
    model = load_checkpoint(args.model)
    dirs = load_checkpoint(args.dirs)
    spec, images, _ = load_checkpoint(args.dataset)
    tmax = args.tmax if args.tmax is not None else dirs.magnitude_range
    if tmax is None:
        raise ValueError("direction set has no calibrated range; pass --tmax")
    metric = make_metric("random_features", args.seed)
    reference = fit_feature_stats(metric, images)
    grid = np.linspace(-tmax, tmax, args.points)
    curve = ffd_curve(model, dirs, args.direction, grid, metric, reference,
                      sample_count=args.samples, seed=args.seed)
    _write_csv(out / "ffd-curve.csv", ["t", "ffd"], curve)
    save_curve_figure(out / "ffd-curve.png", [r[0] for r in curve],
                      [r[1] for r in curve], "shift magnitude t",
                      "Fréchet feature distance",
                      f"direction {args.direction} ({dirs.labels[args.direction]})")
    save_checkpoint(metric, out / "feature-metric.navg")
    _write_resolved_config(args, out, "ffd-curve")
    print(f"wrote {out / 'ffd-curve.csv'}")
    return 0


def cmd_reproduce_latent(args):
    from .figures import save_trace_figure

    out = _out_dir(args)
    model = load_checkpoint(args.model)
    dirs = load_checkpoint(args.dirs)
    t = args.t if args.t is not None else dirs.magnitude_range
    if t is None:
        raise ValueError("direction set has no calibrated range; pass --t")
    cfg = ReproduceConfig(lr=args.lr, steps=args.steps, seed=args.seed)
    report = reproduce_latent(model, dirs, args.direction, t, args.space, cfg)
    (out / "reproduction.json").write_text(
        json.dumps(report.to_json(), indent=2) + "\n")
    _write_csv(out / "reproduction-trace.csv", ["step", "train_loss", "eval_residual"],
               report.trace)
    save_trace_figure(out / "reproduction.png", report.trace,
                      f"direction {args.direction} in {args.space}-space")
    _write_resolved_config(args, out, "reproduce-latent")
    print(f"baseline {report.baseline_residual:.6g} -> final {report.final_residual:.6g}")
    return 0


def cmd_depth_sweep(args):
    out = _out_dir(args)
    model = load_checkpoint(args.model)
    summary = []
    for layer in CONV_LAYERS:
        layer_dir = out / layer
        layer_dir.mkdir(parents=True, exist_ok=True)
        dirs = _run_discovery(args, model, layer, layer_dir, tag=layer)
        save_checkpoint(dirs, layer_dir / "directions.navg")
        spec = StripSpec(direction=0, t_max=dirs.magnitude_range, steps=args.steps,
                         seeds=tuple(args.seeds))
        grid_img, _ = render_strip(model, dirs, spec)
        write_png(layer_dir / "strip.png", grid_img)
        summary.append((layer, dirs.count, dirs.magnitude_range,
                        float(dirs.scores[0]) if dirs.scores is not None else ""))
    _write_csv(out / "depth-sweep.csv",
               ["layer", "directions", "magnitude_range", "top_score"], summary)
    _write_resolved_config(args, out, "depth-sweep")
    print(f"wrote per-layer directions and strips under {out}")
    return 0


def cmd_serve(args):
    from .service import serve

    model = load_checkpoint(args.model)
    dirs = load_checkpoint(args.dirs)
    print(f"serving {dirs.count} directions on http://127.0.0.1:{args.port}")
    serve(model, dirs, args.annotations, port=args.port, ui_dir=args.ui_dir)
    return 0


# ---------------------------------------------------------------------------
# argument plumbing


def _add_discovery_flags(p: argparse.ArgumentParser):
    p.add_argument("--k", type=int, default=8, help="number of directions")
    p.add_argument("--t", type=float, default=None,
                   help="magnitude range T (default: calibrate)")
    p.add_argument("--metric", choices=("pixel_mse", "random_features"),
                   default="pixel_mse")
    p.add_argument("--regression-weight", type=float, default=2.5e-3)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--power-iterations", type=int, default=10)
    p.add_argument("--hessian-batch", type=int, default=512)
    p.add_argument("--eigen-count", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paramnav",
        description="discover and inspect interpretable directions in the "
                    "parameter space of a toy image generator")
    parser.add_argument("--config", default=None,
                        help="key=value config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset-gen", help="render a procedural disc dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=4096)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--radius-mode", choices=("fixed", "free"), default="fixed")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_dataset_gen)

    p = sub.add_parser("train-gen", help="distill the toy generator")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--steps", type=int, default=20_000)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--radius-mode", choices=("fixed", "free"), default="fixed")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_gen)

    p = sub.add_parser("discover", help="run a direction-discovery method")
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--layer", default="L2")
    p.add_argument("--seed", type=int, default=0)
    _add_discovery_flags(p)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("calibrate", help="recalibrate a direction set's range")
    p.add_argument("--model", required=True)
    p.add_argument("--dirs", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--band-lo", type=float, default=0.01)
    p.add_argument("--band-hi", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("strip", help="render an interpolation strip")
    p.add_argument("--model", required=True)
    p.add_argument("--dirs", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--direction", type=int, default=0)
    p.add_argument("--tmax", type=float, default=None)
    p.add_argument("--steps", type=int, default=7)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.set_defaults(func=cmd_strip)

    p = sub.add_parser("heatmap", help="per-pixel locality heatmap")
    p.add_argument("--model", required=True)
    p.add_argument("--dirs", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--direction", type=int, default=0)
    p.add_argument("--tmax", type=float, default=None)
    p.add_argument("--t-steps", type=int, default=20)
    p.add_argument("--z-count", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("ffd-curve", help="Fréchet feature distance vs magnitude")
    p.add_argument("--model", required=True)
    p.add_argument("--dirs", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--direction", type=int, default=0)
    p.add_argument("--tmax", type=float, default=None)
    p.add_argument("--points", type=int, default=9)
    p.add_argument("--samples", type=int, default=4096)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ffd_curve)

    p = sub.add_parser("reproduce-latent", help="try to mimic a shift by a latent move")
    p.add_argument("--model", required=True)
    p.add_argument("--dirs", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--direction", type=int, default=0)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--space", choices=("z", "activation"), default="z")
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_reproduce_latent)

    p = sub.add_parser("depth-sweep", help="run one method on every conv layer")
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--steps", type=int, default=7, help="strip magnitude steps")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1])
    p.add_argument("--seed", type=int, default=0)
    _add_discovery_flags(p)
    p.set_defaults(func=cmd_depth_sweep)

    p = sub.add_parser("serve", help="run the inspection service")
    p.add_argument("--model", required=True)
    p.add_argument("--dirs", required=True)
    p.add_argument("--annotations", default="annotations.jsonl")
    p.add_argument("--port", type=int, default=7860)
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    # first pass only to find --config; its values become parser defaults
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
        overrides = _read_config_file(cfg_path)
        for action in parser._subparsers._group_actions[0].choices.values():
            known = {a.dest for a in action._actions}
            action.set_defaults(**{k: v for k, v in overrides.items() if k in known})
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:  # noqa: BLE001 - single-line machine-parsable failure
        sys.stderr.write("error: " + json.dumps(
            {"type": type(e).__name__, "message": str(e)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
