"""Command-line pipeline: segment, build-dataset, train, sensitivity,
optimize, simulate, compare.

Exit codes: 0 success, 1 internal error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import dataset, economics, growth, optimizer, segmentation, simulate, synth

USAGE_ERROR = 2
INTERNAL_ERROR = 1


class InputError(Exception):
    """User-correctable problem (missing file, bad value): exit code 2."""


def _require_file(path, what):
    if not os.path.isfile(path):
        raise InputError(f"{what} not found: {path}")
    return path


def _outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


# --- segment ---------------------------------------------------------------


def _load_image(path):
    from PIL import Image

    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def cmd_segment(args):
    from PIL import Image

    with open(_require_file(args.config, "segmentation config"), encoding="utf-8") as fh:
        cfg = json.load(fh)
    pot_centers = cfg["pot_centers"]
    scale = cfg["scale_cm_per_px"]
    k = cfg.get("k", segmentation.DEFAULT_CLUSTERS_PER_POT)
    floor = cfg.get("brightness_floor", segmentation.DEFAULT_BRIGHTNESS_FLOOR)

    annotations = segmentation.load_annotations(
        _require_file(args.annotations, "annotation file")
    )
    if not os.path.isdir(args.images):
        raise InputError(f"image directory not found: {args.images}")
    names = sorted(
        n for n in os.listdir(args.images) if n.lower().endswith((".png", ".ppm"))
    )
    if not names:
        raise InputError(f"no images in {args.images}")
    images = {}
    days = {}
    for name in names:
        _, day, _ = segmentation.parse_image_name(name)
        images[name] = _load_image(os.path.join(args.images, name))
        days[name] = day

    rule = segmentation.rule_from_annotations(images, annotations, pot_centers, k=k, seed=args.seed)

    out = _outdir(args.out)
    failures = []
    with open(os.path.join(out, "areas.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image", "pot", "area_cm2"])
        for name in names:
            try:
                areas, mask = segmentation.segment_image(
                    images[name],
                    pot_centers,
                    rule,
                    t_days=days[name],
                    scale_cm_per_px=scale,
                    k=k,
                    brightness_floor=floor,
                    seed=args.seed,
                )
            except Exception as exc:  # keep going; report per file at the end
                failures.append((name, str(exc)))
                continue
            for pot, area in enumerate(areas):
                writer.writerow([name, pot, repr(area)])
            if args.masks:
                Image.fromarray(mask.astype(np.uint8), mode="L").save(
                    os.path.join(out, f"mask_{name}")
                )
    print(f"segmented {len(names) - len(failures)}/{len(names)} images -> {out}/areas.csv")
    if failures:
        for name, msg in failures:
            print(f"FAILED {name}: {msg}", file=sys.stderr)
        raise InputError(f"{len(failures)} image(s) failed")


# --- build-dataset / train -------------------------------------------------


_SAMPLE_COLUMNS = ("red_ppfd", "blue_ppfd", "ec", "ph", "t_days", "delta_t_hours", "leaf_area_start", "leaf_area_end")


def _write_samples(samples, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_SAMPLE_COLUMNS)
        for s in samples:
            f = s.features
            writer.writerow(
                [
                    repr(f.red_ppfd),
                    repr(f.blue_ppfd),
                    repr(f.ec),
                    repr(f.ph),
                    repr(f.t_days),
                    repr(s.delta_t_hours),
                    repr(s.leaf_area_start),
                    repr(s.leaf_area_end),
                ]
            )


def _read_samples(path):
    samples = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            samples.append(
                growth.GrowthSample(
                    features=growth.GrowthFeatures(
                        red_ppfd=float(row["red_ppfd"]),
                        blue_ppfd=float(row["blue_ppfd"]),
                        ec=float(row["ec"]),
                        ph=float(row["ph"]),
                        t_days=float(row["t_days"]),
                    ),
                    delta_t_hours=float(row["delta_t_hours"]),
                    leaf_area_start=float(row["leaf_area_start"]),
                    leaf_area_end=float(row["leaf_area_end"]),
                )
            )
    return samples


def cmd_build_dataset(args):
    if not os.path.isdir(args.runs):
        raise InputError(f"runs directory not found: {args.runs}")
    runs = dataset.load_runs(args.runs)
    train, test = dataset.split_train_test(runs, delta_t_hours=args.delta_t)
    out = _outdir(args.out)
    _write_samples(train, os.path.join(out, "train.csv"))
    _write_samples(test, os.path.join(out, "test.csv"))
    print(f"wrote {len(train)} training and {len(test)} test samples -> {out}")


def _training_data(args):
    if args.synthetic:
        return synth.train_test_samples(args.synthetic, max(args.synthetic // 5, 1), seed=args.seed)
    if args.samples:
        return (
            _read_samples(_require_file(os.path.join(args.samples, "train.csv"), "train.csv")),
            _read_samples(_require_file(os.path.join(args.samples, "test.csv"), "test.csv")),
        )
    if args.runs:
        if not os.path.isdir(args.runs):
            raise InputError(f"runs directory not found: {args.runs}")
        return dataset.split_train_test(dataset.load_runs(args.runs), delta_t_hours=args.delta_t)
    raise InputError("provide --runs, --samples or --synthetic")


def cmd_train(args):
    train, test = _training_data(args)
    if not train:
        raise InputError("empty training set")
    hyper = growth.NeuralHyper(
        hidden=tuple(args.hidden), dropout=args.dropout, epochs=args.epochs,
        learning_rate=args.learning_rate,
    )
    linear = growth.fit_linear(train)
    neural = growth.fit_neural(train, hyper, seed=args.seed)
    out = _outdir(args.out)
    growth.save_model(linear, os.path.join(out, "model_linear.json"))
    growth.save_model(neural, os.path.join(out, "model_neural.json"))

    print(f"{'predicted vs actual leaf area':<32}{'linear':>14}{'neural':>14}")
    for split, data in (("training", train), ("testing", test)):
        if not data:
            continue
        ml = growth.evaluate(linear, data)
        mn = growth.evaluate(neural, data)
        print(f"{split + ' MSE':<32}{ml.mse:>14.4f}{mn.mse:>14.4f}")
        print(f"{split + ' R2':<32}{ml.r_squared:>14.4f}{mn.r_squared:>14.4f}")
    print(f"models -> {out}")


# --- sensitivity -----------------------------------------------------------


def cmd_sensitivity(args):
    model = growth.load_model(_require_file(args.model, "model file"))
    out = _outdir(args.out)
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, len(args.t_days), figsize=(5 * len(args.t_days), 4), squeeze=False)
    for ax, t in zip(axes[0], args.t_days):
        grid = growth.sensitivity_grid(
            model, t_days=t, ec=args.ec, ph=args.ph,
            red_steps=args.red_steps, blue_steps=args.blue_steps,
        )
        with open(os.path.join(out, f"grid_day{t:g}.csv"), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["red_ppfd"] + [repr(b) for b in grid.blue_values])
            for i, red in enumerate(grid.red_values):
                writer.writerow([repr(red)] + [repr(v) for v in grid.delta_area[i]])
        im = ax.pcolormesh(grid.blue_values, grid.red_values, grid.delta_area, shading="nearest")
        ax.set_xlabel("blue PPFD (umol/m2s)")
        ax.set_ylabel("red PPFD (umol/m2s)")
        ax.set_title(f"day {t:g} (argmax red={grid.argmax[0]:g}, blue={grid.argmax[1]:g})")
        fig.colorbar(im, ax=ax, label="leaf-area increase (cm2/h)")
        print(f"day {t:g}: argmax red={grid.argmax[0]:g} blue={grid.argmax[1]:g}")
    fig.tight_layout()
    fig.savefig(os.path.join(out, "sensitivity.png"), dpi=120)
    print(f"grids -> {out}")


# --- optimize / simulate / compare ----------------------------------------


def _context(args, model):
    return optimizer.FitnessContext(
        growth_model=model,
        power_model=economics.load_power_model(args.power) if args.power else economics.default_power_model(),
        tariff_plan=economics.load_tariff(args.tariff) if args.tariff else economics.default_tariff(),
        price_per_area=args.price,
        plants_per_panel=args.plants,
        min_final_area=args.min_area,
        initial_leaf_area=args.initial_area,
        ec=args.ec,
        ph=args.ph,
        horizon=args.horizon,
    )


def _summarize(result, label, path=None):
    doc = {
        "label": label,
        "final_leaf_area_cm2": result.final_leaf_area,
        "electricity_cost_cents": result.electricity_cost,
        "revenue_cents": result.revenue,
        "profit_cents": result.profit,
        "extrapolated": result.extrapolated,
    }
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    return doc


def _print_comparison(proposed, baseline):
    report = simulate.compare(proposed, baseline)
    print(
        f"{'':<12}{'leaf area (cm2)':>18}{'elec. cost (cents)':>20}{'profit (cents)':>16}"
    )
    print(
        f"{'baseline':<12}{baseline.final_leaf_area:>18.4f}{baseline.electricity_cost:>20.4f}{baseline.profit:>16.4f}"
    )
    print(
        f"{'proposed':<12}{proposed.final_leaf_area:>18.4f}{proposed.electricity_cost:>20.4f}{proposed.profit:>16.4f}"
    )
    print(
        f"{'% improve':<12}{report.pct_improvement_leaf_area:>18.4f}{report.pct_improvement_cost:>20.4f}"
        + (f"{report.pct_improvement_profit:>16.4f}" if baseline.profit != 0 else f"{'-':>16}")
    )


def cmd_optimize(args):
    model = growth.load_model(_require_file(args.model, "model file"))
    ctx = _context(args, model)
    params = optimizer.GaParams(
        population_size=args.population,
        parent_count=args.parents,
        crossover_points=args.crossover_points,
        mutations_per_child=args.mutations,
        generations=args.generations,
        seed=args.seed,
    )
    best, trace = optimizer.evolve(ctx, params)
    schedule = optimizer.chromosome_to_schedule(best)

    out = _outdir(args.out)
    economics.save_schedule_csv(schedule, os.path.join(out, "schedule.csv"))
    with open(os.path.join(out, "trace.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["generation", "best_fitness", "mean_fitness"])
        for g, (bf, mf) in enumerate(zip(trace.best_fitness, trace.mean_fitness)):
            writer.writerow([g, repr(bf), repr(mf)])

    kwargs = dict(
        power_model=ctx.power_model, tariff=ctx.tariff_plan,
        initial_area=ctx.initial_leaf_area, ec=ctx.ec, ph=ctx.ph,
        price_per_area=ctx.price_per_area, plants_per_panel=ctx.plants_per_panel,
    )
    proposed = simulate.evaluate_schedule(model, schedule, **kwargs)
    baseline = simulate.evaluate_schedule(model, simulate.run_baseline(ctx.horizon), **kwargs)
    _summarize(proposed, "proposed", os.path.join(out, "summary.json"))
    print(f"best fitness: {trace.best_fitness[-1]!r}")
    _print_comparison(proposed, baseline)
    print(f"schedule -> {out}/schedule.csv")


def cmd_simulate(args):
    model = growth.load_model(_require_file(args.model, "model file"))
    ctx = _context(args, model)
    if args.schedule:
        schedule = economics.load_schedule_csv(_require_file(args.schedule, "schedule file"))
    else:
        schedule = simulate.run_baseline(ctx.horizon)
    kwargs = dict(
        power_model=ctx.power_model, tariff=ctx.tariff_plan,
        initial_area=ctx.initial_leaf_area, ec=ctx.ec, ph=ctx.ph,
        price_per_area=ctx.price_per_area, plants_per_panel=ctx.plants_per_panel,
    )
    result = simulate.evaluate_schedule(model, schedule, **kwargs)

    out = _outdir(args.out)
    rates = ctx.tariff_plan.hourly_rates()
    with open(os.path.join(out, "trajectory.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["hour_index", "red_ppfd", "blue_ppfd", "leaf_area", "hourly_cost_cents"])
        for i, (r, b) in enumerate(schedule.levels):
            cost = economics.power_draw(ctx.power_model, r, b) / 1000.0 * rates[i % 24]
            writer.writerow(
                [
                    i,
                    repr(r * economics.RED_PPFD_PER_LEVEL),
                    repr(b * economics.BLUE_PPFD_PER_LEVEL),
                    repr(float(result.trajectory[i + 1])),
                    repr(cost),
                ]
            )
    doc = _summarize(result, args.label, os.path.join(out, "summary.json"))
    print(json.dumps(doc, indent=1))
    if args.against_baseline:
        baseline = simulate.evaluate_schedule(model, simulate.run_baseline(ctx.horizon), **kwargs)
        _print_comparison(result, baseline)


def _load_summary(path):
    with open(_require_file(path, "summary file"), encoding="utf-8") as fh:
        doc = json.load(fh)
    result = simulate.SimulationResult(
        trajectory=np.array([]),
        final_leaf_area=doc["final_leaf_area_cm2"],
        electricity_cost=doc["electricity_cost_cents"],
        revenue=doc["revenue_cents"],
        profit=doc["profit_cents"],
    )
    return result


def cmd_compare(args):
    _print_comparison(_load_summary(args.proposed), _load_summary(args.baseline))


# --- argument parsing ------------------------------------------------------


def _add_context_flags(p):
    p.add_argument("--tariff", help="tariff plan JSON (default: built-in day/night plan)")
    p.add_argument("--power", help="power model JSON (default: calibrated panel)")
    p.add_argument("--price", "-P", type=float, default=0.0, help="cents per cm2 per plant")
    p.add_argument("--plants", "-n", type=int, default=20, help="plants per panel")
    p.add_argument("--min-area", type=float, default=400.0, help="required final leaf area (cm2)")
    p.add_argument("--initial-area", "--L0", type=float, default=5.0, help="leaf area at transplant (cm2)")
    p.add_argument("--ec", type=float, default=1800.0)
    p.add_argument("--ph", type=float, default=6.5)
    p.add_argument("--horizon", type=int, default=economics.HORIZON_HOURS, help="schedule length in hours")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="growlight",
        description="Grow-light schedule optimization under time-of-use electricity pricing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="batch leaf-area extraction from images")
    p.add_argument("--images", required=True, help="directory of <experiment>_<day>_<hour>.png frames")
    p.add_argument("--config", required=True, help="JSON with pot_centers, scale_cm_per_px, k, brightness_floor")
    p.add_argument("--annotations", required=True, help="JSON of manually labeled plant clusters")
    p.add_argument("--masks", action="store_true", help="also write label-mask PNGs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("build-dataset", help="window sensor runs into training samples")
    p.add_argument("--runs", required=True, help="directory of run files")
    p.add_argument("--delta-t", type=float, default=24.0, help="window length in hours")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train", help="fit linear and neural growth models")
    p.add_argument("--runs", help="directory of run files")
    p.add_argument("--samples", help="directory with train.csv/test.csv from build-dataset")
    p.add_argument("--synthetic", type=int, metavar="N", help="train on N generated samples instead")
    p.add_argument("--delta-t", type=float, default=24.0)
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--hidden", type=int, nargs=2, default=[128, 64])
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sensitivity", help="growth-rate heatmap over the lighting grid")
    p.add_argument("--model", required=True)
    p.add_argument("--t-days", type=float, nargs="+", default=[1.0, 5.0, 10.0])
    p.add_argument("--ec", type=float, default=1800.0)
    p.add_argument("--ph", type=float, default=6.5)
    p.add_argument("--red-steps", type=int, default=21)
    p.add_argument("--blue-steps", type=int, default=11)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("optimize", help="search lighting schedules with the GA")
    p.add_argument("--model", required=True)
    _add_context_flags(p)
    p.add_argument("--population", type=int, default=100)
    p.add_argument("--parents", type=int, default=50)
    p.add_argument("--crossover-points", type=int, default=6)
    p.add_argument("--mutations", type=int, default=20)
    p.add_argument("--generations", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", help="roll a schedule through the growth model")
    p.add_argument("--model", required=True)
    p.add_argument("--schedule", help="schedule CSV (omit for the always-on baseline)")
    p.add_argument("--label", default="simulation")
    p.add_argument("--against-baseline", action="store_true", help="also print the baseline comparison")
    _add_context_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="percentage improvements between two summaries")
    p.add_argument("--proposed", required=True)
    p.add_argument("--baseline", required=True)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (
        FileNotFoundError,
        dataset.ParseError,
        growth.ConfigurationError,
        growth.FitError,
        economics.EncodingError,
        economics.TariffError,
        optimizer.EncodingError,
        segmentation.EstimationError,
        ValueError,
        KeyError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:  # pragma: no cover - internal failures
        print(f"internal error: {exc}", file=sys.stderr)
        return INTERNAL_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
