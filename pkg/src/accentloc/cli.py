"""Batch command line: ``accentloc {aggregate,score,simulate,fit-decay}``.

Exit codes: 0 success, 2 input schema/parse/geometry error, 3 semantic
mismatch, 4 insufficient data.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io
from .density import DEFAULT_RESOLUTION, DEFAULT_SUBCELLS, aggregate, mean
from .errors import (
    AccentLocError,
    DegenerateDensityError,
    DomainError,
    FamilyMismatchError,
    InsufficientDataError,
    SchemaError,
)
from .metrics import ScoreConfig, Trial, score_run
from .sim import (
    MINUTES_PER_DAY,
    FeatureMap,
    SimConfig,
    baseline_locator,
    build_population,
    fit_decay,
    predict_total,
    simulate_speakers,
)
from .spatial import DistanceFunction, grid_tessellation

EXIT_OK, EXIT_SCHEMA, EXIT_MISMATCH, EXIT_DATA = 0, 2, 3, 4


class UsageError(AccentLocError):
    pass


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, InsufficientDataError):
        return EXIT_DATA
    if isinstance(exc, (FamilyMismatchError, DegenerateDensityError, DomainError)):
        return EXIT_MISMATCH
    return EXIT_SCHEMA


def _grid(text: str) -> tuple[int, int]:
    try:
        nx, ny = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected <nx>x<ny>, got {text!r}") from None
    if nx < 1 or ny < 1:
        raise argparse.ArgumentTypeError("grid sizes must be positive")
    return nx, ny


def _input(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {path}")
    return p


def _emit(obj, out: str | None) -> None:
    text = io.dumps(obj) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _inputs(**paths) -> dict:
    return {k: {"path": str(p), "sha256": io.file_sha256(p)} for k, p in paths.items() if p is not None}


# --------------------------------------------------------------------------


def cmd_aggregate(args) -> None:
    dpath, tpath = _input(args.density), _input(args.tessellation)
    d = io.read_density(dpath)
    tess = io.read_tessellation(tpath, args.ref_lat)
    dist = aggregate(d, tess, renormalize=args.renormalize, subcells=args.subcells, resolution=args.grid)
    out = io.discrete_to_json(dist)
    out["inputs"] = _inputs(density=dpath, tessellation=tpath)
    _emit(out, args.out)


def cmd_score(args) -> None:
    tpath = _input(args.trials)
    trials = io.read_trials(tpath)
    tess_path = _input(args.tess) if args.tess else None
    prior_path = _input(args.prior) if args.prior else None
    cfg = ScoreConfig(
        distance=DistanceFunction.parse(args.distance, lambda p: io.read_density(_input(p))),
        floor=args.floor,
        method=args.method,
        mc_samples=args.samples,
        seed=args.seed,
        tessellation=io.read_tessellation(tess_path, args.ref_lat) if tess_path else None,
        prior=io.read_member(prior_path) if prior_path else None,
        resolution=args.grid,
        subcells=args.subcells,
    )
    report = score_run(trials, cfg)
    report.inputs = _inputs(trials=tpath, tessellation=tess_path, prior=prior_path)
    _emit(report.to_dict(), args.out)


def _sim_tessellation(tess_cfg, pop, config_dir: Path):
    if tess_cfg is None:
        return None
    if isinstance(tess_cfg, str):
        return io.read_tessellation(config_dir / tess_cfg)
    if isinstance(tess_cfg, dict) and "grid" in tess_cfg:
        nx, ny = (int(v) for v in tess_cfg["grid"])
        return grid_tessellation(tess_cfg.get("bbox", pop.bbox), nx, ny)
    raise SchemaError("tessellation must be a path or {'grid': [nx, ny], 'bbox'?: [...]}")


def cmd_simulate(args) -> None:
    cpath = _input(args.config)
    raw = io.read_json(cpath)
    if args.seed is not None:
        raw = {**raw, "seed": args.seed}
    cfg = SimConfig.from_dict(raw)
    if not cfg.sigma_f > 0:
        raise SchemaError("simulate needs sigma_f > 0 (the baseline locator divides by it)")
    if args.grid is not None:
        cfg.locator_grid = args.grid
    pop = build_population(cfg.cities)
    fmap = FeatureMap(cfg.wavelengths)
    tess = _sim_tessellation(cfg.tessellation, pop, cpath.parent)
    speakers = simulate_speakers(pop, cfg.n_speakers, cfg.move_prob, cfg.seed, cfg.sigma_f, fmap)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prior = pop.prior
    density_trials, point_trials, region_trials = [], [], []
    prior_regions = aggregate(prior, tess) if tess is not None else None
    for s in speakers:
        post = baseline_locator(s.features, pop, cfg.sigma_f, fmap, cfg.locator_grid)
        density_trials.append(Trial(s.speaker_id, s.true_origin, post))
        point_trials.append(Trial(s.speaker_id, mean(s.true_origin), mean(post)))
        if tess is not None:
            region_trials.append(Trial(s.speaker_id, aggregate(s.true_origin, tess), aggregate(post, tess)))

    files = {
        "cohort": "cohort.jsonl",
        "prior": "prior.json",
        "trials": "trials.jsonl",
        "trials_points": "trials_points.jsonl",
    }
    io.write_jsonl(out / files["cohort"], (io.speaker_to_json(s) for s in speakers))
    io.write_json(out / files["prior"], io.density_to_json(prior))
    io.write_jsonl(out / files["trials"], (io.trial_to_json(t) for t in density_trials))
    io.write_jsonl(out / files["trials_points"], (io.trial_to_json(t) for t in point_trials))
    if tess is not None:
        files.update(
            tessellation="tessellation.geojson",
            trials_regions="trials_regions.jsonl",
            prior_regions="prior_regions.json",
        )
        io.write_json(out / files["tessellation"], io.tessellation_to_geojson(tess))
        io.write_jsonl(out / files["trials_regions"], (io.trial_to_json(t) for t in region_trials))
        io.write_json(out / files["prior_regions"], io.discrete_to_json(prior_regions))
    manifest = {
        "config": {
            "n_speakers": cfg.n_speakers,
            "move_prob": cfg.move_prob,
            "sigma_f": cfg.sigma_f,
            "seed": cfg.seed,
            "locator_grid": list(cfg.locator_grid),
            "wavelengths": list(cfg.wavelengths),
            "n_cities": len(pop.cities),
        },
        "inputs": _inputs(config=cpath),
        "outputs": {k: {"path": v, "sha256": io.file_sha256(out / v)} for k, v in sorted(files.items())},
    }
    io.write_json(out / "manifest.json", manifest)
    _emit(manifest, None)


def cmd_fit_decay(args) -> None:
    spath = _input(args.series)
    series = io.series_from_json(io.read_json(spath), str(spath))
    fit = fit_decay(series)
    out = {
        "R0_per_day": fit.R0,
        "R0_per_minute": fit.R0 / args.minutes_per_day,
        "d": fit.d,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "slope_stderr": fit.slope_stderr,
        "n_points": fit.n_points,
        "minutes_per_day": args.minutes_per_day,
        "inputs": _inputs(series=spath),
    }
    try:
        out["total_recordings"] = predict_total(fit.R0 / args.minutes_per_day, fit.d, args.minutes_per_day).as_dict()
    except DomainError as exc:
        out["total_recordings"] = {"error": str(exc)}
    _emit(out, args.out)


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="accentloc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid_default=DEFAULT_RESOLUTION):
        sp.add_argument("--grid", type=_grid, default=grid_default, help="raster resolution <nx>x<ny>")
        sp.add_argument("--out", help="output path (default: stdout)")

    a = sub.add_parser("aggregate", help="integrate a density over a tessellation")
    a.add_argument("density")
    a.add_argument("tessellation")
    a.add_argument("--renormalize", action="store_true", help="fold outside mass into the regions")
    a.add_argument("--subcells", type=int, default=DEFAULT_SUBCELLS)
    a.add_argument("--ref-lat", type=float, default=None, help="reference latitude for wgs84 tessellations")
    common(a)
    a.set_defaults(func=cmd_aggregate)

    s = sub.add_parser("score", help="score a JSON-lines trial file")
    s.add_argument("trials")
    s.add_argument("--distance", default="euclidean", help="euclidean | saturated:<tau> | population:<file>:<samples>")
    s.add_argument("--floor", type=float, default=None, help="probability floor for cross entropy")
    s.add_argument("--seed", type=int, default=None, help="required for monte carlo estimates")
    s.add_argument("--method", choices=("auto", "quadrature", "monte_carlo"), default="auto")
    s.add_argument("--samples", type=int, default=100_000, help="monte carlo pairs per trial")
    s.add_argument("--tess", help="tessellation for region metrics of density trials")
    s.add_argument("--prior", help="prior density or region distribution used as a baseline hypothesis")
    s.add_argument("--subcells", type=int, default=DEFAULT_SUBCELLS)
    s.add_argument("--ref-lat", type=float, default=None)
    common(s)
    s.set_defaults(func=cmd_score)

    m = sub.add_parser("simulate", help="simulate a cohort and write ready-to-score trials")
    m.add_argument("config")
    m.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    m.add_argument("--grid", type=_grid, default=None, help="locator grid <nx>x<ny> (default from config)")
    m.add_argument("--out", required=True, help="output directory")
    m.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit-decay", help="fit an exponential decay to daily counts")
    f.add_argument("series")
    f.add_argument("--minutes-per-day", type=float, default=MINUTES_PER_DAY)
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit_decay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except AccentLocError as exc:
        print(f"accentloc {args.command}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"accentloc {args.command}: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
