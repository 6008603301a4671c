"""Command-line front end: scene generation, correction, unmixing,
evaluation, the ablation experiment, and the error-vs-std sweep.

Exit codes: 0 success, 1 runtime/algorithm failure, 2 usage error.
Every seeded command is deterministic: identical flags produce
bit-identical artifacts. Each run records a JSON manifest naming its
inputs and outputs by 64-bit FNV-1a content hash.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

_BLAS_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _peek_threads(argv: list[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--threads" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--threads="):
            return tok.split("=", 1)[1]
    return os.environ.get("HSI_SCALE_THREADS")


def _apply_thread_cap(argv: list[str]) -> int | None:
    """Best-effort worker cap: BLAS pools honor these only if set before
    they load, so HSI_SCALE_THREADS in the environment is the reliable
    route; the flag is still recorded in the manifest."""
    value = _peek_threads(argv)
    if value is None:
        return None
    try:
        count = int(value)
    except ValueError:
        return None
    for var in _BLAS_ENV_VARS:
        os.environ.setdefault(var, str(count))
    return count


def fnv1a64(data: bytes) -> str:
    """Canonical 64-bit FNV-1a over raw bytes, as a hex digest."""
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


def _hash_file(path) -> str:
    return fnv1a64(Path(path).read_bytes())


class _ManifestWriter:
    """Collects run metadata and writes exactly one manifest per run."""

    def __init__(self, command: str, config: dict, seed: int | None, threads: int | None):
        from . import __version__

        self.started = time.perf_counter()
        self.payload = {
            "command": command,
            "version": __version__,
            "seed": seed,
            "threads": threads,
            "config": config,
            "inputs": {},
            "outputs": {},
        }

    def add_input(self, path) -> None:
        self.payload["inputs"][str(path)] = _hash_file(path)

    def add_output(self, path) -> None:
        self.payload["outputs"][str(path)] = _hash_file(path)

    def write(self, path) -> None:
        self.payload["duration_seconds"] = time.perf_counter() - self.started
        Path(path).write_text(json.dumps(self.payload, indent=2) + "\n")


def _config_dict(args: argparse.Namespace) -> dict:
    skip = {"func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _usage_error(message: str) -> int:
    print(f"usage error: {message}", file=sys.stderr)
    return 2


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    from .synth import SynthConfig, gen_scene, write_scene

    config = SynthConfig(
        height=args.height,
        width=args.width,
        bands=args.bands,
        endmembers=args.endmembers,
        field_kind=args.kind,
        correlation_length=args.corr_len,
        scale_std=args.scale_std,
        scale_correlation_length=args.scale_corr_len,
        seed=args.seed,
        snr_db=args.snr_db,
    )
    manifest = _ManifestWriter("synth", _config_dict(args), args.seed, args.threads)
    scene = gen_scene(config)
    out = Path(args.out)
    write_scene(scene, config, out)
    for name in ("clean.hsic", "scaled.hsic", "endmembers.csv", "abundances.csv", "mu_true.f32", "config.json"):
        manifest.add_output(out / name)
    manifest.write(args.manifest or out / "manifest.json")
    return 0


# -------------------------------------------------------------- correct

def cmd_correct(args) -> int:
    from .correct import GdConfig, PsoConfig, derive_seeds, run_correction
    from .fileio import read_cube, save_vector, write_cube

    manifest = _ManifestWriter("correct", _config_dict(args), args.seed, args.threads)
    cube = read_cube(args.input)
    manifest.add_input(args.input)
    if args.endmembers > min(cube.bands, cube.n_pixels):
        return _usage_error(
            f"--endmembers {args.endmembers} exceeds min(bands={cube.bands}, "
            f"pixels={cube.n_pixels})"
        )

    _, seed_pso = derive_seeds(args.seed)
    pso = PsoConfig(
        swarm_size=max(64, args.candidates), iterations=args.pso_iters, seed=seed_pso
    )
    gd = GdConfig(max_iters=args.gd_iters)
    corrected, report = run_correction(
        cube,
        args.endmembers,
        pso_config=pso,
        gd_config=gd,
        candidate_count=args.candidates,
        rng_seed=args.seed,
    )

    write_cube(corrected, args.out)
    save_vector(report.mu_hat.values, args.mu_out)
    report_path = args.report or f"{args.out}.report.json"
    Path(report_path).write_text(json.dumps(report.to_json_dict(), indent=2) + "\n")
    for path in (args.out, args.mu_out, report_path):
        manifest.add_output(path)
    manifest.write(args.manifest or f"{args.out}.manifest.json")
    return 0


# ---------------------------------------------------------------- unmix

def cmd_unmix(args) -> int:
    from .fileio import read_cube, read_matrix_csv, save_vector, write_matrix_csv
    from .reduction import svd_reduce
    from .unmix import nfindr_extract, unmix

    if (args.endmember_file is None) == (args.extract is None):
        return _usage_error("provide exactly one of --endmember-file or --extract nfindr")

    manifest = _ManifestWriter("unmix", _config_dict(args), args.seed, args.threads)
    cube = read_cube(args.input)
    manifest.add_input(args.input)
    pixels = cube.pixel_matrix()

    if args.endmember_file is not None:
        endmembers = read_matrix_csv(args.endmember_file)
        manifest.add_input(args.endmember_file)
    else:
        reduced = svd_reduce(cube, args.endmembers)
        endmembers = nfindr_extract(reduced, args.endmembers, seed=args.seed)

    result = unmix(pixels, endmembers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(result.endmembers, out / "endmembers.csv")
    write_matrix_csv(result.abundances, out / "abundances.csv")
    save_vector(result.per_pixel_residual, out / "residuals.f32")
    for name in ("endmembers.csv", "abundances.csv", "residuals.f32"):
        manifest.add_output(out / name)
    manifest.write(args.manifest or out / "manifest.json")
    return 0


# ----------------------------------------------------------------- eval

def cmd_eval(args) -> int:
    from .correct import ScalingField
    from .fileio import load_vector, read_cube, read_matrix_csv
    from .metrics import (
        EvalReport,
        abundance_rmse,
        bound_check,
        match_endmembers,
        rmse_mu,
        sad_error,
    )

    if args.mode == "mu":
        pred = ScalingField.from_raw(load_vector(args.pred))
        truth = ScalingField.from_raw(load_vector(args.truth))
        clean = read_cube(args.clean_cube) if args.clean_cube else None
        var = float(truth.values.var())
        report = EvalReport(
            rmse_mu=rmse_mu(pred, truth),
            bound_rhs=bound_check(truth, len(truth), clean),
            n_pixels=len(truth),
            sigma_max=var,
            sigma_min=var,
        )
    elif args.mode == "abundance":
        pred = read_matrix_csv(args.pred)
        truth = read_matrix_csv(args.truth)
        perm = None
        if args.pred_endmembers and args.truth_endmembers:
            perm = match_endmembers(
                read_matrix_csv(args.truth_endmembers), read_matrix_csv(args.pred_endmembers)
            )
        total, per = abundance_rmse(truth, pred, perm)
        report = EvalReport(
            abundance_rmse_total=total,
            abundance_rmse_per_endmember=tuple(float(v) for v in per),
            n_pixels=truth.shape[1],
        )
    else:  # endmembers
        mean, per = sad_error(read_matrix_csv(args.truth), read_matrix_csv(args.pred))
        report = EvalReport(sad_mean=mean, sad_per_endmember=tuple(float(v) for v in per))

    print(report.to_json())
    if args.csv:
        report.write_csv(args.csv)
    if args.manifest:
        manifest = _ManifestWriter("eval", _config_dict(args), None, args.threads)
        for path in (args.pred, args.truth):
            manifest.add_input(path)
        manifest.write(args.manifest)
    return 0


# --------------------------------------------------------------- ablate

def cmd_ablate(args) -> int:
    import numpy as np

    from .correct import (
        GdConfig,
        HyperplaneModel,
        PsoConfig,
        ScalingField,
        candidate_normals,
        denom_floor_for,
        estimate_scaling,
        gd_refine,
        mean_point,
        pso_minimize,
    )
    from .fileio import load_vector, read_cube
    from .metrics import rmse_mu
    from .reduction import svd_reduce

    manifest = _ManifestWriter("ablate", _config_dict(args), args.seed, args.threads)
    cube = read_cube(args.input)
    truth = ScalingField.from_raw(load_vector(args.truth_mu))
    manifest.add_input(args.input)
    manifest.add_input(args.truth_mu)
    if args.endmembers > min(cube.bands, cube.n_pixels):
        return _usage_error("--endmembers exceeds min(bands, pixels)")

    reduced = svd_reduce(cube, args.endmembers)
    c_star = mean_point(reduced)
    floor = denom_floor_for(reduced.pixels)
    gd = GdConfig(max_iters=args.gd_iters)
    seeds = np.random.SeedSequence(args.seed).spawn(4)
    seed_ints = [int(s.generate_state(1)[0]) for s in seeds]

    def score(normal) -> float:
        model = HyperplaneModel.build(c_star, normal, floor)
        return rmse_mu(estimate_scaling(reduced, model), truth)

    def random_units(rng, count):
        vecs = rng.standard_normal((count, reduced.k))
        return [v / np.linalg.norm(v) for v in vecs]

    # (a) gradient refinement alone from one random direction
    rng_a = np.random.default_rng(seed_ints[0])
    n_a = gd_refine(random_units(rng_a, 1)[0], reduced, c_star, gd)

    # (b) swarm from random directions, then gradient refinement; without
    # candidates the swarm stays at its base size
    pso_b = PsoConfig(iterations=args.pso_iters, seed=seed_ints[2])
    rng_b = np.random.default_rng(seed_ints[1])
    n_b = gd_refine(
        pso_minimize(reduced, c_star, random_units(rng_b, pso_b.swarm_size), pso_b),
        reduced,
        c_star,
        gd,
    )

    # (c) candidate-seeded swarm without refinement; (d) full pipeline
    candidates = candidate_normals(reduced, args.candidates, seed_ints[3])
    pso_cd = PsoConfig(
        swarm_size=max(64, args.candidates), iterations=args.pso_iters, seed=seed_ints[2]
    )
    n_c = pso_minimize(reduced, c_star, candidates, pso_cd)
    n_d = gd_refine(n_c, reduced, c_star, gd)

    results = {
        "gd_only": score(n_a),
        "pso_random_gd": score(n_b),
        "candidates_pso": score(n_c),
        "full": score(n_d),
        "seed": args.seed,
    }
    Path(args.out).write_text(json.dumps(results, indent=2) + "\n")
    manifest.add_output(args.out)
    if args.plot_data:
        with open(args.plot_data, "w") as fh:
            fh.write("variant,rmse_mu\n")
            for name in ("gd_only", "pso_random_gd", "candidates_pso", "full"):
                fh.write(f"{name},{results[name]!r}\n")
        manifest.add_output(args.plot_data)
    manifest.write(args.manifest or f"{args.out}.manifest.json")
    return 0


# ---------------------------------------------------------------- sweep

def cmd_sweep(args) -> int:
    import numpy as np

    from .correct import GdConfig, PsoConfig, derive_seeds, run_correction
    from .metrics import rmse_mu
    from .synth import SynthConfig, gen_scene

    try:
        stds = [float(tok) for tok in args.stds.split(",") if tok.strip()]
    except ValueError:
        return _usage_error(f"cannot parse --stds {args.stds!r}")
    if not stds:
        return _usage_error("--stds must list at least one value")
    if args.seeds < 1:
        return _usage_error("--seeds must be >= 1")

    manifest = _ManifestWriter("sweep", _config_dict(args), args.seed, args.threads)
    rows = []
    per_run = []
    # scene seeds depend on the replicate only, not on the std: each
    # replicate is the same base scene rescaled, so its error grows
    # smoothly with the std instead of bouncing with scene-to-scene luck
    for std in stds:
        errors = []
        for j in range(args.seeds):
            scene_seed = int(np.random.SeedSequence([args.seed, j]).generate_state(1)[0])
            config = SynthConfig(
                height=args.height,
                width=args.width,
                bands=args.bands,
                endmembers=args.endmembers,
                field_kind=args.kind,
                correlation_length=args.corr_len,
                scale_std=std,
                scale_correlation_length=args.scale_corr_len,
                seed=scene_seed,
            )
            scene = gen_scene(config)
            run_seed = int(np.random.SeedSequence([args.seed, j, 1]).generate_state(1)[0])
            _, seed_pso = derive_seeds(run_seed)
            pso = PsoConfig(
                swarm_size=max(64, args.candidates), iterations=args.pso_iters, seed=seed_pso
            )
            _, report = run_correction(
                scene.scaled_cube,
                args.endmembers,
                pso_config=pso,
                gd_config=GdConfig(),
                candidate_count=args.candidates,
                rng_seed=run_seed,
            )
            err = rmse_mu(report.mu_hat, scene.mu_true)
            errors.append(err)
            per_run.append((std, j, err))
        rows.append((std, float(np.mean(errors)), float(np.std(errors))))

    with open(args.out, "w") as fh:
        fh.write("std,mean_rmse_mu,std_rmse_mu\n")
        for std, mean, spread in rows:
            fh.write(f"{std!r},{mean!r},{spread!r}\n")
    manifest.add_output(args.out)
    if args.plot_data:
        with open(args.plot_data, "w") as fh:
            fh.write("std,seed,rmse_mu\n")
            for std, j, err in per_run:
                fh.write(f"{std!r},{j},{err!r}\n")
        manifest.add_output(args.plot_data)
    manifest.write(args.manifest or f"{args.out}.manifest.json")
    return 0


# --------------------------------------------------------------- parser

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--threads", type=int, default=None, help="worker cap (default: logical cores)")
    parser.add_argument("--manifest", default=None, help="override the manifest path")


def _add_scene_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kind", choices=("matern", "spheric"), default="matern")
    parser.add_argument("--height", type=int, default=128)
    parser.add_argument("--width", type=int, default=128)
    parser.add_argument("--bands", type=int, default=100)
    parser.add_argument("--endmembers", type=int, default=5)
    parser.add_argument("--corr-len", type=float, default=3.0, dest="corr_len")
    parser.add_argument("--scale-corr-len", type=float, default=6.0, dest="scale_corr_len")


def _add_optimizer_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--candidates", type=int, default=200)
    parser.add_argument("--pso-iters", type=int, default=150, dest="pso_iters")
    parser.add_argument("--gd-iters", type=int, default=500, dest="gd_iters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsiscale",
        description="Estimate and remove per-pixel scale variability from hyperspectral cubes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene directory")
    _add_scene_flags(p)
    p.add_argument("--scale-std", type=float, default=0.3, dest="scale_std")
    p.add_argument("--snr-db", type=float, default=None, dest="snr_db")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("correct", help="estimate scale factors and correct a cube")
    p.add_argument("--input", required=True)
    p.add_argument("--endmembers", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mu-out", required=True, dest="mu_out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)
    _add_optimizer_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("unmix", help="endmember extraction and constrained abundances")
    p.add_argument("--input", required=True)
    p.add_argument("--endmembers", type=int, required=True)
    p.add_argument("--endmember-file", default=None, dest="endmember_file")
    p.add_argument("--extract", choices=("nfindr",), default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_unmix)

    p = sub.add_parser("eval", help="compare predictions against ground truth")
    p.add_argument("mode", choices=("mu", "abundance", "endmembers"))
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--clean-cube", default=None, dest="clean_cube")
    p.add_argument("--pred-endmembers", default=None, dest="pred_endmembers")
    p.add_argument("--truth-endmembers", default=None, dest="truth_endmembers")
    p.add_argument("--csv", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="compare optimizer configurations on one cube")
    p.add_argument("--input", required=True)
    p.add_argument("--truth-mu", required=True, dest="truth_mu")
    p.add_argument("--endmembers", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--plot-data", default=None, dest="plot_data")
    _add_optimizer_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="error vs scale-std curve over seeded scenes")
    p.add_argument("--stds", required=True)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--plot-data", default=None, dest="plot_data")
    _add_scene_flags(p)
    p.add_argument("--candidates", type=int, default=200)
    p.add_argument("--pso-iters", type=int, default=150, dest="pso_iters")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _apply_thread_cap(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    from .errors import HsiScaleError

    try:
        return args.func(args)
    except (HsiScaleError, OSError) as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
