"""Command-line front end.

Every option can also come from ``--config FILE``, a file of ``key = value``
lines whose keys are the long option names (``n-iter`` or ``n_iter``).
Command-line flags win over the file.

Exit status: 0 on success, 1 when the pipeline fails (for instance a
singular unfolding, reported with pixel coordinates), 2 for invalid
configuration.
"""

import argparse
import configparser
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, montecarlo
from .dft import dft2, idft2, subsample_phase_encode
from .errors import ConfigError, SenseNoiseError, SingularSystem
from .fileio import FORMATS, load_covariance_csv, read_map, write_map
from .noise import CoilCovariance, Scale, sample_coil_noise
from .phantom import PhantomKind, Profile, load_sensitivity, save_sensitivity, synth_phantom, synth_sensitivity
from .sense import apply_sensitivity, sense_unfold, unmixing_maps

log = logging.getLogger("sensenoise")

FULL_DIMS = (256, 256)


def _dims(text):
    try:
        mx, my = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must look like 64x64, got {text!r}") from None
    if mx <= 0 or my <= 0:
        raise argparse.ArgumentTypeError("dims must be positive")
    return mx, my


def _formats(text):
    fmts = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = [f for f in fmts if f not in FORMATS]
    if bad or not fmts:
        raise argparse.ArgumentTypeError(f"formats must be a comma list of {', '.join(FORMATS)}")
    return fmts


def _common(p):
    g = p.add_argument_group("run")
    g.add_argument("--config", help="key = value file supplying defaults for any option")
    g.add_argument("--out", default=".", help="output directory (default: .)")
    g.add_argument("--seed", type=int, default=0, help="run seed (default: 0)")
    g.add_argument("--formats", type=_formats, default="fmap,pgm",
                   help="map formats, comma separated from csv,fmap,pgm (default: fmap,pgm)")
    g.add_argument("--log-scale", action="store_true", help="write PGM maps as log10(1 + map)")
    g.add_argument("--workers", type=int, default=None,
                   help=f"worker threads (default and cap: ${montecarlo.WORKERS_ENV} or 1)")

    g = p.add_argument_group("acquisition")
    g.add_argument("--dims", type=_dims, default="64x64", help="grid size MXxMY (default: 64x64)")
    g.add_argument("--coils", type=int, default=8, help="number of coils L (default: 8)")
    g.add_argument("--r", type=int, default=2, help="acceleration factor (default: 2)")
    g.add_argument("--profile", choices=[p.value for p in Profile], default=Profile.GAUSSIAN_LOBES.value,
                   help="synthetic sensitivity profile (default: gaussian-lobes)")
    g.add_argument("--smap", help="load sensitivities from an SMAP v1 file instead")

    g = p.add_argument_group("noise")
    g.add_argument("--sigma2", type=float, default=100.0, help="per-coil per-component noise variance (default: 100)")
    g.add_argument("--rho", type=float, default=0.0, help="correlation coefficient between coils (default: 0)")
    g.add_argument("--cov-csv", help="L x L covariance CSV (real part)")
    g.add_argument("--cov-csv-imag", help="imaginary part of the covariance CSV")
    g.add_argument("--cov-domain", choices=["xspace", "kspace"], default="xspace",
                   help="grid the covariance describes, full sampling (default: xspace)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sensenoise",
        description="Noise maps of Cartesian SENSE reconstructions: simulation, closed forms and Monte Carlo checks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    subs = {}

    def add(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        _common(p)
        subs[name] = p
        return p

    add("gen-maps", "write synthetic sensitivity maps (maps.smap) and their magnitudes")

    p = add("simulate", "phantom -> coils -> subsample -> SENSE unfold; write the reconstruction")
    p.add_argument("--phantom", choices=[k.value for k in PhantomKind], default=PhantomKind.DISK.value,
                   help="noise-free object (default: disk)")
    p.add_argument("--value", type=float, default=1.0, help="phantom intensity (default: 1)")
    p.add_argument("--noiseless", action="store_true", help="skip the noise realization")
    p.add_argument("--allow-singular", action="store_true", help="leave singular pixel groups at 0 instead of failing")

    add("analyze", "closed-form variance, g-factor and line-correlation maps")

    p = add("exp1", "combine correlated Gaussians with two random unit-norm weights")
    p.add_argument("--n", type=int, default=100_000, help="number of samples (default: 100000)")
    p.add_argument("--n-vars", type=int, default=8, help="number of combined variables (default: 8)")

    p = add("exp-map", "Monte Carlo per-pixel variance and correlation vs. closed forms")
    p.add_argument("--n-iter", type=int, default=5000, help="noise realizations (default: 5000)")
    p.add_argument("--full", action="store_true", help=f"use the full {FULL_DIMS[0]}x{FULL_DIMS[1]} grid")

    p = add("ca-demo", "conventional-approach denoising of a noisy disk with per-pixel vs. global variance")
    p.add_argument("--n-iter", type=int, default=1000, help="noise realizations (default: 1000)")
    p.add_argument("--value", type=float, default=10.0, help="disk intensity (default: 10)")

    p = add("denoise-ca", "apply the conventional-approach correction with a supplied variance map")
    p.add_argument("--second-moment", required=True, help="E{M^2} map (.fmap or .csv)")
    p.add_argument("--variance", required=True, help="per-pixel variance map (.fmap or .csv)")
    return parser, subs


def _read_config(path):
    if not Path(path).is_file():
        raise ConfigError(f"config file {path} does not exist")
    cp = configparser.ConfigParser()
    try:
        cp.read_string("[run]\n" + Path(path).read_text())
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return {k.replace("-", "_"): v for k, v in cp["run"].items()}


def _apply_config(parser, sub, argv, args):
    values = _read_config(args.config)
    actions = {a.dest: a for a in sub._actions}
    unknown = sorted(set(values) - set(actions) - {"config"})
    if unknown:
        raise ConfigError(f"{args.config}: unknown option(s) {', '.join(unknown)}")
    for key, val in list(values.items()):
        if isinstance(actions[key], argparse._StoreTrueAction):
            values[key] = val.strip().lower() in ("1", "true", "yes", "on")
    values.pop("config", None)
    sub.set_defaults(**values)
    return parser.parse_args(argv)


def _workers(args):
    cap = os.environ.get(montecarlo.WORKERS_ENV)
    n = args.workers or montecarlo.default_workers()
    if cap:
        n = min(n, montecarlo.default_workers())
    if n < 1:
        raise ConfigError("--workers must be at least 1")
    return n


def _sensitivity(args):
    if args.smap:
        if not Path(args.smap).is_file():
            raise ConfigError(f"sensitivity file {args.smap} does not exist")
        return load_sensitivity(args.smap)
    if args.coils < 1:
        raise ConfigError("--coils must be at least 1")
    dims = FULL_DIMS if getattr(args, "full", False) else args.dims
    if args.profile == Profile.ORTHOGONAL_PHASE.value and args.coils % args.r:
        raise ConfigError(f"orthogonal-phase maps need r = {args.r} to divide the coil count {args.coils}")
    _check_r(args.r, dims[1])
    return synth_sensitivity(args.coils, dims, args.profile, seed=args.seed, r=args.r)


def _check_r(r, my):
    if r < 1:
        raise ConfigError("--r must be a positive integer")
    if my % r:
        raise ConfigError(f"r = {r} must divide M_y = {my}")


def _covariance(args, n_coils, omega):
    """Full-grid x-space covariance from flags or CSV."""
    if args.cov_csv:
        for path in (args.cov_csv, args.cov_csv_imag):
            if path and not Path(path).is_file():
                raise ConfigError(f"covariance file {path} does not exist")
        cov = load_covariance_csv(args.cov_csv, args.cov_csv_imag)
        if cov.n_coils != n_coils:
            raise ConfigError(f"covariance has {cov.n_coils} coils, sensitivities have {n_coils}")
    else:
        if not -1.0 / max(n_coils - 1, 1) < args.rho < 1.0 and n_coils > 1:
            raise ConfigError(f"rho = {args.rho} does not give a positive-definite covariance")
        if args.sigma2 <= 0:
            raise ConfigError("--sigma2 must be positive")
        cov = CoilCovariance.uniform(n_coils, args.sigma2, args.rho)
    if args.cov_domain == "kspace":
        cov = CoilCovariance(cov.sigma / omega, Scale.XSPACE_FULL)
    return cov


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _stats(grid, mask=None):
    vals = grid[~mask] if mask is not None else grid.ravel()
    vals = vals[np.isfinite(vals)]
    if not vals.size:
        return {"min": 0.0, "max": 0.0, "mean": 0.0}
    return {"min": float(vals.min()), "max": float(vals.max()), "mean": float(vals.mean())}


def cmd_gen_maps(args, out):
    sens = _sensitivity(args)
    save_sensitivity(out / "maps.smap", sens)
    for l in range(sens.n_coils):
        write_map(out / f"coil{l}_magnitude", np.abs(sens.maps[l]), args.formats, args.log_scale)
    log.info("wrote %d coil maps to %s", sens.n_coils, out)


def cmd_simulate(args, out):
    sens = _sensitivity(args)
    n_coils, my, mx = sens.maps.shape
    _check_r(args.r, my)
    cov = _covariance(args, n_coils, mx * my)
    phantom = synth_phantom((mx, my), args.phantom, value=args.value)
    coils = apply_sensitivity(phantom, sens)
    if not args.noiseless:
        coils = type(coils)(coils.data + sample_coil_noise(cov, (mx, my), args.seed).data, coils.domain)
    sub = idft2(subsample_phase_encode(dft2(coils), args.r))
    unmix = unmixing_maps(sens, args.r, cov)
    recon = sense_unfold(sub, sens, args.r, cov, strict=not args.allow_singular, unmixing=unmix)
    mag = np.abs(recon.data)
    write_map(out / "recon_magnitude", mag, args.formats, args.log_scale)
    mask = unmix.full_mask()
    truth = phantom.data
    err = np.abs(recon.data - truth)[~mask]
    norm = np.linalg.norm(truth[~mask])
    _write_json(out / "simulate.json", {
        "dims": [mx, my], "r": args.r, "n_coils": n_coils, "seed": args.seed,
        "noiseless": bool(args.noiseless), "phantom": args.phantom,
        "singular_pixels": int(mask.sum()),
        "relative_error": float(np.linalg.norm(err) / norm) if norm else float(np.linalg.norm(err)),
        "magnitude": _stats(mag, mask),
    })


def cmd_analyze(args, out):
    sens = _sensitivity(args)
    n_coils, my, mx = sens.maps.shape
    _check_r(args.r, my)
    cov = _covariance(args, n_coils, mx * my)
    sub_cov = analysis.scale_covariance(cov, mx * my, args.r)
    maps = analysis.noise_maps(sens, sub_cov, args.r)
    write_map(out / "variance", maps.variance, args.formats, args.log_scale)
    write_map(out / "gfactor", maps.gmap, args.formats, args.log_scale)
    corr = {}
    for i in range(args.r):
        for j in range(i + 1, args.r):
            grid = np.abs(maps.line_corr[..., i, j])
            write_map(out / f"corr_{i}_{j}", grid, args.formats, args.log_scale)
            corr[f"{i}_{j}"] = _stats(grid)
    _write_json(out / "analyze.json", {
        "dims": [mx, my], "r": args.r, "n_coils": n_coils,
        "singular_pixels": int(maps.singular_mask.sum()),
        "variance": _stats(maps.variance, maps.singular_mask),
        "gfactor": _stats(maps.gmap, maps.singular_mask),
        "line_correlation_abs": corr,
    })


def cmd_exp1(args, out):
    if args.n < 2:
        raise ConfigError("--n must be at least 2")
    report = montecarlo.run_experiment1(args.n, args.rho, args.seed, args.n_vars)
    (out / "exp1.json").write_text(report.to_json())
    print(f"sigma1 sample {report.sample['sigma1']:.4f} theory {report.theoretical['sigma1']:.4f}")
    print(f"sigma2 sample {report.sample['sigma2']:.4f} theory {report.theoretical['sigma2']:.4f}")
    print(f"rho12  sample {report.sample['rho12']:.4f} theory {report.theoretical['rho12']:.4f}")


def cmd_exp_map(args, out):
    if args.n_iter < 1:
        raise ConfigError("--n-iter must be at least 1")
    sens = _sensitivity(args)
    n_coils, my, mx = sens.maps.shape
    _check_r(args.r, my)
    cov = _covariance(args, n_coils, mx * my)
    res = montecarlo.run_map_experiment(sens, cov, args.r, args.n_iter, args.seed, _workers(args))
    write_map(out / "variance_theory", res.theory.variance, args.formats, args.log_scale)
    write_map(out / "variance_estimate", res.estimated_variance, args.formats, args.log_scale)
    write_map(out / "gfactor", res.theory.gmap, args.formats, args.log_scale)
    (out / "exp-map.json").write_text(res.report.to_json())
    for name, ok in res.report.passed.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")


def cmd_ca_demo(args, out):
    sens = _sensitivity(args)
    n_coils, my, mx = sens.maps.shape
    _check_r(args.r, my)
    cov = _covariance(args, n_coils, mx * my)
    report, denoised, second = montecarlo.run_ca_demo(
        sens, cov, args.r, args.n_iter, args.seed, value=args.value, workers=_workers(args)
    )
    write_map(out / "ca_denoised", denoised, args.formats, args.log_scale)
    write_map(out / "second_moment", second, args.formats, args.log_scale)
    (out / "ca-demo.json").write_text(report.to_json())
    print(f"MAE per-pixel map {report.sample['mae_local']:.4f}, best global {report.sample['mae_best_global']:.4f}")


def cmd_denoise_ca(args, out):
    for path in (args.second_moment, args.variance):
        if not Path(path).is_file():
            raise ConfigError(f"map file {path} does not exist")
    denoised = analysis.ca_denoise(read_map(args.second_moment), read_map(args.variance))
    write_map(out / "ca_denoised", denoised, args.formats, args.log_scale)


COMMANDS = {
    "gen-maps": cmd_gen_maps,
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "exp1": cmd_exp1,
    "exp-map": cmd_exp_map,
    "ca-demo": cmd_ca_demo,
    "denoise-ca": cmd_denoise_ca,
}


def main(argv=None):
    parser, subs = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            args = _apply_config(parser, subs[args.command], argv, args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"sensenoise {args.command}: configuration error: {exc}", file=sys.stderr)
        return 2
    except SingularSystem as exc:
        pix = ", ".join(f"({x}, {y})" for x, y in exc.pixels[:10])
        print(f"sensenoise {args.command}: {exc}; pixel groups (x, y): {pix}", file=sys.stderr)
        return 1
    except SenseNoiseError as exc:
        print(f"sensenoise {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
