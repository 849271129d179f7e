"""Command-line front end: parse config, dispatch, emit CSV + JSON manifests."""

import hashlib
import json
import os
import sys

import click
import numpy as np

from . import __version__, ampleness, kacrice
from .config import ExperimentConfig
from .covariance import (
    ContinuumKernel,
    LatticeSpectrum,
    kernel_gap_bound,
    kernel_poisson,
    multi_indices,
)
from .critical import brute_force_count_1d, find_critical_points
from .errors import ToruscritError
from .experiments import (
    blowup_bound_study,
    lln_trajectory,
    run_mc_stats,
    scaling_fit,
)
from .rng import derive_seed
from .sampler import sample_field

EXIT_CONFIG = 2
EXIT_GATE = 3
EXIT_VERIFY = 4


def _sha256(text):
    return hashlib.sha256(text.encode("utf8")).hexdigest()


def _write_outputs(out_dir, command, config, files, summary):
    """Write result files plus a manifest embedding the config hash.

    No timestamps anywhere: reruns with the same config and seed must be
    byte-identical.
    """
    os.makedirs(out_dir, exist_ok=True)
    hashes = {}
    for name, content in files.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="\n") as fh:
            fh.write(content)
        hashes[name] = _sha256(content)
    manifest = {
        "command": command,
        "version": __version__,
        "config": config.as_dict(science_only=True),
        "config_hash": config.content_hash(),
        "files": hashes,
        "summary": summary,
    }
    blob = json.dumps(manifest, sort_keys=True, indent=1)
    with open(os.path.join(out_dir, "manifest.json"), "w", newline="\n") as fh:
        fh.write(blob + "\n")
    return manifest


def _verify_dir(out_dir):
    path = os.path.join(out_dir, "manifest.json")
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except OSError as exc:
        click.echo(f"verify: cannot read {path}: {exc}", err=True)
        raise SystemExit(EXIT_VERIFY)
    problems = []
    echoed = ExperimentConfig(dict(manifest["config"]))
    if echoed.content_hash() != manifest["config_hash"]:
        problems.append("config hash mismatch")
    for name, digest in manifest["files"].items():
        fpath = os.path.join(out_dir, name)
        try:
            with open(fpath, newline="") as fh:
                content = fh.read()
        except OSError:
            problems.append(f"missing file {name}")
            continue
        if _sha256(content) != digest:
            problems.append(f"hash mismatch for {name}")
    if problems:
        for p in problems:
            click.echo(f"verify: {p}", err=True)
        raise SystemExit(EXIT_VERIFY)
    click.echo(f"verify: {len(manifest['files'])} files ok in {out_dir}")


def _load_config(config_path, seed, threads, out, r, m, trials, r0):
    cfg = (
        ExperimentConfig.from_file(config_path)
        if config_path
        else ExperimentConfig.defaults()
    )
    overrides = {}
    if seed is not None:
        overrides["study__master_seed"] = seed
    if threads is not None:
        overrides["run__threads"] = threads
    if out is not None:
        overrides["run__out"] = out
    if r:
        overrides["study__R"] = list(r)
    if m is not None:
        overrides["model__m"] = m
    if trials is not None:
        overrides["study__trials"] = trials
    if r0 is not None:
        overrides["test_function__r0"] = r0
    cfg.override(**overrides)
    cfg.validate()
    return cfg


def common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True))(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("--threads", type=int, default=None)(fn)
    fn = click.option("--out", type=click.Path(), default=None)(fn)
    fn = click.option("--R", "-R", "r", type=float, multiple=True)(fn)
    fn = click.option("--m", type=int, default=None)(fn)
    fn = click.option("--trials", type=int, default=None)(fn)
    fn = click.option("--r0", type=float, default=None)(fn)
    return fn


def _gate(cfg):
    """Reject bandwidths failing the nondegeneracy scan, naming each one."""
    amp = cfg.amplitude()
    scan = ampleness.ampleness_scan(
        amp, cfg.m, cfg.bandwidths(), eps_trunc=cfg["model.eps_trunc"]
    )
    failing = [R for (R, jet, pair) in scan.rows if not (jet.passed and pair.passed)]
    if failing:
        click.echo(
            "ampleness gate failed at R=" + ", ".join(str(R) for R in failing),
            err=True,
        )
        raise SystemExit(EXIT_GATE)
    return scan


@click.group(invoke_without_command=True)
@click.option("--verify", "verify_dir", type=click.Path(), default=None)
@click.version_option(__version__)
@click.pass_context
def main(ctx, verify_dir):
    """Critical-point statistics of random Fourier fields on the torus."""
    if verify_dir is not None:
        _verify_dir(verify_dir)
        ctx.exit(0)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


@main.command()
@common_options
def sample(config_path, seed, threads, out, r, m, trials, r0):
    """Draw one field realization and dump its coefficient table."""
    cfg = _load_config(config_path, seed, threads, out, r, m, trials, r0)
    R = cfg.bandwidths()[0]
    spec = LatticeSpectrum(cfg.amplitude(), cfg.m, R, cfg["model.eps_trunc"])
    fld = sample_field(spec, derive_seed(cfg["study.master_seed"], "sample"))
    _write_outputs(
        cfg["run.out"],
        "sample",
        cfg,
        {"coefficients.csv": fld.to_csv()},
        {"R": R, "modes": int(2 * spec.n_half_modes + 1)},
    )
    click.echo(f"sample: R={R} modes={2*spec.n_half_modes+1} -> {cfg['run.out']}")


@main.command()
@common_options
def crit(config_path, seed, threads, out, r, m, trials, r0):
    """Locate the critical points of one realization."""
    cfg = _load_config(config_path, seed, threads, out, r, m, trials, r0)
    R = cfg.bandwidths()[0]
    spec = LatticeSpectrum(cfg.amplitude(), cfg.m, R, cfg["model.eps_trunc"])
    fld = sample_field(spec, derive_seed(cfg["study.master_seed"], "crit"))
    measure = find_critical_points(fld)
    summary = {
        "count": measure.count,
        "euler_characteristic": measure.euler_characteristic(),
        "degenerate": measure.n_degenerate,
    }
    if cfg.m == 1:
        summary["sign_change_count"] = brute_force_count_1d(fld)
    _write_outputs(
        cfg["run.out"], "crit", cfg, {"critical_points.csv": measure.to_csv()}, summary
    )
    click.echo(
        f"crit: R={R} count={measure.count} chi={summary['euler_characteristic']}"
        + (f" oracle={summary.get('sign_change_count')}" if cfg.m == 1 else "")
    )
    if cfg.m == 1 and summary["sign_change_count"] != measure.count:
        click.echo("crit: newton/sign-change count mismatch", err=True)
        raise SystemExit(1)


@main.command()
@common_options
@click.option("--order", type=int, default=2)
@click.option("--points", "n_points", type=int, default=33)
def kernel(config_path, seed, threads, out, r, m, trials, r0, order, n_points):
    """Tabulate lattice and continuum kernel derivatives along the first axis."""
    cfg = _load_config(config_path, seed, threads, out, r, m, trials, r0)
    amp, mm = cfg.amplitude(), cfg.m
    R = cfg.bandwidths()[0]
    spec = LatticeSpectrum(amp, mm, R, cfg["model.eps_trunc"])
    cont = ContinuumKernel(amp, mm)
    lines = ["z,alpha,lattice,continuum"]
    zs = np.linspace(0.0, R / 2.0, n_points)
    for z1 in zs:
        z = np.zeros(mm)
        z[0] = z1
        for alpha in multi_indices(mm, order):
            tag = "".join(str(a) for a in alpha)
            lines.append(
                f"{float(z1)!r},{tag},{spec.deriv(z, alpha)!r},{cont.deriv(z, alpha)!r}"
            )
    pois = kernel_poisson(amp, mm, R, np.full(mm, 1.0))
    latt = spec.deriv(np.full(mm, 1.0), (0,) * mm)
    summary = {"poisson_check_abs_err": abs(pois - latt)}
    try:
        summary["gap_bound_ell2"] = kernel_gap_bound(amp, mm, R, 0.9, 2, mm + 1)
    except (ToruscritError, ValueError):
        pass
    _write_outputs(
        cfg["run.out"],
        "kernel",
        cfg,
        {"kernel_table.csv": "\n".join(lines) + "\n"},
        summary,
    )
    click.echo(f"kernel: table for R={R}; image-sum check |diff|={abs(pois-latt):.2e}")


@main.command("kr-one")
@common_options
def kr_one(config_path, seed, threads, out, r, m, trials, r0):
    """One-point density: lattice bandwidths against the continuum value."""
    cfg = _load_config(config_path, seed, threads, out, r, m, trials, r0)
    amp, mm = cfg.amplitude(), cfg.m
    n_mc = cfg["mc.n_mc"]
    master = cfg["study.master_seed"]
    lines = ["R,density,stderr"]
    summary = {}
    for R in cfg.bandwidths():
        spec = LatticeSpectrum(amp, mm, R, cfg["model.eps_trunc"])
        rep = kacrice.one_point_density(spec, n_mc, derive_seed(master, "kr1", repr(R)))
        lines.append(f"{R!r},{rep.value!r},{rep.std_error!r}")
    cont = kacrice.mean_density(amp, mm, seed=derive_seed(master, "kr1-cont"))
    lines.append(f"inf,{cont.value!r},{cont.std_error!r}")
    summary["mean_density"] = cont.value
    summary["mean_density_stderr"] = cont.std_error
    _write_outputs(
        cfg["run.out"], "kr-one", cfg, {"one_point.csv": "\n".join(lines) + "\n"}, summary
    )
    click.echo(f"kr-one: mean density = {cont.value:.6f} +- {cont.std_error:.6f}")


@main.command("kr-two")
@common_options
@click.option("--separations", default="0.5,1,2,4,8")
def kr_two(config_path, seed, threads, out, r, m, trials, r0, separations):
    """Two-point density scan along a ray of separations."""
    cfg = _load_config(config_path, seed, threads, out, r, m, trials, r0)
    amp, mm = cfg.amplitude(), cfg.m
    src = ContinuumKernel(amp, mm)
    n_mc = cfg["mc.n_mc"]
    master = cfg["study.master_seed"]
    lines = ["r,rho_hat,rho_hat_stderr,rho_tilde,rho_tilde_stderr,delta,delta_stderr,w,w_stderr"]
    for i, tok in enumerate(separations.split(",")):
        rr = float(tok)
        z = np.zeros(mm)
        z[0] = rr
        rh, rt, de = kacrice.two_point_density(src, z, n_mc, derive_seed(master, "kr2", i))
        w = kacrice.blow_up_density(src, rr, n_mc=n_mc, seed=derive_seed(master, "kr2w", i))
        lines.append(
            f"{rr!r},{rh.value!r},{rh.std_error!r},{rt.value!r},{rt.std_error!r},"
            f"{de.value!r},{de.std_error!r},{w.value!r},{w.std_error!r}"
        )
    _write_outputs(cfg["run.out"], "kr-two", cfg, {"two_point.csv": "\n".join(lines) + "\n"}, {})
    click.echo(f"kr-two: scan written to {cfg['run.out']}")


@main.command("kr-consts")
@common_options
def kr_consts(config_path, seed, threads, out, r, m, trials, r0):
    """Mean density, pair-gap integral, and variance coefficient."""
    cfg = _load_config(config_path, seed, threads, out, r, m, trials, r0)
    amp, mm = cfg.amplitude(), cfg.m
    master = cfg["study.master_seed"]
    c = kacrice.mean_density(amp, mm, seed=derive_seed(master, "c"))
    z = kacrice.pair_gap_integral(
        amp, mm, n_mc=cfg["mc.n_mc"], quad_nodes=cfg["mc.quad_nodes"],
        seed=derive_seed(master, "z"),
    )
    v = c + z
    summary = {
        "mean_density": c.value,
        "mean_density_stderr": c.std_error,
        "pair_gap_integral": z.value,
        "pair_gap_integral_stderr": z.std_error,
        "variance_coefficient": v.value,
        "variance_coefficient_stderr": v.std_error,
    }
    content = "quantity,value,stderr\n" + "\n".join(
        f"{k},{summary[k]!r},{summary[k + '_stderr']!r}"
        for k in ("mean_density", "pair_gap_integral", "variance_coefficient")
    ) + "\n"
    _write_outputs(cfg["run.out"], "kr-consts", cfg, {"constants.csv": content}, summary)
    click.echo(
        f"kr-consts (m={mm}): mean density {c.value:.5f} +- {c.std_error:.5f} | "
        f"pair-gap {z.value:.5f} +- {z.std_error:.5f} | "
        f"variance coefficient {v.value:.5f} +- {v.std_error:.5f}"
    )


@main.command()
@common_options
def ample(config_path, seed, threads, out, r, m, trials, r0):
    """Nondegeneracy scan over the configured bandwidths (gate check)."""
    cfg = _load_config(config_path, seed, threads, out, r, m, trials, r0)
    scan = ampleness.ampleness_scan(
        cfg.amplitude(), cfg.m, cfg.bandwidths(), eps_trunc=cfg["model.eps_trunc"]
    )
    _write_outputs(
        cfg["run.out"],
        "ample",
        cfg,
        {"ampleness.csv": scan.to_csv()},
        {"passing_R": scan.passing_R, "empirical_threshold": scan.empirical_threshold},
    )
    failing = [R for (R, jet, pair) in scan.rows if not (jet.passed and pair.passed)]
    if failing:
        click.echo(
            "ampleness gate failed at R=" + ", ".join(str(R) for R in failing), err=True
        )
        raise SystemExit(EXIT_GATE)
    click.echo(f"ample: all bandwidths pass; smallest tested pass = {scan.empirical_threshold}")


@main.command()
@common_options
def stats(config_path, seed, threads, out, r, m, trials, r0):
    """Monte Carlo mean/variance of Z_R(f) across bandwidths."""
    cfg = _load_config(config_path, seed, threads, out, r, m, trials, r0)
    _gate(cfg)
    result = run_mc_stats(cfg)
    summary = dict(result.reference)
    for row in result.rows:
        summary[f"mean_weighted_R{row.R:g}"] = row.mean_weighted
        summary[f"var_weighted_R{row.R:g}"] = row.var_weighted
    _write_outputs(cfg["run.out"], "stats", cfg, {"stats.csv": result.to_csv()}, summary)
    ref = result.reference.get("mean_density")
    for row in result.rows:
        click.echo(
            f"stats: R={row.R:g} mean/R^m={row.mean_weighted:.5f}"
            f" +- {row.mean_stderr:.5f}"
            + (f" (reference {ref:.5f})" if ref is not None else "")
        )


@main.command()
@common_options
def scaling(config_path, seed, threads, out, r, m, trials, r0):
    """Variance-scaling study: log-log fit of Var[Z_R(f)] against R."""
    cfg = _load_config(config_path, seed, threads, out, r, m, trials, r0)
    _gate(cfg)
    result = run_mc_stats(cfg)
    fit = scaling_fit(result)
    vref = result.reference.get("variance_coefficient")
    f = cfg.test_function()
    predicted_intercept = (
        float(np.log(vref * f.square_integral(cfg.m))) if vref and vref > 0 else None
    )
    summary = {
        "slope": fit.slope,
        "slope_stderr": fit.slope_stderr,
        "intercept": fit.intercept,
        "intercept_stderr": fit.intercept_stderr,
        "predicted_slope": cfg.m,
        "predicted_intercept": predicted_intercept,
        "dropped_R": fit.dropped_R,
    }
    _write_outputs(
        cfg["run.out"],
        "scaling",
        cfg,
        {"stats.csv": result.to_csv()},
        summary,
    )
    click.echo(
        f"scaling: slope {fit.slope:.3f} +- {fit.slope_stderr:.3f} (predicted {cfg.m}); "
        f"intercept {fit.intercept:.3f} +- {fit.intercept_stderr:.3f}"
        + (
            f" (predicted {predicted_intercept:.3f})"
            if predicted_intercept is not None
            else ""
        )
    )


@main.command()
@common_options
def lln(config_path, seed, threads, out, r, m, trials, r0):
    """Law-of-large-numbers trajectories of N^{-m} Z_N(f)."""
    cfg = _load_config(config_path, seed, threads, out, r, m, trials, r0)
    _gate(cfg)
    result = lln_trajectory(cfg)
    dev = result.max_abs_deviation()
    summary = {
        "reference": result.reference,
        "reference_stderr": result.reference_stderr,
        "max_deviation_final": float(dev[-1]),
        "max_deviation_initial": float(dev[0]),
    }
    _write_outputs(cfg["run.out"], "lln", cfg, {"lln.csv": result.to_csv()}, summary)
    rel = dev[-1] / abs(result.reference) if result.reference else float("nan")
    click.echo(
        f"lln: reference {result.reference:.5f}; max |deviation| at N={result.N_values[-1]}"
        f" = {dev[-1]:.5f} ({100*rel:.1f}% relative)"
    )


@main.command()
@common_options
@click.option("--r-grid", default="0.1,0.05,0.02,0.01,0.005,0.002,0.001")
def blowup(config_path, seed, threads, out, r, m, trials, r0, r_grid):
    """Diagonal blow-up boundedness study."""
    cfg = _load_config(config_path, seed, threads, out, r, m, trials, r0)
    R = cfg.bandwidths()[0]
    spec = LatticeSpectrum(cfg.amplitude(), cfg.m, R, cfg["model.eps_trunc"])
    grid = [float(tok) for tok in r_grid.split(",")]
    study = blowup_bound_study(
        spec,
        grid,
        trials=max(cfg["study.trials"], 8),
        n_mc=cfg["mc.n_mc"],
        seed=cfg["study.master_seed"],
    )
    study.config_hash = cfg.content_hash()
    ws = [w for w, _ in study.w_values]
    summary = {
        "w_min": min(ws),
        "w_max": max(ws),
        "sup_ratio": study.observed_ratio,
        "c_sup_moment_1": study.c_sup_moments[1][0],
        "c_sup_moment_2": study.c_sup_moments[2][0],
        "c_sup_moment_4": study.c_sup_moments[4][0],
    }
    _write_outputs(cfg["run.out"], "blowup", cfg, {"blowup.csv": study.to_csv()}, summary)
    click.echo(
        f"blowup: w range [{min(ws):.5g}, {max(ws):.5g}] over r grid; "
        f"observed ratio sup w / E[C] = {study.observed_ratio:.4g}"
    )


if __name__ == "__main__":
    main()
