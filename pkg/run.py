"""Batch driver for the martingale CLT rate lab.

    python run.py simulate --model "scaled(c=1)" --n-grid 16,32,64 --reps 10000 --seed 7 --out ./out_dir
    python run.py rate-fit --input ./out_dir/simulate.csv --out ./out_dir
    python run.py augment-demo --model "predictable(neg=0.5, pos=1.5, start=1)" --n-grid 64 --reps 10000
    python run.py linear-process --coeffs 0:1,1:1 --model "scaled(c=1)" --p inf --n-grid 2^6..2^12
    python run.py lemma-check --joints 1000 --seed 3

Exit status: 0 on success, 2 on an invalid configuration (the message names
the field), 3 when some augmented paths failed (the message gives the count).
"""
import argparse
import contextlib
import math
import os
import sys
from functools import partial

import numpy as np
from tqdm import tqdm

from augmentation import augment_path, make_plan
from coboundary import (
    TAIL_TOL,
    check_innovation,
    coboundary_decompose,
    condition3_check,
    estimate_linear_deltas,
    g_norm,
    theorem3_rate_check,
)
from config import SUBCOMMANDS, build_config, parse_coeffs, parse_model, read_coeffs_file, read_kv, write_kv
from distributed import all_gather, get_world_size, split_range
from empirics.delta import estimate_delta_n
from empirics.rate import POWER, POWER_LOG, bound_ratio, fit_rate
from models.mds_models import sample_path, theoretical_v2
from models.membership import gamma_sequence
from op.csv_io import plot_rate, read_rows, write_rows
from op.errors import (
    AugmentationError,
    ConfigError,
    DegenerateModelError,
    DomainError,
    PlanInconsistencyError,
    UnsupportedError,
)
from op.streams import STEP_AUX, StreamKey, derive_seed, make_generator
from op.utils import dic_2_str, mkdirs
from Logger.Logger import Logger
from smoothing import fit_stated_constants, intermediate_inequality_check, lemma2_bound_check, random_joint

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_AUGMENTATION = 3

# cell tags for derive_seed, one per subcommand
TAG_SIMULATE = 1
TAG_AUGMENT = 2
TAG_LINEAR = 3
TAG_GNORM = 4


@contextlib.contextmanager
def config_field(name):
    """Re-raise domain failures of a run as a ConfigError naming `name`."""
    try:
        yield
    except (DomainError, UnsupportedError, DegenerateModelError) as e:
        raise ConfigError(name, str(e)) from e


def _try_plot(grid, fit, path, logger, title):
    try:
        plot_rate(grid, fit, path, title=title)
        logger.update("plot", path=path)
    except Exception as e:
        # plots are optional artifacts
        logger.warn("plot", f"plotting failed: {e!r}")


def run_simulate(cfg, logger):
    model = parse_model(cfg.model)
    rows = []
    for n in tqdm(cfg.n_grid, desc="simulate", dynamic_ncols=True):
        key = StreamKey(derive_seed(cfg.seed, TAG_SIMULATE, n))
        est = estimate_delta_n(model, n, cfg.reps, key, cfg.delta_conf, workers=cfg.workers)
        u_n = gamma_sequence(model, n).u_n
        v_n = math.sqrt(theoretical_v2(model, n))
        row = dict(n=n, reps=est.reps, ks=est.ks, dkw_radius=est.dkw_radius, u_n=u_n, v_n=v_n,
                   bound_ratio=bound_ratio(est, u_n, v_n) if n >= 2 else math.nan)
        logger.update(n, ks=f"{est.ks:.6g}", dkw=f"{est.dkw_radius:.3g}", bound_ratio=f"{row['bound_ratio']:.6g}")
        rows.append(row)
    write_rows(os.path.join(cfg.out, "simulate.csv"), "simulate", rows)

    if cfg.plot and len(rows) >= 3:
        grid = [(r["n"], r["ks"]) for r in rows]
        try:
            fit = fit_rate(grid, POWER)
        except DomainError as e:
            logger.warn("plot", f"no fit to plot: {e}")
            fit = None
        _try_plot(grid, fit, os.path.join(cfg.out, "rate.svg"), logger, model.descriptor())
    return EXIT_OK


def run_rate_fit(cfg, logger):
    if not os.path.exists(cfg.input):
        raise ConfigError("input", f"{cfg.input} does not exist")
    grid = [(r["n"], r["ks"]) for r in read_rows(cfg.input, "simulate")]
    rows, fits = [], []
    for form in (POWER, POWER_LOG):
        try:
            fit = fit_rate(grid, form)
        except DomainError as e:
            raise ConfigError("input", str(e))
        fits.append(fit)
        rows.append(dict(form=form, C=fit.C, b=fit.b, r2=fit.r2, points=len(grid), log_base="e"))
        logger.update(form, C=f"{fit.C:.6g}", b=f"{fit.b:.6g}", r2=f"{fit.r2:.6g}")
    write_rows(os.path.join(cfg.out, "rate_fit.csv"), "rate-fit", rows)
    if cfg.plot:
        _try_plot(grid, fits[0], os.path.join(cfg.out, "rate_fit.svg"), logger, cfg.input)
    return EXIT_OK


# sampled tails per grid point
TAIL_SAMPLE = 5
# |V̂² - 1| buckets for the residual histogram
RESIDUAL_BIN_EDGES = np.array([-1e-12, -1e-14, -1e-16, 1e-16, 1e-14, 1e-12])


def augment_chunk(model, n, plan, key, first_id, bounds):
    """Augment replications [start, stop) of one grid point; failures are returned, not raised."""
    rows, failures, tails = [], [], []
    start, stop = bounds
    for r in range(start, stop):
        path_id = first_id + r
        path = sample_path(model, n, key.substream(r))
        try:
            augmented, k = augment_path(path, plan, key.substream(r), path_id=path_id)
        except (AugmentationError, PlanInconsistencyError) as e:
            failures.append((path_id, str(e)))
            continue
        rows.append(dict(path_id=path_id, V2_before=path.V2, d=plan.d, k=k, n_hat=plan.n_hat,
                         V2_after_residual=augmented.V2 - 1.0))
        if r < TAIL_SAMPLE:
            tails.extend(dict(path_id=path_id, j=j, value=v)
                         for j, v in enumerate(augmented.values[n:], start=1))
    return rows, failures, tails


def residual_histogram(residuals):
    clipped = np.clip(np.asarray(residuals, dtype=np.float64), RESIDUAL_BIN_EDGES[0], RESIDUAL_BIN_EDGES[-1])
    counts, edges = np.histogram(clipped, bins=RESIDUAL_BIN_EDGES)
    return [dict(bin_lo=lo, bin_hi=hi, count=c) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]


def run_augment_demo(cfg, logger):
    model = parse_model(cfg.model)
    plans, rows, failures, tails = [], [], [], []
    first_id = 0
    for n in cfg.n_grid:
        plan = make_plan(model, n, cfg.mode)
        plans.append(dict(n=n, mode=plan.mode, u=plan.u, d=plan.d, v2=plan.v2, n_hat=plan.n_hat,
                          v_hat2=plan.v_hat2, total_length=plan.total_length))
        logger.update(n, d=f"{plan.d:.6g}", u=f"{plan.u:.6g}", n_hat=plan.n_hat, total_length=plan.total_length)
        key = StreamKey(derive_seed(cfg.seed, TAG_AUGMENT, n))
        chunks = split_range(cfg.reps, get_world_size(cfg.workers))
        fn = partial(augment_chunk, model, n, plan, key, first_id)
        for chunk_rows, chunk_failures, chunk_tails in all_gather(fn, chunks, workers=cfg.workers,
                                                                  desc=f"augment n={n}", progress=True):
            rows.extend(chunk_rows)
            failures.extend(chunk_failures)
            tails.extend(chunk_tails)
        first_id += cfg.reps

    for path_id, message in failures:
        logger.warn(path_id, message)
    hist = residual_histogram([r["V2_after_residual"] for r in rows])
    for b in hist:
        logger.update("residual", bin_lo=f"{b['bin_lo']:.0e}", bin_hi=f"{b['bin_hi']:.0e}", count=b["count"])
    write_rows(os.path.join(cfg.out, "augment_demo.csv"), "augment-demo", rows)
    write_rows(os.path.join(cfg.out, "augment_plan.csv"), "augment-plan", plans)
    write_rows(os.path.join(cfg.out, "augment_tails.csv"), "augment-tails", tails)
    write_rows(os.path.join(cfg.out, "augment_residuals.csv"), "augment-residuals", hist)
    if failures:
        print(f"augmentation failed on {len(failures)} of {first_id} paths", file=sys.stderr)
        return EXIT_AUGMENTATION
    return EXIT_OK


def run_linear_process(cfg, logger):
    coeffs = read_coeffs_file(cfg.coeffs_file) if cfg.coeffs_file else parse_coeffs(cfg.coeffs)
    innovation = parse_model(cfg.model)
    with config_field("model"):
        check_innovation(innovation)
    if not math.isinf(cfg.p) and cfg.p >= 3:
        cond = condition3_check(coeffs, cfg.p)
        logger.update("condition", verdict=cond.verdict, value=f"{cond.value:.6g}",
                      printed_form=cond.printed_form)

    finite, tail = coeffs.truncate()
    if tail > TAIL_TOL:
        logger.warn("coeffs", f"truncated {coeffs.descriptor()} keeps an l2 tail mass of {tail:.3e}")
    decomposition = coboundary_decompose(finite, cfg.p)
    gn = g_norm(decomposition, innovation, cfg.p, key=StreamKey(derive_seed(cfg.seed, TAG_GNORM)))
    logger.update("coboundary", A=float(decomposition.A), g_terms=len(decomposition.g_coeffs),
                  g_norm=f"{gn.value:.6g}", stderr=f"{gn.stderr:.3g}", truncation_tail=f"{tail:.3g}")

    f_estimates, m_estimates = [], []
    for n in tqdm(cfg.n_grid, desc="linear-process", dynamic_ncols=True):
        key = StreamKey(derive_seed(cfg.seed, TAG_LINEAR, n))
        est = estimate_linear_deltas(finite, innovation, n, cfg.reps, key, cfg.delta_conf, workers=cfg.workers)
        if est.warning:
            logger.warn(n, est.warning)
        f_estimates.append(est.f)
        m_estimates.append(est.m)

    report = theorem3_rate_check(f_estimates, m_estimates, gn.value, cfg.p)
    rows = []
    for row in report.rows:
        rows.append(dict(n=row.n, reps=cfg.reps, ks_f=row.ks_f, ks_m=row.ks_m, g_norm=gn.value,
                         p=cfg.p, ratio=row.ratio))
        logger.update(row.n, ks_f=f"{row.ks_f:.6g}", ks_m=f"{row.ks_m:.6g}", ratio=f"{row.ratio:.6g}")
    logger.update("verdict", verdict=report.verdict, C=f"{report.C:.6g}")
    write_rows(os.path.join(cfg.out, "linear_process.csv"), "linear-process", rows)
    return EXIT_OK


def check_joint(seed, k_values, r_values, joint_id):
    """All lemma-check rows for one random joint; the joint depends only on (seed, joint_id)."""
    joint = random_joint(make_generator(StreamKey(seed, joint_id, STEP_AUX)))
    rows, reports = [], []
    for k in k_values:
        for r in r_values:
            rep = lemma2_bound_check(joint, k, r)
            intermediate = intermediate_inequality_check(joint, k, r)
            reports.append(rep)
            rows.append(dict(joint_id=joint_id, k=k, r=r, beta=rep.beta, delta_x=rep.delta_x,
                             delta_xy=rep.delta_xy, bound=rep.bound, slack=rep.slack,
                             violations=len(rep.violations) + len(intermediate)))
    return rows, reports


def run_lemma_check(cfg, logger):
    results = all_gather(partial(check_joint, cfg.seed, cfg.k_values, cfg.r_values), range(cfg.joints),
                         workers=cfg.workers, desc="lemma-check", progress=True)
    rows = [row for chunk, _ in results for row in chunk]
    reports = [rep for _, chunk in results for rep in chunk]
    c1, c2 = fit_stated_constants(reports)
    logger.update("lemma", joints=cfg.joints, checks=len(rows),
                  violations=sum(r["violations"] for r in rows), c1=f"{c1:.6g}", c2=f"{c2:.6g}")
    write_rows(os.path.join(cfg.out, "lemma_check.csv"), "lemma-check", rows)
    return EXIT_OK


RUNNERS = {
    "simulate": run_simulate,
    "rate-fit": run_rate_fit,
    "augment-demo": run_augment_demo,
    "linear-process": run_linear_process,
    "lemma-check": run_lemma_check,
}

# config field blamed for domain failures raised while a subcommand runs
RUNNER_FIELDS = {
    "simulate": "model",
    "rate-fit": "input",
    "augment-demo": "model",
    "linear-process": "coeffs",
    "lemma-check": "k_values",
}


def run(cfg):
    """Execute one validated ExperimentConfig; returns the exit status."""
    mkdirs(cfg.out)
    write_kv(os.path.join(cfg.out, "run_metadata.txt"), cfg.echo())
    logger = Logger(os.path.join(cfg.out, "log.txt"), continue_=False)
    print(dic_2_str(cfg.echo()))
    with config_field(RUNNER_FIELDS[cfg.subcommand]):
        return RUNNERS[cfg.subcommand](cfg, logger)


def build_parser():
    parser = argparse.ArgumentParser(description="martingale CLT rate lab")
    parser.add_argument("subcommand", choices=SUBCOMMANDS, help="experiment to run")
    parser.add_argument("--config", type=str, default=None, help="key=value config file; flags override it")
    parser.add_argument("--model", type=str, default=None, help="model (or innovation) descriptor, e.g. scaled(c=1)")
    parser.add_argument("--n-grid", dest="n_grid", type=str, default=None, help="grid of n, e.g. 16,32,64 or 2^4..2^10")
    parser.add_argument("--reps", type=int, default=None, help="replications per grid point (paths for augment-demo)")
    parser.add_argument("--seed", type=int, default=None, help="64-bit master seed")
    parser.add_argument("--delta-conf", dest="delta_conf", type=float, default=None, help="DKW confidence level δ")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    parser.add_argument("--plot", action="store_true", default=None, help="write an SVG rate plot")
    parser.add_argument("--mode", type=str, default=None, choices=("L1", "Linf"), help="augmentation d mode")
    parser.add_argument("--workers", type=int, default=None, help="worker processes (0 = number of processors)")
    parser.add_argument("--coeffs", type=str, default=None, help="linear-process coefficients, e.g. 0:1,1:1 or geometric(rho=0.5)")
    parser.add_argument("--coeffs-file", dest="coeffs_file", type=str, default=None, help="CSV file of (index, value)")
    parser.add_argument("--p", type=str, default=None, help="moment exponent of ‖g‖_p (number or inf)")
    parser.add_argument("--joints", type=int, default=None, help="random joints for lemma-check")
    parser.add_argument("--k-values", dest="k_values", type=str, default=None, help="lemma-check exponents k")
    parser.add_argument("--r-values", dest="r_values", type=str, default=None, help="lemma-check norms r (inf allowed)")
    parser.add_argument("--input", type=str, default=None, help="simulate CSV for rate-fit")
    return parser


def _read_config(path):
    try:
        return read_kv(path)
    except OSError as e:
        raise ConfigError("config", str(e))


def main(argv=None):
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("subcommand", "config")}
    try:
        file_values = _read_config(args.config) if args.config else {}
        cfg = build_config(args.subcommand, file_values, flags)
        return run(cfg)
    except (ConfigError, DomainError, UnsupportedError, DegenerateModelError) as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"invalid configuration: out: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
