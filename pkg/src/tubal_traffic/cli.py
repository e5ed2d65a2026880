"""Command-line front end: ``synth``, ``recover`` and ``sweep``.

Exit codes: 0 success, 2 usage or argument error, 3 data error,
4 numerical divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .data_io import (
    NEGATIVE_POLICIES,
    DataError,
    MaskSpec,
    RecoveryReport,
    UndefinedMetricError,
    generate_mask,
    load_traffic_csv,
    nmae,
    read_mask,
    save_traffic_csv,
    shape_tensor,
    synth_low_tubal_rank,
    trial_seeds,
    unshape_tensor,
    write_mask,
)
from .solver import DivergenceError, SolverConfig, run

__all__ = ["main", "build_parser", "DEFAULT_SWEEP"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4

DEFAULT_SWEEP = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)

log = logging.getLogger("tubal_traffic")


class UsageError(Exception):
    pass


def _prob(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 <= p < 1:
        raise argparse.ArgumentTypeError(f"loss probability must lie in [0, 1), got {p}")
    return p


def _prob_list(text: str) -> tuple[float, ...]:
    ps = tuple(_prob(v) for v in text.split(",") if v.strip())
    if not ps or any(b <= a for a, b in zip(ps, ps[1:])):
        raise argparse.ArgumentTypeError("loss probabilities must be strictly increasing")
    return ps


def _positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {n}")
    return n


def _dims(text: str) -> tuple[int, int, int]:
    parts = text.lower().replace("x", ",").split(",")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must look like 20x14x9, got {text!r}") from None
    if len(dims) != 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"dims must be three positive integers, got {text!r}")
    return dims


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--rank", type=_positive_int, default=None,
                   help="factor rank r (default min(10, ceil(min(m1, m2) / 4)))")
    g.add_argument("--rho1", type=float, default=0.01, help="temporal-stability weight")
    g.add_argument("--rho2", type=float, default=0.01, help="periodicity weight")
    g.add_argument("--mu", type=float, default=1e-4, help="ridge weight on W (must be > 0)")
    g.add_argument("--alpha", type=float, default=0.5, help="X step constant (constant step rule)")
    g.add_argument("--beta", type=float, default=0.5, help="Y step constant (constant step rule)")
    g.add_argument("--step-rule", choices=("exact", "constant"), default="exact")
    g.add_argument("--tol", type=float, default=1e-6, help="termination tolerance")
    g.add_argument("--max-iters", type=int, default=2000)
    g.add_argument("--rank-adjust", choices=("off", "decrease-on-plateau"), default="off")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="OD x time CSV")
    p.add_argument("--slots-per-day", type=_positive_int, required=True)
    p.add_argument("--delimiter", default=",")
    p.add_argument("--header", action="store_true", help="skip the first line of the CSV")
    p.add_argument("--negative", choices=NEGATIVE_POLICIES, default="reject",
                   help="handling of negative volumes (use 'allow' for signed synthetic data)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=_positive_int, default=None)
    p.add_argument("--threads", type=_positive_int, default=1,
                   help="worker threads for independent trials; results do not depend on it")
    p.add_argument("--report", help="JSON report path")
    p.add_argument("--timings", action="store_true",
                   help="record wall time in the report (makes it run-dependent)")
    _add_solver_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tubal-traffic",
        description="Traffic tensor completion with low-tubal-rank factorization.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("recover", help="complete one masked traffic matrix")
    _add_run_flags(rec)
    src = rec.add_mutually_exclusive_group(required=True)
    src.add_argument("--mask", help="mask file of observed coordinates")
    src.add_argument("--loss-p", type=_prob, help="random loss probability")
    rec.add_argument("--out", help="recovered OD x time CSV (first trial)")

    sw = sub.add_parser("sweep", help="NMAE against loss probability")
    _add_run_flags(sw)
    sw.add_argument("--loss-p", type=_prob_list, default=DEFAULT_SWEEP,
                    help="comma-separated, strictly increasing loss probabilities")
    sw.add_argument("--out", help="CSV table path (default stdout)")

    sy = sub.add_parser("synth", help="write a low-tubal-rank fixture and a mask")
    sy.add_argument("--dims", type=_dims, required=True, help="m1 x m2 x m3, e.g. 20x14x9")
    sy.add_argument("--r0", type=int, required=True)
    sy.add_argument("--noise", type=float, default=0.0)
    sy.add_argument("--smoothness", type=float, default=0.0,
                    help="Gaussian correlation width of the factors (0 = independent entries)")
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--loss-p", type=_prob, default=0.5)
    sy.add_argument("--out", required=True, help="ground-truth OD x time CSV")
    sy.add_argument("--mask-out", required=True, help="mask file")
    return parser


def _config(args, seed: int) -> SolverConfig:
    try:
        return SolverConfig(rank=args.rank, rho1=args.rho1, rho2=args.rho2, mu=args.mu,
                            alpha=args.alpha, beta=args.beta, tol=args.tol,
                            max_iters=args.max_iters, rank_adjust=args.rank_adjust,
                            step_rule=args.step_rule, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load(args) -> np.ndarray:
    try:
        m = load_traffic_csv(args.input, delimiter=args.delimiter, header=args.header,
                             negative=args.negative)
    except OSError as exc:
        raise DataError(f"cannot read {args.input}: {exc.strerror}") from None
    return shape_tensor(m, args.slots_per_day)


def _trial(G, mask, cfg: SolverConfig):
    res = run(G, mask, cfg)
    try:
        err = nmae(G, res.W, mask)
    except UndefinedMetricError:
        err = None
    return res, err


def _map(fn, jobs, threads: int):
    """Ordered map; a thread pool only changes when jobs run, not their results."""
    if threads <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda j: fn(*j), jobs))


def _echo(args, **extra) -> dict:
    base = _config(args, args.seed).to_dict()
    base.pop("record_diagnostics", None)
    base.update(input=args.input, slots_per_day=args.slots_per_day, **extra)
    return base


def cmd_recover(args) -> int:
    t0 = time.perf_counter()
    G = _load(args)
    if args.mask:
        try:
            mask = read_mask(args.mask)
        except OSError as exc:
            raise DataError(f"cannot read {args.mask}: {exc.strerror}") from None
        if mask.shape != G.shape:
            raise DataError(f"mask dims {mask.shape} do not match data dims {G.shape}")
        if args.trials not in (None, 1):
            raise UsageError("--trials needs --loss-p; a mask file defines a single trial")
        jobs = [(G, mask, _config(args, args.seed))]
    else:
        seeds = trial_seeds(args.seed, args.trials or 1)
        jobs = [(G, generate_mask(G.shape, MaskSpec(args.loss_p, s)), _config(args, s))
                for s in seeds]
    if not jobs[0][1].any():
        raise DataError("mask observes no entries")
    results = _map(_trial, jobs, args.threads)
    first = results[0][0]
    if args.out:
        save_traffic_csv(args.out, unshape_tensor(first.W), delimiter=args.delimiter)
    report = RecoveryReport(
        config=_echo(args, loss_p=args.loss_p, mask=args.mask, trials=len(jobs)),
        nmae_trials=[e for _, e in results],
        objective_trace=first.trace,
        iterations=first.iterations,
        wall_ms=(time.perf_counter() - t0) * 1e3 if args.timings else None,
        extra={"iterations_trials": [r.iterations for r, _ in results],
               "converged_trials": [r.converged for r, _ in results]},
    )
    if args.report:
        report.write(args.report)
    mean = report.nmae_mean
    print(f"nmae_mean={'n/a' if mean is None else format(mean, '.6g')} "
          f"trials={len(jobs)} iterations={first.iterations}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    G = _load(args)
    seeds = trial_seeds(args.seed, args.trials or 10)
    jobs = [(G, generate_mask(G.shape, MaskSpec(p, s)), _config(args, s))
            for p in args.loss_p for s in seeds]
    results = _map(_trial, jobs, args.threads)
    n = len(seeds)
    rows, points = ["loss_p,nmae_mean,nmae_std"], []
    for i, p in enumerate(args.loss_p):
        errs = [e for _, e in results[i * n:(i + 1) * n]]
        vals = np.array([e for e in errs if e is not None])
        mean = float(vals.mean()) if vals.size else float("nan")
        std = float(vals.std()) if vals.size else float("nan")
        rows.append(f"{p!r},{mean!r},{std!r}")
        points.append({"loss_p": p, "nmae_mean": None if not vals.size else mean,
                       "nmae_std": None if not vals.size else std, "nmae_trials": errs,
                       "iterations_trials": [r.iterations for r, _ in results[i * n:(i + 1) * n]]})
    table = "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(table)
    else:
        sys.stdout.write(table)
    if args.report:
        first = results[0][0]
        RecoveryReport(
            config=_echo(args, loss_p=list(args.loss_p), trials=n),
            nmae_trials=points[0]["nmae_trials"],
            objective_trace=first.trace,
            iterations=first.iterations,
            wall_ms=(time.perf_counter() - t0) * 1e3 if args.timings else None,
            extra={"sweep": points},
        ).write(args.report)
    return EXIT_OK


def cmd_synth(args) -> int:
    m1, m2, m3 = args.dims
    if not 0 <= args.r0 <= min(m1, m2):
        raise UsageError(f"--r0 must lie in [0, {min(m1, m2)}] for dims {args.dims}")
    if args.noise < 0 or args.smoothness < 0:
        raise UsageError("--noise and --smoothness must be nonnegative")
    T = synth_low_tubal_rank(args.dims, args.r0, args.seed, args.noise, args.smoothness)
    save_traffic_csv(args.out, unshape_tensor(T))
    write_mask(args.mask_out, generate_mask(T.shape, MaskSpec(args.loss_p, args.seed)))
    print(f"wrote {args.out} ({m3} rows x {m1 * m2} columns, slots-per-day {m1}) "
          f"and {args.mask_out}")
    return EXIT_OK


COMMANDS = {"recover": cmd_recover, "sweep": cmd_sweep, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
