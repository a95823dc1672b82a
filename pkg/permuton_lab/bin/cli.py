#!/usr/bin/env python

"""Command line entry point for permuton-lab experiments."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import pandas as pd

from .. import diagnostics, exact_oracle, intensity, io
from ..errors import QuadratureError
from ..perm_core import Permutation, format_graph, separable_permutations
from ..permuton_ops import GridMeasure
from ..samplers.base import ChainConfig, Sampler, path_rng
from ..samplers.chain import InflationChain, sample_cographs
from ..samplers.order import OrderStream, RankInsertion, lambda_of_stream
from ..tree_density import (
    ExactDist,
    count_inc_trees,
    descent_law,
    exact_distribution,
)

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

_SEED_ENV = "PERMUTON_LAB_SEED"

_DEFAULT_SEEDS = {
    "sample": 11,
    "exact": 0,
    "density": 0,
    "intensity": 23,
    "diag": 37,
    "compare": 41,
}

_EXIT_VALIDATION = 1
_EXIT_IO = 3

###############################################################################


@dataclass
class Output:
    frame: pd.DataFrame | None = None
    grid: GridMeasure | None = None
    text: str | None = None


def exact_probability(text: str) -> Fraction:
    """Parse a rational flag such as 1/2; decimals are refused on exact paths."""
    if "." in text or "e" in text.lower():
        raise argparse.ArgumentTypeError(
            f"exact paths need a rational such as 1/2, got '{text}'"
        )
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as e:
        raise argparse.ArgumentTypeError(f"invalid rational '{text}'") from e


def mc_probability(text: str) -> float:
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError) as e:
        raise argparse.ArgumentTypeError(f"invalid probability '{text}'") from e


def _check_common(args: argparse.Namespace) -> None:
    p = getattr(args, "p", None)
    if p is not None and not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    n = getattr(args, "n", None)
    if n is not None and n < 1:
        raise ValueError(f"n must be >= 1, got {n}")


def _resolve_seed(args: argparse.Namespace) -> int:
    if args.seed is not None:
        return args.seed
    if _SEED_ENV in os.environ:
        return int(os.environ[_SEED_ENV])
    return _DEFAULT_SEEDS[args.group]


def _tqdm_kwargs(args: argparse.Namespace) -> dict:
    return {"disable": args.verbose == 0, "leave": False}


def _frame_of_dist(dist: ExactDist) -> pd.DataFrame:
    return dist.to_dataframe()


###############################################################################
# Handlers


def _sample_perms(sampler: type[Sampler], args: argparse.Namespace) -> Output:
    cfg = ChainConfig(p=args.p, seed=args.seed, n_target=args.n)
    df = sampler.get_samples(
        cfg, args.count, args.threads, tqdm_kwargs=_tqdm_kwargs(args)
    )
    df["permutation"] = df["permutation"].map(str)
    return Output(frame=df, text="\n".join(df["permutation"]))


def run_sample_perm(args: argparse.Namespace) -> Output:
    return _sample_perms(InflationChain, args)


def run_sample_lambda(args: argparse.Namespace) -> Output:
    if args.stream is None:
        return _sample_perms(RankInsertion, args)

    stream = OrderStream.read_csv(args.stream)
    sigma = lambda_of_stream(stream, args.n)
    return Output(
        frame=pd.DataFrame({"n": [args.n], "permutation": [str(sigma)]}),
        text=str(sigma),
    )


def run_sample_stream(args: argparse.Namespace) -> Output:
    stream = OrderStream.generate(args.length, args.p, path_rng(args.seed))
    return Output(frame=stream.to_dataframe())


def run_sample_cograph(args: argparse.Namespace) -> Output:
    cfg = ChainConfig(p=args.p, seed=args.seed, n_target=args.n)
    graphs = sample_cographs(cfg, args.count, _tqdm_kwargs(args))
    frame = pd.DataFrame(
        {
            "index": range(len(graphs)),
            "n": args.n,
            "edges": [
                ";".join(f"{i}-{j}" for i, j in sorted(map(sorted, g.edges)))
                for g in graphs
            ],
        }
    )
    return Output(frame=frame, text="\n\n".join(format_graph(g) for g in graphs))


def run_exact_dist(args: argparse.Namespace) -> Output:
    if args.method == "formula":
        dist = exact_distribution(args.n, args.p)
    else:
        dist = exact_oracle.enumerate_law(args.n, args.p)
    return Output(frame=_frame_of_dist(dist))


def run_exact_descents(args: argparse.Namespace) -> Output:
    return Output(frame=_frame_of_dist(descent_law(args.n, args.p)))


def _deviation_frame(check: str, args: argparse.Namespace, value: object) -> Output:
    frame = pd.DataFrame(
        {
            "check": [check],
            "n": [args.n],
            "p": [str(args.p)],
            "max_deviation": [str(value)],
        }
    )
    return Output(frame=frame)


def run_exact_consistency(args: argparse.Namespace) -> Output:
    value = exact_oracle.check_consistency(args.n, args.p)
    return _deviation_frame("consistency", args, value)


def run_exact_self_similarity(args: argparse.Namespace) -> Output:
    if args.graphs:
        value = exact_oracle.check_cograph_self_similarity(args.n, args.p)
        return _deviation_frame("cograph_self_similarity", args, value)

    value = exact_oracle.check_self_similarity(args.n, args.p)
    return _deviation_frame("self_similarity", args, value)


def run_exact_cograph(args: argparse.Namespace) -> Output:
    laws = {
        "pushforward": exact_oracle.cograph_law,
        "chain": exact_oracle.cograph_chain_law,
        "formula": exact_oracle.cograph_formula_law,
    }
    if args.method == "agreement":
        value = exact_oracle.check_cograph_agreement(args.n, args.p)
        return _deviation_frame("cograph_agreement", args, value)

    return Output(frame=_frame_of_dist(laws[args.method](args.n, args.p)))


def run_exact_ninc(args: argparse.Namespace) -> Output:
    if args.perm is not None:
        pi = Permutation.parse(args.perm)
        count = count_inc_trees(pi)
        return Output(
            frame=pd.DataFrame({"pattern": [str(pi)], "n_inc": [count]}),
            text=str(count),
        )

    rows = [(str(pi), count_inc_trees(pi)) for pi in separable_permutations(args.n)]
    return Output(frame=pd.DataFrame(rows, columns=["pattern", "n_inc"]))


def run_density_point(args: argparse.Namespace) -> Output:
    value = intensity.intensity_density(args.p, args.x, args.y, args.tol)
    text = "divergent" if value is intensity.DIVERGENT else f"{value:.17g}"
    frame = pd.DataFrame(
        {"p": [args.p], "x": [args.x], "y": [args.y], "density": [text]}
    )
    return Output(frame=frame, text=text)


def run_density_marginal(args: argparse.Namespace) -> Output:
    value = intensity.marginal_density(args.p, args.x)
    return Output(
        frame=pd.DataFrame({"p": [args.p], "x": [args.x], "marginal": [value]}),
        text=f"{value:.17g}",
    )


def run_intensity_closed_form(args: argparse.Namespace) -> Output:
    grid = intensity.density_grid(
        args.p,
        args.grid,
        order=args.order,
        mc_samples=args.mc_samples,
        seed=args.seed,
        raise_on_error=not args.lenient,
        tqdm_kwargs=_tqdm_kwargs(args),
    )
    return Output(grid=grid)


def run_intensity_empirical(args: argparse.Namespace) -> Output:
    grid = intensity.empirical_intensity_grid(
        args.n,
        args.count,
        args.p,
        args.grid,
        seed=args.seed,
        threads=args.threads,
        tqdm_kwargs=_tqdm_kwargs(args),
    )
    return Output(grid=grid)


def run_intensity_sampled(args: argparse.Namespace) -> Output:
    x, y = intensity.sample_intensity(args.p, args.draws, path_rng(args.seed))
    return Output(grid=intensity.histogram_grid(x, y, args.grid))


def run_diag_sampler_tv(args: argparse.Namespace) -> Output:
    return Output(
        frame=diagnostics.sampler_agreement(
            args.n,
            args.p,
            args.draws,
            args.seed,
            args.threads,
            _tqdm_kwargs(args),
        )
    )


def run_diag_descents(args: argparse.Namespace) -> Output:
    statistic, pvalue = diagnostics.descent_chi_square(
        args.n, args.p, args.draws, args.seed, args.threads
    )
    frame = pd.DataFrame(
        {"n": [args.n], "p": [args.p], "chi_square": [statistic], "p_value": [pvalue]}
    )
    return Output(frame=frame)


def run_diag_psi(args: argparse.Namespace) -> Output:
    return Output(
        frame=diagnostics.psi_fixed_point_table(
            args.p, args.draws, args.seed, args.steps
        )
    )


def run_diag_convergence(args: argparse.Namespace) -> Output:
    sizes = [int(size) for size in args.sizes.split(",")]
    return Output(
        frame=diagnostics.convergence_table(
            args.p,
            sizes,
            args.streams,
            args.depth,
            args.seed,
            _tqdm_kwargs(args),
        )
    )


def run_diag_separability(args: argparse.Namespace) -> Output:
    return Output(
        frame=diagnostics.separability_check(
            args.n,
            args.p,
            args.count,
            args.graph_n,
            args.graph_count,
            args.seed,
            args.threads,
        )
    )


def run_compare_brownian(args: argparse.Namespace) -> Output:
    return Output(
        frame=diagnostics.compare_models(
            args.p,
            args.n_perm,
            args.m,
            args.k,
            args.reps,
            args.eps,
            args.corner_reps,
            args.realizations,
            args.seed,
            args.threads,
            _tqdm_kwargs(args),
        )
    )


###############################################################################
# Parser


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Run seed.")
    common.add_argument(
        "--out",
        type=Path,
        default=None,
        help="Data file to write atomically, with a manifest beside it.",
    )
    common.add_argument("--threads", type=int, default=1, help="Worker threads.")
    common.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Increase logging (-v info, -vv debug).",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="permuton-lab",
        description="Recursive separable permutations, permutons and cographs.",
    )
    groups = parser.add_subparsers(dest="group", required=True)

    def action(group: argparse._SubParsersAction, name: str, summary: str, run):
        sub = group.add_parser(
            name, parents=[common], help=summary, description=summary
        )
        sub.set_defaults(run=run)
        return sub

    # sample
    sample = groups.add_parser("sample", help="Draw random objects.")
    sample_actions = sample.add_subparsers(dest="action", required=True)
    sub = action(
        sample_actions,
        "perm",
        "Permutations from the value-inflation chain.",
        run_sample_perm,
    )
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--p", type=mc_probability, default=0.5)
    sub.add_argument("--count", type=int, default=1)
    sub = action(
        sample_actions,
        "lambda",
        "Permutations of the random order on uniform points, by rank insertion.",
        run_sample_lambda,
    )
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--p", type=mc_probability, default=0.5)
    sub.add_argument("--count", type=int, default=1)
    sub.add_argument(
        "--stream", type=Path, default=None, help="Read (U_j, S_j) from a CSV file."
    )
    sub = action(
        sample_actions,
        "stream",
        "A stream of uniform points and signs defining the random order.",
        run_sample_stream,
    )
    sub.add_argument("--length", type=int, required=True)
    sub.add_argument("--p", type=mc_probability, default=0.5)
    sub = action(
        sample_actions,
        "cograph",
        "Graphs from the vertex-duplication chain.",
        run_sample_cograph,
    )
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--p", type=mc_probability, default=0.5)
    sub.add_argument("--count", type=int, default=1)

    # exact
    exact = groups.add_parser("exact", help="Exact rational laws and checks.")
    exact_actions = exact.add_subparsers(dest="action", required=True)
    sub = action(
        exact_actions,
        "dist",
        "Exact law at size n: tree-count formula or chain enumeration.",
        run_exact_dist,
    )
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--p", type=exact_probability, required=True)
    sub.add_argument("--method", choices=["formula", "enumerate"], default="formula")
    sub = action(
        exact_actions,
        "descents",
        "Binomial(n-1, 1-p) law of the descent count.",
        run_exact_descents,
    )
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--p", type=exact_probability, required=True)
    sub = action(
        exact_actions,
        "consistency",
        "Removing a uniform point of size n+1 gives the law at size n.",
        run_exact_consistency,
    )
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--p", type=exact_probability, required=True)
    sub = action(
        exact_actions,
        "self-similarity",
        "The law at size n is a p-mixture of sums of independent smaller copies "
        "with a uniform split size; prints the largest gap, 0 when this holds.",
        run_exact_self_similarity,
    )
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--p", type=exact_probability, required=True)
    sub.add_argument(
        "--graphs", action="store_true", help="Check the cograph analogue instead."
    )
    sub = action(
        exact_actions,
        "cograph",
        "Exact cograph law through the inversion graph, the chain or the cotree "
        "formula.",
        run_exact_cograph,
    )
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--p", type=exact_probability, required=True)
    sub.add_argument(
        "--method",
        choices=["pushforward", "chain", "formula", "agreement"],
        default="pushforward",
    )
    sub = action(
        exact_actions,
        "ninc",
        "Number of increasing decorated binary trees evaluating to a permutation.",
        run_exact_ninc,
    )
    target = sub.add_mutually_exclusive_group(required=True)
    target.add_argument("--perm", type=str, help="One-line notation, e.g. '2 1 3'.")
    target.add_argument("--n", type=int, help="Tabulate every separable pattern.")

    # density
    density = groups.add_parser("density", help="Closed-form intensity density.")
    density_actions = density.add_subparsers(dest="action", required=True)
    sub = action(
        density_actions,
        "point",
        "Density of the intensity measure at (x, y) by singular quadrature.",
        run_density_point,
    )
    sub.add_argument("--p", type=mc_probability, required=True)
    sub.add_argument("--x", type=float, required=True)
    sub.add_argument("--y", type=float, required=True)
    sub.add_argument("--tol", type=float, default=1e-8)
    sub = action(
        density_actions,
        "marginal",
        "Integral of the density over y, which equals 1 for a permuton.",
        run_density_marginal,
    )
    sub.add_argument("--p", type=mc_probability, required=True)
    sub.add_argument("--x", type=float, required=True)

    # intensity
    grids = groups.add_parser("intensity", help="Intensity grids.")
    grid_actions = grids.add_subparsers(dest="action", required=True)
    sub = action(
        grid_actions,
        "closed-form",
        "Cell-integrated closed-form density; singular cells from sampling.",
        run_intensity_closed_form,
    )
    sub.add_argument("--p", type=mc_probability, required=True)
    sub.add_argument("--grid", type=int, default=20)
    sub.add_argument("--order", type=int, default=6)
    sub.add_argument("--mc-samples", type=int, default=200_000)
    sub.add_argument(
        "--lenient",
        action="store_true",
        help="Fill cells whose quadrature fails from sampled counts.",
    )
    sub = action(
        grid_actions,
        "empirical",
        "Average grid permuton of independent permutations of size n.",
        run_intensity_empirical,
    )
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--count", type=int, required=True)
    sub.add_argument("--p", type=mc_probability, required=True)
    sub.add_argument("--grid", type=int, default=20)
    sub = action(
        grid_actions,
        "sampled",
        "Histogram of draws (U, U X + (1-U) X') with Beta X, X'.",
        run_intensity_sampled,
    )
    sub.add_argument("--p", type=mc_probability, required=True)
    sub.add_argument("--draws", type=int, default=1_000_000)
    sub.add_argument("--grid", type=int, default=20)

    # diag
    diag = groups.add_parser("diag", help="Monte Carlo diagnostics.")
    diag_actions = diag.add_subparsers(dest="action", required=True)
    sub = action(
        diag_actions,
        "sampler-tv",
        "Both samplers give the same law: total-variation distances.",
        run_diag_sampler_tv,
    )
    sub.add_argument("--n", type=int, default=5)
    sub.add_argument("--p", type=mc_probability, default=0.5)
    sub.add_argument("--draws", type=int, default=1_000_000)
    sub = action(
        diag_actions,
        "descents",
        "Chi-square test of descent counts against Binomial(n-1, 1-p).",
        run_diag_descents,
    )
    sub.add_argument("--n", type=int, default=50)
    sub.add_argument("--p", type=mc_probability, default=0.3)
    sub.add_argument("--draws", type=int, default=100_000)
    sub = action(
        diag_actions,
        "psi",
        "Beta(p, 1-p) is the fixed point of Psi_p: moment rows match within a "
        "few stderr and W1 ratios stay near 1/2.",
        run_diag_psi,
    )
    sub.add_argument("--p", type=mc_probability, default=0.5)
    sub.add_argument("--draws", type=int, default=1_000_000)
    sub.add_argument("--steps", type=int, default=3)
    sub = action(
        diag_actions,
        "convergence",
        "L1 distance of f_lambda_n to the deep limit function on shared streams.",
        run_diag_convergence,
    )
    sub.add_argument("--p", type=mc_probability, default=0.5)
    sub.add_argument("--sizes", type=str, default="100,1000")
    sub.add_argument("--streams", type=int, default=50)
    sub.add_argument("--depth", type=int, default=999)
    sub = action(
        diag_actions,
        "separability",
        "Chain samples avoid 3142 and 2413; cograph samples are P4-free.",
        run_diag_separability,
    )
    sub.add_argument("--n", type=int, default=100)
    sub.add_argument("--p", type=mc_probability, default=0.5)
    sub.add_argument("--count", type=int, default=10_000)
    sub.add_argument("--graph-n", type=int, default=50)
    sub.add_argument("--graph-count", type=int, default=1_000)

    # compare
    compare = groups.add_parser("compare", help="Model comparisons.")
    compare_actions = compare.add_subparsers(dest="action", required=True)
    sub = action(
        compare_actions,
        "brownian",
        "Descent density and corner events, recursive model vs Brownian surrogate: "
        "only the Brownian model charges both left corners with high frequency.",
        run_compare_brownian,
    )
    sub.add_argument("--p", type=mc_probability, default=0.3)
    sub.add_argument("--n-perm", type=int, default=2000)
    sub.add_argument("--m", type=int, default=10_000)
    sub.add_argument("--k", type=int, default=20)
    sub.add_argument("--reps", type=int, default=10_000)
    sub.add_argument("--eps", type=float, default=0.05)
    sub.add_argument("--corner-reps", type=int, default=500)
    sub.add_argument("--realizations", type=int, default=1)

    return parser


###############################################################################


def _emit(result: Output, args: argparse.Namespace) -> None:
    if args.out is None:
        if result.text is not None:
            sys.stdout.write(result.text + "\n")
        elif result.grid is not None:
            result.grid.to_dataframe().to_csv(
                sys.stdout,
                header=False,
                index=False,
                float_format="%.17g",
                lineterminator="\n",
            )
        elif result.frame is not None:
            result.frame.to_csv(sys.stdout, index=False, lineterminator="\n")
        return

    if result.grid is not None:
        io.atomic_write(args.out, result.grid.to_csv)
    elif result.frame is not None:
        io.write_csv(result.frame, args.out)
    else:
        io.atomic_write(
            args.out, lambda tmp: tmp.write_text((result.text or "") + "\n")
        )


def _flags(args: argparse.Namespace) -> dict:
    return {
        key: str(value) if isinstance(value, (Fraction, Path)) else value
        for key, value in vars(args).items()
        if key != "run"
    }


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level={0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG),
        format="[%(levelname)4s: %(module)s:%(lineno)4s %(asctime)s] %(message)s",
        stream=sys.stderr,
    )

    start = time.perf_counter()
    try:
        args.seed = _resolve_seed(args)
        _check_common(args)
        result = args.run(args)
        _emit(result, args)
        if args.out is not None:
            io.write_manifest(
                args.out,
                command=[args.group, args.action],
                flags=_flags(args),
                seed=args.seed,
                wall_time=time.perf_counter() - start,
            )
    except ValueError as e:
        log.error(f"Error while running {args.group} {args.action}: {e}")
        return _EXIT_VALIDATION
    except QuadratureError as e:
        log.error(
            f"Error while running {args.group} {args.action}: {e} "
            f"(estimate {e.estimate:.6g}, abserr {e.abserr:.2g})"
        )
        return _EXIT_VALIDATION
    except OSError as e:
        log.error(f"Error while writing results: {e}")
        return _EXIT_IO

    return 0


if __name__ == "__main__":
    sys.exit(main())
