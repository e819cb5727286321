"""Command line: ``fracpeig {solve,oracle,monotonicity,verify}``.

Exit codes: 0 ok, 1 a verification or ordering check failed, 2 bad
configuration, 3 a solver did not converge.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from . import experiments as ex

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NONCONV = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with [domain], [problem], [weight], [solver], [output] tables")
    common.add_argument("--seed", type=int, help="override solver.seed")
    common.add_argument("--out", help=f"run directory (default: ${ex.OUTPUT_ENV} or ./{ex.DEFAULT_OUTPUT_ROOT}, plus a config digest)")
    common.add_argument("--verbose", "-v", action="store_true", help="log solver progress")

    parser = argparse.ArgumentParser(prog="fracpeig", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", parents=[common], help="first and second eigenpairs")
    solve.add_argument("--oracle", action="store_true", help="also run the exact p = 2 solver and compare")
    solve.add_argument("--dump-kernel", action="store_true", help="write kernel.csv into the run directory")

    oracle = sub.add_parser("oracle", parents=[common], help="exact spectrum for p = 2")
    oracle.add_argument("--count", type=int, help="number of eigenpairs (default: oracle.count or 2)")
    oracle.add_argument("--dump-kernel", action="store_true")

    sub.add_parser("monotonicity", parents=[common], help="compare spectra of weights m <= m_tilde")

    verify = sub.add_parser("verify", parents=[common], help="inequality sweeps and solver self-checks")
    verify.add_argument("--samples", type=int, help="samples per inequality sweep (default: suite specific)")
    return parser


def _load(args) -> ex.ExperimentConfig:
    if args.config:
        cfg = ex.ExperimentConfig.from_file(args.config)
    elif args.command == "verify":
        cfg = ex.ExperimentConfig(domain=ex.DomainSpec.interval(0.0, 1.0, 16), s=0.3)
    else:
        cfg = ex.ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.verbose:
        cfg.solver.verbose = True
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _load(args)
        if args.command == "solve":
            run_dir, report, code = ex.run_solve(cfg, args.out, args.oracle, args.dump_kernel)
            for k, row in enumerate(report["eigenpairs"], start=1):
                print(f"lambda_{k} = {row['lambda']!r}  residual {row['residual']:.2e}  converged {row['converged']}")
        elif args.command == "oracle":
            run_dir, report, code = ex.run_oracle(cfg, args.out, args.count, args.dump_kernel)
            for k, row in enumerate(report["eigenpairs"], start=1):
                print(f"lambda_{k} = {row['lambda']!r}  residual {row['residual']:.2e}")
            if report["manifest"]["oracle_truncated"]:
                print(f"only {len(report['eigenpairs'])} positive eigenvalues exist")
        elif args.command == "monotonicity":
            run_dir, rep, code = ex.run_monotonicity(cfg, args.out)
            print(f"lambda_1: {rep.lambda1_m!r} -> {rep.lambda1_mt!r}")
            print(f"lambda_2: {rep.lambda2_m!r} -> {rep.lambda2_mt!r}")
            print(f"C = {rep.constant!r}")
            print(f"claims: (i) {rep.claim_i}  (ii) {rep.claim_ii}  (iii) {rep.claim_iii}")
        else:
            rows, code = ex.run_verify(cfg, samples=args.samples)
            run_dir = ex.write_verify(rows, cfg, args.out)
            print(ex.format_table(rows))
            failed = [r.suite for r in rows if not r.passed]
            if failed:
                print("failed: " + ", ".join(failed), file=sys.stderr)
        print(f"output: {run_dir}")
        return code
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
