"""``synth``: generate a synthetic cohort."""

from spellforge.services.synth import SynthService


def register(subparsers, parents):
    parser = subparsers.add_parser("synth", parents=parents, help="Generate a synthetic cohort")
    parser.add_argument(
        "dgp", nargs="?", default=None, help="dgp.json path or packaged config name (default paperlike-v1)"
    )
    parser.add_argument("--n-persons", type=int, default=None, help="Override the config's cohort size")
    parser.add_argument(
        "--oracle-draws",
        type=int,
        default=0,
        help="Estimate the attainable R-squared from this many draws and record it",
    )
    parser.set_defaults(handler=run)


def run(args) -> int:
    result = SynthService(args.out, threads=args.threads).run(
        args.dgp, seed=args.seed, n_persons=args.n_persons, oracle_draws=args.oracle_draws
    )
    print(f"wrote {result.cohort.n} persons to {args.out} (manifest {result.manifest.name})")
    if result.config.oracle_r2 is not None:
        print(f"oracle R2: {result.config.oracle_r2:.4f}")
    return 0
