"""``train``: fit a model ladder and write report.json."""

from spellforge.services.training import TrainingService


def register(subparsers, parents):
    parser = subparsers.add_parser("train", parents=parents, help="Fit a model ladder")
    parser.add_argument("features", help="features.csv")
    parser.add_argument("--outcomes", default=None, help="outcomes.csv (default: beside features.csv)")
    parser.add_argument(
        "--ladder",
        default=None,
        help="Ladder JSON, or a packaged ladder: ladder, ladder_extensions, ladder_unemployment",
    )
    parser.add_argument("--outcome", choices=("any-is", "unemployment"), default=None)
    parser.add_argument(
        "--exclude-always-on", default=None, metavar="RANGE", help="Drop persons on IS throughout, e.g. 2011-2014"
    )
    parser.set_defaults(handler=run)


def run(args) -> int:
    result = TrainingService(args.out, threads=args.threads).run(
        args.features,
        outcomes=args.outcomes,
        ladder=args.ladder,
        outcome=args.outcome,
        exclude_always_on=args.exclude_always_on,
        seed=args.seed,
    )
    print(f"fitted {len(result.report.rows)} ladder row(s); report in {args.out}")
    return 0
