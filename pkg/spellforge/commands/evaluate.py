"""``evaluate``: re-score saved models."""

from spellforge.services.evaluation import EvaluationService


def register(subparsers, parents):
    parser = subparsers.add_parser("evaluate", parents=parents, help="Score saved models on a feature matrix")
    parser.add_argument("features", help="features.csv")
    parser.add_argument("models", nargs="+", help="Model files, model directories or report.json")
    parser.add_argument("--outcomes", default=None, help="outcomes.csv (default: beside features.csv)")
    parser.add_argument("--outcome", choices=("any-is", "unemployment"), default=None)
    parser.add_argument("--exclude-always-on", default=None, metavar="RANGE")
    parser.add_argument("--all-rows", action="store_true", help="Score every row instead of the holdout split")
    parser.set_defaults(handler=run)


def run(args) -> int:
    document, path = EvaluationService(args.out, threads=args.threads).run(
        args.features,
        args.models,
        outcomes=args.outcomes,
        outcome=args.outcome,
        exclude_always_on=args.exclude_always_on,
        all_rows=args.all_rows,
        seed=args.seed,
    )
    for row in document.rows:
        print(f"{row.label}: MSE {row.report.mse:.5f} on {row.report.n} {document.sample} rows")
    return 0
