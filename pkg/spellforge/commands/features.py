"""``features``: derive the feature matrix and outcomes."""

from spellforge.services.features import FeatureService


def register(subparsers, parents):
    parser = subparsers.add_parser("features", parents=parents, help="Build features.csv and outcomes.csv")
    parser.add_argument("spells", help="spells.csv")
    parser.add_argument("persons", help="persons.csv")
    parser.add_argument("--catalog", default=None, help="Feature catalog JSON (default: packaged catalog)")
    parser.add_argument("--jobs", default=None, help="jobs.csv")
    parser.add_argument("--events", default=None, help="events.csv")
    parser.add_argument("--parent-links", default=None, help="parent_links.csv")
    parser.add_argument(
        "--always-on-window",
        action="append",
        default=None,
        help="Window for an isprop_<a>_<b> column, e.g. 2011-2014 (repeatable)",
    )
    parser.set_defaults(handler=run)


def run(args) -> int:
    service = FeatureService(args.out, threads=args.threads)
    result = service.run(
        args.spells,
        args.persons,
        catalog=args.catalog,
        jobs=args.jobs,
        events=args.events,
        parent_links=args.parent_links,
        always_on_windows=args.always_on_window or ("2011-2014",),
    )
    print(f"wrote {result.matrix.n} x {result.matrix.k} feature matrix to {args.out}")
    return 0
