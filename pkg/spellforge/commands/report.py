"""``report``: render report.json as a table and a histogram CSV."""

from spellforge.services.report import ReportService


def register(subparsers, parents):
    parser = subparsers.add_parser("report", parents=parents, help="Render report.json")
    parser.add_argument("report", help="report.json written by train")
    parser.set_defaults(handler=run)


def run(args) -> int:
    out = None if args.out == "." else args.out
    result = ReportService(out).run(args.report)
    print(result.table, end="")
    return 0
