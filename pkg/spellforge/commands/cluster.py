"""``cluster``: group persons predicted to be at risk."""

from spellforge.models import ClusterConfig
from spellforge.services.clustering import ClusterService, load_cluster_config


def register(subparsers, parents):
    parser = subparsers.add_parser("cluster", parents=parents, help="Cluster predicted at-risk persons")
    parser.add_argument("model", help="Model artifact JSON")
    parser.add_argument("features", help="features.csv")
    parser.add_argument("--config", default=None, help="Cluster config JSON")
    parser.add_argument("--threshold", type=float, default=None, help="At-risk prediction threshold")
    parser.add_argument("--linkage", choices=("ward", "average", "complete"), default=None)
    parser.add_argument("--k-max", type=int, default=None)
    parser.add_argument("--k", type=int, default=None, help="Force the group count")
    parser.set_defaults(handler=run)


def run(args) -> int:
    config = load_cluster_config(args.config)
    overrides = {
        "threshold": args.threshold,
        "linkage": args.linkage,
        "k_max": args.k_max,
        "k": args.k,
    }
    config = ClusterConfig.model_validate(
        {**config.model_dump(), **{k: v for k, v in overrides.items() if v is not None}}
    )
    result = ClusterService(args.out, threads=args.threads).run(
        args.model, args.features, config_path=args.config, config=config, seed=args.seed
    )
    report = result.report
    if report.k is None:
        print(f"no person predicted above {report.threshold}; empty report written")
    else:
        print(f"{report.n_at_risk} at-risk persons in {report.k} group(s)")
    return 0
