"""Command line entry point: ``srlk <command> ...``.

Exit codes: 0 success, 2 invalid input or config, 3 a checked inequality failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import core
from .core import ValidationError
from .experiments import (
    ExperimentConfig,
    _solver,
    build_candidates,
    dumps,
    gen_synthetic,
    sweep_sample_complexity,
    verify_indicator_bound,
    verify_uniform_convergence,
    write_jsonl,
    write_summary_csv,
)
from .kmeans import kmeans
from .learner import LearnProblem, term_learn
from .partition import delta
from .uniqueness import check_uniqueness

log = logging.getLogger("srlk")

EXIT_INVALID = 2
EXIT_VIOLATION = 3


class Violation(Exception):
    pass


def _raw_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _pick(args, cfg: dict, name: str, default=None):
    v = getattr(args, name, None)
    if v is not None:
        return v
    return cfg.get(name, default)


def _experiment_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ValidationError("this command needs --config")
    raw = _raw_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.workers is not None:
        raw["workers"] = args.workers
    return ExperimentConfig.from_dict(raw)


def _out_dir(args, cfg_out=None) -> Path:
    out = args.out or cfg_out
    if out is None:
        raise ValidationError("no output location: pass --out")
    return Path(out)


def _sample_ids(arg) -> list[int] | None:
    if arg is None:
        return None
    p = Path(arg)
    if p.exists():
        text = p.read_text().replace("\n", ",")
    else:
        text = arg
    return [int(t) for t in text.split(",") if t.strip()]


# --------------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    cfg = _experiment_config(args)
    X, C = gen_synthetic(cfg.data, cfg.seed)
    out = _out_dir(args, cfg.out)
    core.write_dataset(X, out / "data.csv")
    core.write_clustering(C, out / "clustering.csv")
    print(dumps({"n": X.n, "dim": X.dim, "k": C.k, "data": str(out / "data.csv"), "clustering": str(out / "clustering.csv")}))
    return 0


def cmd_diff(args) -> int:
    cfg = _raw_config(args.config)
    k = _pick(args, cfg, "k")
    C1 = core.read_clustering(args.first, k)
    C2 = core.read_clustering(args.second, k)
    if k is None and C1.k != C2.k:
        k = max(C1.k, C2.k)
        C1, C2 = core.Clustering(k, C1.ids, C1.labels), core.Clustering(k, C2.ids, C2.labels)
    S = _sample_ids(args.sample)
    if S is not None:
        if not S:
            raise ValidationError("sample is empty")
        C1, C2 = core.restrict(C1, S), core.restrict(C2, S)
    match = delta(C1, C2)
    rec = {
        "value": match.value,
        "numerator": match.numerator,
        "denominator": match.size,
        "sigma": list(match.sigma),
        "per_block": list(match.per_block),
    }
    text = dumps(rec)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def cmd_kmeans(args) -> int:
    cfg = _raw_config(args.config)
    X = core.read_dataset(_pick(args, cfg, "data"))
    f = core.read_mapping(_pick(args, cfg, "mapping"))
    k = int(_pick(args, cfg, "k"))
    seed = int(_pick(args, cfg, "seed", 0))
    restarts = int(_pick(args, cfg, "restarts", 10))
    policy = "exact" if (args.exact or cfg.get("exact")) else "lloyd"
    sol = kmeans(X, f, k, policy=policy, seed=seed, restarts=restarts)
    rec = {"cost": sol.cost, "method": sol.method, "k": k, "restarts": sol.restarts_used}
    if sol.is_exact:
        rec.update(second_cost=sol.second_cost, n_optimal=sol.n_optimal)
    if args.out:
        core.write_clustering(sol.clustering, args.out)
        rec["clustering"] = str(args.out)
    print(dumps(rec))
    return 0


def cmd_learn(args) -> int:
    cfg = _experiment_config(args)
    X = core.read_dataset(args.data)
    Y = core.read_clustering(args.sample_clustering, cfg.k)
    candidates = build_candidates(cfg, X)
    solver = _solver(cfg)
    problem = LearnProblem(X, Y.ids, Y, candidates, cfg.k, policy=solver["policy"], seed=solver["seed"], restarts=solver["restarts"])
    res = term_learn(problem)
    out = _out_dir(args, cfg.out)
    core.write_mapping(res.f_hat, out / "mapping.csv")
    core.write_clustering(res.full_clustering, out / "clustering.csv")
    rows = [
        {"candidate": i, "loss": float(loss), "matrix": json.dumps(c.matrix.tolist())}
        for i, (c, loss) in enumerate(zip(candidates, res.per_candidate_losses))
    ]
    write_summary_csv(rows, out / "losses.csv")
    print(dumps({"chosen": res.index, "empirical_loss": res.empirical_loss, "candidates": len(candidates)}))
    return 0


def cmd_check_unique(args) -> int:
    cfg = _raw_config(args.config)
    X = core.read_dataset(_pick(args, cfg, "data"))
    f = core.read_mapping(_pick(args, cfg, "mapping"))
    k = int(_pick(args, cfg, "k"))
    eta = float(_pick(args, cfg, "eta"))
    eps = float(_pick(args, cfg, "eps"))
    method = _pick(args, cfg, "method", "auto")
    seed = int(_pick(args, cfg, "seed", 0))
    v = check_uniqueness(X, f, k, eta, eps, method=method, seed=seed)
    rec = v.record()
    rec["witness"] = None
    if args.out:
        out = Path(args.out)
        if v.witness is not None:
            wpath = out.with_suffix(".witness.csv")
            core.write_clustering(v.witness, wpath)
            rec["witness"] = wpath.name
        write_jsonl([rec], out)
    print(dumps(rec))
    return 0


def cmd_sweep(args) -> int:
    cfg = _experiment_config(args)
    res = sweep_sample_complexity(cfg)
    res.write(_out_dir(args, cfg.out))
    print(dumps({"summary": res.summary, "meta": res.meta}))
    bad = sum(1 for r in res.records if r.get("error") is None and not r["regret_bound_ok"])
    if bad:
        raise Violation(f"{bad} trials violate regret <= 2 * representativeness")
    return 0


def cmd_verify_uc(args) -> int:
    cfg = _experiment_config(args)
    res = verify_uniform_convergence(cfg)
    res.write(_out_dir(args, cfg.out))
    print(dumps({"summary": res.summary, "meta": res.meta}))
    return 0


def cmd_verify_indicator(args) -> int:
    cfg = _experiment_config(args)
    report = verify_indicator_bound(cfg, factor=args.factor)
    out = _out_dir(args, cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(report["records"], out / "instances.jsonl")
    head = {k: v for k, v in report.items() if k != "records"}
    (out / "report.json").write_text(dumps(head) + "\n")
    print(dumps(head))
    if report["violations"]:
        raise Violation(f"{report['violations']} instances violate the bound at factor {args.factor}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="srlk", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        return sp

    sp = common(sub.add_parser("gen-data", help="sample a Gaussian mixture dataset and its labels"))
    sp.set_defaults(func=cmd_gen_data, workers=None)

    sp = common(sub.add_parser("diff", help="difference between two clustering files"))
    sp.add_argument("first")
    sp.add_argument("second")
    sp.add_argument("--sample", help="comma-separated ids or a file of ids")
    sp.add_argument("--k", type=int)
    sp.set_defaults(func=cmd_diff)

    sp = common(sub.add_parser("kmeans", help="k-means clustering of a dataset under a linear mapping"))
    sp.add_argument("--data")
    sp.add_argument("--mapping")
    sp.add_argument("--k", type=int)
    sp.add_argument("--restarts", type=int)
    sp.add_argument("--exact", action="store_true", help="enumerate all partitions")
    sp.set_defaults(func=cmd_kmeans)

    sp = common(sub.add_parser("learn", help="pick the grid mapping that best fits a clustered sample"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--sample-clustering", required=True)
    sp.add_argument("--workers", type=int)
    sp.set_defaults(func=cmd_learn)

    sp = common(sub.add_parser("check-unique", help="(eta, eps)-uniqueness verdict"))
    sp.add_argument("--data")
    sp.add_argument("--mapping")
    sp.add_argument("--k", type=int)
    sp.add_argument("--eta", type=float)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--method", choices=["auto", "exact", "local"])
    sp.set_defaults(func=cmd_check_unique)

    for name, func, help_ in (
        ("sweep", cmd_sweep, "regret of the learner across sample sizes"),
        ("verify-uc", cmd_verify_uc, "uniform-convergence gap across sample sizes"),
        ("verify-indicator", cmd_verify_indicator, "representativeness vs indicator-class gap"),
    ):
        sp = common(sub.add_parser(name, help=help_))
        sp.add_argument("--workers", type=int)
        sp.set_defaults(func=func)
        if name == "verify-indicator":
            sp.add_argument("--factor", type=float, default=1.0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except Violation as exc:
        log.error("%s", exc)
        return EXIT_VIOLATION
    except (ValidationError, FileNotFoundError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
