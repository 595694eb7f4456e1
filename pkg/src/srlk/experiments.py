"""Synthetic data, sample-complexity sweeps and uniform-convergence measurements."""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy import stats

from .core import Clustering, Dataset, LinearMapping, ValidationError, read_clustering, read_dataset, restrict
from .kmeans import kmeans, partition_count
from .learner import LearnProblem, candidate_clusterings, draw_sample, label_matrix, term_learn, true_losses
from .mapping_class import MappingClass, build_cover, pdim_vector
from .partition import delta, delta_batch

TOL = 1e-12


# --------------------------------------------------------------------------
# configuration

@dataclass
class ExperimentConfig:
    data: dict
    mapping_class: dict
    k: int
    sample_sizes: list = field(default_factory=lambda: [10, 20, 40])
    trials: int = 10
    eta: float = 0.1
    eps: float = 0.1
    delta: float = 0.1
    seed: int = 0
    target: Any = "components"
    cover_eps: float | None = None
    solver: dict = field(default_factory=lambda: {"policy": "auto", "restarts": 10, "seed": 0})
    indicator: dict = field(default_factory=dict)
    workers: int = 1
    out: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "class" in d:
            d["mapping_class"] = d.pop("class")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(**d)
        except TypeError as exc:
            raise ValidationError(f"bad config: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def validate(self) -> None:
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if not self.sample_sizes or any(m < 1 for m in self.sample_sizes):
            raise ValidationError("sample sizes must be positive")
        for name in ("eta", "eps", "delta"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        comps = self.data.get("components")
        if comps is not None and self.target == "components" and len(comps) != self.k:
            raise ValidationError(f"{len(comps)} mixture components but k={self.k}")

    def mapping_class_obj(self) -> MappingClass:
        mc = dict(self.mapping_class)
        for key in ("domain_low", "domain_high"):
            if mc.get(key) is not None:
                mc[key] = tuple(mc[key])
        return MappingClass(**mc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class"] = d.pop("mapping_class")
        return d


# --------------------------------------------------------------------------
# data

def gen_synthetic(mixture: dict, seed: int) -> tuple[Dataset, Clustering]:
    """Gaussian mixture sample; the component labels form the target clustering.

    mixture = {"components": [{"mean": [...], "std": s | "cov": [[...]], "size": n}, ...]}
    """
    comps = mixture.get("components")
    if not comps:
        raise ValidationError("mixture needs at least one component")
    rng = np.random.default_rng(seed)
    points, labels = [], []
    dim = len(comps[0]["mean"])
    for c, comp in enumerate(comps):
        mean = np.asarray(comp["mean"], dtype=float)
        size = int(comp.get("size", 0))
        if mean.shape != (dim,):
            raise ValidationError("component means have inconsistent dimensions")
        if size < 1:
            raise ValidationError("component sizes must be >= 1")
        if "cov" in comp:
            cov = np.asarray(comp["cov"], dtype=float)
            if cov.shape != (dim, dim) or not np.allclose(cov, cov.T):
                raise ValidationError("covariance must be a symmetric d x d matrix")
            try:
                chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError as exc:
                raise ValidationError("degenerate covariance (not positive definite)") from exc
        else:
            std = float(comp.get("std", 1.0))
            if not std > 0:
                raise ValidationError("degenerate covariance (std must be positive)")
            chol = std * np.eye(dim)
        points.append(mean + rng.standard_normal((size, dim)) @ chol.T)
        labels += [c] * size
    X = Dataset(np.vstack(points))
    return X, Clustering(len(comps), X.ids, labels)


def load_data(cfg: ExperimentConfig, seed: int | None = None) -> tuple[Dataset, Clustering | None]:
    seed = cfg.seed if seed is None else seed
    if "path" in cfg.data:
        X = read_dataset(cfg.data["path"])
        C = read_clustering(cfg.data["labels_path"], cfg.k) if "labels_path" in cfg.data else None
        return X, C
    return gen_synthetic(cfg.data, seed)


def build_candidates(cfg: ExperimentConfig, X: Dataset) -> list[LinearMapping]:
    F = cfg.mapping_class_obj()
    if cfg.cover_eps is not None:
        return list(build_cover(F, cfg.cover_eps, X).members)
    return F.members()


def resolve_target(cfg: ExperimentConfig, X, C_components, candidates, clusterings) -> Clustering:
    """Target clustering: mixture labels, a candidate's k-means clustering, or a given matrix's."""
    t = cfg.target
    if t == "components":
        if C_components is None:
            raise ValidationError("target 'components' needs generated data or a labels file")
        return C_components
    if isinstance(t, dict) and "candidate" in t:
        return clusterings[int(t["candidate"])]
    if isinstance(t, dict) and "matrix" in t:
        return kmeans(X, LinearMapping(t["matrix"]), cfg.k, **_solver(cfg)).clustering
    raise ValidationError(f"unrecognised target {t!r}")


def _solver(cfg: ExperimentConfig) -> dict:
    s = {"policy": "auto", "restarts": 10, "seed": 0}
    s.update(cfg.solver)
    return s


def _job_rng(master: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master, *key]))


@dataclass
class Setup:
    X: Dataset
    C_star: Clustering
    candidates: list
    clusterings: list
    truth: np.ndarray
    solver_method: str


def prepare(cfg: ExperimentConfig) -> Setup:
    X, C_comp = load_data(cfg)
    candidates = build_candidates(cfg, X)
    solver = _solver(cfg)
    clusterings = candidate_clusterings(X, candidates, cfg.k, **solver)
    C_star = resolve_target(cfg, X, C_comp, candidates, clusterings)
    if C_star.k != cfg.k or not np.array_equal(C_star.ids, X.ids):
        raise ValidationError("target clustering must be a k-clustering of the whole dataset")
    policy = solver["policy"]
    if policy == "auto":
        policy = "exact" if partition_count(X.n, cfg.k) <= 10**5 else "lloyd"
    return Setup(X, C_star, candidates, clusterings, true_losses(C_star, clusterings), policy)


def _quantiles(values) -> dict:
    v = np.asarray([x for x in values if x is not None and not math.isnan(x)], dtype=float)
    if v.size == 0:
        return {"n": 0}
    return {
        "n": int(v.size),
        "mean": float(v.mean()),
        "q10": float(np.quantile(v, 0.1)),
        "median": float(np.median(v)),
        "q90": float(np.quantile(v, 0.9)),
        "max": float(v.max()),
    }


def _run_jobs(fn, jobs, workers: int):
    if workers == 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def loglog_slope(ms, values) -> float | None:
    pairs = [(m, v) for m, v in zip(ms, values) if v is not None and v > 0]
    if len(pairs) < 2:
        return None
    x = np.log([p[0] for p in pairs])
    y = np.log([p[1] for p in pairs])
    return float(np.polyfit(x, y, 1)[0])


# --------------------------------------------------------------------------
# sample-complexity sweep

@dataclass
class SweepResult:
    records: list
    summary: list
    meta: dict
    timings: list = field(default_factory=list)

    def regrets_by_m(self) -> dict:
        out: dict = {}
        for r in self.records:
            if r.get("error") is None:
                out.setdefault(r["m"], []).append(r["regret"])
        return out

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_jsonl(self.records, out / "trials.jsonl")
        write_summary_csv(self.summary, out / "summary.csv")
        (out / "meta.json").write_text(dumps(self.meta) + "\n")
        write_summary_csv(self.timings, out / "timings.csv")


def sweep_sample_complexity(cfg: ExperimentConfig, setup: Setup | None = None) -> SweepResult:
    """For every sample size m and trial: draw a sample, run the learner, record regret,
    representativeness, and whether regret <= 2 * representativeness held."""
    setup = prepare(cfg) if setup is None else setup
    X, C_star, truth = setup.X, setup.C_star, setup.truth
    best = float(truth.min())
    for m in cfg.sample_sizes:
        if m > X.n:
            raise ValidationError(f"sample size {m} exceeds |X|={X.n}")

    def job(key):
        m, t = key
        start = time.perf_counter()
        rec: dict = {"m": m, "trial": t}
        try:
            S = draw_sample(X.n, m, _job_rng(cfg.seed, m, t))
            problem = LearnProblem(
                X, S, restrict(C_star, S), setup.candidates, cfg.k, clusterings=setup.clusterings
            )
            res = term_learn(problem)
            gaps = np.abs(truth - res.per_candidate_losses)
            rep = float(gaps.max())
            reg = float(truth[res.index]) - best
            rec.update(
                chosen=res.index,
                empirical_loss=res.empirical_loss,
                true_loss=float(truth[res.index]),
                best_in_class=best,
                regret=reg,
                representativeness=rep,
                solver=setup.solver_method,
                regret_bound_ok=bool(reg <= 2 * rep + TOL),
                regret_bound_at_eps_ok=bool(rep > cfg.eps / 2 or reg <= cfg.eps + TOL),
                error=None,
            )
        except Exception as exc:  # noqa: BLE001 - per-trial failures are recorded
            rec.update(error=f"{type(exc).__name__}: {exc}")
        return rec, {"m": m, "trial": t, "seconds": time.perf_counter() - start}

    jobs = [(m, t) for m in cfg.sample_sizes for t in range(cfg.trials)]
    results = _run_jobs(job, jobs, cfg.workers)
    records = [r for r, _ in results]
    timings = [t for _, t in results]

    summary = []
    for m in cfg.sample_sizes:
        rows = [r for r in records if r["m"] == m and r["error"] is None]
        q = _quantiles([r["regret"] for r in rows])
        g = _quantiles([r["representativeness"] for r in rows])
        summary.append(
            {
                "m": m,
                "trials": len(rows),
                "errors": sum(1 for r in records if r["m"] == m and r["error"] is not None),
                **{f"regret_{k}": v for k, v in q.items() if k != "n"},
                **{f"rep_{k}": v for k, v in g.items() if k != "n"},
                "regret_bound_violations": sum(1 for r in rows if not r["regret_bound_ok"]),
            }
        )
    meta = {
        "n_points": X.n,
        "k": cfg.k,
        "cover_size": len(setup.candidates),
        "best_in_class": best,
        "solver": setup.solver_method,
        "pdim": pdim_vector(cfg.mapping_class_obj()),
        "seed": cfg.seed,
    }
    return SweepResult(records, summary, meta, timings)


# --------------------------------------------------------------------------
# uniform convergence

def uc_sample_size(k: int, pdim: int, eps: float, delta: float) -> float:
    """(k + Pdim + log(1/delta)) / eps^2 with every hidden constant set to 1."""
    return (k + pdim + math.log(1 / delta)) / eps**2


def verify_uniform_convergence(cfg: ExperimentConfig, setup: Setup | None = None) -> SweepResult:
    """Sup over candidates of |true - sample difference to the target| per (m, trial)."""
    setup = prepare(cfg) if setup is None else setup
    X, C_star, truth = setup.X, setup.C_star, setup.truth
    L = label_matrix(setup.clusterings)

    def job(key):
        m, t = key
        start = time.perf_counter()
        S = draw_sample(X.n, m, _job_rng(cfg.seed, m, t))
        gap = float(np.abs(truth - delta_batch(C_star.labels[S], L[:, S], cfg.k)).max())
        return {"m": m, "trial": t, "sup_gap": gap, "exceeds_eps": bool(gap > cfg.eps)}, {
            "m": m,
            "trial": t,
            "seconds": time.perf_counter() - start,
        }

    for m in cfg.sample_sizes:
        if m > X.n:
            raise ValidationError(f"sample size {m} exceeds |X|={X.n}")
    jobs = [(m, t) for m in cfg.sample_sizes for t in range(cfg.trials)]
    results = _run_jobs(job, jobs, cfg.workers)
    records = [r for r, _ in results]

    summary = []
    for m in cfg.sample_sizes:
        gaps = [r["sup_gap"] for r in records if r["m"] == m]
        exceed = sum(1 for r in records if r["m"] == m and r["exceeds_eps"])
        test = stats.binomtest(exceed, len(gaps), cfg.delta, alternative="greater")
        summary.append(
            {
                "m": m,
                **_quantiles(gaps),
                "exceed_fraction": exceed / len(gaps),
                "exceed_pvalue": float(test.pvalue),
                "exceed_within_delta": bool(test.pvalue >= 0.05),
            }
        )
    pdim = pdim_vector(cfg.mapping_class_obj())
    ms = [s["m"] for s in summary]
    meta = {
        "n_points": X.n,
        "k": cfg.k,
        "cover_size": len(setup.candidates),
        "pdim": pdim,
        "uc_sample_size": uc_sample_size(cfg.k, pdim, cfg.eps, cfg.delta),
        "slope_mean": loglog_slope(ms, [s.get("mean") for s in summary]),
        "slope_median": loglog_slope(ms, [s.get("median") for s in summary]),
        "median_nonincreasing": all(
            summary[i + 1]["median"] <= summary[i]["median"] + TOL for i in range(len(summary) - 1)
        ),
        "seed": cfg.seed,
    }
    return SweepResult(records, summary, meta, [t for _, t in results])


# --------------------------------------------------------------------------
# disagreement-indicator reduction

def h_matrix(C1: Clustering, C2: Clustering) -> np.ndarray:
    """Row s is the disagreement indicator of (C1, C2) under the s-th permutation."""
    perms = np.array(list(itertools.permutations(range(C1.k))), dtype=np.int64)
    return (perms[:, C1.labels] != C2.labels[None, :]).astype(float)


def indicator_instance(clusterings: list, S: np.ndarray) -> dict:
    """Pairwise representativeness of S and the sup over indicators of |h(S) - h(X)|."""
    rep = 0.0
    hgap = 0.0
    for C1, C2 in itertools.product(clusterings, repeat=2):
        dX = delta(C1, C2).value
        dS = delta(restrict(C1, S), restrict(C2, S)).value
        rep = max(rep, abs(dX - dS))
        H = h_matrix(C1, C2)
        hgap = max(hgap, float(np.abs(H[:, S].mean(axis=1) - H.mean(axis=1)).max()))
    return {"representativeness": rep, "h_gap": hgap}


def verify_indicator_bound(cfg: ExperimentConfig, factor: float = 1.0) -> dict:
    """Randomised check of representativeness <= factor * sup_h |h(S) - h(X)|.

    Settings under ``cfg.indicator``: instances, n_points [lo, hi], cover_size,
    k_max, sample_fraction [lo, hi].
    """
    p = {"instances": 200, "n_points": [6, 12], "cover_size": 15, "k_max": 4, "sample_fraction": [0.2, 0.9]}
    p.update(cfg.indicator)
    if p["k_max"] > 4 or p["cover_size"] > 15:
        raise ValidationError("indicator check is limited to k <= 4 and covers of <= 15 mappings")
    F = cfg.mapping_class_obj()
    solver = _solver(cfg)
    rows = []
    for i in range(p["instances"]):
        rng = _job_rng(cfg.seed, 2, i)
        n = int(rng.integers(p["n_points"][0], p["n_points"][1] + 1))
        k = int(rng.integers(2, p["k_max"] + 1))
        lo, hi = np.asarray(F.domain_low), np.asarray(F.domain_high)
        X = Dataset(rng.uniform(lo, hi, (n, F.d_in)))
        cover = [F.sample(rng) for _ in range(p["cover_size"])]
        clusterings = candidate_clusterings(X, cover, k, **solver)
        frac = rng.uniform(*p["sample_fraction"])
        m = min(n, max(1, int(round(frac * n))))
        S = draw_sample(n, m, rng)
        row = {"instance": i, "n": n, "k": k, "m": m, **indicator_instance(clusterings, S)}
        row["holds"] = bool(row["representativeness"] <= factor * row["h_gap"] + TOL)
        row["holds_factor2"] = bool(row["representativeness"] <= 2 * row["h_gap"] + TOL)
        rows.append(row)
    ratios = [r["representativeness"] / r["h_gap"] for r in rows if r["h_gap"] > 0]
    return {
        "instances": len(rows),
        "factor": factor,
        "violations": sum(1 for r in rows if not r["holds"]),
        "violations_factor2": sum(1 for r in rows if not r["holds_factor2"]),
        "max_ratio": max(ratios) if ratios else 0.0,
        "records": rows,
    }


# --------------------------------------------------------------------------
# output

def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_jsonl(records, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for r in records:
            fh.write(dumps(r) + "\n")


def write_summary_csv(rows, path) -> None:
    if not rows:
        Path(path).write_text("")
        return
    keys = list(dict.fromkeys(k for r in rows for k in r))
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in keys})
