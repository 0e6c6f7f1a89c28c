"""Simulation designs and the Monte Carlo study harness."""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from statistics import NormalDist

import numpy as np

from . import cart
from .data import Dataset
from .metrics import Truth, auc, proper_scores, selection_metrics
from .selection import CvConfig, Metric, fit_cv
from .solver import Method, SolverConfig, predict_proba
from .splits import BaggingConfig, SplitCriterion, estimate_thresholds

log = logging.getLogger(__name__)


class Family(enum.Enum):
    SINGLE = "single"          # one cut at 0 per covariate
    THRESHOLD_I = "threshold"  # three cuts, level effects (0, 5, 10, 5)
    PIECEWISE_II = "piecewise"  # smooth pieces between the same three cuts


FAMILY_CUTS = tuple(NormalDist().inv_cdf((1 + k) / 6) for k in (1, 2, 3))


@dataclass(frozen=True)
class SimDesign:
    family: Family = Family.SINGLE
    n: int = 400
    p: int = 500
    p0: int = 5
    rho: float = 0.0
    n_reps: int = 50
    rng_seed: int = 0
    train_fraction: float = 1.0
    beta: float = 3.0
    level_coefs: tuple = (5.0, 10.0, 5.0)
    cuts: tuple = FAMILY_CUTS

    def __post_init__(self):
        if not 0 <= self.p0 <= self.p:
            raise ValueError("need 0 <= p0 <= p")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must lie in (0, 1]")

    def truth(self) -> Truth:
        if self.family is Family.SINGLE:
            cuts = [np.array([0.0])] * self.p
            B = [np.array([self.beta if j < self.p0 else 0.0]) for j in range(self.p)]
        else:
            cuts = [np.array(self.cuts)] * self.p
            lv = np.array(self.level_coefs)
            B = [lv if j < self.p0 else np.zeros(3) for j in range(self.p)]
        return Truth(cuts, B, np.arange(self.p0))


def sample_covariates(n: int, p: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Rows from N(0, S) with S_ij = rho^|i-j|, via the AR(1) recursion."""
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    E = rng.standard_normal((n, p))
    if rho == 0.0 or p == 0:
        return E
    X = np.empty_like(E)
    X[:, 0] = E[:, 0]
    s = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + s * E[:, j]
    return X


def _piecewise(x: np.ndarray, cuts, coefs) -> np.ndarray:
    t1, t2, t3 = cuts
    b1, b2, b3 = coefs
    # intervals are closed on the right here
    return np.select(
        [x <= t1, x <= t2, x <= t3],
        [0.0, b1 * np.sin(np.pi * x), b2 * (x - 0.5) ** 2],
        b3 * x,
    )


def linear_predictor(X: np.ndarray, design: SimDesign) -> np.ndarray:
    """Sum of covariate effects on the logit scale, without intercept."""
    S = X[:, : design.p0]
    if design.family is Family.SINGLE:
        return design.beta * (S >= 0.0).sum(axis=1)
    if design.family is Family.THRESHOLD_I:
        lv = np.r_[0.0, design.level_coefs]
        return lv[np.searchsorted(np.array(design.cuts), S, side="right")].sum(axis=1)
    return _piecewise(S, design.cuts, design.level_coefs).sum(axis=1)


def gen_response(X: np.ndarray, design: SimDesign, rng: np.random.Generator) -> np.ndarray:
    """Labels in {-1, +1}; the intercept is minus the sample mean of the predictor."""
    eta = linear_predictor(X, design)
    eta = eta - eta.mean()
    prob = 1.0 / (1.0 + np.exp(-eta))
    return np.where(rng.random(X.shape[0]) < prob, 1, -1).astype(np.int8)


def generate(design: SimDesign, rng: np.random.Generator) -> Dataset:
    X = sample_covariates(design.n, design.p, design.rho, rng)
    return Dataset(X, gen_response(X, design, rng))


@dataclass(frozen=True)
class PipelineConfig:
    k: int = 1
    n_bags: int = 100
    criterion: SplitCriterion = SplitCriterion.GINI
    cv: CvConfig = CvConfig(metric=Metric.DEVIANCE, two_se_rule=True, patience=10)
    solver: SolverConfig = SolverConfig(method=Method.PROX_NEWTON, tol=1e-7)


COMPETITORS = ("cart", "bagged_cart")


def _rep_seeds(rng_seed: int, rep: int) -> tuple[np.random.Generator, int]:
    ss = np.random.SeedSequence([rng_seed, rep])
    data_ss, bag_ss = ss.spawn(2)
    return np.random.default_rng(data_ss), int(bag_ss.generate_state(1, np.uint64)[0])


def _split(data: Dataset, frac: float, rng) -> tuple[Dataset, Dataset | None]:
    if frac >= 1.0:
        return data, None
    perm = rng.permutation(data.n)
    n_tr = int(round(frac * data.n))
    return data.subset(np.sort(perm[:n_tr])), data.subset(np.sort(perm[n_tr:]))


def run_replication(design: SimDesign, pipeline: PipelineConfig, rep: int,
                    competitors=()) -> list[tuple[int, str, str, float]]:
    """All (rep, method, metric, value) records of one replication."""
    rng, bag_seed = _rep_seeds(design.rng_seed, rep)
    data = generate(design, rng)
    train, test = _split(data, design.train_fraction, rng)
    out = []
    ts = estimate_thresholds(train, BaggingConfig(pipeline.n_bags, bag_seed), k=pipeline.k,
                             criterion=pipeline.criterion)
    cv = replace(pipeline.cv, rng_seed=bag_seed)
    model, _ = fit_cv(train, ts, cv, pipeline.solver)
    rep_sel = selection_metrics(model, design.truth())
    sel = asdict(rep_sel)
    if design.family is Family.PIECEWISE_II:
        # no level coefficients to compare against
        sel.pop("rse_est")
        sel.pop("rmse_est")
    out += [(rep, "FILTER", k, float(v)) for k, v in sel.items()]
    out.append((rep, "FILTER", "prevalence", float(np.mean(data.labels > 0))))
    if test is not None:
        out += _prediction_records(rep, "FILTER", predict_proba(model, test), test.labels)
        if "cart" in competitors:
            tree = cart.fit_tree(train.features, train.labels)
            out += _prediction_records(rep, "CART", tree.predict_proba(test.features), test.labels)
        if "bagged_cart" in competitors:
            trees = cart.fit_bagged_trees(train.features, train.labels, pipeline.n_bags, bag_seed)
            out += _prediction_records(rep, "CB", cart.bagged_proba(trees, test.features), test.labels)
    return out


def _prediction_records(rep, method, probs, labels):
    logs, crps, brier = proper_scores(np.clip(probs, 0.0, 1.0), labels)
    return [(rep, method, "auc", auc(probs, labels)), (rep, method, "logs", logs),
            (rep, method, "crps", crps), (rep, method, "brier", brier)]


def _rep_task(args):
    design, pipeline, rep, competitors = args
    try:
        return rep, run_replication(design, pipeline, rep, competitors), None
    except Exception as exc:  # recorded, study continues
        log.warning("replication %d failed: %s", rep, exc)
        return rep, [], f"{type(exc).__name__}: {exc}"


@dataclass
class StudyResult:
    design: SimDesign
    records: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    def values(self, method: str, metric: str) -> np.ndarray:
        return np.array([v for _, m, k, v in self.records if m == method and k == metric])

    def mean(self, method: str, metric: str) -> float:
        v = self.values(method, metric)
        return float(v.mean()) if v.size else float("nan")

    def summary(self) -> list[tuple[str, str, float, float, int]]:
        keys = []
        for _, m, k, _ in self.records:
            if (m, k) not in keys:
                keys.append((m, k))
        rows = []
        for m, k in keys:
            v = self.values(m, k)
            sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
            rows.append((m, k, float(v.mean()), sd, int(v.size)))
        return rows


def run_study(design: SimDesign, pipeline: PipelineConfig = PipelineConfig(), competitors=(),
              threads: int = 1) -> StudyResult:
    """Run ``design.n_reps`` replications; failures are recorded, not raised.

    Each replication draws its own seeds from (rng_seed, rep), so results do
    not depend on ``threads`` or execution order.
    """
    bad = set(competitors) - set(COMPETITORS)
    if bad:
        raise ValueError(f"unknown competitors {sorted(bad)}")
    tasks = [(design, pipeline, r, tuple(competitors)) for r in range(design.n_reps)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_rep_task, tasks))
    else:
        results = [_rep_task(t) for t in tasks]
    res = StudyResult(design)
    for rep, recs, err in sorted(results, key=lambda r: r[0]):
        res.records.extend(recs)
        if err is not None:
            res.failures[rep] = err
    return res


def rate_fit(ns, mabs) -> tuple[float, float]:
    """OLS slope and intercept of log(mab) on log(n)."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(mabs, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two points")
    slope, icpt = np.polyfit(x, y, 1)
    return float(slope), float(icpt)


def rate_study(results: list[StudyResult]) -> tuple[float, list[tuple[int, float]]]:
    """Slope of log mean MAB_t against log n across studies on an n-grid."""
    if len(results) < 4:
        raise ValueError("rate study needs at least four n values")
    pts = sorted((r.design.n, r.mean("FILTER", "mab_t")) for r in results)
    slope, _ = rate_fit([n for n, _ in pts], [m for _, m in pts])
    return slope, pts


# -- presets ----------------------------------------------------------------

TABLE1_NS = tuple(range(100, 401, 50))


def preset(name: str, reps: int = 50, seed: int = 0, n=None, rho=None):
    """(designs, pipeline, competitors) for a named study."""
    if name == "table1":
        ns = TABLE1_NS if n is None else (n,)
        designs = [SimDesign(Family.SINGLE, n=m, rho=0.0 if rho is None else rho, n_reps=reps, rng_seed=seed)
                   for m in ns]
        return designs, PipelineConfig(k=1), ()
    if name in ("table2", "table3"):
        fam = Family.THRESHOLD_I if name == "table2" else Family.PIECEWISE_II
        r = (0.0 if name == "table2" else 0.5) if rho is None else rho
        d = SimDesign(fam, n=400 if n is None else n, rho=r, n_reps=reps, rng_seed=seed, train_fraction=0.8)
        return [d], PipelineConfig(k=6), ("cart",)
    raise ValueError(f"unknown design {name!r}; expected table1, table2 or table3")


def records_csv(results: list[StudyResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["family", "n", "rho", "rep", "method", "metric", "value"])
    for r in results:
        d = r.design
        for rep, m, k, v in r.records:
            w.writerow([d.family.value, d.n, d.rho, rep, m, k, repr(float(v))])
    return buf.getvalue()


def summary_csv(results: list[StudyResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["family", "n", "rho", "method", "metric", "mean", "sd", "reps", "display", "failures"])
    for r in results:
        d = r.design
        for m, k, mu, sd, cnt in r.summary():
            w.writerow([d.family.value, d.n, d.rho, m, k, repr(mu), repr(sd), cnt, f"{mu:.2f}({sd:.2f})",
                        len(r.failures)])
    return buf.getvalue()
