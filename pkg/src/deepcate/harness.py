"""Monte Carlo experiment driver and the moderator-summary tree.

Trial structure: for each training size n, one covariate design (X, u) and
one evaluation sample are drawn once and shared by every trial; each trial
then redraws the outcome noise (and, by default, the treatment vector),
fits one method, and scores its CATE predictions on the fixed evaluation
sample.

Seed derivation (stable across runs and machines): every seed is
numpy.random.SeedSequence(entropy) over integer tuples,

    design seed       (base_seed, n, 11)
    eval-sample seed  (base_seed, n, 12)
    fixed-Z seed      (base_seed, n, 13)    # only when redraw_z=False
    trial seed        (base_seed, n, method_code, trial_index)

with method codes shared=1, bcf=2, naive=3, ols=4.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import logging
import time
from pathlib import Path
from dataclasses import dataclass, field, replace

import numpy as np

from . import dgp
from .metrics import (
    ResultsTable,
    TrialMetrics,
    aggregate_results,
    trial_metrics,
    write_results_csv,
)
from .models import (
    fit_bcf,
    fit_naive,
    fit_ols,
    fit_propensity,
    fit_shared,
    predict_cate,
    predict_propensity,
)
from .nn import TrainConfig

log = logging.getLogger(__name__)

METHODS = ("shared", "bcf", "naive", "ols")
_METHOD_CODES = {"shared": 1, "bcf": 2, "naive": 3, "ols": 4}
_DESIGN_STREAM = 11
_EVAL_STREAM = 12
_Z_STREAM = 13


def derive_seed(*fields: int) -> int:
    """Collapse integer fields into one stable 64-bit seed."""
    return int(np.random.SeedSequence(list(fields)).generate_state(1, np.uint64)[0])


def trial_seed(base_seed: int, n: int, method: str, trial_index: int) -> int:
    return derive_seed(base_seed, n, _METHOD_CODES[method], trial_index)


@dataclass(frozen=True)
class TrainSettings:
    """Network training knobs shared by every trial.

    standardize_y: center/scale the outcome before fitting and rescale the
    CATE predictions back. A no-op for the linear estimator; for the
    networks it keeps the optimization target at unit scale regardless of
    how large the treatment effects are.
    """

    epochs: int = 250
    batch_size: int = 64
    lr: float = 0.001
    propensity_epochs: int | None = None  # None -> same as epochs
    standardize_y: bool = False

    def resolved_propensity_epochs(self) -> int:
        return self.epochs if self.propensity_epochs is None else self.propensity_epochs


@dataclass(frozen=True)
class ExperimentConfig:
    sample_sizes: tuple[int, ...]
    n_trials: int
    regime: str
    test_size: int = 10_000
    kappa: float = 1.0
    methods: tuple[str, ...] = METHODS
    base_seed: int = 0
    parallelism: int = 1
    redraw_z: bool = True
    train: TrainSettings = field(default_factory=TrainSettings)

    def __post_init__(self):
        if not self.sample_sizes:
            raise ValueError("need at least one sample size")
        if any(n < 2 for n in self.sample_sizes):
            raise ValueError("sample sizes must be >= 2")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.test_size < 1:
            raise ValueError("test_size must be >= 1")
        if self.regime not in dgp.REGIMES:
            raise ValueError(f"regime must be one of {dgp.REGIMES}")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if not self.methods:
            raise ValueError("need at least one method")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        # canonical, duplicate-free method order
        object.__setattr__(
            self, "methods", tuple(m for m in METHODS if m in set(self.methods))
        )


@dataclass(frozen=True)
class EvalSample:
    """Fixed evaluation rows: covariates plus the true surfaces only (its
    treatment assignment would be irrelevant for CATE metrics)."""

    X: np.ndarray
    alpha_true: np.ndarray
    beta_true: np.ndarray


@dataclass(frozen=True)
class Truth:
    """Outcome-surface triple; swap in alternatives to test the driver
    against known ground truth (e.g. an exactly linear surface)."""

    alpha: object  # X -> vector
    beta: object  # X -> vector
    pi: object  # (alpha, u) -> vector


def regime_truth(regime: str) -> Truth:
    if regime not in dgp.REGIMES:
        raise ValueError(f"regime must be one of {dgp.REGIMES}")
    return Truth(
        alpha=dgp.true_alpha,
        beta=lambda X, _r=regime: dgp.true_beta(X, _r),
        pi=dgp.true_pi,
    )


def make_eval_sample(n: int, regime: str, seed, truth: Truth | None = None) -> EvalSample:
    truth = truth if truth is not None else regime_truth(regime)
    X, _u = dgp.gen_covariates(n, seed)
    return EvalSample(X=X, alpha_true=truth.alpha(X), beta_true=truth.beta(X))


class TrialFailedError(RuntimeError):
    """A single trial could not be completed (e.g. training diverged)."""


def _fit_method(method, X, Z, Y, settings: TrainSettings, fit_seed: int):
    n = X.shape[0]
    batch = min(settings.batch_size, n)
    if method == "ols":
        return fit_ols(X, Z, Y)
    cfg = TrainConfig(
        epochs=settings.epochs,
        batch_size=batch,
        loss="mse",
        lr=settings.lr,
        shuffle_seed=fit_seed,
    )
    if method == "shared":
        return fit_shared(X, Z, Y, cfg)
    if method == "naive":
        return fit_naive(X, Z, Y, cfg)
    if method == "bcf":
        prop_seed, outcome_seed = (derive_seed(fit_seed, 1), derive_seed(fit_seed, 2))
        prop_cfg = TrainConfig(
            epochs=settings.resolved_propensity_epochs(),
            batch_size=batch,
            loss="bce",
            lr=settings.lr,
            shuffle_seed=prop_seed,
        )
        prop = fit_propensity(X, Z, prop_cfg)
        pi_hat = predict_propensity(prop, X)
        return fit_bcf(X, Z, Y, pi_hat, replace(cfg, shuffle_seed=outcome_seed))
    raise ValueError(f"unknown method {method!r}")


def run_trial(
    X_train: np.ndarray,
    u_train: np.ndarray,
    trial_seed: int,
    method: str,
    regime: str,
    kappa: float,
    test_sample: EvalSample,
    settings: TrainSettings | None = None,
    truth: Truth | None = None,
    fixed_z: np.ndarray | None = None,
) -> TrialMetrics:
    """Draw one trial's outcome on the fixed design, fit, and score.

    trial_seed drives everything stochastic: the treatment draw (unless
    fixed_z is supplied), the outcome noise, network initialization,
    dropout, and shuffling. Runtime covers the fit only (for bcf that
    includes its propensity stage).
    """
    settings = settings or TrainSettings()
    truth = truth if truth is not None else regime_truth(regime)
    z_seed, eps_seed, fit_seed = (
        derive_seed(trial_seed, 1),
        derive_seed(trial_seed, 2),
        derive_seed(trial_seed, 3),
    )
    alpha = truth.alpha(X_train)
    beta = truth.beta(X_train)
    pi = truth.pi(alpha, u_train)
    n = X_train.shape[0]
    if fixed_z is not None:
        Z = np.asarray(fixed_z, dtype=np.float64)
    else:
        Z = (np.random.default_rng(z_seed).random(n) < pi).astype(np.float64)
    sigma = float(np.asarray(alpha).std(ddof=1) * kappa)
    eps = np.random.default_rng(eps_seed).standard_normal(n)
    Y = alpha + beta * Z + sigma * eps
    y_scale = 1.0
    if settings.standardize_y:
        y_scale = float(Y.std(ddof=1))
        Y = (Y - Y.mean()) / y_scale
    t0 = time.perf_counter()
    model = _fit_method(method, X_train, Z, Y, settings, fit_seed)
    runtime = time.perf_counter() - t0
    beta_hat = predict_cate(model, test_sample.X) * y_scale
    if not np.isfinite(beta_hat).all():
        raise TrialFailedError(f"{method}: non-finite CATE predictions")
    return trial_metrics(beta_hat, test_sample.beta_true, test_sample.alpha_true, runtime)


@dataclass(frozen=True)
class _Task:
    n: int
    method: str
    trial_index: int
    seed: int
    X: np.ndarray
    u: np.ndarray
    regime: str
    kappa: float
    test_sample: EvalSample
    settings: TrainSettings
    fixed_z: np.ndarray | None


def _run_task(task: _Task):
    try:
        m = run_trial(
            task.X,
            task.u,
            task.seed,
            task.method,
            task.regime,
            task.kappa,
            task.test_sample,
            settings=task.settings,
            fixed_z=task.fixed_z,
        )
        return (task.n, task.method, task.trial_index, m, None)
    except Exception as exc:  # noqa: BLE001 - a failed trial must not kill the sweep
        return (task.n, task.method, task.trial_index, None, f"{type(exc).__name__}: {exc}")


@dataclass(frozen=True)
class TrialRecord:
    method: str
    n: int
    regime: str
    trial_index: int
    metrics: TrialMetrics


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ResultsTable:
    """Run the full (n, method, trial) grid and aggregate per cell.

    Failed trials are logged and excluded from the aggregates (the row's
    trial count reflects completions); a cell with no completed trials
    aborts the sweep. With out_dir set, emits results.csv plus the
    plot-data files (bias/rmse vs n, per-trial scatter).
    """
    tasks: list[_Task] = []
    for n in cfg.sample_sizes:
        X, u = dgp.gen_covariates(n, derive_seed(cfg.base_seed, n, _DESIGN_STREAM))
        test_sample = make_eval_sample(
            cfg.test_size, cfg.regime, derive_seed(cfg.base_seed, n, _EVAL_STREAM)
        )
        fixed_z = None
        if not cfg.redraw_z:
            alpha = dgp.true_alpha(X)
            pi = dgp.true_pi(alpha, u)
            z_rng = np.random.default_rng(derive_seed(cfg.base_seed, n, _Z_STREAM))
            fixed_z = (z_rng.random(n) < pi).astype(np.float64)
        for method in cfg.methods:
            for t in range(cfg.n_trials):
                tasks.append(
                    _Task(
                        n=n,
                        method=method,
                        trial_index=t,
                        seed=trial_seed(cfg.base_seed, n, method, t),
                        X=X,
                        u=u,
                        regime=cfg.regime,
                        kappa=cfg.kappa,
                        test_sample=test_sample,
                        settings=cfg.train,
                        fixed_z=fixed_z,
                    )
                )

    if cfg.parallelism > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            outcomes = list(pool.map(_run_task, tasks))
    else:
        outcomes = [_run_task(t) for t in tasks]

    by_cell: dict[tuple[int, str], list[TrialMetrics]] = {}
    records: list[TrialRecord] = []
    failures: dict[tuple[int, str], int] = {}
    for n, method, t, m, err in outcomes:
        if err is not None:
            log.warning("trial failed (n=%d, %s, trial %d): %s", n, method, t, err)
            failures[(n, method)] = failures.get((n, method), 0) + 1
            continue
        by_cell.setdefault((n, method), []).append(m)
        records.append(TrialRecord(method, n, cfg.regime, t, m))

    rows = []
    for n in cfg.sample_sizes:
        for method in cfg.methods:
            cell = by_cell.get((n, method), [])
            if not cell:
                raise RuntimeError(
                    f"every trial failed for (n={n}, {method}); see log for causes"
                )
            rows.append(aggregate_results(cell, method, n, cfg.regime))
    table = ResultsTable(tuple(rows))

    if out_dir is not None:
        write_experiment_outputs(table, records, out_dir)
    return table


def write_experiment_outputs(table: ResultsTable, records: list[TrialRecord], out_dir) -> None:
    """results.csv plus the plot-data files derived from it."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(table, out / "results.csv")
    with open(out / "bias_vs_n.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "n", "regime", "mean_abs_bias"])
        for r in table.rows:
            w.writerow([r.method, r.n, r.regime, repr(r.mean_abs_bias)])
    with open(out / "rmse_vs_n.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "n", "regime", "mean_rmse"])
        for r in table.rows:
            w.writerow([r.method, r.n, r.regime, repr(r.mean_rmse)])
    # long format: one row per completed trial, so per-trial method pairs
    # (e.g. shared vs bcf bias) can be pivoted out per (n, trial_index)
    with open(out / "trial_scatter.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["regime", "n", "trial", "method", "abs_bias", "rmse"])
        for rec in records:
            w.writerow(
                [
                    rec.regime,
                    rec.n,
                    rec.trial_index,
                    rec.method,
                    repr(rec.metrics.abs_bias),
                    repr(rec.metrics.rmse),
                ]
            )


# --- moderator tree ----------------------------------------------------


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature, threshold, children) or leaf (value only)."""

    value: float
    n: int
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass(frozen=True)
class ModeratorTree:
    """Shallow CART summary of which covariates move the estimated effect."""

    root: TreeNode
    max_depth: int
    min_leaf: int

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            node = self.root
            while not node.is_leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.value
        return out

    def split_features(self) -> set[int]:
        found = set()

        def walk(node):
            if not node.is_leaf:
                found.add(node.feature)
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return found

    def to_dict(self) -> dict:
        def conv(node):
            if node.is_leaf:
                return {"value": node.value, "n": node.n}
            return {
                "feature": node.feature,
                "threshold": node.threshold,
                "n": node.n,
                "left": conv(node.left),
                "right": conv(node.right),
            }

        return {"max_depth": self.max_depth, "min_leaf": self.min_leaf, "tree": conv(self.root)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self, feature_names=None) -> str:
        def name(j):
            return feature_names[j] if feature_names is not None else f"x{j + 1}"

        lines = []

        def walk(node, indent):
            pad = "    " * indent
            if node.is_leaf:
                lines.append(f"{pad}predict {node.value:.6f}  (n={node.n})")
                return
            lines.append(f"{pad}if {name(node.feature)} <= {node.threshold:.6f}:")
            walk(node.left, indent + 1)
            lines.append(f"{pad}else:")
            walk(node.right, indent + 1)

        walk(self.root, 0)
        return "\n".join(lines) + "\n"


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best axis-aligned split by squared-error reduction.

    Ties break deterministically: features are scanned in index order and
    thresholds in increasing order, and only strictly larger gains replace
    the current best. Returns (feature, threshold, gain) or None.
    """
    n, d = X.shape
    yc = y - y.mean()  # centering keeps the cumulative sums well conditioned
    parent_sse = float(np.dot(yc, yc))
    # rounding floor: an exactly-constant target centers to O(eps*scale)
    # residue, which must not look like signal
    scale = max(1.0, float(np.max(np.abs(y))))
    noise_floor = 16.0 * n * (np.finfo(np.float64).eps * scale) ** 2
    if parent_sse <= noise_floor:
        return None
    min_gain = max(parent_sse * 1e-9, noise_floor)
    best = None
    best_gain = min_gain
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = yc[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        total_sum = csum[-1]
        total_sq = csq[-1]
        for i in range(min_leaf, n - min_leaf + 1):
            if i < 1 or i >= n or xs[i] == xs[i - 1]:
                continue
            left_sum, left_sq = csum[i - 1], csq[i - 1]
            right_sum, right_sq = total_sum - left_sum, total_sq - left_sq
            left_sse = left_sq - left_sum * left_sum / i
            right_sse = right_sq - right_sum * right_sum / (n - i)
            gain = parent_sse - (left_sse + right_sse)
            if gain > best_gain:
                best_gain = gain
                best = (j, float((xs[i] + xs[i - 1]) / 2.0), float(gain))
    return best


def fit_moderator_tree(
    X: np.ndarray, beta_hat: np.ndarray, max_depth: int = 2, min_leaf: int = 10
) -> ModeratorTree:
    """Greedy depth-limited CART on estimated treatment effects.

    Splits are made only when they strictly reduce total squared error and
    both children keep at least min_leaf rows; data smaller than
    2*min_leaf yields a single leaf.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    beta_hat = np.asarray(beta_hat, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != beta_hat.size:
        raise ValueError("X and beta_hat must be aligned")

    def build(idx: np.ndarray, depth: int) -> TreeNode:
        y = beta_hat[idx]
        value = float(y.mean())
        if depth >= max_depth or idx.size < 2 * min_leaf:
            return TreeNode(value=value, n=int(idx.size))
        found = _best_split(X[idx], y, min_leaf)
        if found is None:
            return TreeNode(value=value, n=int(idx.size))
        feature, threshold, _gain = found
        mask = X[idx, feature] <= threshold
        return TreeNode(
            value=value,
            n=int(idx.size),
            feature=feature,
            threshold=threshold,
            left=build(idx[mask], depth + 1),
            right=build(idx[~mask], depth + 1),
        )

    root = build(np.arange(beta_hat.size), 0)
    return ModeratorTree(root=root, max_depth=max_depth, min_leaf=min_leaf)
