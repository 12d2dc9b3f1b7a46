"""Estimands and evaluation: the IPW estimator of the average treatment
effect, and the per-trial / aggregated metrics reported by the benchmark.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


def ipw_ate(Y: np.ndarray, Z: np.ndarray, p: np.ndarray) -> float:
    """Inverse-propensity-weighted ATE: mean of Y*Z/p - Y*(1-Z)/(1-p).

    p must lie strictly inside (0, 1). With no controls the estimate
    degenerates to mean(Y*Z/p), which is valid but high-variance.
    """
    Y = np.asarray(Y, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if not (Y.shape == Z.shape == p.shape):
        raise ValueError("Y, Z, p must be aligned")
    if not np.all((Z == 0.0) | (Z == 1.0)):
        raise ValueError("Z must be binary")
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("propensities must lie strictly inside (0, 1)")
    return float(np.mean(Y * Z / p - Y * (1.0 - Z) / (1.0 - p)))


def pearson_corr(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation coefficient; raises on zero-variance input."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two aligned vectors of length >= 2")
    ac = a - a.mean()
    bc = b - b.mean()
    denom = np.sqrt((ac * ac).sum() * (bc * bc).sum())
    if denom == 0.0:
        raise ValueError("zero-variance input")
    return float((ac * bc).sum() / denom)


@dataclass(frozen=True)
class TrialMetrics:
    """One trial's evaluation of an estimated CATE against the truth.

    correlation is None when the estimate is constant (undefined Pearson).
    """

    mean_beta_hat: float
    true_ate: float
    true_mean_alpha: float
    runtime_seconds: float
    correlation: float | None
    rmse: float
    abs_bias: float


def trial_metrics(
    beta_hat: np.ndarray,
    beta_true: np.ndarray,
    alpha_true: np.ndarray,
    runtime: float,
) -> TrialMetrics:
    """Evaluate an estimated CATE vector against the known truth."""
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    beta_true = np.asarray(beta_true, dtype=np.float64)
    alpha_true = np.asarray(alpha_true, dtype=np.float64)
    if not (beta_hat.shape == beta_true.shape == alpha_true.shape):
        raise ValueError("metric inputs must be aligned")
    err = beta_hat - beta_true
    try:
        corr = pearson_corr(beta_hat, beta_true)
    except ValueError:
        corr = None
    return TrialMetrics(
        mean_beta_hat=float(beta_hat.mean()),
        true_ate=float(beta_true.mean()),
        true_mean_alpha=float(alpha_true.mean()),
        runtime_seconds=float(runtime),
        correlation=corr,
        rmse=float(np.sqrt(np.mean(err**2))),
        abs_bias=float(abs(err.mean())),
    )


@dataclass(frozen=True)
class ResultRow:
    """Trial-averaged metrics for one (method, n, regime) cell."""

    method: str
    n: int
    regime: str
    trials: int
    mean_beta_hat: float
    true_ate: float
    true_mean_alpha: float
    mean_runtime_s: float
    mean_correlation: float | None
    mean_rmse: float
    mean_abs_bias: float


@dataclass(frozen=True)
class ResultsTable:
    rows: tuple[ResultRow, ...]

    def row(self, method: str, n: int, regime: str) -> ResultRow:
        for r in self.rows:
            if (r.method, r.n, r.regime) == (method, n, regime):
                return r
        raise KeyError(f"no row for {(method, n, regime)}")


def aggregate_results(
    trials: list[TrialMetrics], method: str, n: int, regime: str
) -> ResultRow:
    """Arithmetic mean of every metric across completed trials.

    Trials with an undefined correlation are excluded from the correlation
    average only; the exclusion count is logged.
    """
    if not trials:
        raise ValueError("no trials to aggregate")
    corrs = [t.correlation for t in trials if t.correlation is not None]
    n_undefined = len(trials) - len(corrs)
    if n_undefined:
        log.info(
            "cell (%s, n=%d, %s): %d trial(s) had undefined correlation, excluded",
            method, n, regime, n_undefined,
        )
    return ResultRow(
        method=method,
        n=n,
        regime=regime,
        trials=len(trials),
        mean_beta_hat=float(np.mean([t.mean_beta_hat for t in trials])),
        true_ate=float(np.mean([t.true_ate for t in trials])),
        true_mean_alpha=float(np.mean([t.true_mean_alpha for t in trials])),
        mean_runtime_s=float(np.mean([t.runtime_seconds for t in trials])),
        mean_correlation=float(np.mean(corrs)) if corrs else None,
        mean_rmse=float(np.mean([t.rmse for t in trials])),
        mean_abs_bias=float(np.mean([t.abs_bias for t in trials])),
    )


RESULTS_CSV_COLUMNS = (
    "method",
    "n",
    "regime",
    "trials",
    "mean_beta_hat",
    "true_ate",
    "true_mean_alpha",
    "mean_runtime_s",
    "mean_correlation",
    "mean_rmse",
    "mean_abs_bias",
)


def write_results_csv(table: ResultsTable, path) -> None:
    """Emit the aggregated table; float cells use repr so the file is
    bit-stable for identical inputs and round-trips exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULTS_CSV_COLUMNS)
        for r in table.rows:
            writer.writerow(
                [
                    r.method,
                    r.n,
                    r.regime,
                    r.trials,
                    repr(r.mean_beta_hat),
                    repr(r.true_ate),
                    repr(r.true_mean_alpha),
                    repr(r.mean_runtime_s),
                    "" if r.mean_correlation is None else repr(r.mean_correlation),
                    repr(r.mean_rmse),
                    repr(r.mean_abs_bias),
                ]
            )


def read_results_csv(path) -> ResultsTable:
    """Inverse of write_results_csv."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != RESULTS_CSV_COLUMNS:
            raise ValueError(f"unexpected columns {header}")
        rows = []
        for rec in reader:
            rows.append(
                ResultRow(
                    method=rec[0],
                    n=int(rec[1]),
                    regime=rec[2],
                    trials=int(rec[3]),
                    mean_beta_hat=float(rec[4]),
                    true_ate=float(rec[5]),
                    true_mean_alpha=float(rec[6]),
                    mean_runtime_s=float(rec[7]),
                    mean_correlation=None if rec[8] == "" else float(rec[8]),
                    mean_rmse=float(rec[9]),
                    mean_abs_bias=float(rec[10]),
                )
            )
    return ResultsTable(tuple(rows))
