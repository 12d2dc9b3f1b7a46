"""Shared test oracles."""

import dataclasses

import numpy as np

from deepcate import nn


def with_param(net, which, li, idx, delta):
    """Copy of net with one weight/bias entry shifted by delta."""
    weights = [w.copy() for w in net.weights]
    biases = [b.copy() for b in net.biases]
    if which == "w":
        weights[li][idx] += delta
    else:
        biases[li][idx] += delta
    return dataclasses.replace(net, weights=tuple(weights), biases=tuple(biases))


def numerical_grads(net, X, target, kind, training=False, dropout_seed=None, h=1e-6):
    """Central finite differences of the scalar loss over every parameter."""

    def loss_of(candidate):
        out, _ = nn.forward(candidate, X, training=training, dropout_seed=dropout_seed)
        return nn.compute_loss(out, target, kind)

    g_w, g_b = [], []
    for li in range(len(net.layers)):
        gw = np.zeros_like(net.weights[li])
        for idx in np.ndindex(*gw.shape):
            up = loss_of(with_param(net, "w", li, idx, h))
            down = loss_of(with_param(net, "w", li, idx, -h))
            gw[idx] = (up - down) / (2 * h)
        g_w.append(gw)
        gb = np.zeros_like(net.biases[li])
        for idx in np.ndindex(*gb.shape):
            up = loss_of(with_param(net, "b", li, idx, h))
            down = loss_of(with_param(net, "b", li, idx, -h))
            gb[idx] = (up - down) / (2 * h)
        g_b.append(gb)
    return nn.Gradients(tuple(g_w), tuple(g_b))


def max_scaled_error(analytic, numeric):
    """Worst |a - b| / max(1, |a|, |b|) over all parameter gradients."""
    worst = 0.0
    for a, b in zip(
        (*analytic.weights, *analytic.biases), (*numeric.weights, *numeric.biases)
    ):
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        worst = max(worst, float(np.max(np.abs(a - b) / denom)))
    return worst


def brute_best_split(X, y, min_leaf):
    """Exhaustive best axis-aligned split by squared-error reduction.

    Scans every feature in index order and every midpoint threshold in
    increasing order, keeping the first strictly-best candidate, i.e. the
    same deterministic tie-breaking the tree promises. Returns
    (feature, threshold, sse_after) or None.
    """
    n, d = X.shape
    best = None
    best_sse = np.inf
    for j in range(d):
        values = np.unique(X[:, j])
        for lo, hi in zip(values, values[1:]):
            thr = (lo + hi) / 2.0
            mask = X[:, j] <= thr
            nl = int(mask.sum())
            if nl < min_leaf or n - nl < min_leaf:
                continue
            yl, yr = y[mask], y[~mask]
            sse = ((yl - yl.mean()) ** 2).sum() + ((yr - yr.mean()) ** 2).sum()
            if sse < best_sse - 1e-12:
                best_sse = sse
                best = (j, thr, sse)
    return best
