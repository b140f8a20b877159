"""Histogram-based decision trees: a shared grower plus the CART learner.

Features are pre-binned (exact midpoints when a column has few distinct
values, quantile bins otherwise), so node split search reduces to prefix
sums over per-bin aggregates of (grad_sum, hess_sum, count). The boosting
module reuses the same grower with a different gain/leaf rule.
"""

from __future__ import annotations

import numpy as np

from .base import Learner, register_kind

MAX_BINS = 256
MIN_GAIN = 1e-12


def make_bin_edges(X: np.ndarray, max_bins: int = MAX_BINS) -> list[np.ndarray]:
    """Per-feature cut points. With <= max_bins distinct values the edges are
    the midpoints between consecutive distinct values, which makes binned
    splits identical to exact splits."""
    edges = []
    for j in range(X.shape[1]):
        u = np.unique(X[:, j])
        if u.size <= 1:
            edges.append(np.empty(0))
        elif u.size <= max_bins:
            edges.append((u[:-1] + u[1:]) / 2.0)
        else:
            qs = np.quantile(X[:, j], np.linspace(0.0, 1.0, max_bins + 1)[1:-1])
            edges.append(np.unique(qs))
    return edges


def bin_matrix(X: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    binned = np.empty(X.shape, dtype=np.int32)
    for j, e in enumerate(edges):
        binned[:, j] = np.searchsorted(e, X[:, j], side="left")
    return binned


def grow_tree(
    binned: np.ndarray,
    edges: list[np.ndarray],
    grad: np.ndarray,
    hess: np.ndarray,
    max_depth: int | None,
    min_leaf: int,
    gain_fn,
    leaf_fn,
) -> dict:
    """Greedy depth-limited growth. Split candidates are bin boundaries; the
    best (gain, feature, boundary) is chosen with first-wins tie-breaking,
    which makes the tree independent of row order."""

    def best_split(rows):
        g = grad[rows]
        h = hess[rows]
        g_tot, h_tot, c_tot = g.sum(), h.sum(), rows.size
        best = None
        for j, e in enumerate(edges):
            if e.size == 0:
                continue
            b = binned[rows, j]
            nbins = e.size + 1
            cg = np.cumsum(np.bincount(b, weights=g, minlength=nbins))[:-1]
            ch = np.cumsum(np.bincount(b, weights=h, minlength=nbins))[:-1]
            cc = np.cumsum(np.bincount(b, minlength=nbins))[:-1]
            ok = (cc >= min_leaf) & (c_tot - cc >= min_leaf)
            if not ok.any():
                continue
            gains = gain_fn(cg, ch, cc, g_tot - cg, h_tot - ch, c_tot - cc)
            gains = np.where(ok, gains, -np.inf)
            t = int(np.argmax(gains))
            if gains[t] > MIN_GAIN and (best is None or gains[t] > best[0]):
                best = (float(gains[t]), j, t)
        return best

    def build(rows, depth):
        if (max_depth is not None and depth >= max_depth) or rows.size < 2 * min_leaf:
            return {"value": leaf_fn(grad[rows].sum(), hess[rows].sum(), rows.size)}
        found = best_split(rows)
        if found is None:
            return {"value": leaf_fn(grad[rows].sum(), hess[rows].sum(), rows.size)}
        _, j, t = found
        go_left = binned[rows, j] <= t
        return {
            "feature": j,
            "threshold": float(edges[j][t]),
            "left": build(rows[go_left], depth + 1),
            "right": build(rows[~go_left], depth + 1),
        }

    return build(np.arange(binned.shape[0]), 0)


def tree_predict(node: dict, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])

    def walk(nd, rows):
        if "value" in nd:
            out[rows] = nd["value"]
            return
        go_left = X[rows, nd["feature"]] <= nd["threshold"]
        walk(nd["left"], rows[go_left])
        walk(nd["right"], rows[~go_left])

    walk(node, np.arange(X.shape[0]))
    return out


def _gini_gain(gl, hl, cl, gr, hr, cr):
    # grad carries the class-1 count; impurity(node) = c * gini(node)
    def raw(p, c):
        return c - (p * p + (c - p) * (c - p)) / c

    parent = raw(gl + gr, cl + cr)
    return parent - raw(gl, cl) - raw(gr, cr)


@register_kind
class CartLearner(Learner):
    """Single classification tree: Gini impurity splits, Laplace-smoothed
    (+1/+2) leaf probabilities."""

    kind = "cart"
    default_grid = [{"max_depth": d, "min_leaf": 20} for d in (3, 5, 8)]

    def _fit(self, X, y, params, rng):
        max_depth = params.get("max_depth", 5)
        min_leaf = int(params.get("min_leaf", 20))
        edges = make_bin_edges(X, int(params.get("max_bins", MAX_BINS)))
        binned = bin_matrix(X, edges)
        tree = grow_tree(
            binned,
            edges,
            grad=y.astype(float),
            hess=np.ones_like(y, dtype=float),
            max_depth=max_depth,
            min_leaf=min_leaf,
            gain_fn=_gini_gain,
            leaf_fn=lambda g, h, c: (g + 1.0) / (c + 2.0),
        )
        return {"tree": tree}

    @staticmethod
    def _predict(payload, X):
        return tree_predict(payload["tree"], X)
