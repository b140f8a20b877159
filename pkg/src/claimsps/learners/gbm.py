"""Gradient boosting for binary outcomes: logistic loss, depth-limited
regression trees on the residuals, Newton-step leaf values.

Boosting is deterministic (no row/feature subsampling). Each round is
backtracked if it would increase the training NLL, so the training loss is
nonincreasing in the boosting round by construction; with the damped leaf
steps the backtracking almost never triggers.
"""

from __future__ import annotations

import numpy as np

from .base import Learner, register_kind
from .glm import sigmoid
from ..metrics import nll
from .trees import MAX_BINS, bin_matrix, grow_tree, make_bin_edges, tree_predict

LEAF_CLIP = 4.0
MIN_LEAF = 10


def _variance_gain(gl, hl, cl, gr, hr, cr):
    g_tot, c_tot = gl + gr, cl + cr
    return gl * gl / cl + gr * gr / cr - g_tot * g_tot / c_tot


def _newton_leaf(g, h, c):
    # one Newton step on the leaf offset; clipped so near-saturated leaves
    # cannot blow up the ensemble
    return float(np.clip(g / (h + 1e-12), -LEAF_CLIP, LEAF_CLIP))


@register_kind
class GradientBoostingLearner(Learner):
    kind = "gbm"
    default_grid = [
        {"n_trees": t, "max_depth": d, "shrinkage": s}
        for t in (100, 300)
        for d in (2, 3)
        for s in (0.05, 0.1)
    ]

    def _fit(self, X, y, params, rng):
        n_trees = int(params.get("n_trees", 100))
        max_depth = int(params.get("max_depth", 2))
        shrinkage = float(params.get("shrinkage", 0.1))
        min_leaf = int(params.get("min_leaf", MIN_LEAF))

        edges = make_bin_edges(X, int(params.get("max_bins", MAX_BINS)))
        binned = bin_matrix(X, edges)

        ybar = float(np.clip(y.mean(), 1e-12, 1.0 - 1e-12))
        f0 = float(np.log(ybar / (1.0 - ybar)))
        raw = np.full(X.shape[0], f0)
        current = nll(sigmoid(raw), y)

        trees = []
        scales = []
        for _ in range(n_trees):
            p = sigmoid(raw)
            tree = grow_tree(
                binned,
                edges,
                grad=y - p,
                hess=p * (1.0 - p),
                max_depth=max_depth,
                min_leaf=min_leaf,
                gain_fn=_variance_gain,
                leaf_fn=_newton_leaf,
            )
            contrib = shrinkage * _predict_binned(tree, binned, edges)
            scale = 1.0
            new = nll(sigmoid(raw + contrib), y)
            while new > current and scale > 1e-9:
                scale *= 0.5
                new = nll(sigmoid(raw + scale * contrib), y)
            if new > current:
                break  # residuals carry no usable signal; stop early
            raw = raw + scale * contrib
            current = new
            trees.append(tree)
            scales.append(scale * shrinkage)
        return {"f0": f0, "trees": trees, "scales": scales}

    @staticmethod
    def _predict(payload, X):
        raw = np.full(X.shape[0], payload["f0"])
        for tree, scale in zip(payload["trees"], payload["scales"]):
            raw += scale * _tree_predict_raw(tree, X)
        return sigmoid(raw)


def _tree_predict_raw(node, X):
    from .trees import tree_predict

    return tree_predict(node, X)


def _predict_binned(node, binned, edges):
    """Evaluate a freshly grown tree on the training rows via their bins,
    avoiding a float comparison pass."""
    out = np.empty(binned.shape[0])

    def walk(nd, rows):
        if "value" in nd:
            out[rows] = nd["value"]
            return
        j = nd["feature"]
        t = int(np.searchsorted(edges[j], nd["threshold"], side="left"))
        go_left = binned[rows, j] <= t
        walk(nd["left"], rows[go_left])
        walk(nd["right"], rows[~go_left])

    walk(node, np.arange(binned.shape[0]))
    return out
