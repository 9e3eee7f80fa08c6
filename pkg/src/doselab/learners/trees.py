"""Decision tree, random forest, and gradient-boosted trees.

Trees are exact greedy CART: every (feature, threshold) candidate is scored
by sorting the node's rows per feature and sweeping prefix statistics. Split
search is vectorized across all candidate features of a node, so a fit is a
deterministic function of (data, hyperparameters, seed). Boosting uses
second-order (gradient and hessian) leaf weights with shrinkage and per-tree
column subsampling.
"""

from __future__ import annotations

import numpy as np

# Node arrays: feature == -1 marks a leaf. Children indices refer into the
# same parallel lists. Values are scalars (regression / boosting) or class
# distributions (classification).


def _sorted_columns(Xn, stats):
    """Per-column sort of the node's feature block and aligned target stats."""
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    return xs, [s[order] for s in stats]


def _pick_best(xs, objective, valid, min_leaf):
    """Lowest-objective valid cut; returns (row, col, threshold) or None."""
    n = xs.shape[0]
    k = np.arange(1, n)[:, None]
    valid = valid & (xs[1:] > xs[:-1]) & (k >= min_leaf) & ((n - k) >= min_leaf)
    if not valid.any():
        return None
    obj = np.where(valid, objective, np.inf)
    flat = int(np.argmin(obj))
    i, j = divmod(flat, xs.shape[1])
    return i, j, 0.5 * (xs[i, j] + xs[i + 1, j]), float(obj[i, j])


def _split_sse(Xn, yn, min_leaf):
    """Best SSE split over all columns of the node block."""
    n = Xn.shape[0]
    if n < 2 * min_leaf:
        return None
    xs, (ys,) = _sorted_columns(Xn, [yn])
    csum = np.cumsum(ys, axis=0)
    csq = np.cumsum(ys * ys, axis=0)
    k = np.arange(1, n, dtype=float)[:, None]
    left = csq[:-1] - csum[:-1] ** 2 / k
    rsum = csum[-1] - csum[:-1]
    right = (csq[-1] - csq[:-1]) - rsum**2 / (n - k)
    picked = _pick_best(xs, left + right, np.ones_like(left, dtype=bool), min_leaf)
    if picked is None:
        return None
    i, j, thr, obj = picked
    total = float(csq[-1, 0] - csum[-1, 0] ** 2 / n)
    return total - obj, j, thr


def _split_gini(Xn, onehot_n, min_leaf):
    """Best Gini split over all columns; impurity summed across classes."""
    n = Xn.shape[0]
    if n < 2 * min_leaf:
        return None
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    counts = np.cumsum(onehot_n[order], axis=0)  # n x p x K
    total = counts[-1]
    k = np.arange(1, n, dtype=float)[:, None]
    left = counts[:-1]
    right = total[None, :, :] - left
    imp_left = k - (left**2).sum(axis=2) / k
    imp_right = (n - k) - (right**2).sum(axis=2) / (n - k)
    picked = _pick_best(xs, imp_left + imp_right,
                        np.ones_like(imp_left, dtype=bool), min_leaf)
    if picked is None:
        return None
    i, j, thr, obj = picked
    parent = float(n - (total[0] ** 2).sum() / n)
    return parent - obj, j, thr


def _split_grad_hess(Xn, gn, hn, reg_lambda, gamma, min_leaf):
    """Best second-order boosting gain over all columns of the node block."""
    n = Xn.shape[0]
    if n < 2 * min_leaf:
        return None
    xs, (gs, hs) = _sorted_columns(Xn, [gn, hn])
    cg = np.cumsum(gs, axis=0)
    ch = np.cumsum(hs, axis=0)
    gl, hl = cg[:-1], ch[:-1]
    gr, hr = cg[-1] - gl, ch[-1] - hl
    score = gl**2 / (hl + reg_lambda) + gr**2 / (hr + reg_lambda)
    # maximize the score: feed its negation to the shared minimizer
    picked = _pick_best(xs, -score, np.ones_like(score, dtype=bool), min_leaf)
    if picked is None:
        return None
    i, j, thr, obj = picked
    parent = float(cg[-1, 0] ** 2 / (ch[-1, 0] + reg_lambda))
    return 0.5 * (-obj - parent) - gamma, j, thr


class _TreeBuilder:
    def __init__(self, max_depth, min_samples_leaf, min_samples_split, max_features, rng):
        self.max_depth = np.inf if max_depth is None else max_depth
        self.min_leaf = min_samples_leaf
        self.min_split = min_samples_split
        self.max_features = max_features
        self.rng = rng
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.values = []

    def _new_node(self):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.values.append(None)
        return len(self.feature) - 1

    def _candidate_features(self, p):
        if self.max_features >= p:
            return np.arange(p)
        # sorted so gain ties resolve toward the lowest feature index
        return np.sort(self.rng.choice(p, size=self.max_features, replace=False))

    def grow(self, X, idx, find_split, leaf_value):
        """Build the tree; split search and leaf values are injected."""
        root = self._new_node()
        stack = [(root, idx, 0)]
        while stack:
            node, node_idx, depth = stack.pop()
            n = len(node_idx)
            best = None
            if depth < self.max_depth and n >= self.min_split:
                feats = self._candidate_features(X.shape[1])
                best = find_split(X[np.ix_(node_idx, feats)], node_idx)
            if best is None or best[0] <= 0.0:
                self.values[node] = leaf_value(node_idx)
                continue
            _, local_j, thr = best
            j = int(feats[local_j])
            self.feature[node] = j
            self.threshold[node] = float(thr)
            go_left = X[node_idx, j] <= thr
            left_idx = node_idx[go_left]
            right_idx = node_idx[~go_left]
            left = self._new_node()
            right = self._new_node()
            self.left[node] = left
            self.right[node] = right
            stack.append((right, right_idx, depth + 1))
            stack.append((left, left_idx, depth + 1))
        return self

    def to_params(self):
        # internal nodes carry no value; store zero placeholders shaped like
        # the leaf values so the value table stays rectangular
        leaf = next(v for v in self.values if v is not None)
        if isinstance(leaf, np.ndarray):
            placeholder = [0.0] * len(leaf)
            values = [v.tolist() if v is not None else placeholder for v in self.values]
        else:
            values = [float(v) if v is not None else 0.0 for v in self.values]
        return {
            "feature": [int(f) for f in self.feature],
            "threshold": [float(t) for t in self.threshold],
            "left": [int(v) for v in self.left],
            "right": [int(v) for v in self.right],
            "value": values,
        }


def tree_predict_raw(params, X):
    """Vectorized root-to-leaf routing; returns the leaf node per row."""
    feature = np.asarray(params["feature"])
    threshold = np.asarray(params["threshold"])
    left = np.asarray(params["left"])
    right = np.asarray(params["right"])
    node = np.zeros(len(X), dtype=int)
    while True:
        f = feature[node]
        active = f >= 0
        if not active.any():
            break
        rows = np.nonzero(active)[0]
        xvals = X[rows, f[rows]]
        goes_right = xvals > threshold[node[rows]]
        node[rows] = np.where(goes_right, right[node[rows]], left[node[rows]])
    return node


def tree_predict_regression(params, X):
    node = tree_predict_raw(params, X)
    return np.asarray(params["value"], dtype=float)[node]


def tree_predict_proba(params, X):
    node = tree_predict_raw(params, X)
    return np.asarray(params["value"], dtype=float)[node]


# Decision tree ---------------------------------------------------------------

def fit_tree_regression(X, y, max_depth=None, min_samples_leaf=1, min_samples_split=2,
                        max_features=None, rng=None):
    p = X.shape[1]
    mf = p if max_features is None else max_features
    builder = _TreeBuilder(max_depth, min_samples_leaf, min_samples_split, mf,
                           rng or np.random.default_rng(0))

    def find_split(Xn, idx):
        return _split_sse(Xn, y[idx], min_samples_leaf)

    def leaf_value(idx):
        return float(np.mean(y[idx]))

    builder.grow(X, np.arange(len(X)), find_split, leaf_value)
    return builder.to_params()


def fit_tree_classification(X, y_idx, n_classes, max_depth=None, min_samples_leaf=1,
                            min_samples_split=2, max_features=None, rng=None):
    p = X.shape[1]
    mf = p if max_features is None else max_features
    onehot = np.zeros((len(y_idx), n_classes))
    onehot[np.arange(len(y_idx)), y_idx] = 1.0
    builder = _TreeBuilder(max_depth, min_samples_leaf, min_samples_split, mf,
                           rng or np.random.default_rng(0))

    def find_split(Xn, idx):
        return _split_gini(Xn, onehot[idx], min_samples_leaf)

    def leaf_value(idx):
        return onehot[idx].sum(axis=0) / len(idx)

    builder.grow(X, np.arange(len(X)), find_split, leaf_value)
    return builder.to_params()


# Random forest ---------------------------------------------------------------

def fit_forest(X, y, task, n_classes, seed, n_trees=100, max_depth=12,
               min_samples_leaf=2, max_features=0.7, bootstrap=True):
    p = X.shape[1]
    mf = p if max_features is None else max(1, int(round(max_features * p)))
    trees = []
    n = len(X)
    y_idx = y.astype(int) if task == "classification" else None
    for t in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t,)))
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        Xb = X[idx]
        if task == "classification":
            params = fit_tree_classification(Xb, y_idx[idx], n_classes,
                                             max_depth=max_depth,
                                             min_samples_leaf=min_samples_leaf,
                                             max_features=mf, rng=rng)
        else:
            params = fit_tree_regression(Xb, y[idx], max_depth=max_depth,
                                         min_samples_leaf=min_samples_leaf,
                                         max_features=mf, rng=rng)
        trees.append(params)
    return {"trees": trees}


def forest_member_predictions(params, X, task):
    """Stacked per-tree predictions: (n_trees, m) or (n_trees, m, K)."""
    fn = tree_predict_proba if task == "classification" else tree_predict_regression
    return np.stack([fn(t, X) for t in params["trees"]])


def forest_predict(params, X, task):
    members = forest_member_predictions(params, X, task)
    # sequential elementwise accumulation: a strided mean(axis=0) reduction
    # would round differently for different batch widths
    acc = members[0].copy()
    for member in members[1:]:
        acc += member
    return acc / len(members)


# Gradient-boosted trees --------------------------------------------------------

def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_loss(prob, y_idx):
    eps = 1e-12
    return float(-np.mean(np.log(np.clip(prob[np.arange(len(y_idx)), y_idx], eps, None))))


def fit_gbt(X, y, task, n_classes, seed, X_val=None, y_val=None, n_rounds=150,
            learning_rate=0.1, max_depth=3, reg_lambda=1.0, gamma=0.0,
            colsample=0.8, min_samples_leaf=1):
    """Second-order boosting: squared loss (regression) or softmax (classification).

    Returns params plus a per-round loss curve on the fit data and, when a
    validation set is supplied, on that as well.
    """
    n, p = X.shape
    rounds = []
    curve = []
    mf = max(1, int(round(colsample * p)))

    def boost_tree(g, h, rng):
        builder = _TreeBuilder(max_depth, min_samples_leaf, 2, mf, rng)

        def find_split(Xn, idx):
            return _split_grad_hess(Xn, g[idx], h[idx], reg_lambda, gamma,
                                    min_samples_leaf)

        def leaf_value(idx):
            return float(-g[idx].sum() / (h[idx].sum() + reg_lambda) * learning_rate)

        return builder.grow(X, np.arange(n), find_split, leaf_value).to_params()

    if task == "regression":
        base = float(np.mean(y))
        pred = np.full(n, base)
        pred_val = None if X_val is None else np.full(len(X_val), base)
        for r in range(n_rounds):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))
            params = boost_tree(pred - y, np.ones(n), rng)
            rounds.append([params])
            pred = pred + tree_predict_regression(params, X)
            train_loss = float(np.mean((pred - y) ** 2))
            if X_val is not None:
                pred_val = pred_val + tree_predict_regression(params, X_val)
                val_loss = float(np.mean((pred_val - y_val) ** 2))
            else:
                val_loss = train_loss
            curve.append((r + 1, train_loss, val_loss))
        return {"base": base, "rounds": rounds, "n_classes": 0}, curve

    y_idx = y.astype(int)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y_idx] = 1.0
    # base margins are the log class priors
    prior = np.clip(onehot.mean(axis=0), 1e-12, None)
    base_margin = np.log(prior).tolist()
    margins = np.tile(base_margin, (n, 1))
    margins_val = None if X_val is None else np.tile(base_margin, (len(X_val), 1))
    for r in range(n_rounds):
        prob = _softmax(margins)
        round_trees = []
        for k in range(n_classes):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r, k)))
            g = prob[:, k] - onehot[:, k]
            h = np.clip(prob[:, k] * (1.0 - prob[:, k]), 1e-6, None)
            params = boost_tree(g, h, rng)
            round_trees.append(params)
            margins[:, k] += tree_predict_regression(params, X)
            if X_val is not None:
                margins_val[:, k] += tree_predict_regression(params, X_val)
        rounds.append(round_trees)
        train_loss = _log_loss(_softmax(margins), y_idx)
        val_loss = (_log_loss(_softmax(margins_val), y_val.astype(int))
                    if X_val is not None else train_loss)
        curve.append((r + 1, train_loss, val_loss))
    return {"base": base_margin, "rounds": rounds, "n_classes": n_classes}, curve


def gbt_predict(params, X, task):
    if task == "regression":
        pred = np.full(len(X), float(params["base"]))
        for round_trees in params["rounds"]:
            pred += tree_predict_regression(round_trees[0], X)
        return pred
    n_classes = params["n_classes"]
    margins = np.tile(np.asarray(params["base"], dtype=float), (len(X), 1))
    for round_trees in params["rounds"]:
        for k in range(n_classes):
            margins[:, k] += tree_predict_regression(round_trees[k], X)
    return _softmax(margins)
